use thiserror::Error;

use crate::flow::CutWitness;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid instance: {0}")]
    Validation(String),

    /// Supply is not nonincreasing inside a segment.
    #[error("supply is not canonical: slot {slot} exceeds slot {prev} inside segment {segment}")]
    NotCanonical {
        segment: usize,
        prev: usize,
        slot: usize,
    },

    #[error("integer input required: {0}")]
    NonIntegerInput(String),

    #[error("supply is not adequate: cut capacity {} is below the required {required}", witness.capacity)]
    NotAdequate { witness: CutWitness, required: u64 },

    #[error("structure tensor has {entries} entries, limit is {limit}")]
    TensorTooLarge { entries: u128, limit: usize },

    #[error("LP solver failure: {0}")]
    SolverFailure(String),

    #[error("LP model infeasible: {0}")]
    InfeasibleModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;
