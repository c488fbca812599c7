//! Multiple-arrival multiple-deadline (MAMD) differentiated energy services.
//!
//! A load asks for `r` slots of unit power anywhere between two breakpoints
//! `a < d` of a time partition. This crate decides whether a supply profile
//! can serve a collection of such loads (structure tensor and max-flow),
//! builds feasible schedules or min-cut certificates, clears a forward market
//! for the services through LP duality, and runs the benchmark comparison
//! experiment that measures how much extra energy per-segment duration-only
//! services would need.

pub mod cli;
pub mod error;
pub mod flow;
pub mod lp;
pub mod market;
pub mod model;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{
    canonicalize_supply, load_instance, serialize_instance, DemandCollection, Instance, Load,
    ServiceSpec, SupplyProfile, TimePartition,
};
