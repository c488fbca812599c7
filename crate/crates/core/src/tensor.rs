//! The nu-th order structure tensor and the adequacy test built on it.
//!
//! Entry `W[k]` is the supply tail (supply left after removing the `k_kappa`
//! largest slots of each segment) minus the demand tail
//! `sum_i l_i [r_i - sum_{kappa in (a_i, d_i]} k_kappa]^+`. The supply is
//! adequate iff every entry is nonnegative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{canonicalize_supply, DemandCollection, SupplyProfile, TimePartition};

/// Largest dense tensor we are willing to allocate.
pub const MAX_TENSOR_ENTRIES: usize = 10_000_000;

/// Absolute tolerance for verdicts on real-valued instances.
pub const REAL_TOLERANCE: f64 = 1e-9;

/// Tail index `(k_1, ..., k_nu)` with `0 <= k_kappa <= n_kappa - n_{kappa-1}`.
pub type TailIndex = Vec<usize>;

/// Row-major layout of a dense array over all tail indices of a partition.
///
/// Flat order is lexicographic order of the tail index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorShape {
    dims: Vec<usize>,
}

impl TensorShape {
    pub fn for_partition(partition: &TimePartition) -> Result<Self> {
        let dims: Vec<usize> = partition.segment_lens().iter().map(|l| l + 1).collect();
        let entries = dims.iter().map(|&d| d as u128).product::<u128>();
        if entries > MAX_TENSOR_ENTRIES as u128 {
            return Err(Error::TensorTooLarge {
                entries,
                limit: MAX_TENSOR_ENTRIES,
            });
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, k: &[usize]) -> usize {
        k.iter()
            .zip(&self.dims)
            .fold(0, |acc, (&ki, &di)| acc * di + ki)
    }

    pub fn index(&self, mut flat: usize) -> TailIndex {
        let mut k = vec![0; self.dims.len()];
        for (ki, &di) in k.iter_mut().zip(&self.dims).rev() {
            *ki = flat % di;
            flat /= di;
        }
        k
    }

    /// Visits every tail index in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[usize])) {
        let mut k = vec![0; self.dims.len()];
        for flat in 0..self.len() {
            f(flat, &k);
            for (ki, &di) in k.iter_mut().zip(&self.dims).rev() {
                *ki += 1;
                if *ki < di {
                    break;
                }
                *ki = 0;
            }
        }
    }

    /// Row-major stride of coordinate `c`.
    fn stride(&self, c: usize) -> usize {
        self.dims[c + 1..].iter().product()
    }
}

/// Supply left after serving the `k_kappa` largest slots of each segment.
///
/// Assumes `supply` is canonical.
pub fn supply_tail(supply: &SupplyProfile, partition: &TimePartition, k: &[usize]) -> f64 {
    let h = supply.units();
    (1..=partition.segments())
        .map(|kappa| {
            let slots = partition.segment_slots(kappa);
            h[slots.start + k[kappa - 1]..slots.end].iter().sum::<f64>()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureTensor {
    pub shape: TensorShape,
    pub values: Vec<f64>,
}

impl StructureTensor {
    pub fn get(&self, k: &[usize]) -> f64 {
        self.values[self.shape.flat(k)]
    }

    /// Smallest entry and the lexicographically smallest index attaining it.
    pub fn min_entry(&self) -> (f64, TailIndex) {
        let (flat, value) =
            self.values
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (i, v)| {
                        if v < best.1 {
                            (i, v)
                        } else {
                            best
                        }
                    },
                );
        (value, self.shape.index(flat))
    }
}

/// Evaluates the structure tensor by the backward recursion.
///
/// Starting from the all-max index (value 0), each entry is obtained from the
/// neighbour one step up in its first non-maximal coordinate `j`: add the
/// supply of the slot being released and subtract the weight of every load
/// with `a_i < j <= d_i` whose duration still covers the served prefix.
/// Cost is `O(m * prod(n_kappa - n_{kappa-1} + 1))`.
pub fn compute_tensor(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    partition: &TimePartition,
) -> Result<StructureTensor> {
    supply.check_len(partition)?;
    if let Some(err) = supply.first_non_canonical(partition) {
        return Err(err);
    }
    let shape = TensorShape::for_partition(partition)?;
    let nu = partition.segments();
    if let Some((i, l)) = demand
        .loads
        .iter()
        .enumerate()
        .find(|(_, l)| l.spec.a >= l.spec.d || l.spec.d > nu)
    {
        return Err(Error::Validation(format!(
            "load {i}: service ({}, {}, {}) needs 0 <= a < d <= {nu}",
            l.spec.r, l.spec.a, l.spec.d
        )));
    }
    let lens = partition.segment_lens();
    let strides: Vec<usize> = (0..nu).map(|c| shape.stride(c)).collect();
    let h = supply.units();

    // Loads grouped by segment they can use: segment c (0-based) is in (a, d].
    let mut by_segment: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); nu];
    for load in &demand.loads {
        let s = load.spec;
        for seg in by_segment.iter_mut().take(s.d).skip(s.a) {
            seg.push((s.r, s.a, s.d, load.weight));
        }
    }

    let total = shape.len();
    let mut values = vec![0.0; total];
    // All-max index: supply tail empty, loads longer than their window remain short.
    values[total - 1] = -demand
        .loads
        .iter()
        .map(|l| {
            l.spec
                .r
                .saturating_sub(partition.window(l.spec.a, l.spec.d).len()) as f64
                * l.weight
        })
        .sum::<f64>();
    let mut k = shape.index(total - 1);
    // prefix[c] = k_1 + ... + k_c
    let mut prefix = vec![0usize; nu + 1];
    for flat in (0..total).rev() {
        if flat + 1 < total {
            // decrement k in row-major order
            for c in (0..nu).rev() {
                if k[c] > 0 {
                    k[c] -= 1;
                    break;
                }
                k[c] = lens[c];
            }
        }
        let Some(j) = (0..nu).find(|&c| k[c] < lens[c]) else {
            continue;
        };
        for c in 0..nu {
            prefix[c + 1] = prefix[c] + k[c];
        }
        // neighbour has k_j + 1; window sums there exceed ours by one
        let released = h[partition.breakpoints()[j] + k[j]];
        let lost: f64 = by_segment[j]
            .iter()
            .filter(|&&(r, a, d, _)| r > prefix[d] - prefix[a])
            .map(|&(_, _, _, w)| w)
            .sum();
        values[flat] = values[flat + strides[j]] + released - lost;
    }
    Ok(StructureTensor { shape, values })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyReport {
    pub adequate: bool,
    pub min_value: f64,
    pub witness: TailIndex,
    /// Total supply minus total weighted demand.
    pub surplus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdequacyOptions {
    pub canonicalize: bool,
    /// `None` picks 0 for integer instances and [`REAL_TOLERANCE`] otherwise.
    pub tolerance: Option<f64>,
}

impl Default for AdequacyOptions {
    fn default() -> Self {
        Self {
            canonicalize: true,
            tolerance: None,
        }
    }
}

pub fn check_adequacy(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    partition: &TimePartition,
) -> Result<AdequacyReport> {
    check_adequacy_with(supply, demand, partition, AdequacyOptions::default())
}

pub fn check_adequacy_with(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    partition: &TimePartition,
    opts: AdequacyOptions,
) -> Result<AdequacyReport> {
    supply.check_len(partition)?;
    let tensor = if opts.canonicalize {
        compute_tensor(&canonicalize_supply(supply, partition), demand, partition)?
    } else {
        compute_tensor(supply, demand, partition)?
    };
    let tol = opts.tolerance.unwrap_or_else(|| {
        if supply.is_integral() && demand.is_integral() {
            0.0
        } else {
            REAL_TOLERANCE
        }
    });
    let (min_value, witness) = tensor.min_entry();
    Ok(AdequacyReport {
        adequate: min_value >= -tol,
        min_value,
        witness,
        surplus: supply.total() - demand.total(),
    })
}

/// Classic single-deadline test: `W_k = sum_{j>k} h_j - sum_i [r_i - k]^+ >= 0`
/// for `0 <= k < n`, evaluated by `W_{k-1} = W_k + h_k - #{i : r_i >= k}`.
///
/// `supply` is sorted into nonincreasing order first; a duration longer than
/// the horizon is never satisfiable.
pub fn gale_ryser_check(supply: &[u64], durations: &[u64]) -> bool {
    let n = supply.len();
    if durations.iter().any(|&r| r as usize > n) {
        return false;
    }
    let mut h = supply.to_vec();
    h.sort_unstable_by(|x, y| y.cmp(x));
    // count[k] = #{i : r_i >= k}
    let mut at_least = vec![0i64; n + 2];
    for &r in durations {
        at_least[r as usize] += 1;
    }
    for k in (0..=n).rev() {
        at_least[k] += at_least[k + 1];
    }
    let mut w: i64 = 0;
    for k in (1..=n).rev() {
        w += h[k - 1] as i64 - at_least[k];
        if w < 0 {
            return false;
        }
    }
    true
}
