//! Benchmark comparison experiment.
//!
//! Loads ask for MAMD services; the supply is built to be exactly adequate for
//! them. Each load then swaps its service for a random combination of
//! per-segment duration-only services, and the per-segment instances are
//! topped up with the least extra energy that makes them adequate. GNR is
//! that extra energy divided by the number of loads.
//!
//! # Random streams
//!
//! All randomness comes from `ChaCha8Rng` (rand_chacha 0.3). Trial `t` of a
//! run with seed `s` uses `ChaCha8Rng::seed_from_u64(s)` with
//! `set_stream(t)`, so trials are independent of each other and of the order
//! in which they are executed. Within a trial the stream is consumed in this
//! order: durations (pair by pair, in pair-set order), supply schedules (load
//! by load), decompositions (load by load).

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::single_segment_gap;
use crate::model::{DemandCollection, Load, ServiceSpec, SupplyProfile, TimePartition};
use crate::tensor::check_adequacy;

/// Breakpoints of the overnight parking scenario: 6 p.m., 9 p.m., 1 a.m.,
/// 6 a.m., 8 a.m. and 10 a.m. in one-hour slots.
pub const PARKING_BREAKPOINTS: [usize; 6] = [0, 3, 7, 12, 14, 16];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationLaw {
    /// Uniform on `1..=n_d - n_a`.
    #[default]
    Uniform,
}

/// Which arrival-deadline pairs receive loads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    All,
    /// The `n` pairs with the shortest windows, ties broken by `(a, d)`.
    Smallest(usize),
    Explicit(Vec<(usize, usize)>),
}

impl PairSelection {
    pub fn resolve(&self, partition: &TimePartition) -> Result<Vec<(usize, usize)>> {
        let all = partition.pairs();
        let pairs = match self {
            PairSelection::All => all,
            PairSelection::Smallest(n) => {
                if *n > all.len() {
                    return Err(Error::Validation(format!(
                        "asked for {n} pairs but the partition has {}",
                        all.len()
                    )));
                }
                let mut sorted = all;
                sorted.sort_by_key(|&(a, d)| (partition.window(a, d).len(), a, d));
                sorted.truncate(*n);
                sorted
            }
            PairSelection::Explicit(list) => {
                for &(a, d) in list {
                    if a >= d || d > partition.segments() {
                        return Err(Error::Validation(format!(
                            "({a}, {d}) is not an arrival-deadline pair of the partition"
                        )));
                    }
                }
                list.clone()
            }
        };
        Ok(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub partition: TimePartition,
    pub pairs: Vec<(usize, usize)>,
    pub loads_per_pair: usize,
    pub trials: usize,
    pub seed: u64,
    pub duration_law: DurationLaw,
    /// Run trials on the rayon pool; results are identical either way.
    pub parallel: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let partition = TimePartition::new(PARKING_BREAKPOINTS.to_vec()).expect("valid");
        let pairs = partition.pairs();
        Self {
            partition,
            pairs,
            loads_per_pair: 100,
            trials: 10,
            seed: 0,
            duration_law: DurationLaw::Uniform,
            parallel: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        PairSelection::Explicit(self.pairs.clone()).resolve(&self.partition)?;
        if self.trials == 0 {
            return Err(Error::Validation("trials must be at least 1".into()));
        }
        Ok(())
    }

    /// The generator for trial `trial`.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }
}

/// `loads_per_pair` loads for every configured pair, durations drawn from the
/// configured law.
pub fn generate_demand<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> DemandCollection {
    generate_demand_sized(config, config.loads_per_pair, rng)
}

fn generate_demand_sized<R: Rng + ?Sized>(
    config: &SimConfig,
    loads_per_pair: usize,
    rng: &mut R,
) -> DemandCollection {
    let mut loads = Vec::with_capacity(config.pairs.len() * loads_per_pair);
    for &(a, d) in &config.pairs {
        let len = config.partition.window(a, d).len();
        for _ in 0..loads_per_pair {
            let r = match config.duration_law {
                DurationLaw::Uniform => rng.gen_range(1..=len),
            };
            loads.push(Load::unit(ServiceSpec::new(r, a, d)));
        }
    }
    DemandCollection::new(loads)
}

/// Column sums of one random feasible schedule: every load picks `r` distinct
/// slots of its window uniformly. Adequate by construction with zero surplus.
pub fn synthesize_adequate_supply<R: Rng + ?Sized>(
    demand: &DemandCollection,
    partition: &TimePartition,
    rng: &mut R,
) -> SupplyProfile {
    let mut h = vec![0u64; partition.horizon()];
    for load in &demand.loads {
        let w = partition.window(load.spec.a, load.spec.d);
        for j in index::sample(rng, w.len(), load.spec.r) {
            h[w.start + j] += 1;
        }
    }
    SupplyProfile::from_integers(&h)
}

/// Uniformly random split of a load's duration over the segments of its
/// window, `0 <= rho_kappa <= n_kappa - n_{kappa-1}` and `sum rho = r`.
///
/// Returns one entry per segment of the partition; segments outside the
/// window get 0. Sampled coordinate by coordinate from exact completion
/// counts, so every valid split is equally likely.
pub fn decompose_to_benchmark<R: Rng + ?Sized>(
    load: &ServiceSpec,
    partition: &TimePartition,
    rng: &mut R,
) -> Vec<usize> {
    let lens: Vec<usize> = (load.a + 1..=load.d)
        .map(|k| partition.segment_len(k))
        .collect();
    let r = load.r;
    // ways[c][s]: splits of s over segments c.. of the window
    let mut ways = vec![vec![0u128; r + 1]; lens.len() + 1];
    ways[lens.len()][0] = 1;
    for c in (0..lens.len()).rev() {
        for s in 0..=r {
            ways[c][s] = (0..=lens[c].min(s)).map(|x| ways[c + 1][s - x]).sum();
        }
    }
    let mut rho = vec![0; partition.segments()];
    let mut left = r;
    for (c, &len) in lens.iter().enumerate() {
        let mut pick = rng.gen_range(0..ways[c][left]);
        let mut x = 0;
        loop {
            let w = ways[c + 1][left - x];
            if pick < w {
                break;
            }
            pick -= w;
            x += 1;
        }
        debug_assert!(x <= len);
        rho[load.a + c] = x;
        left -= x;
    }
    rho
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnrResult {
    pub total_gap: u64,
    /// `None` when there are no loads.
    pub gnr: Option<f64>,
}

/// Sum over segments of the least extra energy making the per-segment
/// duration-only instance adequate, and its ratio to the number of loads.
pub fn compute_gnr(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    decompositions: &[Vec<usize>],
    partition: &TimePartition,
) -> Result<GnrResult> {
    supply.check_len(partition)?;
    let h = supply.to_integers()?;
    let specs = demand.unit_specs()?;
    if decompositions.len() != specs.len() {
        return Err(Error::Validation(format!(
            "{} decompositions for {} loads",
            decompositions.len(),
            specs.len()
        )));
    }
    let nu = partition.segments();
    for (i, (rho, s)) in decompositions.iter().zip(&specs).enumerate() {
        let ok = rho.len() == nu
            && rho.iter().sum::<usize>() == s.r
            && rho.iter().enumerate().all(|(c, &x)| {
                x <= partition.segment_len(c + 1) && (x == 0 || (s.a..s.d).contains(&c))
            });
        if !ok {
            return Err(Error::Validation(format!(
                "decomposition {rho:?} of load {i} does not split ({}, {}, {})",
                s.r, s.a, s.d
            )));
        }
    }
    let mut total_gap = 0;
    for kappa in 1..=nu {
        let slice = &h[partition.segment_slots(kappa)];
        let durations: Vec<u64> = decompositions
            .iter()
            .map(|rho| rho[kappa - 1] as u64)
            .collect();
        total_gap += single_segment_gap(slice, &durations);
    }
    let gnr = (!specs.is_empty()).then(|| total_gap as f64 / specs.len() as f64);
    Ok(GnrResult { total_gap, gnr })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnrRecord {
    pub trial: usize,
    pub num_loads: usize,
    pub total_gap: u64,
    pub gnr: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnrSummary {
    pub mean: Option<f64>,
    /// Population standard deviation of the GNR over the second half of the
    /// trials.
    pub std_last_half: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnrTrace {
    pub records: Vec<GnrRecord>,
    pub summary: GnrSummary,
}

impl GnrTrace {
    fn from_records(records: Vec<GnrRecord>) -> Self {
        let all: Vec<f64> = records.iter().filter_map(|r| r.gnr).collect();
        let tail: Vec<f64> = records[records.len() / 2..]
            .iter()
            .filter_map(|r| r.gnr)
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let std = mean(&tail).map(|m| {
            (tail.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / tail.len() as f64).sqrt()
        });
        Self {
            summary: GnrSummary {
                mean: mean(&all),
                std_last_half: std,
            },
            records,
        }
    }

    pub fn gnr_values(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.gnr).collect()
    }

    /// `trial,num_loads,total_gap,gnr` rows plus a trailing summary comment.
    /// An undefined GNR is written as an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,num_loads,total_gap,gnr\n");
        for r in &self.records {
            let gnr = r.gnr.map(|g| g.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.trial, r.num_loads, r.total_gap, gnr
            ));
        }
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_else(|| "NA".into());
        out.push_str(&format!(
            "# mean={} std_last_half={}\n",
            fmt(self.summary.mean),
            fmt(self.summary.std_last_half)
        ));
        out
    }
}

fn run_trial(config: &SimConfig, trial: usize, loads_per_pair: usize) -> Result<GnrRecord> {
    let mut rng = config.trial_rng(trial);
    let demand = generate_demand_sized(config, loads_per_pair, &mut rng);
    let supply = synthesize_adequate_supply(&demand, &config.partition, &mut rng);
    if !check_adequacy(&supply, &demand, &config.partition)?.adequate {
        return Err(Error::SolverFailure(format!(
            "trial {trial}: synthesized supply is not adequate"
        )));
    }
    let decompositions: Vec<Vec<usize>> = demand
        .loads
        .iter()
        .map(|l| decompose_to_benchmark(&l.spec, &config.partition, &mut rng))
        .collect();
    let res = compute_gnr(&supply, &demand, &decompositions, &config.partition)?;
    Ok(GnrRecord {
        trial,
        num_loads: demand.len(),
        total_gap: res.total_gap,
        gnr: res.gnr,
    })
}

fn run_schedule(config: &SimConfig, schedule: &[usize]) -> Result<GnrTrace> {
    config.validate()?;
    let records: Result<Vec<GnrRecord>> = if config.parallel {
        schedule
            .par_iter()
            .enumerate()
            .map(|(t, &lpp)| run_trial(config, t, lpp))
            .collect()
    } else {
        schedule
            .iter()
            .enumerate()
            .map(|(t, &lpp)| run_trial(config, t, lpp))
            .collect()
    };
    Ok(GnrTrace::from_records(records?))
}

/// `config.trials` independent trials at `config.loads_per_pair`.
pub fn run_experiment(config: &SimConfig) -> Result<GnrTrace> {
    run_schedule(config, &vec![config.loads_per_pair; config.trials])
}

/// One trial per entry of `schedule`, trial `t` using `schedule[t]` loads per
/// pair. `config.trials` and `config.loads_per_pair` are ignored.
pub fn run_sweep(config: &SimConfig, schedule: &[usize]) -> Result<GnrTrace> {
    if schedule.is_empty() {
        return Err(Error::Validation("sweep schedule is empty".into()));
    }
    let mut cfg = config.clone();
    cfg.trials = schedule.len();
    run_schedule(&cfg, schedule)
}
