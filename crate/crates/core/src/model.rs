//! Domain types shared by every other module: the time partition, supply
//! profiles, services and load collections, plus the JSON instance document.
//!
//! Slots are 0-based throughout the API. The window of a service `(r, a, d)`
//! is the slot range `n_a..n_d`, i.e. the 1-based slots `n_a + 1 ..= n_d`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::ConsumerType;

/// Breakpoints `0 = n_0 < n_1 < ... < n_nu` of the operating horizon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TimePartition {
    breakpoints: Vec<usize>,
}

impl TimePartition {
    pub fn new(breakpoints: Vec<usize>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::Validation(
                "partition needs at least two breakpoints".into(),
            ));
        }
        if breakpoints[0] != 0 {
            return Err(Error::Validation(format!(
                "partition must start at 0, got {}",
                breakpoints[0]
            )));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "partition must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        Ok(Self { breakpoints })
    }

    /// A single segment covering `horizon` slots.
    pub fn single(horizon: usize) -> Result<Self> {
        Self::new(vec![0, horizon])
    }

    pub fn breakpoints(&self) -> &[usize] {
        &self.breakpoints
    }

    /// Number of segments (nu).
    pub fn segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Horizon length n.
    pub fn horizon(&self) -> usize {
        *self.breakpoints.last().expect("nonempty")
    }

    /// Length of the 1-based segment `kappa`.
    pub fn segment_len(&self, kappa: usize) -> usize {
        self.breakpoints[kappa] - self.breakpoints[kappa - 1]
    }

    /// Slot range of the 1-based segment `kappa`.
    pub fn segment_slots(&self, kappa: usize) -> Range<usize> {
        self.breakpoints[kappa - 1]..self.breakpoints[kappa]
    }

    pub fn segment_lens(&self) -> Vec<usize> {
        self.breakpoints.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Slot range between arrival `a` and deadline `d`.
    pub fn window(&self, a: usize, d: usize) -> Range<usize> {
        self.breakpoints[a]..self.breakpoints[d]
    }

    /// All arrival-deadline pairs `(a, d)` with `a < d <= nu`, ordered by `a` then `d`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let nu = self.segments();
        (0..nu)
            .flat_map(|a| (a + 1..=nu).map(move |d| (a, d)))
            .collect()
    }

    /// Every valid service for this partition, in [`ServiceSpec`] order.
    pub fn services(&self) -> Vec<ServiceSpec> {
        let mut out: Vec<ServiceSpec> = self
            .pairs()
            .into_iter()
            .flat_map(|(a, d)| {
                let len = self.breakpoints[d] - self.breakpoints[a];
                (1..=len).map(move |r| ServiceSpec { r, a, d })
            })
            .collect();
        out.sort();
        out
    }
}

impl TryFrom<Vec<usize>> for TimePartition {
    type Error = Error;

    fn try_from(value: Vec<usize>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TimePartition> for Vec<usize> {
    fn from(value: TimePartition) -> Self {
        value.breakpoints
    }
}

/// Energy units available per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupplyProfile {
    units: Vec<f64>,
}

impl SupplyProfile {
    pub fn new(units: Vec<f64>) -> Result<Self> {
        if let Some((j, v)) = units
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Validation(format!(
                "supply at slot {j} must be a nonnegative number, got {v}"
            )));
        }
        Ok(Self { units })
    }

    pub fn from_integers(units: &[u64]) -> Self {
        Self {
            units: units.iter().map(|&u| u as f64).collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            units: vec![0.0; n],
        }
    }

    pub fn units(&self) -> &[f64] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.units.iter().sum()
    }

    pub fn is_integral(&self) -> bool {
        self.units.iter().all(|v| v.fract() == 0.0)
    }

    /// Integer view of the supply, or `NonIntegerInput`.
    pub fn to_integers(&self) -> Result<Vec<u64>> {
        self.units
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                if v.fract() == 0.0 && v <= u64::MAX as f64 {
                    Ok(v as u64)
                } else {
                    Err(Error::NonIntegerInput(format!("supply at slot {j} is {v}")))
                }
            })
            .collect()
    }

    /// Whether the profile is nonincreasing inside every segment.
    pub fn is_canonical(&self, partition: &TimePartition) -> bool {
        self.first_non_canonical(partition).is_none()
    }

    pub(crate) fn first_non_canonical(&self, partition: &TimePartition) -> Option<Error> {
        for kappa in 1..=partition.segments() {
            let slots = partition.segment_slots(kappa);
            for j in slots.start + 1..slots.end {
                if self.units[j] > self.units[j - 1] {
                    return Some(Error::NotCanonical {
                        segment: kappa,
                        prev: j - 1,
                        slot: j,
                    });
                }
            }
        }
        None
    }

    pub(crate) fn check_len(&self, partition: &TimePartition) -> Result<()> {
        if self.len() != partition.horizon() {
            return Err(Error::Validation(format!(
                "supply has {} slots but the partition horizon is {}",
                self.len(),
                partition.horizon()
            )));
        }
        Ok(())
    }
}

/// Sorts every segment of `supply` in nonincreasing order.
///
/// Each load's window is a union of whole segments, so permuting slots within
/// a segment never changes adequacy.
pub fn canonicalize_supply(supply: &SupplyProfile, partition: &TimePartition) -> SupplyProfile {
    let mut units = supply.units.clone();
    for kappa in 1..=partition.segments() {
        let slots = partition.segment_slots(kappa);
        let end = slots.end.min(units.len());
        let start = slots.start.min(end);
        units[start..end].sort_by(|x, y| y.total_cmp(x));
    }
    SupplyProfile { units }
}

/// A multiple-arrival multiple-deadline service: `r` slots of unit power
/// anywhere in the window between breakpoints `a` and `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub r: usize,
    pub a: usize,
    pub d: usize,
}

impl ServiceSpec {
    pub const fn new(r: usize, a: usize, d: usize) -> Self {
        Self { r, a, d }
    }

    pub fn validate(&self, partition: &TimePartition) -> Result<()> {
        let nu = partition.segments();
        if self.a >= self.d || self.d > nu {
            return Err(Error::Validation(format!(
                "service ({}, {}, {}) needs 0 <= a < d <= {nu}",
                self.r, self.a, self.d
            )));
        }
        let len = partition.window(self.a, self.d).len();
        if self.r == 0 || self.r > len {
            return Err(Error::Validation(format!(
                "service ({}, {}, {}) needs 0 < r <= {len} (window length)",
                self.r, self.a, self.d
            )));
        }
        Ok(())
    }

    /// Remaining duration `[r - (k_{a+1} + ... + k_d)]^+` at tail index `k`.
    pub fn demand_tail(&self, k: &[usize]) -> usize {
        let served: usize = k[self.a..self.d].iter().sum();
        self.r.saturating_sub(served)
    }
}

impl Ord for ServiceSpec {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.a, self.d, self.r).cmp(&(other.a, other.d, other.r))
    }
}

impl PartialOrd for ServiceSpec {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Load {
    pub spec: ServiceSpec,
    /// Constant power level.
    pub weight: f64,
}

impl Load {
    pub fn unit(spec: ServiceSpec) -> Self {
        Self { spec, weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DemandCollection {
    pub loads: Vec<Load>,
}

impl DemandCollection {
    pub fn new(loads: Vec<Load>) -> Self {
        Self { loads }
    }

    /// Unit-weight loads from `(r, a, d)` triples.
    pub fn from_triples(triples: &[(usize, usize, usize)]) -> Self {
        Self {
            loads: triples
                .iter()
                .map(|&(r, a, d)| Load::unit(ServiceSpec::new(r, a, d)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }

    /// Total weighted demand `sum_i l_i r_i`.
    pub fn total(&self) -> f64 {
        self.loads.iter().map(|l| l.weight * l.spec.r as f64).sum()
    }

    pub fn validate(&self, partition: &TimePartition) -> Result<()> {
        for (i, load) in self.loads.iter().enumerate() {
            load.spec
                .validate(partition)
                .map_err(|e| Error::Validation(format!("load {i}: {e}")))?;
            if !load.weight.is_finite() || load.weight <= 0.0 {
                return Err(Error::Validation(format!(
                    "load {i}: weight must be positive, got {}",
                    load.weight
                )));
            }
        }
        Ok(())
    }

    pub fn is_integral(&self) -> bool {
        self.loads.iter().all(|l| l.weight.fract() == 0.0)
    }

    /// Services of unit-weight loads, or `NonIntegerInput` for any other weight.
    pub fn unit_specs(&self) -> Result<Vec<ServiceSpec>> {
        self.loads
            .iter()
            .enumerate()
            .map(|(i, l)| {
                if l.weight == 1.0 {
                    Ok(l.spec)
                } else {
                    Err(Error::NonIntegerInput(format!(
                        "load {i} has weight {}, flow operations need weight 1",
                        l.weight
                    )))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub partition: TimePartition,
    pub supply: SupplyProfile,
    pub demand: DemandCollection,
    pub consumers: Vec<ConsumerType>,
}

impl Instance {
    pub fn new(
        partition: TimePartition,
        supply: SupplyProfile,
        demand: DemandCollection,
        consumers: Vec<ConsumerType>,
    ) -> Result<Self> {
        supply.check_len(&partition)?;
        demand.validate(&partition)?;
        for c in &consumers {
            c.validate(&partition)?;
        }
        Ok(Self {
            partition,
            supply,
            demand,
            consumers,
        })
    }
}

// Wire format.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    partition: Vec<usize>,
    supply: Vec<Number>,
    #[serde(default)]
    loads: Vec<LoadDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    consumers: Option<Vec<ConsumerDoc>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    r: usize,
    a: usize,
    d: usize,
    #[serde(default = "unit_weight")]
    weight: Number,
}

fn unit_weight() -> Number {
    Number(1.0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsumerDoc {
    id: String,
    cap: f64,
    #[serde(default)]
    values: Vec<ValueDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueDoc {
    r: usize,
    a: usize,
    d: usize,
    v: f64,
}

/// A real number written without a fractional part when it is integral.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Number(pub f64);

impl Serialize for Number {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.fract() == 0.0 && v.abs() < 9.0e15 {
            s.serialize_i64(v as i64)
        } else {
            s.serialize_f64(v)
        }
    }
}

/// Parses and validates an instance document.
pub fn load_instance(text: &str) -> Result<Instance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let partition = TimePartition::new(doc.partition)?;
    let supply = SupplyProfile::new(doc.supply.into_iter().map(|n| n.0).collect())?;
    let demand = DemandCollection::new(
        doc.loads
            .into_iter()
            .map(|l| Load {
                spec: ServiceSpec::new(l.r, l.a, l.d),
                weight: l.weight.0,
            })
            .collect(),
    );
    let consumers = doc
        .consumers
        .unwrap_or_default()
        .into_iter()
        .map(|c| {
            let mut values = BTreeMap::new();
            for v in c.values {
                let spec = ServiceSpec::new(v.r, v.a, v.d);
                if values.insert(spec, v.v).is_some() {
                    return Err(Error::Validation(format!(
                        "consumer {}: duplicate value for service ({}, {}, {})",
                        c.id, v.r, v.a, v.d
                    )));
                }
            }
            Ok(ConsumerType {
                id: c.id,
                cap: c.cap,
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::new(partition, supply, demand, consumers)
}

/// Writes an instance in the document format read by [`load_instance`].
pub fn serialize_instance(instance: &Instance) -> String {
    let doc = InstanceDoc {
        partition: instance.partition.breakpoints().to_vec(),
        supply: instance.supply.units().iter().map(|&v| Number(v)).collect(),
        loads: instance
            .demand
            .loads
            .iter()
            .map(|l| LoadDoc {
                r: l.spec.r,
                a: l.spec.a,
                d: l.spec.d,
                weight: Number(l.weight),
            })
            .collect(),
        consumers: if instance.consumers.is_empty() {
            None
        } else {
            Some(
                instance
                    .consumers
                    .iter()
                    .map(|c| ConsumerDoc {
                        id: c.id.clone(),
                        cap: c.cap,
                        values: c
                            .values
                            .iter()
                            .map(|(s, &v)| ValueDoc {
                                r: s.r,
                                a: s.a,
                                d: s.d,
                                v,
                            })
                            .collect(),
                    })
                    .collect(),
            )
        },
    };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}
