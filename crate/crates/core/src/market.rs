//! Forward market for MAMD services with finitely many consumer types.
//!
//! Each consumer type buys at most `cap` units of power in total and values
//! one unit of service `s` at `v_s` (capped-linear utility). The social
//! planner's problem is then an LP over purchase levels subject to the
//! tensor adequacy constraints; its duals on those constraints price every
//! service, and the planner's solution is a competitive equilibrium at
//! those prices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, LinearProgram};
use crate::model::{canonicalize_supply, Instance, ServiceSpec, SupplyProfile, TimePartition};
use crate::tensor::{supply_tail, TensorShape};

/// Tolerance on per-type surplus loss and on supply-constraint excess.
pub const EQUILIBRIUM_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerType {
    pub id: String,
    /// Maximum total power level the type buys.
    pub cap: f64,
    /// Value per unit of power for each service; absent services are worth 0.
    pub values: BTreeMap<ServiceSpec, f64>,
}

impl ConsumerType {
    pub fn new(id: impl Into<String>, cap: f64, values: &[(ServiceSpec, f64)]) -> Self {
        Self {
            id: id.into(),
            cap,
            values: values.iter().copied().collect(),
        }
    }

    pub fn validate(&self, partition: &TimePartition) -> Result<()> {
        if !self.cap.is_finite() || self.cap <= 0.0 {
            return Err(Error::Validation(format!(
                "consumer {}: cap must be positive, got {}",
                self.id, self.cap
            )));
        }
        for (spec, &v) in &self.values {
            spec.validate(partition)
                .map_err(|e| Error::Validation(format!("consumer {}: {e}", self.id)))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "consumer {}: value must be nonnegative, got {v}",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, spec: &ServiceSpec) -> f64 {
        self.values.get(spec).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PriceEntry {
    r: usize,
    a: usize,
    d: usize,
    price: f64,
}

/// Per-unit price of every service; the price of zero duration is zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<PriceEntry>", into = "Vec<PriceEntry>")]
pub struct PriceMenu {
    pub prices: BTreeMap<ServiceSpec, f64>,
}

impl PriceMenu {
    pub fn price(&self, spec: &ServiceSpec) -> f64 {
        if spec.r == 0 {
            return 0.0;
        }
        self.prices.get(spec).copied().unwrap_or(0.0)
    }

    pub fn zero(partition: &TimePartition) -> Self {
        Self {
            prices: partition.services().into_iter().map(|s| (s, 0.0)).collect(),
        }
    }
}

impl From<Vec<PriceEntry>> for PriceMenu {
    fn from(v: Vec<PriceEntry>) -> Self {
        Self {
            prices: v
                .into_iter()
                .map(|e| (ServiceSpec::new(e.r, e.a, e.d), e.price))
                .collect(),
        }
    }
}

impl From<PriceMenu> for Vec<PriceEntry> {
    fn from(m: PriceMenu) -> Self {
        m.prices
            .into_iter()
            .map(|(s, price)| PriceEntry {
                r: s.r,
                a: s.a,
                d: s.d,
                price,
            })
            .collect()
    }
}

/// Multipliers on the tail constraints, one per tail index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMultipliers {
    pub shape: TensorShape,
    pub values: Vec<f64>,
}

impl DualMultipliers {
    pub fn zeros(partition: &TimePartition) -> Result<Self> {
        let shape = TensorShape::for_partition(partition)?;
        Ok(Self {
            values: vec![0.0; shape.len()],
            shape,
        })
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        self.values[self.shape.flat(k)]
    }

    pub fn set(&mut self, k: &[usize], v: f64) {
        let i = self.shape.flat(k);
        self.values[i] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct QuantityEntry {
    r: usize,
    a: usize,
    d: usize,
    q: f64,
}

/// Quantity of each service, either produced by the supplier or purchased.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<QuantityEntry>", into = "Vec<QuantityEntry>")]
pub struct ServiceBundle {
    pub quantities: BTreeMap<ServiceSpec, f64>,
}

impl From<Vec<QuantityEntry>> for ServiceBundle {
    fn from(v: Vec<QuantityEntry>) -> Self {
        Self {
            quantities: v
                .into_iter()
                .map(|e| (ServiceSpec::new(e.r, e.a, e.d), e.q))
                .collect(),
        }
    }
}

impl From<ServiceBundle> for Vec<QuantityEntry> {
    fn from(b: ServiceBundle) -> Self {
        b.quantities
            .into_iter()
            .map(|(s, q)| QuantityEntry {
                r: s.r,
                a: s.a,
                d: s.d,
                q,
            })
            .collect()
    }
}

impl ServiceBundle {
    pub fn quantity(&self, spec: &ServiceSpec) -> f64 {
        self.quantities.get(spec).copied().unwrap_or(0.0)
    }

    /// Tail quantities `delta_j = sum_{r >= j} q_r` of the window `(a, d)`
    /// for `j = 1..=len`, returned 0-based.
    pub fn tails(&self, a: usize, d: usize, len: usize) -> Vec<f64> {
        let mut delta = vec![0.0; len];
        for (s, &q) in &self.quantities {
            if s.a == a && s.d == d && s.r >= 1 {
                for dj in delta.iter_mut().take(s.r.min(len)) {
                    *dj += q;
                }
            }
        }
        delta
    }

    /// Demand tail `sum_s q_s [r_s - K_s(k)]^+` at tail index `k`.
    pub fn usage(&self, k: &[usize]) -> f64 {
        self.quantities
            .iter()
            .map(|(s, &q)| q * s.demand_tail(k) as f64)
            .sum()
    }

    pub fn revenue(&self, menu: &PriceMenu) -> f64 {
        self.quantities
            .iter()
            .map(|(s, &q)| q * menu.price(s))
            .sum()
    }

    /// Largest amount by which the bundle's demand tail exceeds the supply
    /// tail; nonpositive when the bundle can be produced.
    pub fn supply_excess(&self, supply: &SupplyProfile, partition: &TimePartition) -> Result<f64> {
        let canon = canonicalize_supply(supply, partition);
        let shape = TensorShape::for_partition(partition)?;
        let mut worst = f64::NEG_INFINITY;
        shape.for_each(|_, k| {
            worst = worst.max(self.usage(k) - supply_tail(&canon, partition, k));
        });
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LevelEntry {
    r: usize,
    a: usize,
    d: usize,
    level: f64,
}

/// Power levels one consumer type buys of each service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePurchase {
    pub id: String,
    #[serde(with = "levels_serde")]
    pub levels: BTreeMap<ServiceSpec, f64>,
}

mod levels_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        levels: &BTreeMap<ServiceSpec, f64>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<LevelEntry> = levels
            .iter()
            .map(|(sp, &level)| LevelEntry {
                r: sp.r,
                a: sp.a,
                d: sp.d,
                level,
            })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<ServiceSpec, f64>, D::Error> {
        let v = Vec::<LevelEntry>::deserialize(d)?;
        Ok(v.into_iter()
            .map(|e| (ServiceSpec::new(e.r, e.a, e.d), e.level))
            .collect())
    }
}

impl TypePurchase {
    pub fn total(&self) -> f64 {
        self.levels.values().sum()
    }
}

pub type Purchases = Vec<TypePurchase>;

/// Aggregates purchases into the traded bundle, `q_s = sum_t l_{t,s}`.
pub fn aggregate(purchases: &[TypePurchase]) -> ServiceBundle {
    let mut quantities = BTreeMap::new();
    for p in purchases {
        for (s, &l) in &p.levels {
            *quantities.entry(*s).or_insert(0.0) += l;
        }
    }
    ServiceBundle { quantities }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelfareSolution {
    pub purchases: Purchases,
    pub welfare: f64,
    /// Multipliers on the tail constraints.
    pub duals: DualMultipliers,
    /// Multipliers on each type's cap.
    pub cap_duals: Vec<f64>,
    /// `|primal - dual|` objective difference.
    pub duality_gap: f64,
    /// `max_k alpha_k * slack_k`.
    pub slackness_residual: f64,
}

/// Maximizes total utility `sum_t sum_s v_{t,s} l_{t,s}` subject to
/// `sum_t sum_s l_{t,s} [r_s - K_s(k)]^+ <= supply_tail(k)` for every tail
/// index `k` and `sum_s l_{t,s} <= cap_t`.
pub fn solve_welfare(instance: &Instance) -> Result<WelfareSolution> {
    let partition = &instance.partition;
    let supply = canonicalize_supply(&instance.supply, partition);
    let shape = TensorShape::for_partition(partition)?;

    // one variable per (type, service) with positive value
    let vars: Vec<(usize, ServiceSpec, f64)> = instance
        .consumers
        .iter()
        .enumerate()
        .flat_map(|(t, c)| {
            c.values
                .iter()
                .filter(|(_, &v)| v > 0.0)
                .map(move |(s, &v)| (t, *s, v))
        })
        .collect();

    let mut rows = Vec::with_capacity(shape.len() + instance.consumers.len());
    let mut rhs = Vec::with_capacity(rows.capacity());
    shape.for_each(|_, k| {
        rows.push(
            vars.iter()
                .map(|(_, s, _)| s.demand_tail(k) as f64)
                .collect(),
        );
        rhs.push(supply_tail(&supply, partition, k));
    });
    for (t, c) in instance.consumers.iter().enumerate() {
        rows.push(
            vars.iter()
                .map(|&(vt, _, _)| if vt == t { 1.0 } else { 0.0 })
                .collect(),
        );
        rhs.push(c.cap);
    }
    let program = LinearProgram {
        objective: vars.iter().map(|&(_, _, v)| v).collect(),
        rows,
        rhs,
    };
    let sol = lp::solve(&program)?;

    let tails = shape.len();
    let slacks = sol.slacks(&program);
    let slackness_residual = sol
        .duals
        .iter()
        .zip(&slacks)
        .map(|(y, s)| (y * s).abs())
        .fold(0.0, f64::max);

    let mut purchases: Purchases = instance
        .consumers
        .iter()
        .map(|c| TypePurchase {
            id: c.id.clone(),
            levels: BTreeMap::new(),
        })
        .collect();
    for (&(t, s, _), &x) in vars.iter().zip(&sol.x) {
        if x > 0.0 {
            purchases[t].levels.insert(s, x);
        }
    }
    Ok(WelfareSolution {
        purchases,
        welfare: sol.objective,
        duals: DualMultipliers {
            shape,
            values: sol.duals[..tails].to_vec(),
        },
        cap_duals: sol.duals[tails..].to_vec(),
        duality_gap: (sol.objective - sol.dual_objective).abs(),
        slackness_residual,
    })
}

/// Prices every service as `pi_r^{a,d} = sum_k alpha_k [r - sum_{kappa in (a,d]} k_kappa]^+`.
pub fn prices_from_duals(duals: &DualMultipliers, partition: &TimePartition) -> PriceMenu {
    let services = partition.services();
    let mut prices = vec![0.0; services.len()];
    duals.shape.for_each(|flat, k| {
        let alpha = duals.values[flat];
        if alpha != 0.0 {
            for (p, s) in prices.iter_mut().zip(&services) {
                *p += alpha * s.demand_tail(k) as f64;
            }
        }
    });
    PriceMenu {
        prices: services.into_iter().zip(prices).collect(),
    }
}

/// The optimal face of a consumer type's problem at given prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// Best surplus per unit of power, `max(0, max_s v_s - pi_s)`.
    pub unit_surplus: f64,
    /// Services attaining the best surplus (zero-surplus services when the
    /// best surplus is zero).
    pub services: Vec<ServiceSpec>,
    /// Admissible total power level.
    pub min_level: f64,
    pub max_level: f64,
}

impl BestResponse {
    pub fn is_unique(&self) -> bool {
        self.min_level == self.max_level && self.services.len() <= 1
    }
}

fn net_values<'a>(
    consumer: &'a ConsumerType,
    menu: &'a PriceMenu,
) -> impl Iterator<Item = (ServiceSpec, f64)> + 'a {
    let mut specs: Vec<ServiceSpec> = menu.prices.keys().copied().collect();
    specs.extend(
        consumer
            .values
            .keys()
            .filter(|s| !menu.prices.contains_key(s)),
    );
    specs.sort();
    specs
        .into_iter()
        .map(move |s| (s, consumer.value(&s) - menu.price(&s)))
}

pub fn consumer_best_response(consumer: &ConsumerType, menu: &PriceMenu) -> BestResponse {
    let tol = EQUILIBRIUM_TOL;
    let best = net_values(consumer, menu)
        .map(|(_, g)| g)
        .fold(0.0, f64::max);
    if best > tol {
        BestResponse {
            unit_surplus: best,
            services: net_values(consumer, menu)
                .filter(|&(_, g)| g >= best - tol)
                .map(|(s, _)| s)
                .collect(),
            min_level: consumer.cap,
            max_level: consumer.cap,
        }
    } else {
        let services: Vec<ServiceSpec> = net_values(consumer, menu)
            .filter(|&(_, g)| g.abs() <= tol)
            .map(|(s, _)| s)
            .collect();
        let max_level = if services.is_empty() {
            0.0
        } else {
            consumer.cap
        };
        BestResponse {
            unit_surplus: 0.0,
            services,
            min_level: 0.0,
            max_level,
        }
    }
}

/// Surplus a type forgoes by buying `levels` instead of a best response;
/// infinite when the levels are infeasible for the type.
pub fn surplus_loss(
    consumer: &ConsumerType,
    levels: &BTreeMap<ServiceSpec, f64>,
    menu: &PriceMenu,
) -> f64 {
    let total: f64 = levels.values().sum();
    if levels.values().any(|&l| l < -EQUILIBRIUM_TOL)
        || total > consumer.cap * (1.0 + 1e-9) + EQUILIBRIUM_TOL
    {
        return f64::INFINITY;
    }
    let best = consumer_best_response(consumer, menu).unit_surplus;
    let got: f64 = levels
        .iter()
        .map(|(s, &l)| l * (consumer.value(s) - menu.price(s)))
        .sum();
    (consumer.cap * best - got).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplierSolution {
    pub bundle: ServiceBundle,
    pub revenue: f64,
}

/// Revenue-maximizing bundle `max sum_s q_s pi_s` over bundles the supply
/// can produce (`sum_s q_s [r_s - K_s(k)]^+ <= supply_tail(k)` for all `k`,
/// which is the tail-quantity form `sum_{j > K} delta_j`).
pub fn supplier_optimal_bundle(
    menu: &PriceMenu,
    supply: &SupplyProfile,
    partition: &TimePartition,
) -> Result<SupplierSolution> {
    supply.check_len(partition)?;
    let canon = canonicalize_supply(supply, partition);
    let shape = TensorShape::for_partition(partition)?;
    let services: Vec<ServiceSpec> = menu
        .prices
        .iter()
        .filter(|(_, &p)| p > 0.0)
        .map(|(s, _)| *s)
        .collect();
    for s in &services {
        s.validate(partition)?;
    }
    let mut rows = Vec::with_capacity(shape.len());
    let mut rhs = Vec::with_capacity(shape.len());
    shape.for_each(|_, k| {
        rows.push(services.iter().map(|s| s.demand_tail(k) as f64).collect());
        rhs.push(supply_tail(&canon, partition, k));
    });
    let program = LinearProgram {
        objective: services.iter().map(|s| menu.price(s)).collect(),
        rows,
        rhs,
    };
    let sol = lp::solve(&program)?;
    let bundle = ServiceBundle {
        quantities: services
            .iter()
            .zip(&sol.x)
            .filter(|(_, &q)| q > 0.0)
            .map(|(s, &q)| (*s, q))
            .collect(),
    };
    Ok(SupplierSolution {
        revenue: sol.objective,
        bundle,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumChecks {
    pub consumer_optimal: bool,
    pub supplier_optimal: bool,
    pub market_clear: bool,
}

impl EquilibriumChecks {
    pub fn all(&self) -> bool {
        self.consumer_optimal && self.supplier_optimal && self.market_clear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Largest surplus loss over consumer types.
    pub consumer_surplus_loss: f64,
    /// Optimal supplier revenue minus the traded bundle's revenue.
    pub revenue_shortfall: f64,
    /// Largest excess of the traded bundle's demand tail over the supply tail.
    pub supply_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub welfare: f64,
    pub revenue: f64,
    pub consumer_surplus: f64,
    pub menu: PriceMenu,
    pub purchases: Purchases,
    pub bundle: ServiceBundle,
    pub checks: EquilibriumChecks,
    pub violations: Violations,
}

/// Checks the three competitive-equilibrium conditions for `purchases` at
/// `menu`.
///
/// The traded bundle is the aggregate of the purchases. It is supplier
/// optimal when the supply can produce it and its revenue matches the best
/// revenue at these prices (ties between bundles are fine). The market clears
/// when that bundle is both demanded, i.e. every purchase is a best response,
/// and supplied, i.e. it is supplier optimal.
pub fn verify_equilibrium(
    purchases: &[TypePurchase],
    menu: &PriceMenu,
    supply: &SupplyProfile,
    partition: &TimePartition,
    consumers: &[ConsumerType],
) -> Result<EquilibriumReport> {
    if purchases.len() != consumers.len() {
        return Err(Error::Validation(format!(
            "{} purchase records for {} consumer types",
            purchases.len(),
            consumers.len()
        )));
    }
    let tol = EQUILIBRIUM_TOL;
    let consumer_surplus_loss = consumers
        .iter()
        .zip(purchases)
        .map(|(c, p)| surplus_loss(c, &p.levels, menu))
        .fold(0.0, f64::max);

    let bundle = aggregate(purchases);
    let revenue = bundle.revenue(menu);
    let best = supplier_optimal_bundle(menu, supply, partition)?;
    let revenue_shortfall = (best.revenue - revenue).max(0.0);
    let supply_excess = bundle.supply_excess(supply, partition)?.max(0.0);

    let consumer_optimal = consumer_surplus_loss <= tol;
    let supplier_optimal =
        supply_excess <= tol && revenue_shortfall <= tol * best.revenue.abs().max(1.0);
    let market_clear = consumer_optimal && supplier_optimal;

    let welfare: f64 = consumers
        .iter()
        .zip(purchases)
        .map(|(c, p)| p.levels.iter().map(|(s, &l)| l * c.value(s)).sum::<f64>())
        .sum();
    Ok(EquilibriumReport {
        welfare,
        revenue,
        consumer_surplus: welfare - revenue,
        menu: menu.clone(),
        purchases: purchases.to_vec(),
        bundle,
        checks: EquilibriumChecks {
            consumer_optimal,
            supplier_optimal,
            market_clear,
        },
        violations: Violations {
            consumer_surplus_loss,
            revenue_shortfall,
            supply_excess,
        },
    })
}

/// Welfare LP, dual prices, then verification of the resulting state.
pub fn clear_market(instance: &Instance) -> Result<EquilibriumReport> {
    let sol = solve_welfare(instance)?;
    let menu = prices_from_duals(&sol.duals, &instance.partition);
    verify_equilibrium(
        &sol.purchases,
        &menu,
        &instance.supply,
        &instance.partition,
        &instance.consumers,
    )
}
