//! Max-flow view of adequacy.
//!
//! The network has a source arc `s -> column j` of capacity `h_j` for every
//! slot, a unit arc `column j -> row i` for every slot in load `i`'s window,
//! and an arc `row i -> t` of capacity `r_i`. Integral flows of value
//! `sum_i r_i` are exactly the feasible (0,1) allocation matrices.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DemandCollection, ServiceSpec, SupplyProfile, TimePartition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcKind {
    Source { slot: usize },
    Unit { slot: usize, load: usize },
    Sink { load: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: u64,
    pub kind: ArcKind,
}

/// Vertex 0 is the source, 1 the sink, then one column vertex per slot and
/// one row vertex per load.
///
/// Arcs are stored as: source arcs by slot, unit arcs by load then slot,
/// sink arcs by load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowNetwork {
    pub slots: usize,
    pub loads: usize,
    pub arcs: Vec<Arc>,
    durations: Vec<u64>,
    supply: Vec<u64>,
}

impl FlowNetwork {
    pub const SOURCE: usize = 0;
    pub const SINK: usize = 1;

    pub fn column(&self, slot: usize) -> usize {
        2 + slot
    }

    pub fn row(&self, load: usize) -> usize {
        2 + self.slots + load
    }

    pub fn vertex_count(&self) -> usize {
        2 + self.slots + self.loads
    }

    pub fn source_arcs(&self) -> usize {
        self.slots
    }

    pub fn sink_arcs(&self) -> usize {
        self.loads
    }

    pub fn unit_arcs(&self) -> usize {
        self.arcs.len() - self.slots - self.loads
    }

    /// Total demand `sum_i r_i`.
    pub fn required(&self) -> u64 {
        self.durations.iter().sum()
    }
}

pub fn build_network(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    partition: &TimePartition,
) -> Result<FlowNetwork> {
    supply.check_len(partition)?;
    let h = supply.to_integers()?;
    let specs = demand.unit_specs()?;
    // Durations longer than the window are allowed here; they just make the
    // instance inadequate.
    if let Some((i, s)) = specs
        .iter()
        .enumerate()
        .find(|(_, s)| s.a >= s.d || s.d > partition.segments())
    {
        return Err(Error::Validation(format!(
            "load {i}: window ({}, {}) is not a valid arrival-deadline pair",
            s.a, s.d
        )));
    }
    Ok(network_from_parts(&h, &specs, partition))
}

fn network_from_parts(h: &[u64], specs: &[ServiceSpec], partition: &TimePartition) -> FlowNetwork {
    let slots = h.len();
    let loads = specs.len();
    let column = |j: usize| 2 + j;
    let row = |i: usize| 2 + slots + i;
    let mut arcs = Vec::with_capacity(slots + loads);
    for (slot, &cap) in h.iter().enumerate() {
        arcs.push(Arc {
            from: FlowNetwork::SOURCE,
            to: column(slot),
            capacity: cap,
            kind: ArcKind::Source { slot },
        });
    }
    for (load, spec) in specs.iter().enumerate() {
        for slot in partition.window(spec.a, spec.d) {
            arcs.push(Arc {
                from: column(slot),
                to: row(load),
                capacity: 1,
                kind: ArcKind::Unit { slot, load },
            });
        }
    }
    for (load, spec) in specs.iter().enumerate() {
        arcs.push(Arc {
            from: row(load),
            to: FlowNetwork::SINK,
            capacity: spec.r as u64,
            kind: ArcKind::Sink { load },
        });
    }
    FlowNetwork {
        slots,
        loads,
        arcs,
        durations: specs.iter().map(|s| s.r as u64).collect(),
        supply: h.to_vec(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxFlow {
    pub value: u64,
    /// Flow on each arc, aligned with [`FlowNetwork::arcs`].
    pub arc_flows: Vec<u64>,
    /// Vertices reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
}

struct Edge {
    to: usize,
    cap: u64,
    rev: usize,
}

/// Dinic's blocking-flow algorithm over an adjacency list built in arc order.
struct Dinic {
    graph: Vec<Vec<Edge>>,
    level: Vec<i64>,
    iter: Vec<usize>,
}

impl Dinic {
    fn new(n: usize) -> Self {
        Self {
            graph: (0..n).map(|_| Vec::new()).collect(),
            level: vec![-1; n],
            iter: vec![0; n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> (usize, usize) {
        let fwd = self.graph[from].len();
        let bwd = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, cap, rev: bwd });
        self.graph[to].push(Edge {
            to: from,
            cap: 0,
            rev: fwd,
        });
        (from, fwd)
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for e in &self.graph[v] {
                if e.cap > 0 && self.level[e.to] < 0 {
                    self.level[e.to] = self.level[v] + 1;
                    queue.push_back(e.to);
                }
            }
        }
    }

    fn dfs(&mut self, v: usize, t: usize, pushed: u64) -> u64 {
        if v == t {
            return pushed;
        }
        while self.iter[v] < self.graph[v].len() {
            let i = self.iter[v];
            let (to, cap) = (self.graph[v][i].to, self.graph[v][i].cap);
            if cap > 0 && self.level[v] < self.level[to] {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > 0 {
                    self.graph[v][i].cap -= d;
                    let rev = self.graph[v][i].rev;
                    self.graph[to][rev].cap += d;
                    return d;
                }
            }
            self.iter[v] += 1;
        }
        0
    }

    fn run(&mut self, s: usize, t: usize) -> u64 {
        let mut flow = 0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return flow;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, u64::MAX);
                if f == 0 {
                    break;
                }
                flow += f;
            }
        }
    }
}

pub fn max_flow(network: &FlowNetwork) -> MaxFlow {
    let mut dinic = Dinic::new(network.vertex_count());
    let handles: Vec<(usize, usize)> = network
        .arcs
        .iter()
        .map(|a| dinic.add_edge(a.from, a.to, a.capacity))
        .collect();
    let value = dinic.run(FlowNetwork::SOURCE, FlowNetwork::SINK);
    let arc_flows = network
        .arcs
        .iter()
        .zip(&handles)
        .map(|(arc, &(v, i))| arc.capacity - dinic.graph[v][i].cap)
        .collect();
    dinic.bfs(FlowNetwork::SOURCE);
    let source_side = dinic.level.iter().map(|&l| l >= 0).collect();
    MaxFlow {
        value,
        arc_flows,
        source_side,
    }
}

/// An s-t cut described by the loads `X` whose row vertices sit on the sink
/// side and the slots `Y` whose column vertices sit on the source side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutWitness {
    pub loads: Vec<usize>,
    pub slots: Vec<usize>,
    pub capacity: u64,
}

impl CutWitness {
    /// Tail index with `k_kappa = |Y ∩ segment kappa|`.
    ///
    /// Under canonical supply the tensor entry there is at most
    /// `capacity - sum_i r_i`, so it is negative whenever the cut is short.
    pub fn tail_index(&self, partition: &TimePartition) -> Vec<usize> {
        (1..=partition.segments())
            .map(|kappa| {
                let seg = partition.segment_slots(kappa);
                self.slots.iter().filter(|j| seg.contains(j)).count()
            })
            .collect()
    }
}

/// Cut capacity
/// `sum_j h_j - sum_{j in Y} h_j + sum_i r_i - sum_{i in X} r_i + sum_{i in X, j in Y} [j in window_i]`.
pub fn cut_capacity(
    supply: &[u64],
    specs: &[ServiceSpec],
    partition: &TimePartition,
    loads: &[usize],
    slots: &[usize],
) -> u64 {
    let supply_side: u64 =
        supply.iter().sum::<u64>() - slots.iter().map(|&j| supply[j]).sum::<u64>();
    let demand_side: u64 = specs.iter().map(|s| s.r as u64).sum::<u64>()
        - loads.iter().map(|&i| specs[i].r as u64).sum::<u64>();
    let crossing: u64 = loads
        .iter()
        .map(|&i| {
            let w = partition.window(specs[i].a, specs[i].d);
            slots.iter().filter(|j| w.contains(j)).count() as u64
        })
        .sum();
    supply_side + demand_side + crossing
}

fn specs_of(network: &FlowNetwork) -> impl Iterator<Item = (usize, usize)> + '_ {
    network.arcs.iter().filter_map(|a| match a.kind {
        ArcKind::Unit { slot, load } => Some((load, slot)),
        _ => None,
    })
}

fn cut_from_flow(network: &FlowNetwork, flow: &MaxFlow) -> CutWitness {
    let loads: Vec<usize> = (0..network.loads)
        .filter(|&i| !flow.source_side[network.row(i)])
        .collect();
    let slots: Vec<usize> = (0..network.slots)
        .filter(|&j| flow.source_side[network.column(j)])
        .collect();
    let supply_side: u64 = (0..network.slots)
        .filter(|&j| !flow.source_side[network.column(j)])
        .map(|j| network.supply[j])
        .sum();
    let demand_side: u64 = (0..network.loads)
        .filter(|&i| flow.source_side[network.row(i)])
        .map(|i| network.durations[i])
        .sum();
    let crossing = specs_of(network)
        .filter(|&(load, slot)| {
            flow.source_side[network.column(slot)] && !flow.source_side[network.row(load)]
        })
        .count() as u64;
    CutWitness {
        loads,
        slots,
        capacity: supply_side + demand_side + crossing,
    }
}

/// Minimum cut read off the residual graph at maximum flow.
pub fn min_cut_witness(network: &FlowNetwork) -> CutWitness {
    cut_from_flow(network, &max_flow(network))
}

/// An `m x n` (0,1) power schedule; `entries[i][j] = 1` when load `i` is
/// served in slot `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AllocationMatrix {
    pub entries: Vec<Vec<u8>>,
}

impl AllocationMatrix {
    /// Checks row sums, window zeros and column caps.
    pub fn validate(
        &self,
        supply: &[u64],
        specs: &[ServiceSpec],
        partition: &TimePartition,
    ) -> std::result::Result<(), String> {
        if self.entries.len() != specs.len() {
            return Err(format!(
                "matrix has {} rows for {} loads",
                self.entries.len(),
                specs.len()
            ));
        }
        let n = supply.len();
        let mut column = vec![0u64; n];
        for (i, (row, spec)) in self.entries.iter().zip(specs).enumerate() {
            if row.len() != n {
                return Err(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            let window = partition.window(spec.a, spec.d);
            let mut sum = 0usize;
            for (j, &e) in row.iter().enumerate() {
                match e {
                    0 => {}
                    1 if window.contains(&j) => {
                        sum += 1;
                        column[j] += 1;
                    }
                    1 => return Err(format!("load {i} is served outside its window at slot {j}")),
                    _ => return Err(format!("entry ({i}, {j}) is {e}, not 0 or 1")),
                }
            }
            if sum != spec.r {
                return Err(format!("row {i} sums to {sum}, duration is {}", spec.r));
            }
        }
        if let Some(j) = (0..n).find(|&j| column[j] > supply[j]) {
            return Err(format!(
                "slot {j} serves {} loads with supply {}",
                column[j], supply[j]
            ));
        }
        Ok(())
    }
}

/// A feasible allocation read from saturated unit arcs of a maximum flow.
pub fn extract_allocation(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    partition: &TimePartition,
) -> Result<AllocationMatrix> {
    let network = build_network(supply, demand, partition)?;
    let flow = max_flow(&network);
    let required = network.required();
    if flow.value < required {
        return Err(Error::NotAdequate {
            witness: cut_from_flow(&network, &flow),
            required,
        });
    }
    let mut entries = vec![vec![0u8; network.slots]; network.loads];
    for (arc, &f) in network.arcs.iter().zip(&flow.arc_flows) {
        if let ArcKind::Unit { slot, load } = arc.kind {
            entries[load][slot] = f as u8;
        }
    }
    Ok(AllocationMatrix { entries })
}

/// Minimum total supply to add (anywhere) so the instance becomes adequate:
/// `sum_i r_i - maxflow`.
pub fn adequacy_gap(
    supply: &SupplyProfile,
    demand: &DemandCollection,
    partition: &TimePartition,
) -> Result<u64> {
    let network = build_network(supply, demand, partition)?;
    Ok(network.required() - max_flow(&network).value)
}

/// Gap of a single-segment instance given directly by integer supply and
/// durations (durations of 0 are ignored).
pub(crate) fn single_segment_gap(supply: &[u64], durations: &[u64]) -> u64 {
    let n = supply.len();
    if n == 0 {
        return durations.iter().sum();
    }
    let partition = TimePartition::single(n).expect("valid single segment");
    let specs: Vec<ServiceSpec> = durations
        .iter()
        .filter(|&&r| r > 0)
        .map(|&r| ServiceSpec::new(r as usize, 0, 1))
        .collect();
    let network = network_from_parts(supply, &specs, &partition);
    network.required() - max_flow(&network).value
}
