//! Brute-force oracles and random instance generators shared by the
//! integration tests and the acceptance harness. Nothing here calls into the
//! algorithms under test.

#![allow(dead_code)]

use std::collections::HashSet;

use mamd::{DemandCollection, ServiceSpec, SupplyProfile, TimePartition};
use rand::seq::SliceRandom;
use rand::Rng;

/// A small integer instance: breakpoints, per-slot supply, `(r, a, d)` loads.
#[derive(Debug, Clone)]
pub struct Case {
    pub breakpoints: Vec<usize>,
    pub supply: Vec<u64>,
    pub loads: Vec<(usize, usize, usize)>,
}

impl Case {
    pub fn partition(&self) -> TimePartition {
        TimePartition::new(self.breakpoints.clone()).unwrap()
    }

    pub fn supply_profile(&self) -> SupplyProfile {
        SupplyProfile::from_integers(&self.supply)
    }

    pub fn demand(&self) -> DemandCollection {
        DemandCollection::from_triples(&self.loads)
    }

    pub fn required(&self) -> u64 {
        self.loads.iter().map(|l| l.0 as u64).sum()
    }

    pub fn nu(&self) -> usize {
        self.breakpoints.len() - 1
    }
}

/// Random breakpoints `0 = n_0 < ... < n_nu = n` with `1 <= n <= max_n` and
/// `1 <= nu <= max_nu`.
pub fn random_breakpoints<R: Rng>(rng: &mut R, max_nu: usize, max_n: usize) -> Vec<usize> {
    let n = rng.gen_range(1..=max_n);
    let nu = rng.gen_range(1..=max_nu.min(n));
    let mut inner: Vec<usize> = (1..n).collect();
    inner.shuffle(rng);
    let mut b: Vec<usize> = inner.into_iter().take(nu - 1).collect();
    b.push(0);
    b.push(n);
    b.sort_unstable();
    b
}

/// A uniformly chosen valid service for the breakpoints.
pub fn random_service<R: Rng>(rng: &mut R, b: &[usize]) -> (usize, usize, usize) {
    let nu = b.len() - 1;
    let a = rng.gen_range(0..nu);
    let d = rng.gen_range(a + 1..=nu);
    let r = rng.gen_range(1..=b[d] - b[a]);
    (r, a, d)
}

pub fn random_case<R: Rng>(
    rng: &mut R,
    max_nu: usize,
    max_n: usize,
    max_m: usize,
    max_h: u64,
) -> Case {
    let breakpoints = random_breakpoints(rng, max_nu, max_n);
    let n = *breakpoints.last().unwrap();
    let supply = (0..n).map(|_| rng.gen_range(0..=max_h)).collect();
    let m = rng.gen_range(0..=max_m);
    let loads = (0..m).map(|_| random_service(rng, &breakpoints)).collect();
    Case {
        breakpoints,
        supply,
        loads,
    }
}

/// Sorts supply descending inside each segment.
pub fn sorted_segments(b: &[usize], supply: &[u64]) -> Vec<u64> {
    let mut h = supply.to_vec();
    for w in b.windows(2) {
        h[w[0]..w[1]].sort_unstable_by(|x, y| y.cmp(x));
    }
    h
}

/// Every tail index in lexicographic order.
pub fn all_indices(b: &[usize]) -> Vec<Vec<usize>> {
    let lens: Vec<usize> = b.windows(2).map(|w| w[1] - w[0]).collect();
    let mut out = Vec::new();
    let mut k = vec![0; lens.len()];
    loop {
        out.push(k.clone());
        let mut c = lens.len();
        loop {
            if c == 0 {
                return out;
            }
            c -= 1;
            if k[c] < lens[c] {
                k[c] += 1;
                break;
            }
            k[c] = 0;
        }
    }
}

/// Structure tensor entry straight from its definition: supply left after
/// removing the `k_c` largest slots of each segment, minus what every load
/// still needs if it got a slot in each of those positions of its window.
pub fn direct_entry(
    b: &[usize],
    supply: &[u64],
    loads: &[(usize, usize, usize)],
    k: &[usize],
) -> i64 {
    let h = sorted_segments(b, supply);
    let mut tail = 0i64;
    for (c, w) in b.windows(2).enumerate() {
        tail += h[w[0] + k[c]..w[1]].iter().sum::<u64>() as i64;
    }
    let need: i64 = loads
        .iter()
        .map(|&(r, a, d)| {
            let served: usize = k[a..d].iter().sum();
            r.saturating_sub(served) as i64
        })
        .sum();
    tail - need
}

/// Whole tensor by the definition, lexicographic order.
pub fn direct_tensor(b: &[usize], supply: &[u64], loads: &[(usize, usize, usize)]) -> Vec<i64> {
    all_indices(b)
        .iter()
        .map(|k| direct_entry(b, supply, loads, k))
        .collect()
}

/// Exhaustive search for a 0-1 allocation: each load picks `r` distinct
/// slots of its window, no slot used more than its supply. Failed
/// `(load, remaining supply)` states are memoized.
pub fn exhaustive_feasible(b: &[usize], supply: &[u64], loads: &[(usize, usize, usize)]) -> bool {
    fn go(
        i: usize,
        caps: &mut Vec<u64>,
        b: &[usize],
        loads: &[(usize, usize, usize)],
        dead: &mut HashSet<(usize, Vec<u64>)>,
    ) -> bool {
        if i == loads.len() {
            return true;
        }
        if dead.contains(&(i, caps.clone())) {
            return false;
        }
        let (r, a, d) = loads[i];
        let slots: Vec<usize> = (b[a]..b[d]).filter(|&j| caps[j] > 0).collect();
        let ok = choose(&slots, r, 0, caps, &mut |caps| {
            go(i + 1, caps, b, loads, dead)
        });
        if !ok {
            dead.insert((i, caps.clone()));
        }
        ok
    }
    // every r-subset of `slots[from..]`, taking one unit from each chosen slot
    fn choose(
        slots: &[usize],
        r: usize,
        from: usize,
        caps: &mut Vec<u64>,
        next: &mut dyn FnMut(&mut Vec<u64>) -> bool,
    ) -> bool {
        if r == 0 {
            return next(caps);
        }
        if slots.len() - from < r {
            return false;
        }
        for p in from..slots.len() {
            if slots.len() - p < r {
                break;
            }
            caps[slots[p]] -= 1;
            let ok = choose(slots, r - 1, p + 1, caps, next);
            caps[slots[p]] += 1;
            if ok {
                return true;
            }
        }
        false
    }
    if loads.iter().any(|&(r, a, d)| r > b[d] - b[a]) {
        return false;
    }
    go(0, &mut supply.to_vec(), b, loads, &mut HashSet::new())
}

/// Classic constructive realization of a 0-1 matrix with row sums exactly
/// `rows` and column sums at most `cols`: rows by decreasing sum, each takes
/// the columns with the most remaining capacity. Returns the matrix if it
/// exists.
pub fn realize_degree_sequence(rows: &[u64], cols: &[u64]) -> Option<Vec<Vec<u8>>> {
    let mut left = cols.to_vec();
    let mut m = vec![vec![0u8; cols.len()]; rows.len()];
    let mut row_order: Vec<usize> = (0..rows.len()).collect();
    row_order.sort_by(|&x, &y| rows[y].cmp(&rows[x]));
    for i in row_order {
        let r = rows[i] as usize;
        if r > cols.len() {
            return None;
        }
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by(|&x, &y| left[y].cmp(&left[x]).then(x.cmp(&y)));
        for &j in &order[..r] {
            if left[j] == 0 {
                return None;
            }
            left[j] -= 1;
            m[i][j] = 1;
        }
    }
    Some(m)
}

/// Smallest total extra supply making the instance feasible, by trying
/// every augmentation of size 0, 1, 2, ... in turn. No slot ever needs
/// more than one unit per load.
pub fn minimal_augmentation(b: &[usize], supply: &[u64], loads: &[(usize, usize, usize)]) -> u64 {
    let m = loads.len() as u64;
    let bounds: Vec<u64> = supply.iter().map(|&h| m.saturating_sub(h)).collect();
    fn place(
        j: usize,
        t: u64,
        bounds: &[u64],
        h: &mut Vec<u64>,
        check: &mut dyn FnMut(&[u64]) -> bool,
    ) -> bool {
        if j == bounds.len() {
            return t == 0 && check(h);
        }
        let rest: u64 = bounds[j + 1..].iter().sum();
        for x in t.saturating_sub(rest)..=t.min(bounds[j]) {
            h[j] += x;
            let ok = place(j + 1, t - x, bounds, h, check);
            h[j] -= x;
            if ok {
                return true;
            }
        }
        false
    }
    for t in 0.. {
        let mut h = supply.to_vec();
        if place(0, t, &bounds, &mut h, &mut |h| {
            exhaustive_feasible(b, h, loads)
        }) {
            return t;
        }
        assert!(
            t <= bounds.iter().sum::<u64>(),
            "no augmentation within bounds"
        );
    }
    unreachable!()
}

pub fn spec(t: (usize, usize, usize)) -> ServiceSpec {
    ServiceSpec::new(t.0, t.1, t.2)
}

/// Three-segment, six-slot reference instance with five loads.
pub fn reference_case() -> Case {
    Case {
        breakpoints: vec![0, 1, 4, 6],
        supply: vec![2, 4, 2, 5, 1, 3],
        loads: vec![(2, 0, 2), (3, 0, 2), (5, 0, 3), (2, 1, 3), (2, 1, 2)],
    }
}

/// A known feasible allocation for [`reference_case`].
pub fn reference_matrix() -> Vec<Vec<u8>> {
    vec![
        vec![0, 1, 0, 1, 0, 0],
        vec![0, 1, 1, 1, 0, 0],
        vec![1, 1, 0, 1, 1, 1],
        vec![0, 0, 0, 1, 0, 1],
        vec![0, 1, 0, 1, 0, 0],
    ]
}

/// One purchasable item for the grid search: a service, its unit value and
/// the most power the buyer takes.
#[derive(Debug, Clone, Copy)]
pub struct GridItem {
    pub service: (usize, usize, usize),
    pub value: f64,
    pub cap: f64,
}

/// Whether buying `levels` of the items fits the supply: for every tail
/// index, the power still owed to the services is at most the supply tail.
pub fn levels_fit(b: &[usize], supply: &[u64], items: &[GridItem], levels: &[f64]) -> bool {
    all_indices(b).iter().all(|k| {
        let tail = direct_entry(b, supply, &[], k) as f64;
        let owed: f64 = items
            .iter()
            .zip(levels)
            .map(|(it, l)| {
                let (r, a, d) = it.service;
                l * r.saturating_sub(k[a..d].iter().sum()) as f64
            })
            .sum();
        owed <= tail + 1e-9
    })
}

/// Best total value over all levels on a `step` grid inside `[0, cap]`.
pub fn grid_welfare(b: &[usize], supply: &[u64], items: &[GridItem], step: f64) -> f64 {
    let counts: Vec<usize> = items
        .iter()
        .map(|it| (it.cap / step).round() as usize)
        .collect();
    let mut idx = vec![0usize; items.len()];
    let mut best = 0.0f64;
    loop {
        let levels: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        let value: f64 = items.iter().zip(&levels).map(|(it, l)| it.value * l).sum();
        if value > best && levels_fit(b, supply, items, &levels) {
            best = value;
        }
        let mut c = 0;
        loop {
            if c == items.len() {
                return best;
            }
            if idx[c] < counts[c] {
                idx[c] += 1;
                break;
            }
            idx[c] = 0;
            c += 1;
        }
    }
}

/// Random market: at most four consumer types over at most six services,
/// integer values and caps.
pub fn random_market<R: Rng>(rng: &mut R) -> mamd::Instance {
    use mamd::market::ConsumerType;
    let b = random_breakpoints(rng, 3, 6);
    let partition = TimePartition::new(b.clone()).unwrap();
    let n = *b.last().unwrap();
    let supply: Vec<u64> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
    let mut pool = partition.services();
    pool.shuffle(rng);
    pool.truncate(rng.gen_range(1..=6));
    let types = rng.gen_range(1..=4);
    let consumers = (0..types)
        .map(|t| {
            let mut mine = pool.clone();
            mine.shuffle(rng);
            mine.truncate(rng.gen_range(1..=pool.len()));
            let values: Vec<(ServiceSpec, f64)> = mine
                .into_iter()
                .map(|s| (s, rng.gen_range(1..=10) as f64))
                .collect();
            ConsumerType::new(format!("t{t}"), rng.gen_range(1..=4) as f64, &values)
        })
        .collect();
    mamd::Instance::new(
        partition,
        SupplyProfile::from_integers(&supply),
        DemandCollection::default(),
        consumers,
    )
    .unwrap()
}
