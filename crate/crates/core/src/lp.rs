//! Dense revised simplex for `max c'x  s.t.  Ax <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible because `b >= 0`, so no phase one is needed.
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! leaving variable on ratio ties), which rules out cycling and makes the
//! pivot sequence a pure function of the input.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals; nonnegative at optimality.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    /// Slack `b_i - a_i'x` of each row.
    pub fn slacks(&self, lp: &LinearProgram) -> Vec<f64> {
        lp.rows
            .iter()
            .zip(&lp.rhs)
            .map(|(row, b)| b - dot(row, &self.x))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Simplex<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n: usize,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.objective.len();
        let basis: Vec<usize> = (n..n + m).collect();
        let mut is_basic = vec![false; n + m];
        basis.iter().for_each(|&j| is_basic[j] = true);
        let binv = (0..m)
            .map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            lp,
            m,
            n,
            basis,
            is_basic,
            binv,
            xb: lp.rhs.clone(),
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.lp.objective[j]
        } else {
            0.0
        }
    }

    /// Column `j` of `[A | I]`.
    fn column(&self, j: usize) -> Vec<f64> {
        if j < self.n {
            self.lp.rows.iter().map(|row| row[j]).collect()
        } else {
            let mut e = vec![0.0; self.m];
            e[j - self.n] = 1.0;
            e
        }
    }

    fn duals(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (i, &bj) in self.basis.iter().enumerate() {
            let c = self.cost(bj);
            if c != 0.0 {
                for (yk, bik) in y.iter_mut().zip(&self.binv[i]) {
                    *yk += c * bik;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            self.lp.objective[j]
                - self
                    .lp
                    .rows
                    .iter()
                    .zip(y)
                    .map(|(row, yi)| row[j] * yi)
                    .sum::<f64>()
        } else {
            -y[j - self.n]
        }
    }

    fn ftran(&self, col: &[f64]) -> Vec<f64> {
        self.binv.iter().map(|row| dot(row, col)).collect()
    }

    /// Rebuilds `B^-1` from scratch by Gauss-Jordan with partial pivoting.
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a: Vec<Vec<f64>> = vec![vec![0.0; m]; m];
        for (k, &bj) in self.basis.iter().enumerate() {
            for (i, v) in self.column(bj).into_iter().enumerate() {
                a[i][k] = v;
            }
        }
        let mut inv: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
                .expect("nonempty");
            if a[p][c].abs() < 1e-12 {
                return Err(Error::SolverFailure("singular basis".into()));
            }
            a.swap(p, c);
            inv.swap(p, c);
            let piv = a[c][c];
            for k in 0..m {
                a[c][k] /= piv;
                inv[c][k] /= piv;
            }
            for r in 0..m {
                if r != c && a[r][c] != 0.0 {
                    let f = a[r][c];
                    for k in 0..m {
                        a[r][k] -= f * a[c][k];
                        inv[r][k] -= f * inv[c][k];
                    }
                }
            }
        }
        // inv is B^-1 with rows indexed by basis position
        self.binv = inv;
        self.xb = self.ftran(&self.lp.rhs);
        for v in &mut self.xb {
            if *v < 0.0 && *v > -PIVOT_TOL {
                *v = 0.0;
            }
        }
        Ok(())
    }

    fn pivot(&mut self, leave: usize, enter: usize, u: &[f64]) {
        let piv = u[leave];
        let pivot_row: Vec<f64> = self.binv[leave].iter().map(|v| v / piv).collect();
        let t = self.xb[leave] / piv;
        for i in 0..self.m {
            if i == leave || u[i] == 0.0 {
                continue;
            }
            let f = u[i];
            for (b, p) in self.binv[i].iter_mut().zip(&pivot_row) {
                *b -= f * p;
            }
            self.xb[i] -= f * t;
            if self.xb[i] < 0.0 && self.xb[i] > -PIVOT_TOL {
                self.xb[i] = 0.0;
            }
        }
        self.binv[leave] = pivot_row;
        self.xb[leave] = t;
        self.is_basic[self.basis[leave]] = false;
        self.is_basic[enter] = true;
        self.basis[leave] = enter;
    }
}

/// Solves the program; fails on negative right-hand sides, unboundedness or
/// when the iteration cap `10 (rows + cols)^2` is hit.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    if lp.rhs.len() != m || lp.rows.iter().any(|r| r.len() != n) {
        return Err(Error::SolverFailure("inconsistent LP dimensions".into()));
    }
    if let Some(b) = lp.rhs.iter().find(|b| b.is_nan() || **b < 0.0) {
        return Err(Error::InfeasibleModel(format!(
            "right-hand side {b} is negative; the slack basis is infeasible"
        )));
    }
    let cap = 10 * (m + n) * (m + n);
    let mut s = Simplex::new(lp);
    let mut iterations = 0;
    loop {
        let y = s.duals();
        let enter = (0..n + m).find(|&j| !s.is_basic[j] && s.reduced_cost(j, &y) > COST_TOL);
        let Some(enter) = enter else {
            break;
        };
        if iterations >= cap {
            return Err(Error::SolverFailure(format!("iteration cap {cap} reached")));
        }
        let u = s.ftran(&s.column(enter));
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if u[i] > PIVOT_TOL {
                let ratio = s.xb[i].max(0.0) / u[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((l, best)) => {
                        if ratio < best - PIVOT_TOL
                            || (ratio <= best + PIVOT_TOL && s.basis[i] < s.basis[l])
                        {
                            Some((i, ratio))
                        } else {
                            Some((l, best))
                        }
                    }
                };
            }
        }
        let Some((leave, _)) = leave else {
            return Err(Error::SolverFailure(format!(
                "objective unbounded along column {enter}"
            )));
        };
        s.pivot(leave, enter, &u);
        iterations += 1;
        if iterations % REFACTOR_EVERY == 0 {
            s.refactor()?;
        }
    }
    s.refactor()?;
    let mut x = vec![0.0; n];
    for (i, &bj) in s.basis.iter().enumerate() {
        if bj < n {
            x[bj] = s.xb[i].max(0.0);
        }
    }
    let duals: Vec<f64> = s.duals().into_iter().map(|v| v.max(0.0)).collect();
    Ok(LpSolution {
        objective: dot(&lp.objective, &x),
        dual_objective: dot(&lp.rhs, &duals),
        x,
        duals,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_program() {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        let lp = LinearProgram {
            objective: vec![3.0, 5.0],
            rows: vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            rhs: vec![4.0, 12.0, 18.0],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 6.0).abs() < 1e-12);
        assert!((sol.duals[0]).abs() < 1e-12);
        assert!((sol.duals[1] - 1.5).abs() < 1e-12);
        assert!((sol.duals[2] - 1.0).abs() < 1e-12);
        assert!((sol.dual_objective - 36.0).abs() < 1e-12);
    }

    #[test]
    fn zero_objective_and_empty_program() {
        let lp = LinearProgram {
            objective: vec![0.0, 0.0],
            rows: vec![vec![1.0, 1.0]],
            rhs: vec![1.0],
        };
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.iterations, 0);
        let empty = LinearProgram {
            objective: vec![],
            rows: vec![],
            rhs: vec![],
        };
        assert_eq!(solve(&empty).unwrap().objective, 0.0);
    }

    #[test]
    fn unbounded_and_infeasible_are_errors() {
        let lp = LinearProgram {
            objective: vec![1.0, 0.0],
            rows: vec![vec![0.0, 1.0]],
            rhs: vec![1.0],
        };
        assert!(matches!(solve(&lp), Err(Error::SolverFailure(_))));
        let lp = LinearProgram {
            objective: vec![1.0],
            rows: vec![vec![1.0]],
            rhs: vec![-1.0],
        };
        assert!(matches!(solve(&lp), Err(Error::InfeasibleModel(_))));
    }

    #[test]
    fn degenerate_program_terminates() {
        // Beale's cycling example (in max form); Bland's rule must terminate.
        let lp = LinearProgram {
            objective: vec![0.75, -150.0, 0.02, -6.0],
            rows: vec![
                vec![0.25, -60.0, -0.04, 9.0],
                vec![0.5, -90.0, -0.02, 3.0],
                vec![0.0, 0.0, 1.0, 0.0],
            ],
            rhs: vec![0.0, 0.0, 1.0],
        };
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 0.05).abs() < 1e-9);
        assert!((sol.objective - sol.dual_objective).abs() < 1e-9);
    }
}
