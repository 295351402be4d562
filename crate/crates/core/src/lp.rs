//! Dense two-phase primal simplex for `min c.x  s.t.  A x = b, x >= 0`.
//!
//! Entering and leaving variables follow Bland's rule, so the method
//! terminates on degenerate problems at the cost of some extra pivots.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const INFEASIBILITY_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Basic variable per retained constraint row.
    pub basis: Vec<usize>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// columns at or beyond this index may never enter
    enter_limit: usize,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width - 1]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let factor = row[col];
                if factor != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= factor * pv;
                    }
                    row[col] = 0.0;
                }
            }
        }
        self.basis[r] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = cost.to_vec();
        for (i, &bv) in self.basis.iter().enumerate() {
            let cb = cost[bv];
            if cb != 0.0 {
                for (rj, tij) in r.iter_mut().zip(&self.rows[i]) {
                    *rj -= cb * tij;
                }
            }
        }
        r
    }

    /// Runs simplex iterations for `cost` (length `width - 1`).
    fn optimise(&mut self, cost: &[f64], pivots: &mut usize) -> Result<()> {
        loop {
            let reduced = self.reduced_costs(cost);
            let Some(col) = (0..self.enter_limit).find(|&j| reduced[j] < -PIVOT_TOL) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - PIVOT_TOL
                                || (ratio <= best + PIVOT_TOL && self.basis[i] < self.basis[k])
                            {
                                Some((i, ratio.min(best)))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::LpUnbounded);
            };
            self.pivot(r, col);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::LpIterationLimit);
            }
        }
    }
}

/// Minimises `cost . x` subject to `a x = b`, `x >= 0`.
pub fn minimise(cost: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpResult> {
    let n = cost.len();
    let m = a.len();
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: b.len(),
        });
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: row.len(),
        });
    }
    let width = n + m + 1;
    let rows: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (row, &rhs))| {
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            let mut t = Vec::with_capacity(width);
            t.extend(row.iter().map(|v| sign * v));
            t.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            t.push(sign * rhs);
            t
        })
        .collect();
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        enter_limit: n,
        width,
    };
    let mut pivots = 0;

    // phase 1: minimise the sum of artificials
    let mut phase1 = vec![0.0; width - 1];
    phase1[n..n + m].iter_mut().for_each(|v| *v = 1.0);
    tab.optimise(&phase1, &mut pivots)?;
    let infeasibility: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i))
        .sum();
    if infeasibility > INFEASIBILITY_TOL {
        return Err(Error::LpInfeasible);
    }

    // drive remaining artificials out of the basis; rows where that is
    // impossible are linearly dependent and are dropped
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                Some(j) => {
                    tab.pivot(i, j);
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    let mut phase2 = cost.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    tab.optimise(&phase2, &mut pivots)?;

    let mut x = vec![0.0; n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        x[bv] = tab.rhs(i).max(0.0);
    }
    let objective = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpResult {
        x,
        objective,
        basis: tab.basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_transport_problem() {
        // min x0 + 2 x1 + 3 x2  s.t. x0 + x1 + x2 = 1, x1 + x2 = 0.5
        let r = minimise(
            &[1.0, 2.0, 3.0],
            &[vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]],
            &[1.0, 0.5],
        )
        .unwrap();
        assert!((r.objective - 1.5).abs() < 1e-12);
        assert!((r.x[0] - 0.5).abs() < 1e-12 && (r.x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let r = minimise(
            &[1.0, 0.0],
            &[vec![1.0, 1.0], vec![2.0, 2.0]],
            &[1.0, 2.0],
        )
        .unwrap();
        assert!(r.objective.abs() < 1e-12);
        assert_eq!(r.basis.len(), 1);
    }

    #[test]
    fn infeasible_and_unbounded() {
        assert!(matches!(
            minimise(&[1.0], &[vec![1.0]], &[-1.0]),
            Err(Error::LpInfeasible)
        ));
        assert!(matches!(
            minimise(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0]),
            Err(Error::LpUnbounded)
        ));
    }

    #[test]
    fn negative_rhs_rows_are_flipped() {
        let r = minimise(&[1.0, 1.0], &[vec![-1.0, -2.0]], &[-2.0]).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-12);
    }
}
