//! Dense tableau simplex for the small systems `A x <= b`, `x` free.
//!
//! Free variables are split as `x = x+ - x-`. Pivoting follows Bland's rule
//! (lowest-index entering column, lowest-index leaving basic variable on ratio
//! ties), which cannot cycle.

use crate::error::{Error, Result};

/// Feasibility tolerance on the phase-one objective.
pub const FEAS_TOL: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 10_000;
const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpOutcome {
    Optimal(f64),
    Unbounded,
}

struct Tableau {
    /// `m` rows of `cols + 1` entries, right-hand side last.
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        self.basis[r] = c;
    }

    /// Minimize `cost . x` over the tableau, starting from the current
    /// feasible basis. Columns in `blocked` never enter.
    fn minimize(&mut self, cost: &[f64], blocked: impl Fn(usize) -> bool) -> Result<LpOutcome> {
        for _ in 0..MAX_ITERATIONS {
            let entering = (0..self.cols).filter(|&j| !blocked(j)).find(|&j| {
                let reduced =
                    cost[j] - self.basis.iter().zip(&self.rows).map(|(&b, row)| cost[b] * row[j]).sum::<f64>();
                reduced < -PIVOT_EPS
            });
            let Some(c) = entering else {
                let value = self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.rhs(i)).sum();
                return Ok(LpOutcome::Optimal(value));
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - PIVOT_EPS || (ratio <= best + PIVOT_EPS && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return Ok(LpOutcome::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(Error::SolverFailure(format!("iteration cap {MAX_ITERATIONS} exceeded")))
    }
}

fn check_shapes(a: &[Vec<f64>], b: &[f64]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let d = a.first().map_or(0, Vec::len);
    if let Some(row) = a.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: row.len() });
    }
    Ok(d)
}

/// Whether `{x : A x <= b}` is nonempty, by phase-one simplex.
pub fn feasible(a: &[Vec<f64>], b: &[f64]) -> Result<bool> {
    let d = check_shapes(a, b)?;
    let m = a.len();
    let artificial_rows: Vec<usize> = (0..m).filter(|&i| b[i] < 0.0).collect();
    if artificial_rows.is_empty() {
        return Ok(true);
    }
    let cols = 2 * d + m + artificial_rows.len();
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art = 0;
    for i in 0..m {
        let mut row = vec![0.0; cols + 1];
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            row[j] = sign * a[i][j];
            row[d + j] = -sign * a[i][j];
        }
        row[2 * d + i] = sign;
        row[cols] = sign * b[i];
        if b[i] < 0.0 {
            let col = 2 * d + m + art;
            row[col] = 1.0;
            basis.push(col);
            art += 1;
        } else {
            basis.push(2 * d + i);
        }
        rows.push(row);
    }
    let mut cost = vec![0.0; cols];
    cost[2 * d + m..].iter_mut().for_each(|c| *c = 1.0);
    let mut tableau = Tableau { rows, basis, cols };
    match tableau.minimize(&cost, |_| false)? {
        LpOutcome::Optimal(v) => Ok(v <= FEAS_TOL),
        LpOutcome::Unbounded => Err(Error::SolverFailure("phase one reported unbounded".into())),
    }
}

/// `sup { c . x : A x <= b }` for `b >= 0` (the origin is feasible).
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let d = check_shapes(a, b)?;
    if c.len() != d && !a.is_empty() {
        return Err(Error::DimensionMismatch { expected: d, got: c.len() });
    }
    if a.is_empty() {
        return Ok(if c.iter().all(|&v| v == 0.0) { LpOutcome::Optimal(0.0) } else { LpOutcome::Unbounded });
    }
    if let Some(v) = b.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidParameters(format!("maximize needs b >= 0, got {v}")));
    }
    let m = a.len();
    let cols = 2 * d + m;
    let rows = (0..m)
        .map(|i| {
            let mut row = vec![0.0; cols + 1];
            for j in 0..d {
                row[j] = a[i][j];
                row[d + j] = -a[i][j];
            }
            row[2 * d + i] = 1.0;
            row[cols] = b[i];
            row
        })
        .collect();
    let mut cost = vec![0.0; cols];
    for j in 0..d {
        cost[j] = -c[j];
        cost[d + j] = c[j];
    }
    let mut tableau = Tableau { rows, basis: (2 * d..2 * d + m).collect(), cols };
    Ok(match tableau.minimize(&cost, |_| false)? {
        LpOutcome::Optimal(v) => LpOutcome::Optimal(-v),
        LpOutcome::Unbounded => LpOutcome::Unbounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> (Vec<Vec<f64>>, Vec<f64>) {
        (vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]], vec![1.0; 4])
    }

    #[test]
    fn support_of_square() {
        let (a, b) = square();
        assert_eq!(maximize(&[1.0, 0.0], &a, &b).unwrap(), LpOutcome::Optimal(1.0));
        match maximize(&[1.0, 1.0], &a, &b).unwrap() {
            LpOutcome::Optimal(v) => assert!((v - 2.0).abs() < 1e-12),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn unbounded_strip() {
        let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        assert_eq!(maximize(&[0.0, 1.0], &a, &[1.0, 1.0]).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn feasibility_of_shifted_systems() {
        // x >= 2 and x <= 3.
        assert!(feasible(&[vec![-1.0], vec![1.0]], &[-2.0, 3.0]).unwrap());
        // x >= 2 and x <= 1.
        assert!(!feasible(&[vec![-1.0], vec![1.0]], &[-2.0, 1.0]).unwrap());
        // Degenerate: x = 2 exactly.
        assert!(feasible(&[vec![-1.0], vec![1.0]], &[-2.0, 2.0]).unwrap());
    }

    #[test]
    fn degenerate_vertex_does_not_cycle() {
        // Many constraints through the same vertex (1, 1).
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in 0..24 {
            let t = k as f64 * std::f64::consts::PI / 48.0;
            let (s, c) = t.sin_cos();
            a.push(vec![c, s]);
            b.push(c + s);
        }
        a.push(vec![-1.0, 0.0]);
        b.push(5.0);
        a.push(vec![0.0, -1.0]);
        b.push(5.0);
        match maximize(&[1.0, 1.0], &a, &b).unwrap() {
            LpOutcome::Optimal(v) => assert!((v - 2.0).abs() < 1e-9, "{v}"),
            o => panic!("{o:?}"),
        }
    }
}
