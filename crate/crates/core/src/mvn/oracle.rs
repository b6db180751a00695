//! Brute-force rectangle probabilities for models of dimension at most 3.
//!
//! Works directly on the factor rows: the event `lower <= U z <= upper` is a
//! polytope in `z`-space, and the standard Gaussian density is integrated
//! over it coordinate by coordinate with adaptive Gauss–Kronrod. Only the
//! density is evaluated, never the normal CDF, so the oracle shares no code
//! path with the sequential-conditioning engine.

use super::genz::validate;
use super::normal::std_normal_pdf;
use super::{Method, ProbabilityEstimate};
use crate::error::{Error, Result};
use crate::model::{CorrelationModel, ThresholdVector};
use crate::quad::{integrate, integrate_pieces};

/// Absolute accuracy target of [`oracle_rect_prob`].
pub const ORACLE_TOL: f64 = 1e-7;

/// Integration window per coordinate; the mass outside is below 3e-19.
const WINDOW: f64 = 9.0;

/// Loadings below this are treated as zero.
const COEFF_EPS: f64 = 1e-13;

struct Row {
    coeffs: Vec<f64>,
    lo: f64,
    hi: f64,
}

/// `Pr(lower_i <= X_i <= upper_i for all i)` by iterated adaptive quadrature.
pub fn oracle_rect_prob(model: &CorrelationModel, lower: &[f64], upper: &[f64]) -> Result<ProbabilityEstimate> {
    let d = model.dim();
    if d > 3 {
        return Err(Error::DimensionTooLarge(d));
    }
    validate(model, lower, upper)?;
    let rows: Vec<Row> = model
        .factor_rows()
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(_, (lo, hi))| lo.is_finite() || hi.is_finite())
        .map(|(u, (&lo, &hi))| Row { coeffs: u.clone(), lo, hi })
        .collect();
    let mut prefix = Vec::with_capacity(d);
    let value = level(&rows, d, &mut prefix);
    Ok(ProbabilityEstimate {
        value: value.clamp(0.0, 1.0),
        stderr: ORACLE_TOL,
        samples: 0,
        method: Method::QuadratureOracle,
        seed: None,
    })
}

pub fn oracle_symmetric_rect_prob(model: &CorrelationModel, c: &ThresholdVector) -> Result<ProbabilityEstimate> {
    let upper = c.as_slice().to_vec();
    let lower: Vec<f64> = upper.iter().map(|v| -v).collect();
    oracle_rect_prob(model, &lower, &upper)
}

/// A bound on coordinate `k` of the form `slope * z_k + intercept`, after
/// substituting the fixed prefix and solving the row for its last nonzero
/// coordinate.
#[derive(Clone, Copy)]
struct Bound {
    intercept: f64,
    slope: f64,
}

/// Integral over coordinates `prefix.len()..d` given the fixed prefix.
fn level(rows: &[Row], d: usize, prefix: &mut Vec<f64>) -> f64 {
    let k = prefix.len();
    // Interval for z_k from rows whose last nonzero coordinate is k.
    let (mut lo, mut hi) = (-WINDOW, WINDOW);
    for row in rows {
        let last = last_nonzero(&row.coeffs);
        let mu: f64 = row.coeffs[..k].iter().zip(prefix.iter()).map(|(a, b)| a * b).sum();
        match last {
            Some(j) if j == k => {
                let p = row.coeffs[k];
                let (a, b) = ((row.lo - mu) / p, (row.hi - mu) / p);
                let (a, b) = if p < 0.0 { (b, a) } else { (a, b) };
                lo = lo.max(a);
                hi = hi.min(b);
            }
            // Fully determined by the prefix; only reachable for rows that
            // mix earlier coordinates.
            Some(j) if j < k && (mu < row.lo || mu > row.hi) => return 0.0,
            None if row.lo > 0.0 || row.hi < 0.0 => return 0.0,
            _ => {}
        }
    }
    if !(hi > lo) {
        return 0.0;
    }
    let tol = match d - k {
        1 => 1e-12,
        2 => 1e-10,
        _ => 1e-9,
    };
    if k + 1 == d {
        return integrate(std_normal_pdf, lo, hi, tol).value;
    }
    let mut points = vec![lo];
    if k + 2 == d {
        points.extend(inner_breakpoints(rows, k, prefix, lo, hi));
    } else if k == 0 && d == 3 {
        // The inner area is piecewise smooth between the vertices' first
        // coordinates, and zero outside their range. Without these cuts a
        // thin support can fall between every quadrature node.
        let cuts = vertex_coordinates(rows);
        let (Some(&first), Some(&last)) = (cuts.first(), cuts.last()) else { return 0.0 };
        let (lo2, hi2) = (lo.max(first), hi.min(last));
        if !(hi2 > lo2) {
            return 0.0;
        }
        points = vec![lo2];
        points.extend(cuts.into_iter().filter(|&x| x > lo2 && x < hi2));
        points.push(hi2);
        let mut f = |x: f64| {
            prefix.push(x);
            let v = std_normal_pdf(x) * level(rows, d, prefix);
            prefix.pop();
            v
        };
        return integrate_pieces(&mut f, &points, tol).value;
    }
    points.push(hi);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut f = |x: f64| {
        prefix.push(x);
        let v = std_normal_pdf(x) * level(rows, d, prefix);
        prefix.pop();
        v
    };
    integrate_pieces(&mut f, &points, tol).value
}

/// Sorted first coordinates of the vertices of the 3-D polytope
/// `{z : lo_i <= <u_i, z> <= hi_i, |z_j| <= WINDOW}`; empty if it has none.
fn vertex_coordinates(rows: &[Row]) -> Vec<f64> {
    let mut planes: Vec<([f64; 3], f64)> = Vec::new();
    for row in rows {
        let u = [row.coeffs[0], row.coeffs[1], row.coeffs[2]];
        for edge in [row.lo, row.hi] {
            if edge.is_finite() {
                planes.push((u, edge));
            }
        }
    }
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        planes.push((e, WINDOW));
        planes.push((e, -WINDOW));
    }
    let feasible = |z: &[f64; 3]| {
        let tol = 1e-9;
        z.iter().all(|v| v.abs() <= WINDOW + tol)
            && rows.iter().all(|r| {
                let v = r.coeffs[0] * z[0] + r.coeffs[1] * z[1] + r.coeffs[2] * z[2];
                v >= r.lo - tol && v <= r.hi + tol
            })
    };
    let mut out = Vec::new();
    for a in 0..planes.len() {
        for b in a + 1..planes.len() {
            for c in b + 1..planes.len() {
                if let Some(z) =
                    solve3([planes[a].0, planes[b].0, planes[c].0], [planes[a].1, planes[b].1, planes[c].1])
                {
                    if feasible(&z) {
                        out.push(z[0]);
                    }
                }
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    out
}

/// Cramer's rule; `None` for (nearly) parallel planes.
fn solve3(m: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let det = det3(m);
    if det.abs() <= 1e-12 {
        return None;
    }
    let mut z = [0.0; 3];
    for (col, zc) in z.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *zc = det3(mc) / det;
    }
    Some(z)
}

fn last_nonzero(coeffs: &[f64]) -> Option<usize> {
    let scale = coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    coeffs.iter().rposition(|v| v.abs() > COEFF_EPS * scale.max(1.0))
}

/// Where the inner (last) coordinate's interval changes its active
/// constraints as a function of coordinate `k`: pairwise crossings of the
/// linear bound functions, which are the only kinks of the inner integral.
fn inner_breakpoints(rows: &[Row], k: usize, prefix: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let inner = k + 1;
    let mut bounds: Vec<Bound> =
        vec![Bound { intercept: -WINDOW, slope: 0.0 }, Bound { intercept: WINDOW, slope: 0.0 }];
    for row in rows {
        if last_nonzero(&row.coeffs) != Some(inner) {
            continue;
        }
        let mu: f64 = row.coeffs[..k].iter().zip(prefix).map(|(a, b)| a * b).sum();
        let p = row.coeffs[inner];
        let slope = -row.coeffs[k] / p;
        for edge in [row.lo, row.hi] {
            if edge.is_finite() {
                bounds.push(Bound { intercept: (edge - mu) / p, slope });
            }
        }
    }
    let mut out = Vec::new();
    for (i, a) in bounds.iter().enumerate() {
        for b in &bounds[i + 1..] {
            let ds = a.slope - b.slope;
            if ds.abs() > 1e-14 {
                let x = (b.intercept - a.intercept) / ds;
                if x > lo && x < hi {
                    out.push(x);
                }
            }
        }
    }
    out
}
