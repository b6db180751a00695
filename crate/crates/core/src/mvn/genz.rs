//! Rectangle probabilities by sequential conditioning.
//!
//! The covariance is re-factored with a Cholesky sweep whose pivot order is
//! chosen greedily: at each step the variable with the smallest conditional
//! interval probability (given the truncated means of the variables already
//! placed) becomes the next column. Variables whose residual variance falls
//! below [`PIVOT_TOL`] do not open a column; they are attached as extra
//! constraints to the last column they load on, which is what makes
//! rank-deficient models exact rather than approximate.
//!
//! Each column maps one uniform coordinate through `Phi` and its inverse, so
//! the probability becomes an integral over the unit cube of dimension
//! `rank - 1`. That integral is evaluated with a randomly shifted Kronecker
//! (Richtmyer) point set, tent-periodized and antithetic; independent shifts
//! give the standard error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::normal::{interval_prob, quantile, std_normal_cdf, std_normal_pdf};
use super::{Method, ProbabilityEstimate, QmcConfig};
use crate::error::{Error, Result};
use crate::model::{CorrelationModel, ThresholdVector, PIVOT_TOL};

/// Reported standard error of estimates whose integrand is constant.
pub const CLOSED_FORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Constraint {
    /// Loadings on the columns before this one.
    coeffs: Vec<f64>,
    /// Loading on this column (nonzero).
    pivot: f64,
    lo: f64,
    hi: f64,
}

#[derive(Debug, Clone)]
enum Plan {
    /// Some deterministic constraint fails: the probability is zero.
    Empty,
    Columns(Vec<Vec<Constraint>>),
}

/// `Pr(lower_i <= X_i <= upper_i for all i)`.
pub fn rect_prob(
    model: &CorrelationModel,
    lower: &[f64],
    upper: &[f64],
    cfg: &QmcConfig,
) -> Result<ProbabilityEstimate> {
    validate(model, lower, upper)?;
    if cfg.budget < QmcConfig::MIN_BUDGET {
        return Err(Error::BudgetTooSmall { got: cfg.budget, min: QmcConfig::MIN_BUDGET });
    }
    if cfg.replicates < 2 {
        return Err(Error::InvalidParameters(format!(
            "at least 2 randomizations are needed for a standard error, got {}",
            cfg.replicates
        )));
    }
    let columns = match build_plan(model, lower, upper) {
        Plan::Empty => return Ok(closed_form(0.0)),
        Plan::Columns(c) => c,
    };
    if columns.is_empty() {
        return Ok(closed_form(1.0));
    }
    let dims = columns.len() - 1;
    let constant = columns.iter().all(|col| col.iter().all(|c| c.coeffs.iter().all(|&v| v == 0.0)));
    if constant || dims == 0 {
        let mut z = vec![0.0; dims];
        return Ok(closed_form(integrand(&columns, &vec![0.5; dims], &mut z)));
    }

    let pairs = (cfg.budget / (2 * cfg.replicates)).max(1);
    let alphas = kronecker_alphas(dims);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let shifts: Vec<Vec<f64>> = (0..cfg.replicates).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect();

    let means: Vec<f64> = shifts
        .par_iter()
        .map(|shift| {
            let mut w = vec![0.0; dims];
            let mut anti = vec![0.0; dims];
            let mut z = vec![0.0; dims];
            let mut sum = 0.0;
            for k in 1..=pairs {
                for j in 0..dims {
                    let x = (k as f64 * alphas[j] + shift[j]).fract();
                    let t = (2.0 * x - 1.0).abs();
                    w[j] = t;
                    anti[j] = 1.0 - t;
                }
                sum += 0.5 * (integrand(&columns, &w, &mut z) + integrand(&columns, &anti, &mut z));
            }
            sum / pairs as f64
        })
        .collect();

    let r = means.len() as f64;
    let mean = means.iter().sum::<f64>() / r;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(ProbabilityEstimate {
        value: mean.clamp(0.0, 1.0),
        stderr: (var / r).sqrt(),
        samples: 2 * pairs * cfg.replicates,
        method: Method::Qmc,
        seed: Some(cfg.seed),
    })
}

/// `Pr(|X_i| <= c_i for all i)`.
pub fn symmetric_rect_prob(
    model: &CorrelationModel,
    c: &ThresholdVector,
    cfg: &QmcConfig,
) -> Result<ProbabilityEstimate> {
    let upper = c.as_slice().to_vec();
    let lower: Vec<f64> = upper.iter().map(|v| -v).collect();
    rect_prob(model, &lower, &upper, cfg)
}

fn closed_form(value: f64) -> ProbabilityEstimate {
    ProbabilityEstimate::closed_form(value)
}

pub(crate) fn validate(model: &CorrelationModel, lower: &[f64], upper: &[f64]) -> Result<()> {
    let n = model.size();
    if lower.len() != n || upper.len() != n {
        return Err(Error::InvalidBounds(format!(
            "expected {n} bounds, got {} lower and {} upper",
            lower.len(),
            upper.len()
        )));
    }
    for i in 0..n {
        if !(lower[i] <= upper[i]) || lower[i] == f64::INFINITY || upper[i] == f64::NEG_INFINITY {
            return Err(Error::InvalidBounds(format!(
                "coordinate {i}: lower {} must not exceed upper {}",
                lower[i], upper[i]
            )));
        }
    }
    Ok(())
}

fn build_plan(model: &CorrelationModel, lower: &[f64], upper: &[f64]) -> Plan {
    let n = model.size();
    let mut residual = model.sigma_rows();
    let mut loadings: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut remaining: Vec<usize> =
        (0..n).filter(|&i| lower[i] > f64::NEG_INFINITY || upper[i] < f64::INFINITY).collect();
    let mut columns: Vec<Vec<Constraint>> = Vec::new();
    let mut truncated_means: Vec<f64> = Vec::new();

    loop {
        // Retire variables that no longer carry independent variance.
        let mut keep = Vec::with_capacity(remaining.len());
        for &i in &remaining {
            if residual[i][i] > PIVOT_TOL {
                keep.push(i);
                continue;
            }
            let row = &loadings[i];
            let scale = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            match row.iter().rposition(|v| v.abs() > 1e-12 * scale && *v != 0.0) {
                None => {
                    if lower[i] > 0.0 || upper[i] < 0.0 {
                        return Plan::Empty;
                    }
                }
                Some(col) => columns[col].push(Constraint {
                    coeffs: row[..col].to_vec(),
                    pivot: row[col],
                    lo: lower[i],
                    hi: upper[i],
                }),
            }
        }
        remaining = keep;
        if remaining.is_empty() {
            break;
        }

        let conditional = |i: usize| {
            let mu: f64 = loadings[i].iter().zip(&truncated_means).map(|(l, y)| l * y).sum();
            let sd = residual[i][i].sqrt();
            ((lower[i] - mu) / sd, (upper[i] - mu) / sd)
        };
        let (slot, _) = remaining
            .iter()
            .enumerate()
            .map(|(slot, &i)| {
                let (a, b) = conditional(i);
                (slot, interval_prob(a, b))
            })
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let p = remaining.swap_remove(slot);
        let (a, b) = conditional(p);

        let k = columns.len();
        let d = residual[p][p].sqrt();
        for &i in remaining.iter().chain(std::iter::once(&p)) {
            loadings[i].resize(k + 1, 0.0);
        }
        loadings[p][k] = d;
        for &i in &remaining {
            loadings[i][k] = residual[i][p] / d;
        }
        for &i in &remaining {
            for &j in &remaining {
                residual[i][j] -= loadings[i][k] * loadings[j][k];
            }
        }
        columns.push(vec![Constraint { coeffs: loadings[p][..k].to_vec(), pivot: d, lo: lower[p], hi: upper[p] }]);
        truncated_means.push(truncated_mean(a, b));
    }
    Plan::Columns(columns)
}

/// Mean of a standard normal truncated to `[a, b]`.
fn truncated_mean(a: f64, b: f64) -> f64 {
    let mass = interval_prob(a, b);
    if mass > 1e-300 {
        ((std_normal_pdf(a) - std_normal_pdf(b)) / mass).clamp(a.max(-40.0), b.min(40.0))
    } else if a > 0.0 {
        a.min(40.0)
    } else if b < 0.0 {
        b.max(-40.0)
    } else {
        0.0
    }
}

/// The transformed integrand at `w` in `[0,1]^(columns-1)`.
fn integrand(columns: &[Vec<Constraint>], w: &[f64], z: &mut [f64]) -> f64 {
    let mut f = 1.0;
    let last = columns.len() - 1;
    for (j, col) in columns.iter().enumerate() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for c in col {
            let mu: f64 = c.coeffs.iter().zip(z.iter()).map(|(l, v)| l * v).sum();
            let (a, b) = ((c.lo - mu) / c.pivot, (c.hi - mu) / c.pivot);
            let (a, b) = if c.pivot < 0.0 { (b, a) } else { (a, b) };
            lo = lo.max(a);
            hi = hi.min(b);
        }
        let e = interval_prob(lo, hi);
        if e <= 0.0 {
            return 0.0;
        }
        f *= e;
        if j < last {
            let v = if lo > 0.0 {
                let base = std_normal_cdf(-hi);
                -quantile(base + w[j] * e)
            } else {
                let base = std_normal_cdf(lo);
                quantile(base + w[j] * e)
            };
            z[j] = v.clamp(lo, hi);
        }
    }
    f
}

/// Fractional parts of square roots of the first `dims` primes.
fn kronecker_alphas(dims: usize) -> Vec<f64> {
    let mut primes = Vec::with_capacity(dims);
    let mut candidate = 2u64;
    while primes.len() < dims {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes.iter().map(|&p| (p as f64).sqrt().fract()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::two_sided_prob;

    fn cfg(seed: u64) -> QmcConfig {
        QmcConfig::new(1 << 16, seed)
    }

    #[test]
    fn kronecker_uses_distinct_irrationals() {
        let a = kronecker_alphas(5);
        assert!((a[0] - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((a[4] - (11f64.sqrt() - 3.0)).abs() < 1e-15);
    }

    #[test]
    fn identity_is_a_product() {
        let m = CorrelationModel::identity(2);
        let est = rect_prob(&m, &[-1.0, -1.0], &[1.0, 1.0], &cfg(1)).unwrap();
        let p = two_sided_prob(1.0, 1.0);
        assert!((est.value - p * p).abs() < 1e-13);
        assert!((est.value - 0.466_064_9).abs() < 1e-7);
        assert_eq!(est.method, Method::ClosedForm);
    }

    #[test]
    fn rank_one_collapses() {
        let m = CorrelationModel::from_covariance(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let est = rect_prob(&m, &[-1.0, -1.0], &[1.0, 1.0], &cfg(1)).unwrap();
        assert!((est.value - 0.682_689_5).abs() < 1e-7);
        let est = rect_prob(&m, &[-1.0, -0.5], &[1.0, 2.0], &cfg(1)).unwrap();
        assert!((est.value - interval_prob(-0.5, 1.0)).abs() < 1e-13);
        // Perfectly anticorrelated: X_2 = -X_1.
        let m = CorrelationModel::from_covariance(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let est = rect_prob(&m, &[0.0, 0.0], &[1.0, 1.0], &cfg(1)).unwrap();
        assert!(est.value.abs() < 1e-13);
    }

    #[test]
    fn infinite_thresholds_give_full_space() {
        let m = CorrelationModel::random_correlation(4, 3, 9).unwrap();
        let c = ThresholdVector::uniform(4, f64::INFINITY).unwrap();
        let est = symmetric_rect_prob(&m, &c, &cfg(1)).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn degenerate_slab_tends_to_zero() {
        let m = CorrelationModel::random_correlation(3, 2, 4).unwrap();
        let mut prev = 1.0;
        for &eps in &[1e-1, 1e-3, 1e-6] {
            let c = ThresholdVector::new(vec![eps, 1.0, 1.0]).unwrap();
            let v = symmetric_rect_prob(&m, &c, &cfg(2)).unwrap().value;
            assert!(v <= prev + 1e-9);
            prev = v;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        let m = CorrelationModel::identity(2);
        assert!(matches!(rect_prob(&m, &[1.0, 0.0], &[0.0, 1.0], &cfg(1)), Err(Error::InvalidBounds(_))));
        assert!(matches!(rect_prob(&m, &[0.0], &[1.0], &cfg(1)), Err(Error::InvalidBounds(_))));
        assert!(matches!(
            rect_prob(&m, &[0.0, 0.0], &[1.0, 1.0], &QmcConfig::new(999, 1)),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = CorrelationModel::random_correlation(5, 4, 3).unwrap();
        let c = ThresholdVector::uniform(5, 1.2).unwrap();
        let a = symmetric_rect_prob(&m, &c, &cfg(5)).unwrap();
        let b = symmetric_rect_prob(&m, &c, &cfg(5)).unwrap();
        assert_eq!(a, b);
        let c2 = symmetric_rect_prob(&m, &c, &cfg(6)).unwrap();
        assert_ne!(a.value, c2.value);
    }
}
