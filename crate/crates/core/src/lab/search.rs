//! Derivative-free search for negative margins over parameterized families.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_strong_gci_2d, check_strong_gci_bands, hull_counterexample, BodyEstimator, InequalityReport, Quantity,
};
use crate::error::{Error, Result};
use crate::geom::Polygon2D;
use crate::model::{CorrelationModel, ThresholdVector};
use crate::mvn::{oracle_symmetric_rect_prob, QmcConfig};

/// Random restarts after the run from the family's initial point.
pub const RESTARTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `[-1/N, 1/N] x [-N, N]` and its transpose under the hull inequality,
    /// over `log N ∈ [-2, 2]`.
    HullRectangles,
    /// A box and its rotation under a correlated Gaussian, strong form with
    /// exact sums, over (log aspect, angle, correlation).
    RotatedBoxes,
    /// Band bodies of a fixed random 3 x 2 model, strong form with
    /// threshold sums, over six log-thresholds.
    BandTriples,
}

impl Family {
    fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            Family::HullRectangles => vec![(-2.0, 2.0)],
            Family::RotatedBoxes => vec![(-2.0, 2.0), (0.0, std::f64::consts::FRAC_PI_2), (-0.9, 0.9)],
            Family::BandTriples => vec![(-1.5, 1.5); 6],
        }
    }

    fn initial(self) -> Vec<f64> {
        match self {
            Family::HullRectangles => vec![0.0],
            Family::RotatedBoxes => vec![1.0, std::f64::consts::FRAC_PI_4, 0.0],
            Family::BandTriples => vec![0.0, 0.5, -0.5, 0.5, -0.5, 0.0],
        }
    }
}

/// Deterministic quadrature margin of one family member.
struct Objective {
    family: Family,
    triple_model: CorrelationModel,
}

impl Objective {
    fn new(family: Family, seed: u64) -> Result<Self> {
        Ok(Self { family, triple_model: CorrelationModel::random_correlation(3, 2, seed)? })
    }

    fn rotated_boxes(p: &[f64]) -> Result<(Polygon2D, Polygon2D)> {
        let a = p[0].exp();
        let rho = p[2];
        let shear = [[1.0, 0.0], [rho, (1.0 - rho * rho).sqrt()]];
        let k = Polygon2D::rectangle(a, 1.0 / a)?;
        let t = k.rotated(p[1])?;
        Ok((k.linear_map(shear)?, t.linear_map(shear)?))
    }

    fn triple_thresholds(p: &[f64]) -> Result<(ThresholdVector, ThresholdVector)> {
        let s = ThresholdVector::new(p[..3].iter().map(|v| v.exp()).collect())?;
        let t = ThresholdVector::new(p[3..].iter().map(|v| v.exp()).collect())?;
        Ok((s, t))
    }

    fn margin(&self, p: &[f64]) -> Result<Quantity> {
        let (lhs, rhs) = match self.family {
            Family::HullRectangles => {
                let r = hull_counterexample(p[0].exp(), BodyEstimator::Quadrature)?.report;
                (r.lhs, r.rhs)
            }
            Family::RotatedBoxes => {
                let (k, t) = Self::rotated_boxes(p)?;
                let r = check_strong_gci_2d(&k, &t, BodyEstimator::Quadrature)?;
                (r.lhs, r.rhs)
            }
            Family::BandTriples => {
                let (s, t) = Self::triple_thresholds(p)?;
                let g = |c: &ThresholdVector| -> Result<Quantity> {
                    Ok(oracle_symmetric_rect_prob(&self.triple_model, c)?.into())
                };
                (g(&s.sum(&t))?.times(g(&s.min(&t))?), g(&s)?.times(g(&t)?))
            }
        };
        Ok(Quantity::new(lhs.value - rhs.value, lhs.stderr.hypot(rhs.stderr)))
    }

    /// Randomized confirmation of the best member with the caller's budget.
    fn confirm(&self, p: &[f64], budget: usize, seed: u64) -> Result<InequalityReport> {
        match self.family {
            Family::HullRectangles => {
                Ok(hull_counterexample(p[0].exp(), BodyEstimator::MonteCarlo { budget, seed })?.report)
            }
            Family::RotatedBoxes => {
                let (k, t) = Self::rotated_boxes(p)?;
                check_strong_gci_2d(&k, &t, BodyEstimator::MonteCarlo { budget, seed })
            }
            Family::BandTriples => {
                let (s, t) = Self::triple_thresholds(p)?;
                check_strong_gci_bands(&self.triple_model, &s, &t, &QmcConfig::new(budget, seed))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub family: Family,
    pub best_params: Vec<f64>,
    pub best_margin: f64,
    pub best_stderr: f64,
    /// Best margin so far after each evaluation.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub report: InequalityReport,
    pub seed: u64,
    pub runtime_ms: u64,
}

fn clamp(bounds: &[(f64, f64)], p: &[f64]) -> Vec<f64> {
    p.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect()
}

struct Tracker<'a> {
    objective: &'a Objective,
    bounds: Vec<(f64, f64)>,
    remaining: usize,
    best: Option<(Vec<f64>, Quantity)>,
    trace: Vec<f64>,
}

impl Tracker<'_> {
    /// Margin of `p` (clamped into the family box); `None` once the step
    /// budget is spent. Failed evaluations count as `+∞`.
    fn eval(&mut self, p: &[f64]) -> Option<f64> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let p = clamp(&self.bounds, p);
        let value = match self.objective.margin(&p) {
            Ok(q) => {
                if self.best.as_ref().is_none_or(|(_, b)| q.value < b.value) {
                    self.best = Some((p, q));
                }
                q.value
            }
            Err(_) => f64::INFINITY,
        };
        self.trace.push(self.best.as_ref().map_or(f64::INFINITY, |(_, b)| b.value));
        Some(value)
    }
}

/// Nelder–Mead on the clamped objective until `evals` evaluations are used.
fn nelder_mead(tracker: &mut Tracker, start: &[f64], evals: usize) {
    let stop = tracker.remaining.saturating_sub(evals);
    let bounds = tracker.bounds.clone();
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let Some(f0) = tracker.eval(start) else { return };
    simplex.push((start.to_vec(), f0));
    for i in 0..n {
        let (lo, hi) = bounds[i];
        let mut p = start.to_vec();
        let step = 0.25 * (hi - lo);
        p[i] = if p[i] + step <= hi { p[i] + step } else { p[i] - step };
        let Some(f) = tracker.eval(&p) else { return };
        simplex.push((p, f));
    }
    let eval = |t: &mut Tracker, p: &[f64]| -> Option<f64> {
        if t.remaining <= stop {
            None
        } else {
            t.eval(p)
        }
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].0.clone();
        let along = |t: f64| -> Vec<f64> {
            let raw: Vec<f64> = centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&bounds, &raw)
        };
        let xr = along(1.0);
        let Some(fr) = eval(tracker, &xr) else { return };
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let Some(fe) = eval(tracker, &xe) else { return };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(0.5) } else { along(-0.5) };
            let Some(fc) = eval(tracker, &xc) else { return };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let p: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let Some(f) = eval(tracker, &p) else { return };
                    *entry = (p, f);
                }
            }
        }
    }
}

/// Minimizes the family's margin with `steps` evaluations spread over a
/// run from the family's initial point and [`RESTARTS`] seeded restarts,
/// then re-estimates the best member with `budget` randomized samples.
pub fn search_counterexample(family: Family, steps: usize, budget: usize, seed: u64) -> Result<SearchResult> {
    let started = Instant::now();
    if steps == 0 {
        return Err(Error::InvalidParameters("steps must be at least 1".into()));
    }
    let objective = Objective::new(family, seed)?;
    let bounds = family.bounds();
    let mut tracker =
        Tracker { objective: &objective, bounds: bounds.clone(), remaining: steps, best: None, trace: Vec::new() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_start = steps.div_ceil(RESTARTS + 1);
    for run in 0..=RESTARTS {
        let start: Vec<f64> = if run == 0 {
            family.initial()
        } else {
            bounds.iter().map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect()
        };
        nelder_mead(&mut tracker, &start, per_start);
    }
    // Any leftover steps continue from the best point.
    if tracker.remaining > 0 {
        if let Some((p, _)) = tracker.best.clone() {
            let rest = tracker.remaining;
            nelder_mead(&mut tracker, &p, rest);
        }
    }
    let Some((best_params, best)) = tracker.best.clone() else {
        return Err(Error::SolverFailure("no family member could be evaluated".into()));
    };
    let report = objective.confirm(&best_params, budget, seed)?;
    Ok(SearchResult {
        family,
        best_params,
        best_margin: best.value,
        best_stderr: best.stderr,
        evaluations: tracker.trace.len(),
        trace: tracker.trace,
        report,
        seed,
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_step_reports_initial_margin() {
        let r = search_counterexample(Family::HullRectangles, 1, 20_000, 1).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.best_params, vec![0.0]);
        assert_eq!(r.best_margin, 0.0);
        let objective = Objective::new(Family::BandTriples, 4).unwrap();
        let direct = objective.margin(&Family::BandTriples.initial()).unwrap();
        let r = search_counterexample(Family::BandTriples, 1, 4096, 4).unwrap();
        assert_eq!(r.best_margin, direct.value);
    }

    #[test]
    fn hull_family_finds_violation() {
        let r = search_counterexample(Family::HullRectangles, 60, 200_000, 2).unwrap();
        assert!(r.best_margin < -3.0 * r.best_stderr);
        // The family violates already below N = 3; the example point is
        // negative as well.
        let at_three = Objective::new(Family::HullRectangles, 2).unwrap().margin(&[3f64.ln()]).unwrap();
        assert!(at_three.value < -3.0 * at_three.stderr);
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(r.report.verdict, crate::lab::Verdict::Violated);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = search_counterexample(Family::RotatedBoxes, 25, 20_000, 9).unwrap();
        let b = search_counterexample(Family::RotatedBoxes, 25, 20_000, 9).unwrap();
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.report.margin, b.report.margin);
    }
}
