//! Checkers on geometric bodies: polygons, halfspace polytopes and slabs.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{term, Backing, InequalityReport, Quantity};
use crate::error::{Error, Result};
use crate::geom::{minkowski_contains, ConvexBody, HPolytope, Polygon2D, SymmetricBand};
use crate::measure::{gauss_measure_band, gauss_measure_mc_many, gauss_measure_polygon, MinkowskiSum};
use crate::model::CorrelationModel;
use crate::mvn::{oracle_symmetric_rect_prob, two_sided_prob, ProbabilityEstimate, QmcConfig};

/// Tolerance of exact planar geometry, reported as its standard error.
pub const GEOM_TOL: f64 = 1e-9;

/// How Gaussian measures of geometric bodies are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BodyEstimator {
    /// Tensor quadrature of the band form (planar bodies only).
    Quadrature,
    /// Monte Carlo membership with one common sample for all bodies.
    MonteCarlo { budget: usize, seed: u64 },
}

impl BodyEstimator {
    fn seed(&self) -> Option<u64> {
        match self {
            BodyEstimator::Quadrature => None,
            BodyEstimator::MonteCarlo { seed, .. } => Some(*seed),
        }
    }

    fn budget(&self) -> usize {
        match self {
            BodyEstimator::Quadrature => 0,
            BodyEstimator::MonteCarlo { budget, .. } => *budget,
        }
    }
}

fn measure_polygons(polys: &[&Polygon2D], est: BodyEstimator) -> Result<Vec<ProbabilityEstimate>> {
    match est {
        BodyEstimator::Quadrature => polys.iter().map(|p| gauss_measure_polygon(p)).collect(),
        BodyEstimator::MonteCarlo { budget, seed } => {
            let bodies: Vec<&dyn ConvexBody> = polys.iter().map(|p| *p as &dyn ConvexBody).collect();
            gauss_measure_mc_many(&bodies, budget, seed)
        }
    }
}

/// `γ(P + Q) γ(P ∩ Q) >= γ(P) γ(Q)` with the exact planar sum (conjectured).
pub fn check_strong_gci_2d(p: &Polygon2D, q: &Polygon2D, est: BodyEstimator) -> Result<InequalityReport> {
    let started = Instant::now();
    let sum = p.minkowski_sum(q)?;
    let meet = p.intersection(q)?;
    let m = measure_polygons(&[&sum, &meet, p, q], est)?;
    Ok(InequalityReport::new(
        "strong-gci-2d",
        Backing::Exploratory,
        json!({ "P": p, "Q": q, "estimator": est }),
        Quantity::from(m[0]).times(m[1].into()),
        Quantity::from(m[2]).times(m[3].into()),
        vec![term("sum", m[0]), term("intersection", m[1]), term("P", m[2]), term("Q", m[3])],
        est.seed(),
        est.budget(),
        started,
    ))
}

/// `area(P + Q) area(P ∩ Q) >= area(P) area(Q)`, in exact planar geometry.
pub fn check_rogers_shephard(p: &Polygon2D, q: &Polygon2D) -> Result<InequalityReport> {
    let started = Instant::now();
    let sum = p.minkowski_sum(q)?.area();
    let meet = p.intersection(q)?.area();
    Ok(InequalityReport::new(
        "rogers-shephard",
        Backing::Theorem,
        json!({ "P": p, "Q": q, "areas": { "sum": sum, "intersection": meet, "P": p.area(), "Q": q.area() } }),
        Quantity::new(sum * meet, GEOM_TOL),
        Quantity::exact(p.area() * q.area()),
        Vec::new(),
        None,
        0,
        started,
    ))
}

fn unit(u: &[f64]) -> Result<Vec<f64>> {
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroDirection);
    }
    Ok(u.iter().map(|v| v / norm).collect())
}

fn check_width(width: f64) -> Result<()> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidParameters(format!("slab half-width must be finite and positive, got {width}")));
    }
    Ok(())
}

/// `γ(conv(K ∪ T)) γ(K ∩ T) >= γ(K) γ(T)` for the slab `T = {|<x, u>| <= w}`.
///
/// The hull of a body and an infinite slab is, up to a null set, the slab of
/// half-width `max(w, h_K(u))`, so its measure is closed-form.
pub fn check_slab_polygon(k: &Polygon2D, u: [f64; 2], width: f64, est: BodyEstimator) -> Result<InequalityReport> {
    let started = Instant::now();
    check_width(width)?;
    let u = unit(&u)?;
    let u = [u[0], u[1]];
    let hull_width = width.max(k.support_at(u));
    let hull = ProbabilityEstimate::closed_form(two_sided_prob(hull_width, 1.0));
    let slab = ProbabilityEstimate::closed_form(two_sided_prob(width, 1.0));
    let meet = k.clipped_by_slab(u, width)?;
    let m = measure_polygons(&[&meet, k], est)?;
    Ok(InequalityReport::new(
        "slab",
        Backing::Theorem,
        json!({ "K": k, "direction": u, "width": width, "estimator": est }),
        Quantity::from(hull).times(m[0].into()),
        Quantity::from(m[1]).times(slab.into()),
        vec![term("hull", hull), term("intersection", m[0]), term("K", m[1]), term("slab", slab)],
        est.seed(),
        est.budget(),
        started,
    ))
}

/// The slab inequality for a band body in any dimension, with the band
/// measures by randomized QMC.
pub fn check_slab_band(k: &SymmetricBand, u: &[f64], width: f64, cfg: &QmcConfig) -> Result<InequalityReport> {
    let started = Instant::now();
    check_width(width)?;
    if u.len() != k.model().dim() {
        return Err(Error::DimensionMismatch { expected: k.model().dim(), got: u.len() });
    }
    let u = unit(u)?;
    let hull_width = width.max(k.support(&u)?);
    let hull = ProbabilityEstimate::closed_form(two_sided_prob(hull_width, 1.0));
    let slab = ProbabilityEstimate::closed_form(two_sided_prob(width, 1.0));
    let meet = gauss_measure_band(&k.with_slab(u.clone(), width)?, cfg)?;
    let whole = gauss_measure_band(k, cfg)?;
    Ok(InequalityReport::new(
        "slab",
        Backing::Theorem,
        json!({ "sigma": k.model().sigma_rows(), "c": k.thresholds(), "direction": u, "width": width }),
        Quantity::from(hull).times(meet.into()),
        Quantity::from(whole).times(slab.into()),
        vec![term("hull", hull), term("intersection", meet), term("K", whole), term("slab", slab)],
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

/// The strong inequality for unconditional bodies (a theorem). Planar
/// bodies use exact polygon sums; higher dimensions need Monte Carlo with
/// LP membership for the sum.
pub fn check_unconditional(k: &HPolytope, t: &HPolytope, est: BodyEstimator) -> Result<InequalityReport> {
    let started = Instant::now();
    k.require_unconditional()?;
    t.require_unconditional()?;
    if k.dim() != t.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), got: t.dim() });
    }
    let m = if k.dim() == 2 {
        let (pk, pt) = (k.to_polygon()?, t.to_polygon()?);
        measure_polygons(&[&pk.minkowski_sum(&pt)?, &pk.intersection(&pt)?, &pk, &pt], est)?
    } else {
        let BodyEstimator::MonteCarlo { budget, seed } = est else {
            return Err(Error::InvalidParameters("quadrature measures need planar bodies".into()));
        };
        let sum = MinkowskiSum::new(k, t)?;
        let meet = k.intersection(t)?;
        gauss_measure_mc_many(&[&sum, &meet, k, t], budget, seed)?
    };
    Ok(InequalityReport::new(
        "unconditional",
        Backing::Theorem,
        json!({ "K": k, "T": t, "estimator": est }),
        Quantity::from(m[0]).times(m[1].into()),
        Quantity::from(m[2]).times(m[3].into()),
        vec![term("sum", m[0]), term("intersection", m[1]), term("K", m[2]), term("T", m[3])],
        est.seed(),
        est.budget(),
        started,
    ))
}

/// Outcome of the lattice-premise check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub label: String,
    pub pairs: usize,
    /// Pairs with `x ∧ y ∈ K ∩ T`.
    pub meet_ok: usize,
    /// Pairs with `x ∨ y ∈ K + T`.
    pub join_ok: usize,
    pub seed: u64,
    pub runtime_ms: u64,
}

const MAX_REJECTIONS: usize = 1_000_000;

fn sample_positive(body: &HPolytope, bounds: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    for _ in 0..MAX_REJECTIONS {
        let x: Vec<f64> = bounds.iter().map(|&b| rng.random::<f64>() * b).collect();
        if body.contains_point(&x) {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure("rejection sampling found no point in the positive orthant".into()))
}

/// For `x ∈ K ∩ Q`, `y ∈ T ∩ Q` (Q the positive orthant), checks
/// `x ∧ y ∈ K ∩ T ∩ Q` and `x ∨ y ∈ (K + T) ∩ Q` on `pairs` random pairs.
/// For unconditional bodies both always hold, so any failure is an error.
pub fn check_lattice_premise(k: &HPolytope, t: &HPolytope, pairs: usize, seed: u64) -> Result<LatticeReport> {
    let started = Instant::now();
    k.require_unconditional()?;
    t.require_unconditional()?;
    if k.dim() != t.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), got: t.dim() });
    }
    let d = k.dim();
    let axis = |body: &HPolytope| -> Result<Vec<f64>> {
        (0..d)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                body.support(&e)
            })
            .collect()
    };
    let (bk, bt) = (axis(k)?, axis(t)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut meet_ok, mut join_ok) = (0, 0);
    for i in 0..pairs {
        let x = sample_positive(k, &bk, &mut rng)?;
        let y = sample_positive(t, &bt, &mut rng)?;
        let meet: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a.min(*b)).collect();
        let join: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a.max(*b)).collect();
        if !(k.contains_point(&meet) && t.contains_point(&meet)) {
            return Err(Error::PremiseViolated(format!("pair {i}: x ∧ y = {meet:?} is not in K ∩ T")));
        }
        meet_ok += 1;
        if !minkowski_contains(k, t, &join)? {
            return Err(Error::PremiseViolated(format!("pair {i}: x ∨ y = {join:?} is not in K + T")));
        }
        join_ok += 1;
    }
    Ok(LatticeReport {
        label: "lattice-premise".into(),
        pairs,
        meet_ok,
        join_ok,
        seed,
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

/// The one-dimensional comparison the hull inequality would force:
/// `γ_1([-N, N]) <= γ_1([-w, w])` with `w = (N + 1/N)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub n: f64,
    pub half_width: f64,
    pub gamma_n: f64,
    pub gamma_half_width: f64,
    /// `gamma_n - gamma_half_width`; positive means the forced inequality fails.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullCounterexample {
    pub report: InequalityReport,
    pub reduction: ReductionTrace,
    /// Whether `conv(K ∪ T) ⊆ (N + 1/N) conv{±e_1, ±e_2}`.
    pub diamond_inclusion: bool,
}

/// `K = [-1/N, 1/N] x [-N, N]`, `T` its transpose, and the hull inequality
/// `γ(conv(K ∪ T)) γ(K ∩ T) >= γ(K) γ(T)`.
pub fn hull_counterexample(n: f64, est: BodyEstimator) -> Result<HullCounterexample> {
    let started = Instant::now();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::InvalidParameters(format!("N must be finite and positive, got {n}")));
    }
    let k = Polygon2D::rectangle(1.0 / n, n)?;
    let t = Polygon2D::rectangle(n, 1.0 / n)?;
    let hull = k.convex_hull_union(&t)?;
    let meet = k.intersection(&t)?;
    let m = measure_polygons(&[&hull, &meet, &k, &t], est)?;
    let report = InequalityReport::new(
        "hull",
        Backing::Exploratory,
        json!({ "N": n, "K": k, "T": t, "estimator": est }),
        Quantity::from(m[0]).times(m[1].into()),
        Quantity::from(m[2]).times(m[3].into()),
        vec![term("hull", m[0]), term("intersection", m[1]), term("K", m[2]), term("T", m[3])],
        est.seed(),
        est.budget(),
        started,
    );
    let one = CorrelationModel::identity(1);
    let gamma1 = |c: f64| -> Result<f64> {
        Ok(oracle_symmetric_rect_prob(&one, &crate::model::ThresholdVector::new(vec![c])?)?.value)
    };
    let half_width = (n + 1.0 / n) / std::f64::consts::SQRT_2;
    let (gamma_n, gamma_half_width) = (gamma1(n)?, gamma1(half_width)?);
    let scale = n + 1.0 / n;
    let diamond_inclusion = hull.vertices().iter().all(|v| v[0].abs() + v[1].abs() <= scale * (1.0 + 1e-12));
    Ok(HullCounterexample {
        report,
        reduction: ReductionTrace { n, half_width, gamma_n, gamma_half_width, difference: gamma_n - gamma_half_width },
        diamond_inclusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::Verdict;
    use crate::mvn::std_normal_cdf;

    const MC: BodyEstimator = BodyEstimator::MonteCarlo { budget: 200_000, seed: 3 };

    #[test]
    fn strong_2d_examples() {
        let p = Polygon2D::random(4, 1).unwrap();
        let r = check_strong_gci_2d(&p, &p, BodyEstimator::Quadrature).unwrap();
        assert_eq!(r.verdict, Verdict::Supported);
        let k = Polygon2D::rectangle(1.0 / 3.0, 3.0).unwrap();
        let t = Polygon2D::rectangle(3.0, 1.0 / 3.0).unwrap();
        let quad = check_strong_gci_2d(&k, &t, BodyEstimator::Quadrature).unwrap();
        let mc = check_strong_gci_2d(&k, &t, MC).unwrap();
        // The margin is about 2e-4, far below the Monte Carlo resolution.
        assert_eq!(quad.verdict, Verdict::Supported);
        assert_ne!(mc.verdict, Verdict::Violated);
        assert!((quad.margin - mc.margin).abs() <= 3.0 * mc.stderr);
    }

    #[test]
    fn rogers_shephard_is_exact() {
        let p = Polygon2D::random(5, 2).unwrap();
        let q = Polygon2D::random(3, 4).unwrap();
        let r = check_rogers_shephard(&p, &q).unwrap();
        assert_eq!(r.verdict, Verdict::Supported);
        assert_eq!(r.stderr, GEOM_TOL);
    }

    #[test]
    fn slab_examples() {
        let g = |x: f64| 2.0 * std_normal_cdf(x) - 1.0;
        // K inside the slab: hull = slab, intersection = K.
        let small = Polygon2D::rectangle(0.5, 0.5).unwrap();
        let r = check_slab_polygon(&small, [0.0, 1.0], 1.0, BodyEstimator::Quadrature).unwrap();
        assert_eq!(r.margin, 0.0);
        // Square and a horizontal slab of width 1: all four measures in
        // closed form.
        let sq = Polygon2D::rectangle(1.0, 1.0).unwrap();
        let r = check_slab_polygon(&sq, [0.0, 1.0], 0.5, BodyEstimator::Quadrature).unwrap();
        let lhs = g(1.0) * g(1.0) * g(0.5);
        let rhs = g(1.0) * g(1.0) * g(0.5);
        assert!((r.lhs.value - lhs).abs() < 1e-7 && (r.rhs.value - rhs).abs() < 1e-7);
        let r = check_slab_polygon(&sq, [1.0, 1.0], 0.5, BodyEstimator::Quadrature).unwrap();
        assert_eq!(r.verdict, Verdict::Supported);
        // Long thin rectangle across the slab: everything factorizes and
        // the margin vanishes.
        let thin = Polygon2D::rectangle(0.2, 4.0).unwrap();
        let r = check_slab_polygon(&thin, [0.0, 1.0], 0.5, MC).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
        assert!(r.margin.abs() <= 3.0 * r.stderr);
    }

    #[test]
    fn slab_band_mode() {
        let k = SymmetricBand::new(
            CorrelationModel::random_correlation(4, 3, 6).unwrap(),
            crate::model::ThresholdVector::new(vec![1.0, 0.6, 1.4, 2.0]).unwrap(),
        )
        .unwrap();
        let r = check_slab_band(&k, &[0.3, -1.0, 0.2], 0.7, &QmcConfig::new(1 << 15, 1)).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
        assert!(r.margin > 0.0);
    }

    #[test]
    fn unconditional_examples() {
        let a = HPolytope::axis_box(&[1.0, 0.4]).unwrap();
        let b = HPolytope::axis_box(&[0.3, 2.0]).unwrap();
        let r = check_unconditional(&a, &b, BodyEstimator::Quadrature).unwrap();
        // Two boxes: everything factorizes into intervals.
        let g = |x: f64| 2.0 * std_normal_cdf(x) - 1.0;
        let lhs = g(1.3) * g(2.4) * g(0.3) * g(0.4);
        assert!((r.lhs.value - lhs).abs() < 1e-7);
        assert_eq!(r.verdict, Verdict::Supported);
        let l1 = HPolytope::weighted_l1(&[1.0, 2.0], 1.0).unwrap();
        assert_eq!(check_unconditional(&l1, &a, BodyEstimator::Quadrature).unwrap().verdict, Verdict::Supported);
        assert_eq!(check_unconditional(&l1, &a, MC).unwrap().verdict, Verdict::Supported);
        assert_eq!(check_unconditional(&l1, &l1, BodyEstimator::Quadrature).unwrap().verdict, Verdict::Supported);
        let rotated = HPolytope::new(vec![(vec![1.0, 0.3], 1.0), (vec![-0.3, 1.0], 1.0)]).unwrap();
        assert!(matches!(
            check_unconditional(&rotated, &a, BodyEstimator::Quadrature),
            Err(Error::NotUnconditional(_))
        ));
    }

    #[test]
    fn unconditional_in_three_dimensions() {
        let a = HPolytope::axis_box(&[1.0, 0.5, 2.0]).unwrap();
        let b = HPolytope::weighted_l1(&[1.0, 1.0, 0.5], 1.0).unwrap();
        let r = check_unconditional(&a, &b, BodyEstimator::MonteCarlo { budget: 20_000, seed: 1 }).unwrap();
        assert_ne!(r.verdict, Verdict::Violated);
        assert!(check_unconditional(&a, &b, BodyEstimator::Quadrature).is_err());
    }

    #[test]
    fn lattice_premise_holds() {
        let a = HPolytope::axis_box(&[1.0, 0.5]).unwrap();
        let b = HPolytope::weighted_l1(&[1.0, 3.0], 1.2).unwrap();
        let r = check_lattice_premise(&a, &b, 300, 5).unwrap();
        assert_eq!((r.meet_ok, r.join_ok), (300, 300));
        let r = check_lattice_premise(&a, &a, 50, 5).unwrap();
        assert_eq!(r.join_ok, 50);
    }

    #[test]
    fn hull_counterexample_at_three() {
        let h = hull_counterexample(3.0, BodyEstimator::Quadrature).unwrap();
        assert!((h.reduction.gamma_n - 0.997_300_2).abs() < 1e-7);
        assert!((h.reduction.gamma_half_width - 0.981_578).abs() < 1e-6);
        assert!(h.reduction.difference >= 0.01);
        assert!(h.diamond_inclusion);
        assert_eq!(h.report.verdict, Verdict::Violated);
        let same = hull_counterexample(1.0, BodyEstimator::Quadrature).unwrap();
        assert_eq!(same.report.margin, 0.0);
    }
}
