//! Standard Gaussian measure of convex bodies.
//!
//! Band bodies reduce exactly to rectangle probabilities of the model whose
//! factor rows are the band normals. Planar polygons are measured through the
//! same reduction with the quadrature oracle, and arbitrary bodies by Monte
//! Carlo membership. Planar bodies also expose their fiber measure
//! `f(s) = γ_1({y : (s, y) ∈ K})`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{minkowski_contains, ConvexBody, HPolytope, Polygon2D, SymmetricBand};
use crate::mvn::{
    oracle_symmetric_rect_prob, std_normal_pdf, symmetric_rect_prob, Method, ProbabilityEstimate, QmcConfig,
};
use crate::quad::integrate;

/// Smallest Monte Carlo sample count.
pub const MIN_MC_BUDGET: usize = 10_000;
const CHUNK: usize = 4096;
/// Accuracy of 1-D fiber quadrature, reported as its standard error.
pub const FIBER_TOL: f64 = 1e-12;
/// Fibers are integrated over `[-WINDOW, WINDOW]`; the mass outside is below 3e-19.
const WINDOW: f64 = 9.0;

/// `γ_d(K)` for a band, as `Pr(|X_i| <= c_i)` by randomized QMC.
pub fn gauss_measure_band(band: &SymmetricBand, cfg: &QmcConfig) -> Result<ProbabilityEstimate> {
    symmetric_rect_prob(band.model(), band.thresholds(), cfg)
}

/// `γ_d(K)` for a band of dimension at most 3, by the quadrature oracle.
pub fn gauss_measure_band_oracle(band: &SymmetricBand) -> Result<ProbabilityEstimate> {
    oracle_symmetric_rect_prob(band.model(), band.thresholds())
}

/// `γ_2(P)` by the quadrature oracle on the polygon's band form.
pub fn gauss_measure_polygon(p: &Polygon2D) -> Result<ProbabilityEstimate> {
    gauss_measure_band_oracle(&p.to_band()?)
}

/// Fraction of `budget` standard Gaussian samples inside `body`.
pub fn gauss_measure_mc(body: &dyn ConvexBody, budget: usize, seed: u64) -> Result<ProbabilityEstimate> {
    Ok(gauss_measure_mc_many(&[body], budget, seed)?.remove(0))
}

/// Monte Carlo measures of several bodies of the same dimension from one
/// common sample, so that differences between them carry little noise.
///
/// Samples are drawn in chunks of 4096, chunk `j` from stream `j` of a
/// ChaCha8 generator seeded with `seed`; the result does not depend on the
/// number of worker threads.
pub fn gauss_measure_mc_many(bodies: &[&dyn ConvexBody], budget: usize, seed: u64) -> Result<Vec<ProbabilityEstimate>> {
    if budget < MIN_MC_BUDGET {
        return Err(Error::BudgetTooSmall { got: budget, min: MIN_MC_BUDGET });
    }
    let Some(first) = bodies.first() else { return Ok(Vec::new()) };
    let d = first.dim();
    if let Some(b) = bodies.iter().find(|b| b.dim() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: b.dim() });
    }
    let chunks = budget.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let n = CHUNK.min(budget - j * CHUNK);
            let mut hits = vec![0usize; bodies.len()];
            let mut y = vec![0.0; d];
            for _ in 0..n {
                y.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
                for (h, body) in hits.iter_mut().zip(bodies) {
                    if body.contains(&y)? {
                        *h += 1;
                    }
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    Ok((0..bodies.len())
        .map(|i| {
            let hits: usize = counts.iter().map(|c| c[i]).sum();
            let p = hits as f64 / budget as f64;
            ProbabilityEstimate {
                value: p,
                stderr: (p * (1.0 - p) / budget as f64).sqrt(),
                samples: budget,
                method: Method::Mc,
                seed: Some(seed),
            }
        })
        .collect())
}

/// `K + T` for halfspace polytopes, with LP membership.
///
/// Membership is decided cheaply where possible: points of `K` or `T` are in
/// the sum, and points beyond `h_K(n) + h_T(n)` for some facet normal `n` of
/// either body are not. Everything else goes to the feasibility LP.
pub struct MinkowskiSum<'a> {
    k: &'a HPolytope,
    t: &'a HPolytope,
    cuts: Vec<(Vec<f64>, f64)>,
}

impl<'a> MinkowskiSum<'a> {
    pub fn new(k: &'a HPolytope, t: &'a HPolytope) -> Result<Self> {
        if k.dim() != t.dim() {
            return Err(Error::DimensionMismatch { expected: k.dim(), got: t.dim() });
        }
        let cuts = k
            .halfspaces()
            .iter()
            .chain(t.halfspaces())
            .map(|h| Ok((h.normal.clone(), k.support(&h.normal)? + t.support(&h.normal)?)))
            .collect::<Result<_>>()?;
        Ok(Self { k, t, cuts })
    }
}

impl ConvexBody for MinkowskiSum<'_> {
    fn dim(&self) -> usize {
        self.k.dim()
    }

    fn support(&self, direction: &[f64]) -> Result<f64> {
        Ok(self.k.support(direction)? + self.t.support(direction)?)
    }

    fn contains(&self, point: &[f64]) -> Result<bool> {
        if self.k.contains_point(point) || self.t.contains_point(point) {
            return Ok(true);
        }
        let outside = self.cuts.iter().any(|(n, h)| {
            let v: f64 = n.iter().zip(point).map(|(a, b)| a * b).sum();
            v > h + 1e-9 * h.max(1.0)
        });
        if outside {
            return Ok(false);
        }
        minkowski_contains(self.k, self.t, point)
    }
}

/// `γ_d(K + T)` by Monte Carlo with LP membership.
pub fn minkowski_measure_mc(k: &HPolytope, t: &HPolytope, budget: usize, seed: u64) -> Result<ProbabilityEstimate> {
    gauss_measure_mc(&MinkowskiSum::new(k, t)?, budget, seed)
}

/// Planar bodies that can be sliced along the first coordinate.
pub trait Planar {
    /// The interval `{y : (s, y) ∈ K}`, or `None` if it is empty.
    fn slice(&self, s: f64) -> Option<(f64, f64)>;

    /// `max { x : (x, y) ∈ K }`, possibly infinite.
    fn x_extent(&self) -> Result<f64>;

    fn as_band(&self) -> Result<SymmetricBand>;
}

/// Slice of `{<a, (s, y)> <= h}` over all halfplanes.
fn slice_halfplanes(halfplanes: impl Iterator<Item = ([f64; 2], f64)>, s: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (a, h) in halfplanes {
        let rest = h - a[0] * s;
        if a[1].abs() <= 1e-15 {
            if rest < -1e-12 * h.abs().max(1.0) {
                return None;
            }
        } else if a[1] > 0.0 {
            hi = hi.min(rest / a[1]);
        } else {
            lo = lo.max(rest / a[1]);
        }
    }
    (hi >= lo).then_some((lo, hi))
}

impl Planar for Polygon2D {
    fn slice(&self, s: f64) -> Option<(f64, f64)> {
        slice_halfplanes(self.halfplanes().into_iter(), s)
    }

    fn x_extent(&self) -> Result<f64> {
        Ok(self.support_at([1.0, 0.0]))
    }

    fn as_band(&self) -> Result<SymmetricBand> {
        self.to_band()
    }
}

impl Planar for SymmetricBand {
    fn slice(&self, s: f64) -> Option<(f64, f64)> {
        let rows = self
            .model()
            .factor_rows()
            .iter()
            .zip(self.thresholds().as_slice())
            .filter(|(_, c)| c.is_finite())
            .flat_map(|(u, &c)| [([u[0], u[1]], c), ([-u[0], -u[1]], c)]);
        slice_halfplanes(rows, s)
    }

    fn x_extent(&self) -> Result<f64> {
        self.support(&[1.0, 0.0])
    }

    fn as_band(&self) -> Result<SymmetricBand> {
        Ok(self.clone())
    }
}

fn check_planar_band(band: &SymmetricBand) -> Result<()> {
    if band.model().dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: band.model().dim() });
    }
    Ok(())
}

/// `f(s) = γ_1({y : (s, y) ∈ K})` by quadrature over the exact slice.
/// Empty slices have measure 0.
pub fn fiber_measure(body: &dyn Planar, s: f64) -> ProbabilityEstimate {
    let value = match body.slice(s) {
        Some((lo, hi)) => {
            let (lo, hi) = (lo.max(-WINDOW), hi.min(WINDOW));
            if hi > lo {
                integrate(std_normal_pdf, lo, hi, FIBER_TOL).value
            } else {
                0.0
            }
        }
        None => 0.0,
    };
    ProbabilityEstimate {
        value: value.clamp(0.0, 1.0),
        stderr: FIBER_TOL,
        samples: 0,
        method: Method::QuadratureOracle,
        seed: None,
    }
}

/// Both sides of `γ_2(K ∩ (T_1 × R)) = ∫_{T_1} f dγ_1` for `T_1 = [-w, w]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FubiniCheck {
    /// Quadrature-oracle measure of `K ∩ (T_1 × R)`.
    pub direct: f64,
    /// Composite Simpson over the fiber measure on a 200-interval grid.
    pub integrated: f64,
    pub gap: f64,
}

pub fn fubini_check(body: &dyn Planar, w: f64) -> Result<FubiniCheck> {
    let band = body.as_band()?;
    check_planar_band(&band)?;
    let cut = band.with_slab(vec![1.0, 0.0], w)?;
    let direct = gauss_measure_band_oracle(&cut)?.value;
    let reach = w.min(body.x_extent()?).min(WINDOW);
    let intervals = 200;
    let h = 2.0 * reach / intervals as f64;
    let integrated = (0..=intervals)
        .map(|i| {
            let s = -reach + i as f64 * h;
            let weight = if i == 0 || i == intervals {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            weight * fiber_measure(body, s).value * std_normal_pdf(s)
        })
        .sum::<f64>()
        * h
        / 3.0;
    Ok(FubiniCheck { direct, integrated, gap: (direct - integrated).abs() })
}

/// Smallest value of `f(λ s1 + (1-λ) s2) - f(s1)^λ f(s2)^(1-λ)` over `pairs`
/// random `s1 < s2` in the projection of the body and `λ ∈ {1/4, 1/2, 3/4}`.
/// Log-concavity of `f` means the result is nonnegative.
pub fn log_concavity_slack(body: &dyn Planar, pairs: usize, seed: u64) -> Result<f64> {
    use rand::Rng;
    let reach = body.x_extent()?.min(WINDOW);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let a = rng.random_range(-reach..=reach);
        let b = rng.random_range(-reach..=reach);
        let (s1, s2) = if a <= b { (a, b) } else { (b, a) };
        let (f1, f2) = (fiber_measure(body, s1).value, fiber_measure(body, s2).value);
        for lambda in [0.25, 0.5, 0.75] {
            let mid = fiber_measure(body, lambda * s1 + (1.0 - lambda) * s2).value;
            worst = worst.min(mid - f1.powf(lambda) * f2.powf(1.0 - lambda));
        }
    }
    Ok(worst)
}
