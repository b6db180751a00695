use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{Error, Result};

/// Smallest tail probability handed to the quantile function.
pub(crate) const TAIL_FLOOR: f64 = 1e-300;

/// Standard normal CDF, exact at the infinities.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
    }
}

/// Inverse of [`std_normal_cdf`] on `(0, 1)`.
pub fn inv_std_normal_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::OutOfRange(format!("quantile needs 0 < p < 1, got {p}")));
    }
    Ok(quantile(p))
}

// Acklam's rational approximations (relative error 1.15e-9), polished below.
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_690e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_671_010_229_528,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [7.784_695_709_041_462e-3, 3.224_671_290_700_398e-1, 2.445_134_137_142_996, 3.754_408_661_907_416];
const P_LOW: f64 = 0.02425;

/// Lower-tail quantile for `p <= 0.5`, returning a value `<= 0`.
fn lower_tail_guess(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile of the lower tail mass `p <= 0.5` with one Halley step.
fn lower_quantile(p: f64) -> f64 {
    let x = lower_tail_guess(p);
    let e = std_normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Quantile without range checks; `p` is clamped to the representable tails.
pub(crate) fn quantile(p: f64) -> f64 {
    let p = p.clamp(TAIL_FLOOR, 1.0 - f64::EPSILON / 2.0);
    if p <= 0.5 {
        lower_quantile(p)
    } else {
        -lower_quantile(1.0 - p)
    }
}

/// `Pr(lo <= Z <= hi)` for standard normal `Z`, computed in the tail that
/// keeps precision.
pub fn interval_prob(lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    if lo > 0.0 {
        (std_normal_cdf(-lo) - std_normal_cdf(-hi)).max(0.0)
    } else {
        (std_normal_cdf(hi) - std_normal_cdf(lo)).max(0.0)
    }
}

/// `Pr(|X| <= c)` for `X ~ N(0, sigma^2)`. A zero-variance variable is
/// inside any positive threshold.
pub fn two_sided_prob(c: f64, std_dev: f64) -> f64 {
    if c == f64::INFINITY || std_dev == 0.0 {
        return 1.0;
    }
    interval_prob(-c / std_dev, c / std_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;

    /// Adaptive quadrature of the density over `[-12, x]`.
    fn cdf_by_quadrature(x: f64) -> f64 {
        integrate(std_normal_pdf, -12.0, x, 1e-14).value
    }

    #[test]
    fn cdf_boundary_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn cdf_matches_density_quadrature() {
        let phi1 = cdf_by_quadrature(1.0);
        assert!((phi1 - 0.841_344_7).abs() < 1e-7);
        for &x in &[-6.0, -3.3, -1.0, -0.2, 0.7, 1.0, 2.5, 4.0, 7.5] {
            let q = cdf_by_quadrature(x);
            assert!((std_normal_cdf(x) - q).abs() < 1e-12, "x={x} diff={}", std_normal_cdf(x) - q);
        }
    }

    /// Bisection against the quadrature CDF.
    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf_by_quadrature(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(inv_std_normal_cdf(0.5).unwrap(), 0.0);
        let z = inv_std_normal_cdf(0.975).unwrap();
        let oracle = quantile_by_bisection(0.975);
        assert!((oracle - 1.959_964).abs() < 1e-6);
        assert!((z - oracle).abs() < 1e-9);
        for &p in &[1e-12, 1e-5, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
            let x = inv_std_normal_cdf(p).unwrap();
            assert!((std_normal_cdf(x) - p).abs() <= 1e-10, "p={p}");
            let y = inv_std_normal_cdf(1.0 - p).unwrap();
            assert!((x + y).abs() <= 1e-10 * (1.0 + x.abs()) || !(1e-6..=1.0 - 1e-6).contains(&p), "p={p}");
        }
    }

    #[test]
    fn quantile_rejects_out_of_range() {
        for &p in &[0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(inv_std_normal_cdf(p), Err(Error::OutOfRange(_))));
        }
    }

    #[test]
    fn interval_prob_keeps_upper_tail_precision() {
        let p = interval_prob(8.0, 9.0);
        let q = integrate(std_normal_pdf, 8.0, 9.0, 1e-25).value;
        assert!((p - q).abs() / q < 1e-10);
        assert_eq!(two_sided_prob(f64::INFINITY, 1.0), 1.0);
        assert_eq!(two_sided_prob(1.0, 0.0), 1.0);
    }
}
