//! Cross-module invariants on seeded random instances.

use gcilab::correct::{improved_confidence, improvement_factor};
use gcilab::geom::{ConvexBody, HPolytope, Polygon2D, SymmetricBand};
use gcilab::lab::{
    check_refined_sidak, check_royen, check_sidak, check_slab_band, check_slab_polygon, check_strong_gci_bands,
    check_tehranchi, check_unconditional, hull_counterexample, sidak_ratio, BodyEstimator, Verdict,
};
use gcilab::measure::{gauss_measure_band, gauss_measure_band_oracle, gauss_measure_mc};
use gcilab::mvn::QmcConfig;
use gcilab::{CorrelationModel, ThresholdVector};
use proptest::prelude::*;

fn cfg(seed: u64) -> QmcConfig {
    QmcConfig::new(1 << 14, seed)
}

fn model_and_thresholds(n: usize, d: usize, seed: u64, scale: f64) -> (CorrelationModel, ThresholdVector) {
    let model = CorrelationModel::random_correlation(n, d.min(n), seed).unwrap();
    let c = (0..n).map(|i| scale * (0.5 + ((seed as usize + 7 * i) % 5) as f64 * 0.4)).collect();
    (model, ThresholdVector::new(c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn theorem_checkers_are_never_violated(n in 2usize..6, d in 1usize..4, seed in 0u64..10_000, scale in 0.5f64..1.5) {
        let (model, c) = model_and_thresholds(n, d, seed, scale);
        let (_, t) = model_and_thresholds(n, d, seed + 1, scale);
        let reports = [
            check_sidak(&model, &c, &cfg(seed)).unwrap(),
            check_refined_sidak(&model, &c, scale, (seed as usize) % n, &cfg(seed)).unwrap(),
            check_royen(&model, &c, 1 + (seed as usize) % (n - 1), &cfg(seed)).unwrap(),
            check_tehranchi(&model, &c, &t, 0.1, 0.4, &cfg(seed)).unwrap(),
        ];
        for r in &reports {
            prop_assert!(r.verdict != Verdict::Violated, "{} {:?}", r.label, r.margin);
        }
    }

    #[test]
    fn sidak_ratio_is_non_increasing(n in 2usize..6, d in 1usize..4, seed in 0u64..10_000, a in 0.05f64..2.0) {
        let (model, c) = model_and_thresholds(n, d, seed, 1.0);
        let i = (seed as usize) % n;
        let wide = c.with(i, c.as_slice()[i] + a).unwrap();
        let r0 = sidak_ratio(&model, &c, &cfg(seed)).unwrap();
        let r1 = sidak_ratio(&model, &wide, &cfg(seed + 1)).unwrap();
        prop_assert!(r0.value >= r1.value - 3.0 * r0.stderr.hypot(r1.stderr));
        // Componentwise widening of every threshold.
        let all = ThresholdVector::new(c.as_slice().iter().map(|v| v + a).collect()).unwrap();
        let r2 = sidak_ratio(&model, &all, &cfg(seed + 2)).unwrap();
        prop_assert!(r0.value >= r2.value - 3.0 * r0.stderr.hypot(r2.stderr));
    }

    #[test]
    fn strong_bands_at_equal_thresholds_are_supported(n in 2usize..5, d in 1usize..4, seed in 0u64..10_000) {
        let (model, s) = model_and_thresholds(n, d, seed, 0.8);
        let r = check_strong_gci_bands(&model, &s, &s, &cfg(seed)).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Supported);
    }

    #[test]
    fn band_measure_qmc_matches_oracle(n in 2usize..6, d in 1usize..4, seed in 0u64..10_000) {
        let (model, c) = model_and_thresholds(n, d, seed, 1.0);
        let band = SymmetricBand::new(model, c).unwrap();
        let q = gauss_measure_band(&band, &QmcConfig::new(1 << 15, seed)).unwrap();
        let o = gauss_measure_band_oracle(&band).unwrap();
        prop_assert!((q.value - o.value).abs() <= 4.0 * q.stderr.hypot(o.stderr));
    }

    #[test]
    fn slab_checks_are_never_violated(seed in 0u64..10_000, angle in 0.0f64..std::f64::consts::PI, width in 0.1f64..2.0) {
        let k = Polygon2D::random(4, seed).unwrap();
        let r = check_slab_polygon(&k, [angle.cos(), angle.sin()], width, BodyEstimator::Quadrature).unwrap();
        prop_assert!(r.verdict != Verdict::Violated);
        prop_assert!(r.margin >= -3.0 * r.stderr);
        let (model, c) = model_and_thresholds(4, 3, seed, 1.0);
        let band = SymmetricBand::new(model, c).unwrap();
        let r = check_slab_band(&band, &[angle.cos(), angle.sin(), 0.3], width, &cfg(seed)).unwrap();
        prop_assert!(r.verdict != Verdict::Violated);
    }

    #[test]
    fn unconditional_pairs_are_never_violated(w in prop::collection::vec(0.2f64..2.5, 4), r in 0.5f64..2.0) {
        let k = HPolytope::axis_box(&w[..2]).unwrap();
        let t = HPolytope::weighted_l1(&w[2..], r).unwrap();
        let rep = check_unconditional(&k, &t, BodyEstimator::Quadrature).unwrap();
        prop_assert!(rep.verdict != Verdict::Violated);
    }

    #[test]
    fn improvement_factor_is_bounded_by_the_ratio(rho in 0.1f64..0.8, n in 2usize..5, a in 0.05f64..2.0) {
        let model = CorrelationModel::equicorrelated(n, rho).unwrap();
        let c = 1.8;
        let ratio = sidak_ratio(&model, &ThresholdVector::uniform(n, c).unwrap(), &cfg(1)).unwrap();
        let a0 = improvement_factor(&model, c, 0.0, &cfg(2)).unwrap();
        prop_assert!((a0.value - ratio.value).abs() <= 3.0 * a0.stderr.hypot(ratio.stderr));
        let aa = improvement_factor(&model, c, a, &cfg(3)).unwrap();
        prop_assert!(aa.value <= ratio.value + 3.0 * aa.stderr.hypot(ratio.stderr));
    }
}

#[test]
fn royen_is_an_equality_on_orthogonal_splits() {
    for seed in 0..6u64 {
        let a = CorrelationModel::random_correlation(3, 2, seed).unwrap();
        let b = CorrelationModel::random_correlation(2, 2, seed + 50).unwrap();
        let model = CorrelationModel::block_diagonal(&[a, b]).unwrap();
        let c = ThresholdVector::new(vec![1.0, 0.7, 1.6, 1.2, 0.9]).unwrap();
        let r = check_royen(&model, &c, 3, &QmcConfig::new(1 << 16, seed)).unwrap();
        assert!(r.margin.abs() <= 3.0 * r.stderr, "seed {seed}: {} ± {}", r.margin, r.stderr);
    }
}

#[test]
fn hull_margin_is_monotone_beyond_the_minimum() {
    // Past its minimum near N = 1.7 the margin rises back toward 0: it is
    // negative and shrinking in magnitude across 2.5, 3, 4.
    let margins: Vec<f64> = [2.5, 3.0, 4.0]
        .iter()
        .map(|&n| hull_counterexample(n, BodyEstimator::Quadrature).unwrap().report.margin)
        .collect();
    assert!(margins.iter().all(|&m| m < 0.0));
    assert!(margins.windows(2).all(|w| w[0] < w[1]), "{margins:?}");
    let mc: Vec<f64> = [2.5, 4.0]
        .iter()
        .map(|&n| hull_counterexample(n, BodyEstimator::MonteCarlo { budget: 400_000, seed: 1 }).unwrap().report.margin)
        .collect();
    assert!(mc[0] < mc[1]);
}

#[test]
fn improved_level_never_drops_below_nominal() {
    for (model, alpha) in [
        (CorrelationModel::identity(3), 0.1),
        (CorrelationModel::equicorrelated(4, 0.3).unwrap(), 0.05),
        (CorrelationModel::random_correlation(4, 2, 3).unwrap(), 0.2),
    ] {
        let r = improved_confidence(&model, alpha, &cfg(4)).unwrap();
        assert!(r.improved_level >= 1.0 - alpha && r.improved_level <= 1.0);
        assert!(r.factor_best >= 1.0);
    }
}

#[test]
fn minkowski_sum_membership_matches_polygon_sum() {
    let k = HPolytope::axis_box(&[1.0, 0.3]).unwrap();
    let t = HPolytope::weighted_l1(&[1.0, 2.0], 0.8).unwrap();
    let exact = k.to_polygon().unwrap().minkowski_sum(&t.to_polygon().unwrap()).unwrap();
    let sum = gcilab::measure::MinkowskiSum::new(&k, &t).unwrap();
    let lp = gauss_measure_mc(&sum, 20_000, 5).unwrap();
    let poly = gauss_measure_mc(&exact, 20_000, 5).unwrap();
    // Same sample: the two membership tests must agree point for point.
    assert_eq!(lp.value, poly.value);
    assert!((sum.support(&[1.0, 1.0]).unwrap() - exact.support(&[1.0, 1.0]).unwrap()).abs() < 1e-9);
}
