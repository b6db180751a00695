//! Checkers whose bodies are bands, i.e. statements about the joint law of
//! `|X_1|, ..., |X_n|`.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{product, term, Backing, InequalityReport, Quantity, Term, VERDICT_SIGMAS};
use crate::error::{Error, Result};
use crate::geom::SymmetricBand;
use crate::model::{CorrelationModel, ThresholdVector};
use crate::mvn::{symmetric_rect_prob, two_sided_prob, ProbabilityEstimate, QmcConfig};

fn check_len(model: &CorrelationModel, c: &ThresholdVector) -> Result<()> {
    if c.len() != model.size() {
        return Err(Error::DimensionMismatch { expected: model.size(), got: c.len() });
    }
    Ok(())
}

fn marginal(model: &CorrelationModel, i: usize, c: f64) -> ProbabilityEstimate {
    ProbabilityEstimate::closed_form(two_sided_prob(c, model.std_dev(i)))
}

fn instance(model: &CorrelationModel, extra: serde_json::Value) -> serde_json::Value {
    let mut v = json!({ "sigma": model.sigma_rows() });
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

/// `Pr(|X_i| <= c_i ∀i) >= ∏ Pr(|X_i| <= c_i)`.
pub fn check_sidak(model: &CorrelationModel, c: &ThresholdVector, cfg: &QmcConfig) -> Result<InequalityReport> {
    let started = Instant::now();
    check_len(model, c)?;
    let joint = symmetric_rect_prob(model, c, cfg)?;
    let marginals: Vec<ProbabilityEstimate> =
        c.as_slice().iter().enumerate().map(|(i, &ci)| marginal(model, i, ci)).collect();
    let rhs = product(marginals.iter().map(|&m| m.into()));
    let mut terms = vec![term("joint", joint)];
    terms.extend(marginals.iter().enumerate().map(|(i, &m)| term(format!("marginal[{i}]"), m)));
    Ok(InequalityReport::new(
        "sidak",
        Backing::Theorem,
        instance(model, json!({ "c": c })),
        joint.into(),
        rhs,
        terms,
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

/// One step of the Šidák induction:
/// `Pr(all) >= Pr(|X_i| <= c_i) Pr(|X_j| <= c_j ∀j ≠ i)`.
pub fn check_sidak_step(
    model: &CorrelationModel,
    c: &ThresholdVector,
    index: usize,
    cfg: &QmcConfig,
) -> Result<InequalityReport> {
    let started = Instant::now();
    check_len(model, c)?;
    check_index(model, index)?;
    let joint = symmetric_rect_prob(model, c, cfg)?;
    let single = marginal(model, index, c.as_slice()[index]);
    let rest = symmetric_rect_prob(model, &c.masked(|j| j != index), cfg)?;
    Ok(InequalityReport::new(
        "sidak-step",
        Backing::Theorem,
        instance(model, json!({ "c": c, "index": index })),
        joint.into(),
        Quantity::from(single).times(rest.into()),
        vec![term("joint", joint), term("single", single), term("rest", rest)],
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

fn check_index(model: &CorrelationModel, index: usize) -> Result<()> {
    if index >= model.size() {
        return Err(Error::InvalidParameters(format!("index {index} out of range for {} variables", model.size())));
    }
    Ok(())
}

/// The refined inequality for coordinate `i` widened by `a ∈ (0, ∞]`:
///
/// `Pr(|X_i| <= c_i + a) Pr(all <= c) >= Pr(|X_i| <= c_i) Pr(|X_i| <= c_i + a, rest <= c)`.
///
/// At `a = ∞` it is the Šidák step, and the report is exactly
/// [`check_sidak_step`]'s.
pub fn check_refined_sidak(
    model: &CorrelationModel,
    c: &ThresholdVector,
    a: f64,
    index: usize,
    cfg: &QmcConfig,
) -> Result<InequalityReport> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameters(format!("widening must be in (0, inf], got {a}")));
    }
    check_len(model, c)?;
    check_index(model, index)?;
    if a.is_infinite() {
        return check_sidak_step(model, c, index, cfg);
    }
    let started = Instant::now();
    let ci = c.as_slice()[index];
    let wide = c.with(index, ci + a)?;
    let single_wide = marginal(model, index, ci + a);
    let single = marginal(model, index, ci);
    let joint = symmetric_rect_prob(model, c, cfg)?;
    let joint_wide = symmetric_rect_prob(model, &wide, cfg)?;
    Ok(InequalityReport::new(
        "refined-sidak",
        Backing::Theorem,
        instance(model, json!({ "c": c, "a": a, "index": index })),
        Quantity::from(single_wide).times(joint.into()),
        Quantity::from(single).times(joint_wide.into()),
        vec![
            term("single-wide", single_wide),
            term("joint", joint),
            term("single", single),
            term("joint-wide", joint_wide),
        ],
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

/// `Pr(|X_i| <= c_i ∀i) / ∏ Pr(|X_i| <= c_i)`; infinite thresholds
/// contribute a factor 1 to both.
pub fn sidak_ratio(model: &CorrelationModel, c: &ThresholdVector, cfg: &QmcConfig) -> Result<Quantity> {
    check_len(model, c)?;
    let joint = symmetric_rect_prob(model, c, cfg)?;
    let marginals =
        c.as_slice().iter().enumerate().filter(|(_, ci)| ci.is_finite()).map(|(i, &ci)| marginal(model, i, ci).into());
    Ok(Quantity::from(joint).over(product(marginals)))
}

/// `Pr(all) >= Pr(first k) Pr(last n - k)`.
pub fn check_royen(
    model: &CorrelationModel,
    c: &ThresholdVector,
    k: usize,
    cfg: &QmcConfig,
) -> Result<InequalityReport> {
    let started = Instant::now();
    check_len(model, c)?;
    let n = model.size();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameters(format!("split must satisfy 1 <= k < n = {n}, got {k}")));
    }
    let joint = symmetric_rect_prob(model, c, cfg)?;
    let first = symmetric_rect_prob(model, &c.masked(|i| i < k), cfg)?;
    let last = symmetric_rect_prob(model, &c.masked(|i| i >= k), cfg)?;
    Ok(InequalityReport::new(
        "royen",
        Backing::Theorem,
        instance(model, json!({ "c": c, "split": k })),
        joint.into(),
        Quantity::from(first).times(last.into()),
        vec![term("joint", joint), term("first", first), term("last", last)],
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

/// The four probabilities of the strong inequality for bands.
fn strong_terms(
    model: &CorrelationModel,
    s: &ThresholdVector,
    t: &ThresholdVector,
    cfg: &QmcConfig,
) -> Result<(Quantity, Quantity, Vec<Term>)> {
    check_len(model, s)?;
    check_len(model, t)?;
    let sum = symmetric_rect_prob(model, &s.sum(t), cfg)?;
    let meet = symmetric_rect_prob(model, &s.min(t), cfg)?;
    let ps = symmetric_rect_prob(model, s, cfg)?;
    let pt = symmetric_rect_prob(model, t, cfg)?;
    Ok((
        Quantity::from(sum).times(meet.into()),
        Quantity::from(ps).times(pt.into()),
        vec![term("sum", sum), term("min", meet), term("s", ps), term("t", pt)],
    ))
}

/// `Pr(<= s + t) Pr(<= min(s, t)) >= Pr(<= s) Pr(<= t)` (conjectured).
pub fn check_strong_gci_bands(
    model: &CorrelationModel,
    s: &ThresholdVector,
    t: &ThresholdVector,
    cfg: &QmcConfig,
) -> Result<InequalityReport> {
    let started = Instant::now();
    let (lhs, rhs, terms) = strong_terms(model, s, t, cfg)?;
    Ok(InequalityReport::new(
        "strong-gci-bands",
        Backing::Exploratory,
        instance(model, json!({ "s": s, "t": t })),
        lhs,
        rhs,
        terms,
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

/// `Pr(<= s + t) Pr(<= min(s, t)) / (Pr(<= s) Pr(<= t))`.
pub fn strong_gci_ratio(
    model: &CorrelationModel,
    s: &ThresholdVector,
    t: &ThresholdVector,
    cfg: &QmcConfig,
) -> Result<Quantity> {
    let (lhs, rhs, _) = strong_terms(model, s, t, cfg)?;
    Ok(lhs.over(rhs))
}

/// Tehranchi's bound for `√s <= t < 1`:
///
/// `γ(K)γ(T) <= (1-s)^{-d/2} γ(α(K∩T)) γ(β(K+T))` with
/// `α = √(2(1-s)/(1+t))`, `β = √((1-s)/(2(1-t)))`.
///
/// `K + T` is replaced by the band sum of the tightened bands, which contains
/// it, so a violation here is a violation of the bound.
pub fn check_tehranchi(
    model: &CorrelationModel,
    s_thr: &ThresholdVector,
    t_thr: &ThresholdVector,
    s: f64,
    t: f64,
    cfg: &QmcConfig,
) -> Result<InequalityReport> {
    let started = Instant::now();
    if !(s >= 0.0 && s.sqrt() <= t && t < 1.0) {
        return Err(Error::InvalidParameters(format!("need 0 <= s, sqrt(s) <= t < 1; got s={s}, t={t}")));
    }
    check_len(model, s_thr)?;
    check_len(model, t_thr)?;
    let k = SymmetricBand::new(model.clone(), s_thr.clone())?;
    let tb = SymmetricBand::new(model.clone(), t_thr.clone())?;
    let alpha = (2.0 * (1.0 - s) / (1.0 + t)).sqrt();
    let beta = ((1.0 - s) / (2.0 * (1.0 - t))).sqrt();
    let sum = k.tightened()?.sum_outer(&tb.tightened()?)?;
    let meet = symmetric_rect_prob(model, &s_thr.min(t_thr).scaled(alpha), cfg)?;
    let plus = symmetric_rect_prob(model, &sum.thresholds().scaled(beta), cfg)?;
    let pk = symmetric_rect_prob(model, s_thr, cfg)?;
    let pt = symmetric_rect_prob(model, t_thr, cfg)?;
    let d = model.dim() as f64;
    let factor = (1.0 - s).powf(-d / 2.0);
    Ok(InequalityReport::new(
        "tehranchi",
        Backing::Theorem,
        instance(model, json!({ "s_thresholds": s_thr, "t_thresholds": t_thr, "s": s, "t": t })),
        Quantity::from(meet).times(plus.into()).scaled(factor),
        Quantity::from(pk).times(pt.into()),
        vec![term("scaled-intersection", meet), term("scaled-sum", plus), term("K", pk), term("T", pt)],
        Some(cfg.seed),
        cfg.budget,
        started,
    ))
}

/// Strong-inequality ratio of an N-fold product against the base ratio to
/// the N-th power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorizeReport {
    pub copies: usize,
    pub base_ratio: Quantity,
    pub product_ratio: Quantity,
    /// `base_ratio^N`.
    pub base_power: Quantity,
    /// `product_ratio - base_power`.
    pub gap: f64,
    pub stderr: f64,
    /// `|gap| <= 3 stderr`.
    pub agrees: bool,
    pub seed: u64,
    pub budget: usize,
    pub runtime_ms: u64,
}

pub fn tensorize_check(
    model: &CorrelationModel,
    s: &ThresholdVector,
    t: &ThresholdVector,
    copies: usize,
    cfg: &QmcConfig,
) -> Result<TensorizeReport> {
    let started = Instant::now();
    if !(2..=3).contains(&copies) {
        return Err(Error::InvalidParameters(format!("N must be 2 or 3, got {copies}")));
    }
    let base_ratio = strong_gci_ratio(model, s, t, cfg)?;
    let power = model.power(copies)?;
    let product_ratio = strong_gci_ratio(&power, &s.repeated(copies), &t.repeated(copies), cfg)?;
    let base_power = base_ratio.powi(copies as i32);
    let gap = product_ratio.value - base_power.value;
    let stderr = product_ratio.stderr.hypot(base_power.stderr);
    Ok(TensorizeReport {
        copies,
        base_ratio,
        product_ratio,
        base_power,
        gap,
        stderr,
        agrees: gap.abs() <= VERDICT_SIGMAS * stderr,
        seed: cfg.seed,
        budget: cfg.budget,
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::Verdict;
    use crate::mvn::{oracle_symmetric_rect_prob, std_normal_cdf};

    fn cfg() -> QmcConfig {
        QmcConfig::new(1 << 15, 17)
    }

    fn rank1(n: usize) -> CorrelationModel {
        CorrelationModel::from_factor_rows(vec![vec![1.0]; n]).unwrap()
    }

    fn bivariate(rho: f64) -> CorrelationModel {
        CorrelationModel::from_covariance(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap()
    }

    #[test]
    fn sidak_identity_is_an_equality() {
        let r =
            check_sidak(&CorrelationModel::identity(3), &ThresholdVector::uniform(3, 1.2).unwrap(), &cfg()).unwrap();
        assert!(r.margin.abs() <= 3.0 * r.stderr, "{r:?}");
        assert_ne!(r.verdict, Verdict::Violated);
    }

    #[test]
    fn sidak_rank_one_collapse() {
        let r = check_sidak(&rank1(3), &ThresholdVector::uniform(3, 1.0).unwrap(), &cfg()).unwrap();
        let q = 2.0 * std_normal_cdf(1.0) - 1.0;
        assert!((r.lhs.value - q).abs() < 1e-12);
        assert!((r.rhs.value - q.powi(3)).abs() < 1e-12);
        assert!((r.margin - (q - q.powi(3))).abs() < 1e-12);
        assert!((r.margin - 0.364).abs() < 1e-3);
        assert_eq!(r.verdict, Verdict::Supported);
    }

    #[test]
    fn sidak_correlated_pair_against_oracle() {
        let m = bivariate(0.5);
        let c = ThresholdVector::uniform(2, 1.0).unwrap();
        let r = check_sidak(&m, &c, &cfg()).unwrap();
        let oracle = oracle_symmetric_rect_prob(&m, &c).unwrap().value;
        assert!((r.lhs.value - oracle).abs() <= 3.0 * r.lhs.stderr + 1e-7);
        assert_eq!(r.verdict, Verdict::Supported);
    }

    #[test]
    fn refined_sidak_examples() {
        let c = ThresholdVector::uniform(2, 1.0).unwrap();
        let r = check_refined_sidak(&CorrelationModel::identity(2), &c, 0.7, 0, &cfg()).unwrap();
        assert!(r.margin.abs() <= 3.0 * r.stderr);
        let m = bivariate(0.9);
        let r = check_refined_sidak(&m, &c, 1.0, 0, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Supported);
        // Oracle values of the four probabilities.
        let q = |x: f64| 2.0 * std_normal_cdf(x) - 1.0;
        let j = oracle_symmetric_rect_prob(&m, &c).unwrap().value;
        let jw = oracle_symmetric_rect_prob(&m, &c.with(0, 2.0).unwrap()).unwrap().value;
        let margin = q(2.0) * j - q(1.0) * jw;
        assert!((r.margin - margin).abs() <= 3.0 * r.stderr + 1e-7, "{} vs {}", r.margin, margin);
        assert!(margin > 0.0);
    }

    #[test]
    fn refined_sidak_at_infinity_is_the_step() {
        let m = CorrelationModel::random_correlation(4, 3, 2).unwrap();
        let c = ThresholdVector::new(vec![1.0, 0.7, 1.5, 2.0]).unwrap();
        let step = check_sidak_step(&m, &c, 2, &cfg()).unwrap();
        let refined = check_refined_sidak(&m, &c, f64::INFINITY, 2, &cfg()).unwrap();
        assert_eq!(step.margin, refined.margin);
        assert_eq!(step.lhs, refined.lhs);
        assert_eq!(step.rhs, refined.rhs);
        assert!(check_refined_sidak(&m, &c, 0.0, 0, &cfg()).is_err());
        assert!(check_refined_sidak(&m, &c, 1.0, 4, &cfg()).is_err());
    }

    #[test]
    fn ratio_examples() {
        let c = ThresholdVector::uniform(2, 1.0).unwrap();
        let r = sidak_ratio(&CorrelationModel::identity(2), &c, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let r = sidak_ratio(&rank1(2), &c, &cfg()).unwrap();
        assert!((r.value - 1.0 / (2.0 * std_normal_cdf(1.0) - 1.0)).abs() < 1e-10);
        assert!((r.value - 1.4648).abs() < 1e-4);
        let m = CorrelationModel::random_correlation(3, 2, 8).unwrap();
        let c = ThresholdVector::new(vec![0.8, 1.1, 1.3]).unwrap();
        let narrow = sidak_ratio(&m, &c, &cfg()).unwrap();
        let wide = sidak_ratio(&m, &c.with(1, 2.0).unwrap(), &cfg()).unwrap();
        assert!(narrow.value >= wide.value - 3.0 * narrow.stderr.hypot(wide.stderr));
    }

    #[test]
    fn royen_examples() {
        let c = ThresholdVector::uniform(2, 1.0).unwrap();
        let r = check_royen(&rank1(2), &c, 1, &cfg()).unwrap();
        let q = 2.0 * std_normal_cdf(1.0) - 1.0;
        assert!((r.lhs.value - q).abs() < 1e-12 && (r.rhs.value - q * q).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Supported);
        let blocks = CorrelationModel::block_diagonal(&[bivariate(0.6), bivariate(-0.3)]).unwrap();
        let c = ThresholdVector::new(vec![1.0, 0.8, 1.2, 0.5]).unwrap();
        let r = check_royen(&blocks, &c, 2, &cfg()).unwrap();
        assert!(r.margin.abs() <= 3.0 * r.stderr, "{r:?}");
        assert!(check_royen(&blocks, &c, 0, &cfg()).is_err());
        assert!(check_royen(&blocks, &c, 4, &cfg()).is_err());
    }

    #[test]
    fn strong_bands_examples() {
        let m = CorrelationModel::random_correlation(3, 2, 5).unwrap();
        let s = ThresholdVector::new(vec![0.5, 1.0, 1.5]).unwrap();
        let r = check_strong_gci_bands(&m, &s, &s, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Supported);
        assert_eq!(r.backing, Backing::Exploratory);
        // Identity: the inequality factorizes into 1-D ones, each of which
        // can be checked against quadrature.
        let id = CorrelationModel::identity(2);
        let s = ThresholdVector::new(vec![0.4, 2.0]).unwrap();
        let t = ThresholdVector::new(vec![1.5, 0.3]).unwrap();
        let r = check_strong_gci_bands(&id, &s, &t, &cfg()).unwrap();
        let one = CorrelationModel::identity(1);
        let g = |c: f64| oracle_symmetric_rect_prob(&one, &ThresholdVector::new(vec![c]).unwrap()).unwrap().value;
        let lhs = g(1.9) * g(0.4) * g(2.3) * g(0.3);
        let rhs = g(0.4) * g(2.0) * g(1.5) * g(0.3);
        assert!((r.lhs.value - lhs).abs() < 1e-6 && (r.rhs.value - rhs).abs() < 1e-6);
    }

    #[test]
    fn tehranchi_examples() {
        let id = CorrelationModel::identity(2);
        let c = ThresholdVector::new(vec![0.8, 1.3]).unwrap();
        let r = check_tehranchi(&id, &c, &c, 0.25, 0.5, &cfg()).unwrap();
        assert_eq!(r.verdict, Verdict::Supported);
        let r0 = check_tehranchi(&id, &c, &c, 0.0, 0.0, &cfg()).unwrap();
        let g = |x: f64| 2.0 * std_normal_cdf(x) - 1.0;
        let expected = g(0.8 * 2f64.sqrt()) * g(1.3 * 2f64.sqrt()) * g(1.6 / 2f64.sqrt()) * g(2.6 / 2f64.sqrt());
        assert!((r0.lhs.value - expected).abs() < 1e-10);
        assert!(matches!(check_tehranchi(&id, &c, &c, 0.25, 0.4, &cfg()), Err(Error::InvalidParameters(_))));
        assert!(check_tehranchi(&id, &c, &c, 0.0, 1.0, &cfg()).is_err());
    }

    #[test]
    fn tensorization_examples() {
        let c = ThresholdVector::uniform(2, 1.0).unwrap();
        let r = tensorize_check(&CorrelationModel::identity(2), &c, &c, 2, &cfg()).unwrap();
        // The normalized ratio `product^(1/N) / base` is exactly 1.
        assert!((r.product_ratio.value.sqrt() / r.base_ratio.value - 1.0).abs() < 1e-9);
        assert!(r.agrees);
        let s = ThresholdVector::new(vec![0.5, 1.5]).unwrap();
        let t = ThresholdVector::new(vec![1.2, 0.7]).unwrap();
        let r = tensorize_check(&rank1(2), &s, &t, 2, &cfg()).unwrap();
        assert!(r.agrees, "{r:?}");
        assert!((r.product_ratio.value - r.base_ratio.value.powi(2)).abs() < 1e-9);
        assert!(tensorize_check(&rank1(2), &s, &t, 4, &cfg()).is_err());
    }
}
