//! Inequality checkers.
//!
//! Every checker estimates the two sides of an inequality `lhs >= rhs`,
//! propagates their standard errors and classifies the margin with a
//! three-way gate at three combined standard errors. Checkers of proved
//! statements are tagged [`Backing::Theorem`]; a violated verdict from one of
//! them points at a bug. Conjecture checkers are [`Backing::Exploratory`] and
//! their violations are findings.

mod bands;
mod planar;
mod search;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use bands::{
    check_refined_sidak, check_royen, check_sidak, check_sidak_step, check_strong_gci_bands, check_tehranchi,
    sidak_ratio, strong_gci_ratio, tensorize_check, TensorizeReport,
};
pub use planar::{
    check_lattice_premise, check_rogers_shephard, check_slab_band, check_slab_polygon, check_strong_gci_2d,
    check_unconditional, hull_counterexample, BodyEstimator, HullCounterexample, LatticeReport, ReductionTrace,
};
pub use search::{search_counterexample, Family, SearchResult};

use crate::mvn::ProbabilityEstimate;

/// Gate width in combined standard errors.
pub const VERDICT_SIGMAS: f64 = 3.0;

/// A derived value with a first-order standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub stderr: f64,
}

impl Quantity {
    pub fn new(value: f64, stderr: f64) -> Self {
        Self { value, stderr }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// `stderr(ab) = |a| σ_b + |b| σ_a`.
    pub fn times(self, other: Self) -> Self {
        Self {
            value: self.value * other.value,
            stderr: self.value.abs() * other.stderr + other.value.abs() * self.stderr,
        }
    }

    /// First-order quotient: relative errors add.
    pub fn over(self, other: Self) -> Self {
        let value = self.value / other.value;
        let rel = self.stderr / self.value.abs().max(f64::MIN_POSITIVE)
            + other.stderr / other.value.abs().max(f64::MIN_POSITIVE);
        Self { value, stderr: value.abs() * rel }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self { value: self.value * factor, stderr: self.stderr * factor.abs() }
    }

    pub fn powi(self, n: i32) -> Self {
        let value = self.value.powi(n);
        Self { value, stderr: (n as f64) * self.value.abs().powi(n - 1) * self.stderr }
    }

    pub fn lower_bound(self, sigmas: f64) -> f64 {
        self.value - sigmas * self.stderr
    }
}

impl From<ProbabilityEstimate> for Quantity {
    fn from(p: ProbabilityEstimate) -> Self {
        Self { value: p.value, stderr: p.stderr }
    }
}

/// Product of estimates with first-order error propagation.
pub fn product<I: IntoIterator<Item = Quantity>>(items: I) -> Quantity {
    items.into_iter().fold(Quantity::exact(1.0), Quantity::times)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Supported,
    Violated,
    Inconclusive,
}

impl Verdict {
    /// Supported iff `margin >= 3σ`, violated iff `margin <= -3σ`.
    pub fn classify(margin: f64, stderr: f64) -> Self {
        if margin >= VERDICT_SIGMAS * stderr {
            Verdict::Supported
        } else if margin <= -VERDICT_SIGMAS * stderr {
            Verdict::Violated
        } else {
            Verdict::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backing {
    Theorem,
    Exploratory,
}

/// A named estimate entering one side of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub estimate: ProbabilityEstimate,
}

pub(crate) fn term(name: impl Into<String>, estimate: ProbabilityEstimate) -> Term {
    Term { name: name.into(), estimate }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub label: String,
    pub backing: Backing,
    pub instance: serde_json::Value,
    pub lhs: Quantity,
    pub rhs: Quantity,
    /// `lhs - rhs`.
    pub margin: f64,
    /// Side errors combined in quadrature.
    pub stderr: f64,
    pub verdict: Verdict,
    pub terms: Vec<Term>,
    pub seed: Option<u64>,
    pub budget: usize,
    pub runtime_ms: u64,
}

impl InequalityReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        label: &str,
        backing: Backing,
        instance: serde_json::Value,
        lhs: Quantity,
        rhs: Quantity,
        terms: Vec<Term>,
        seed: Option<u64>,
        budget: usize,
        started: Instant,
    ) -> Self {
        let margin = lhs.value - rhs.value;
        let stderr = lhs.stderr.hypot(rhs.stderr);
        Self {
            label: label.to_string(),
            backing,
            instance,
            lhs,
            rhs,
            margin,
            stderr,
            verdict: Verdict::classify(margin, stderr),
            terms,
            seed,
            budget,
            runtime_ms: started.elapsed().as_millis() as u64,
        }
    }

    /// Whether this report refutes a proved statement.
    pub fn is_theorem_violation(&self) -> bool {
        self.backing == Backing::Theorem && self.verdict == Verdict::Violated
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_is_three_sigma() {
        assert_eq!(Verdict::classify(0.31, 0.1), Verdict::Supported);
        assert_eq!(Verdict::classify(0.29, 0.1), Verdict::Inconclusive);
        assert_eq!(Verdict::classify(-0.31, 0.1), Verdict::Violated);
        assert_eq!(Verdict::classify(0.0, 1e-12), Verdict::Inconclusive);
    }

    #[test]
    fn error_propagation() {
        let a = Quantity::new(0.5, 0.01);
        let b = Quantity::new(0.8, 0.02);
        let p = a.times(b);
        assert!((p.value - 0.4).abs() < 1e-15);
        assert!((p.stderr - (0.5 * 0.02 + 0.8 * 0.01)).abs() < 1e-15);
        let q = a.over(b);
        assert!((q.stderr - 0.625 * (0.02 + 0.025)).abs() < 1e-15);
        let s = a.powi(3);
        assert!((s.stderr - 3.0 * 0.25 * 0.01).abs() < 1e-15);
        assert_eq!(product([a, b]), Quantity::exact(1.0).times(a).times(b));
    }

    proptest::proptest! {
        #[test]
        fn verdict_matches_definition(margin in -1.0..1.0f64, stderr in 1e-12..0.5f64) {
            let v = Verdict::classify(margin, stderr);
            proptest::prop_assert_eq!(v == Verdict::Supported, margin >= 3.0 * stderr);
            proptest::prop_assert_eq!(v == Verdict::Violated, margin <= -3.0 * stderr);
        }
    }
}
