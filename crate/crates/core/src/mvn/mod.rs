//! Normal CDF/quantile and multivariate normal rectangle probabilities.

mod genz;
mod normal;
mod oracle;

use serde::{Deserialize, Serialize};

pub use genz::{rect_prob, symmetric_rect_prob, CLOSED_FORM_TOL};
pub use normal::{interval_prob, inv_std_normal_cdf, std_normal_cdf, std_normal_pdf, two_sided_prob};
pub use oracle::{oracle_rect_prob, oracle_symmetric_rect_prob, ORACLE_TOL};

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    QuadratureOracle,
    Qmc,
    Mc,
}

/// A probability together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub method: Method,
    pub seed: Option<u64>,
}

impl ProbabilityEstimate {
    pub fn exact(value: f64) -> Self {
        Self { value: value.clamp(0.0, 1.0), stderr: 0.0, samples: 0, method: Method::ClosedForm, seed: None }
    }

    /// A closed-form value, reported with the normal-CDF accuracy as its
    /// standard error.
    pub fn closed_form(value: f64) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            stderr: CLOSED_FORM_TOL,
            samples: 0,
            method: Method::ClosedForm,
            seed: None,
        }
    }

    pub fn lower_bound(&self, sigmas: f64) -> f64 {
        self.value - sigmas * self.stderr
    }
}

/// Sample budget, randomization count and seed for randomized estimators.
///
/// `budget` is the total number of integrand (or membership) evaluations;
/// randomized QMC splits it evenly over `replicates` independent shifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QmcConfig {
    pub budget: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl QmcConfig {
    pub const DEFAULT_REPLICATES: usize = 12;
    pub const MIN_BUDGET: usize = 1000;

    pub fn new(budget: usize, seed: u64) -> Self {
        Self { budget, replicates: Self::DEFAULT_REPLICATES, seed }
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Default for QmcConfig {
    fn default() -> Self {
        Self::new(1 << 16, 0)
    }
}
