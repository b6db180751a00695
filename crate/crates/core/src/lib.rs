//! Numerical laboratory for Gaussian correlation inequalities.
//!
//! The crate computes Gaussian measures of origin-symmetric convex bodies and
//! multivariate normal rectangle probabilities, and builds a family of
//! checkers on top of them: the Šidák–Khatri inequality and its refinement,
//! Royen's correlation inequality, the strong (sum-form) correlation
//! conjecture, the slab and unconditional cases, Tehranchi's partial bound,
//! the convex-hull counterexample, and the tensorization identity.
//!
//! Module map:
//!
//! * [`model`]: zero-mean Gaussian vectors as covariance plus factor rows.
//! * [`mvn`]: normal CDF/quantile, randomized-QMC rectangle probabilities and
//!   an independent tensor-quadrature oracle.
//! * [`geom`]: band bodies, exact symmetric polygons, H-polytopes, simplex LP.
//! * [`measure`]: Gaussian measure of bodies, fiber measures.
//! * [`lab`]: inequality checkers, counterexample reproduction and search.
//! * [`correct`]: classical and refined Šidák multiple-comparison correction.
//! * [`cli`]: the command-line front end.

pub mod cli;
pub mod correct;
pub mod csvio;
pub mod error;
pub mod extf64;
pub mod geom;
pub mod lab;
pub mod measure;
pub mod model;
pub mod mvn;
pub mod quad;

pub use error::{Error, Result};
pub use model::{CorrelationModel, ThresholdVector};
pub use mvn::{Method, ProbabilityEstimate, QmcConfig};
