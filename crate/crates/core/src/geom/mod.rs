//! Origin-symmetric convex bodies.
//!
//! Three representations share the [`ConvexBody`] interface: band bodies in
//! any dimension, exact planar polygons (with exact Minkowski sums, hulls and
//! intersections) and halfspace polytopes, whose Minkowski sums are accessed
//! through LP feasibility.

mod band;
mod hpoly;
pub mod lp;
mod polygon;

pub use band::SymmetricBand;
pub use hpoly::{minkowski_contains, HPolytope, Halfspace};
pub use polygon::{Point, Polygon2D, DEDUP_TOL};

use crate::error::{Error, Result};

pub trait ConvexBody: Sync {
    fn dim(&self) -> usize;

    /// `sup { <direction, y> : y in body }`, possibly `+inf`.
    fn support(&self, direction: &[f64]) -> Result<f64>;

    fn contains(&self, point: &[f64]) -> Result<bool>;
}

pub(crate) fn check_direction(dim: usize, direction: &[f64]) -> Result<()> {
    check_point(dim, direction)?;
    if direction.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroDirection);
    }
    Ok(())
}

pub(crate) fn check_point(dim: usize, point: &[f64]) -> Result<()> {
    if point.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: point.len() });
    }
    Ok(())
}
