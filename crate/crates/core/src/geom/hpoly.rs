//! Origin-symmetric polytopes in halfspace form.

use serde::{Deserialize, Serialize};

use super::lp::{feasible, maximize, LpOutcome};
use super::polygon::{clip, Polygon2D};
use super::{check_direction, check_point, ConvexBody};
use crate::error::{Error, Result};

/// Membership slack, relative to `max(1, offset)`.
pub const CONTAINS_TOL: f64 = 1e-12;
/// Two normals closer than this (entrywise) are the same facet direction.
const NORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    /// Unit outward normal.
    pub normal: Vec<f64>,
    /// Strictly positive, so the origin is interior.
    pub offset: f64,
}

/// `{x : <n_j, x> <= b_j}` with the halfspace list closed under `n -> -n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HPolytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
}

fn same_normal(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= NORMAL_TOL)
}

impl HPolytope {
    /// Normalize each `(normal, offset)` pair to a unit normal and close the
    /// list under negation. A pair and its mirror must agree on the offset.
    /// Fails with `Unbounded` if the body is not bounded along `±e_j`.
    pub fn new(halfspaces: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let dim = halfspaces.first().map_or(0, |h| h.0.len());
        if dim == 0 {
            return Err(Error::InvalidDimension("polytope needs at least one halfspace".into()));
        }
        let mut list: Vec<Halfspace> = Vec::new();
        for (i, (normal, offset)) in halfspaces.into_iter().enumerate() {
            if normal.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: normal.len() });
            }
            let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::DegenerateInput(format!("halfspace {i} has a zero normal")));
            }
            if !(offset > 0.0) || !offset.is_finite() {
                return Err(Error::DegenerateInput(format!(
                    "halfspace {i} needs a finite positive offset, got {offset}"
                )));
            }
            let h = Halfspace { normal: normal.iter().map(|v| v / norm).collect(), offset: offset / norm };
            let mirror = Halfspace { normal: h.normal.iter().map(|v| -v).collect(), offset: h.offset };
            for candidate in [h, mirror] {
                match list.iter().find(|g| same_normal(&g.normal, &candidate.normal)) {
                    Some(g) if (g.offset - candidate.offset).abs() > NORMAL_TOL * g.offset.max(1.0) => {
                        return Err(Error::DegenerateInput(format!(
                            "halfspace {i} and its mirror have different offsets ({} vs {})",
                            g.offset, candidate.offset
                        )));
                    }
                    Some(_) => {}
                    None => list.push(candidate),
                }
            }
        }
        let poly = Self { dim, halfspaces: list };
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            if poly.support(&e)?.is_infinite() {
                return Err(Error::Unbounded(format!("polytope is unbounded along e_{j}")));
            }
        }
        Ok(poly)
    }

    /// `prod_j [-w_j, w_j]`.
    pub fn axis_box(half_widths: &[f64]) -> Result<Self> {
        let d = half_widths.len();
        Self::new(
            half_widths
                .iter()
                .enumerate()
                .map(|(j, &w)| {
                    let mut e = vec![0.0; d];
                    e[j] = 1.0;
                    (e, w)
                })
                .collect(),
        )
    }

    /// `{x : sum_j w_j |x_j| <= r}` with `w_j > 0`.
    pub fn weighted_l1(weights: &[f64], r: f64) -> Result<Self> {
        let d = weights.len();
        if d == 0 || d > 20 {
            return Err(Error::InvalidDimension(format!("weighted l1 ball needs 1..=20 coordinates, got {d}")));
        }
        let rows = (0..1usize << d)
            .map(|mask| {
                let n = (0..d).map(|j| if mask >> j & 1 == 1 { -weights[j] } else { weights[j] }).collect();
                (n, r)
            })
            .collect();
        Self::new(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    fn system(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.halfspaces.iter().map(|h| h.normal.clone()).collect(), self.halfspaces.iter().map(|h| h.offset).collect())
    }

    /// Symmetric under every coordinate reflection: each facet's sign-flipped
    /// copies are facets too.
    pub fn is_unconditional(&self) -> bool {
        self.halfspaces.iter().all(|h| {
            (0..self.dim).all(|j| {
                let mut flipped = h.normal.clone();
                flipped[j] = -flipped[j];
                self.halfspaces.iter().any(|g| {
                    same_normal(&g.normal, &flipped) && (g.offset - h.offset).abs() <= NORMAL_TOL * h.offset.max(1.0)
                })
            })
        })
    }

    pub fn require_unconditional(&self) -> Result<()> {
        if self.is_unconditional() {
            Ok(())
        } else {
            Err(Error::NotUnconditional("some facet's coordinate reflection is not a facet".into()))
        }
    }

    /// Whether `p` satisfies every halfspace up to [`CONTAINS_TOL`].
    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| {
            let v: f64 = h.normal.iter().zip(p).map(|(a, b)| a * b).sum();
            v <= h.offset + CONTAINS_TOL * h.offset.max(1.0)
        })
    }

    /// `K ∩ T`: the union of the halfspace lists, keeping the smaller offset
    /// for shared normals.
    pub fn intersection(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut merged: Vec<Halfspace> = Vec::new();
        for h in self.halfspaces.iter().chain(&other.halfspaces) {
            match merged.iter_mut().find(|g| same_normal(&g.normal, &h.normal)) {
                Some(g) => g.offset = g.offset.min(h.offset),
                None => merged.push(h.clone()),
            }
        }
        Self::new(merged.into_iter().map(|h| (h.normal, h.offset)).collect())
    }

    /// Vertex form of a planar polytope, by clipping its bounding box.
    pub fn to_polygon(&self) -> Result<Polygon2D> {
        if self.dim != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.dim });
        }
        let hx = self.support(&[1.0, 0.0])?;
        let hy = self.support(&[0.0, 1.0])?;
        let mut poly = vec![[hx, hy], [-hx, hy], [-hx, -hy], [hx, -hy]];
        for h in &self.halfspaces {
            poly = clip(&poly, [h.normal[0], h.normal[1]], h.offset);
        }
        Polygon2D::new(poly)
    }
}

/// Whether `p ∈ K + T`: the system `k ∈ K`, `p - k ∈ T` is feasible.
pub fn minkowski_contains(k: &HPolytope, t: &HPolytope, p: &[f64]) -> Result<bool> {
    if k.dim != t.dim {
        return Err(Error::DimensionMismatch { expected: k.dim, got: t.dim });
    }
    check_point(k.dim, p)?;
    let (mut a, mut b) = k.system();
    for h in &t.halfspaces {
        let np: f64 = h.normal.iter().zip(p).map(|(x, y)| x * y).sum();
        a.push(h.normal.iter().map(|v| -v).collect());
        b.push(h.offset - np);
    }
    feasible(&a, &b)
}

impl ConvexBody for HPolytope {
    fn dim(&self) -> usize {
        self.dim
    }

    fn support(&self, direction: &[f64]) -> Result<f64> {
        check_direction(self.dim, direction)?;
        let (a, b) = self.system();
        Ok(match maximize(direction, &a, &b)? {
            LpOutcome::Optimal(v) => v,
            LpOutcome::Unbounded => f64::INFINITY,
        })
    }

    fn contains(&self, point: &[f64]) -> Result<bool> {
        check_point(self.dim, point)?;
        Ok(self.contains_point(point))
    }
}
