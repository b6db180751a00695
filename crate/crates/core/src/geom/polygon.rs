//! Exact centrally symmetric convex polygons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::band::SymmetricBand;
use super::hpoly::HPolytope;
use super::{check_direction, check_point, ConvexBody};
use crate::error::{Error, Result};
use crate::model::{CorrelationModel, ThresholdVector};

/// Relative tolerance for merging points and dropping collinear vertices.
pub const DEDUP_TOL: f64 = 1e-12;
/// Relative tolerance for the central-symmetry check.
pub const SYMMETRY_TOL: f64 = 1e-9;

pub type Point = [f64; 2];

/// Counterclockwise, strictly convex, centrally symmetric vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon2D {
    vertices: Vec<Point>,
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn scale_of(points: &[Point]) -> f64 {
    points.iter().fold(0.0_f64, |m, p| m.max(p[0].abs()).max(p[1].abs())).max(f64::MIN_POSITIVE)
}

/// Monotone-chain convex hull, counterclockwise, collinear points removed.
fn hull(points: &[Point]) -> Vec<Point> {
    let scale = scale_of(points);
    let eps = DEDUP_TOL * scale;
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= eps && (a[1] - b[1]).abs() <= eps);
    if pts.len() < 3 {
        return pts;
    }
    let area_eps = DEDUP_TOL * scale * scale;
    let mut out: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = out.len();
        let iter: Box<dyn Iterator<Item = &Point>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while out.len() >= start + 2 && cross(out[out.len() - 2], out[out.len() - 1], p) <= area_eps {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
    }
    // Chain endpoints are never tested above; rounding can leave one of
    // them in the middle of an edge.
    let mut i = 0;
    while out.len() >= 3 && i < out.len() {
        let n = out.len();
        if cross(out[(i + n - 1) % n], out[i], out[(i + 1) % n]) <= area_eps {
            out.remove(i);
            i = i.saturating_sub(1);
        } else {
            i += 1;
        }
    }
    out
}

impl Polygon2D {
    /// Convex hull of `points`, which must be centrally symmetric.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("polygon vertices must be finite".into()));
        }
        let vertices = hull(&points);
        if vertices.len() < 4 {
            return Err(Error::DegenerateInput(format!(
                "a symmetric polygon needs at least 4 vertices, got {}",
                vertices.len()
            )));
        }
        let tol = SYMMETRY_TOL * scale_of(&vertices);
        for v in &vertices {
            let mirrored = vertices.iter().any(|w| (v[0] + w[0]).abs() <= tol && (v[1] + w[1]).abs() <= tol);
            if !mirrored {
                return Err(Error::DegenerateInput(format!(
                    "polygon is not centrally symmetric: no vertex near {:?}",
                    [-v[0], -v[1]]
                )));
            }
        }
        Ok(Self { vertices })
    }

    /// Convex hull of `points` together with their negations.
    pub fn symmetric_hull(points: &[Point]) -> Result<Self> {
        let all: Vec<Point> = points.iter().flat_map(|p| [*p, [-p[0], -p[1]]]).collect();
        Self::new(all)
    }

    /// `[-a, a] x [-b, b]`.
    pub fn rectangle(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![[a, b], [-a, b], [-a, -b], [a, -b]])
    }

    /// Regular `2m`-gon with circumradius `r`, first vertex at angle `phase`.
    pub fn regular(m: usize, r: f64, phase: f64) -> Result<Self> {
        let k = 2 * m;
        let pts = (0..k)
            .map(|i| {
                let t = phase + std::f64::consts::TAU * i as f64 / k as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        Self::new(pts)
    }

    /// Symmetric hull of `half_points` random points with radii in
    /// `[0.3, 3]` and uniform angles.
    pub fn random(half_points: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let pts: Vec<Point> = (0..half_points.max(2))
                .map(|_| {
                    let t = rng.random::<f64>() * std::f64::consts::PI;
                    let r = 0.3 + 2.7 * rng.random::<f64>();
                    [r * t.cos(), r * t.sin()]
                })
                .collect();
            if let Ok(p) = Self::symmetric_hull(&pts) {
                return Ok(p);
            }
        }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Shoelace area.
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    pub fn support_at(&self, u: Point) -> f64 {
        self.vertices.iter().map(|&v| dot(u, v)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Membership by the sign of the edge cross products.
    pub fn contains_point(&self, p: Point) -> bool {
        let n = self.vertices.len();
        let tol = DEDUP_TOL * scale_of(&self.vertices).max(1.0);
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(a, b, p) >= -tol * len
        })
    }

    /// Outward unit normals and offsets `(u, h)` of every edge.
    pub fn halfplanes(&self) -> Vec<(Point, f64)> {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                let e = [b[0] - a[0], b[1] - a[1]];
                let len = e[0].hypot(e[1]);
                let u = [e[1] / len, -e[0] / len];
                (u, dot(u, a))
            })
            .collect()
    }

    /// Exact Minkowski sum by merging the edge sequences by angle.
    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        // Each edge list starts at its smallest angle in [0, 2π), so both
        // start vertices are extreme for the same direction even when
        // rounding tilts a horizontal edge to just below 2π.
        let edges = |poly: &[Point]| -> (usize, Vec<(f64, Point)>) {
            let n = poly.len();
            let raw: Vec<(f64, Point)> = (0..n)
                .map(|k| {
                    let a = poly[k];
                    let b = poly[(k + 1) % n];
                    let e = [b[0] - a[0], b[1] - a[1]];
                    let mut t = e[1].atan2(e[0]);
                    if t < 0.0 {
                        t += std::f64::consts::TAU;
                    }
                    (t, e)
                })
                .collect();
            let start = (0..n).min_by(|&a, &b| raw[a].0.total_cmp(&raw[b].0)).unwrap_or(0);
            (start, (0..n).map(|k| raw[(start + k) % n]).collect())
        };
        let (p, q) = (&self.vertices, &other.vertices);
        let ((start_p, ep), (start_q, eq)) = (edges(p), edges(q));
        let mut current = [p[start_p][0] + q[start_q][0], p[start_p][1] + q[start_q][1]];
        let mut out = Vec::with_capacity(ep.len() + eq.len());
        let (mut i, mut j) = (0, 0);
        while i < ep.len() || j < eq.len() {
            out.push(current);
            let take_p = j >= eq.len() || (i < ep.len() && ep[i].0 <= eq[j].0);
            let e = if take_p {
                i += 1;
                ep[i - 1].1
            } else {
                j += 1;
                eq[j - 1].1
            };
            current = [current[0] + e[0], current[1] + e[1]];
        }
        Self::new(out)
    }

    /// `conv(P ∪ Q)`.
    pub fn convex_hull_union(&self, other: &Self) -> Result<Self> {
        let mut pts = self.vertices.clone();
        pts.extend_from_slice(&other.vertices);
        Self::new(pts)
    }

    /// `P ∩ Q` by clipping `P` against every edge of `Q`.
    pub fn intersection(&self, other: &Self) -> Result<Self> {
        let mut poly = self.vertices.clone();
        for (u, h) in other.halfplanes() {
            poly = clip(&poly, u, h);
            if poly.is_empty() {
                break;
            }
        }
        Self::new(poly)
    }

    /// `P ∩ {|<x, u>| <= w}` for a unit vector `u`.
    pub fn clipped_by_slab(&self, u: Point, w: f64) -> Result<Self> {
        let once = clip(&self.vertices, u, w);
        Self::new(clip(&once, [-u[0], -u[1]], w))
    }

    /// Image under the 2x2 matrix `m` (row-major).
    pub fn linear_map(&self, m: [[f64; 2]; 2]) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() <= DEDUP_TOL {
            return Err(Error::DegenerateInput(format!("singular linear map (det = {det})")));
        }
        Self::new(
            self.vertices.iter().map(|v| [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]).collect(),
        )
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.linear_map([[factor, 0.0], [0.0, factor]])
    }

    pub fn rotated(&self, angle: f64) -> Result<Self> {
        let (s, c) = angle.sin_cos();
        self.linear_map([[c, -s], [s, c]])
    }

    /// The same body as a band: one factor row per pair of opposite edges.
    pub fn to_band(&self) -> Result<SymmetricBand> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut offsets = Vec::new();
        for (u, h) in self.halfplanes() {
            let opposite = rows.iter().any(|r| r[0] * u[0] + r[1] * u[1] < -1.0 + 1e-9);
            if !opposite {
                rows.push(u.to_vec());
                offsets.push(h);
            }
        }
        let model = CorrelationModel::from_factor_rows(rows)?;
        SymmetricBand::new(model, ThresholdVector::new(offsets)?)
    }

    pub fn to_hpolytope(&self) -> Result<HPolytope> {
        HPolytope::new(self.halfplanes().into_iter().map(|(u, h)| (u.to_vec(), h)).collect())
    }
}

/// Sutherland–Hodgman step: keep the part of `poly` with `<u, x> <= h`.
pub(crate) fn clip(poly: &[Point], u: Point, h: f64) -> Vec<Point> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (da, db) = (dot(u, a) - h, dot(u, b) - h);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            let t = da / (da - db);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

impl ConvexBody for Polygon2D {
    fn dim(&self) -> usize {
        2
    }

    fn support(&self, direction: &[f64]) -> Result<f64> {
        check_direction(2, direction)?;
        Ok(self.support_at([direction[0], direction[1]]))
    }

    fn contains(&self, point: &[f64]) -> Result<bool> {
        check_point(2, point)?;
        Ok(self.contains_point([point[0], point[1]]))
    }
}
