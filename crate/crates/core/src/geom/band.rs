//! Band bodies `{y : |<y, u_i>| <= c_i for all i}`.
//!
//! A band over the factor rows of a model is the geometric twin of the
//! rectangle event `|X_i| <= c_i`: its standard Gaussian measure is exactly
//! that probability.

use serde::{Deserialize, Serialize};

use super::lp::{maximize, LpOutcome};
use super::polygon::Polygon2D;
use super::{check_direction, check_point, ConvexBody};
use crate::error::{Error, Result};
use crate::model::{CorrelationModel, ThresholdVector};

/// Membership slack, relative to `max(1, c_i)`.
pub const CONTAINS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricBand {
    model: CorrelationModel,
    thresholds: ThresholdVector,
}

impl SymmetricBand {
    pub fn new(model: CorrelationModel, thresholds: ThresholdVector) -> Result<Self> {
        if thresholds.len() != model.size() {
            return Err(Error::DimensionMismatch { expected: model.size(), got: thresholds.len() });
        }
        Ok(Self { model, thresholds })
    }

    /// The slab `{|<y, u>| <= width}`.
    pub fn slab(u: Vec<f64>, width: f64) -> Result<Self> {
        Self::new(CorrelationModel::from_factor_rows(vec![u])?, ThresholdVector::new(vec![width])?)
    }

    pub fn model(&self) -> &CorrelationModel {
        &self.model
    }

    pub fn thresholds(&self) -> &ThresholdVector {
        &self.thresholds
    }

    fn same_model(&self, other: &Self) -> Result<()> {
        if self.model.factor_rows() == other.model.factor_rows() {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    /// `K ∩ T`: thresholds `min(s_i, t_i)`.
    pub fn intersect(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        Self::new(self.model.clone(), self.thresholds.min(&other.thresholds))
    }

    /// Thresholds `s_i + t_i`: a band containing `K + T`, equal to it when the
    /// facet normals of the sum are among the `u_i`.
    pub fn sum_outer(&self, other: &Self) -> Result<Self> {
        self.same_model(other)?;
        Self::new(self.model.clone(), self.thresholds.sum(&other.thresholds))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { model: self.model.clone(), thresholds: self.thresholds.scaled(factor) }
    }

    /// The N-fold product body in `R^{N d}`.
    pub fn power(&self, copies: usize) -> Result<Self> {
        Self::new(self.model.power(copies)?, self.thresholds.repeated(copies))
    }

    /// This band with the extra constraint `|<y, u>| <= width`.
    pub fn with_slab(&self, u: Vec<f64>, width: f64) -> Result<Self> {
        let model = self.model.with_extra_row(u)?;
        let mut c: Vec<f64> = self.thresholds.as_slice().to_vec();
        c.push(width);
        Self::new(model, ThresholdVector::new(c)?)
    }

    /// Each threshold lowered to the support value along its own row, so
    /// redundant constraints become tight. The body is unchanged.
    pub fn tightened(&self) -> Result<Self> {
        let c = self
            .model
            .factor_rows()
            .iter()
            .zip(self.thresholds.as_slice())
            .map(|(u, &c)| if u.iter().all(|&v| v == 0.0) { Ok(c) } else { Ok(c.min(self.support(u)?)) })
            .collect::<Result<Vec<f64>>>()?;
        Self::new(self.model.clone(), ThresholdVector::new(c)?)
    }

    fn system(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (u, &c) in self.model.factor_rows().iter().zip(self.thresholds.as_slice()) {
            if c.is_finite() {
                a.push(u.clone());
                b.push(c);
                a.push(u.iter().map(|v| -v).collect());
                b.push(c);
            }
        }
        (a, b)
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        self.model.factor_rows().iter().zip(self.thresholds.as_slice()).all(|(u, &c)| {
            let v: f64 = u.iter().zip(p).map(|(a, b)| a * b).sum();
            v.abs() <= c + CONTAINS_TOL * c.max(1.0)
        })
    }

    /// Vertex form of a bounded planar band.
    pub fn to_polygon(&self) -> Result<Polygon2D> {
        if self.model.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: self.model.dim() });
        }
        let (a, b) = self.system();
        if a.is_empty() {
            return Err(Error::Unbounded("band has no finite threshold".into()));
        }
        let rows: Vec<(Vec<f64>, f64)> = a.into_iter().zip(b).filter(|(u, _)| u.iter().any(|&v| v != 0.0)).collect();
        super::hpoly::HPolytope::new(rows)?.to_polygon()
    }
}

impl ConvexBody for SymmetricBand {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    /// `+inf` when the band is unbounded in `direction`.
    fn support(&self, direction: &[f64]) -> Result<f64> {
        check_direction(self.model.dim(), direction)?;
        let (a, b) = self.system();
        Ok(match maximize(direction, &a, &b)? {
            LpOutcome::Optimal(v) => v,
            LpOutcome::Unbounded => f64::INFINITY,
        })
    }

    fn contains(&self, point: &[f64]) -> Result<bool> {
        check_point(self.model.dim(), point)?;
        Ok(self.contains_point(point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band(c: &[f64]) -> SymmetricBand {
        SymmetricBand::new(CorrelationModel::identity(c.len()), ThresholdVector::new(c.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn min_plus_arithmetic() {
        let inf = f64::INFINITY;
        assert_eq!(band(&[1.0, 2.0]).intersect(&band(&[2.0, 1.0])).unwrap(), band(&[1.0, 1.0]));
        assert_eq!(band(&[1.0, 2.0]).intersect(&band(&[inf, inf])).unwrap(), band(&[1.0, 2.0]));
        assert_eq!(band(&[1.0, 2.0]).intersect(&band(&[1.0, 2.0])).unwrap(), band(&[1.0, 2.0]));
        assert_eq!(band(&[1.0, 1.0]).sum_outer(&band(&[1.0, 1.0])).unwrap(), band(&[2.0, 2.0]));
        assert_eq!(band(&[1.0, 1.0]).sum_outer(&band(&[inf, inf])).unwrap(), band(&[inf, inf]));
        assert_eq!(band(&[1.0, inf]).sum_outer(&band(&[inf, 1.0])).unwrap(), band(&[inf, inf]));
    }

    #[test]
    fn model_mismatch_is_rejected() {
        let other = SymmetricBand::new(
            CorrelationModel::equicorrelated(2, 0.5).unwrap(),
            ThresholdVector::uniform(2, 1.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(band(&[1.0, 1.0]).intersect(&other), Err(Error::ModelMismatch)));
        assert!(matches!(band(&[1.0, 1.0]).sum_outer(&other), Err(Error::ModelMismatch)));
    }

    #[test]
    fn support_of_slab_and_box() {
        let u = vec![3.0, 4.0];
        let c = 0.2;
        let slab = SymmetricBand::slab(u.clone(), c).unwrap();
        // Maximizing <y, u> over |<y, u>| <= c gives c, i.e. c/|u| * |u|.
        assert!((slab.support(&u).unwrap() - c).abs() < 1e-12);
        assert!(slab.support(&[4.0, -3.0]).unwrap().is_infinite());
        let b = band(&[1.0, 2.0]);
        assert!((b.support(&[1.0, 1.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(b.support(&[0.0, 0.0]), Err(Error::ZeroDirection)));
    }

    #[test]
    fn membership() {
        let b = band(&[1.0, 2.0]);
        assert!(b.contains(&[0.0, 0.0]).unwrap());
        assert!(!b.contains(&[1.0 + 1e-6, 0.0]).unwrap());
        assert!(matches!(b.contains(&[0.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn tightening_preserves_the_body() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = CorrelationModel::from_factor_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]]).unwrap();
        let b = SymmetricBand::new(m, ThresholdVector::new(vec![1.0, 1.0, 5.0]).unwrap()).unwrap();
        let t = b.tightened().unwrap();
        assert!((t.thresholds().as_slice()[2] - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(t.to_polygon().unwrap(), b.to_polygon().unwrap());
    }

    #[test]
    fn sum_of_tightened_bands_is_exact_in_the_plane() {
        let k = SymmetricBand::new(
            CorrelationModel::random_correlation(3, 2, 4).unwrap(),
            ThresholdVector::new(vec![0.5, 1.0, 2.0]).unwrap(),
        )
        .unwrap();
        let t = SymmetricBand::new(k.model().clone(), ThresholdVector::new(vec![1.5, 0.4, 0.9]).unwrap()).unwrap();
        let exact = k.to_polygon().unwrap().minkowski_sum(&t.to_polygon().unwrap()).unwrap();
        let outer = k.tightened().unwrap().sum_outer(&t.tightened().unwrap()).unwrap().to_polygon().unwrap();
        assert_eq!(exact.len(), outer.len());
        assert!((exact.area() - outer.area()).abs() < 1e-9);
    }

    #[test]
    fn power_repeats_thresholds() {
        let p = band(&[1.0, 2.0]).power(3).unwrap();
        assert_eq!(p.model().size(), 6);
        assert_eq!(p.model().dim(), 6);
        assert_eq!(p.thresholds().as_slice(), &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
    }
}
