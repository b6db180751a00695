//! Zero-mean jointly Gaussian vectors.
//!
//! A [`CorrelationModel`] stores the covariance `sigma` of `X = (X_1, ..., X_n)`
//! together with factor rows `u_i` in `R^d` such that `X_i = <Y, u_i>` for a
//! standard Gaussian `Y`. Degenerate (rank-deficient) covariances are first
//! class: `d` is the detected rank.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extf64::ExtF64;

/// Symmetry and pivot tolerance for covariance factorization.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    size: usize,
    dim: usize,
    /// Row-major `size x size` covariance.
    sigma: Vec<f64>,
    factor_rows: Vec<Vec<f64>>,
}

impl CorrelationModel {
    /// Factor a covariance matrix with a diagonally pivoted Cholesky
    /// decomposition. The rank is the number of pivots above [`PIVOT_TOL`].
    pub fn from_covariance(matrix: &[Vec<f64>]) -> Result<Self> {
        let n = matrix.len();
        if n == 0 {
            return Err(Error::InvalidDimension("empty covariance matrix".into()));
        }
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidDimension(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDimension(format!("row {i} has non-finite entries")));
            }
        }
        for (i, row) in matrix.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().skip(i + 1) {
                let gap = (v - matrix[j][i]).abs();
                if gap > PIVOT_TOL {
                    return Err(Error::NotSymmetric { row: i, col: j, gap });
                }
            }
        }

        let (perm, lower, rank) = pivoted_cholesky(matrix)?;
        let mut factor_rows = vec![Vec::new(); n];
        for (k, &orig) in perm.iter().enumerate() {
            factor_rows[orig] = lower[k][..rank].to_vec();
        }
        let sigma = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * (matrix[i][j] + matrix[j][i]))
            .collect();
        Ok(Self { size: n, dim: rank, sigma, factor_rows })
    }

    /// Build a model whose covariance is the Gram matrix of `rows`.
    ///
    /// The rows are kept verbatim; `dim` is their ambient dimension.
    pub fn from_factor_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidDimension("no factor rows".into()));
        }
        let d = rows[0].len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidDimension("factor rows must share a nonzero length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDimension("factor rows must be finite".into()));
        }
        let sigma = gram(&rows);
        Ok(Self { size: n, dim: d, sigma, factor_rows: rows })
    }

    /// `n` independent uniformly random unit vectors in `R^d`.
    pub fn random_correlation(n: usize, d: usize, seed: u64) -> Result<Self> {
        if d == 0 || d > n {
            return Err(Error::InvalidDimension(format!("need 1 <= d <= n, got n={n}, d={d}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
                }
            })
            .collect();
        Self::from_factor_rows(rows)
    }

    /// Equicorrelated unit-variance model with correlation `rho`.
    pub fn equicorrelated(n: usize, rho: f64) -> Result<Self> {
        let m = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { rho }).collect()).collect::<Vec<Vec<f64>>>();
        Self::from_covariance(&m)
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self::from_factor_rows(rows).expect("identity is a valid model")
    }

    /// Block-diagonal model: the blocks are independent.
    pub fn block_diagonal(blocks: &[CorrelationModel]) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidDimension("no blocks".into()));
        }
        let total_dim: usize = blocks.iter().map(|b| b.dim).sum();
        let mut rows = Vec::new();
        let mut offset = 0;
        for block in blocks {
            for r in &block.factor_rows {
                let mut row = vec![0.0; total_dim];
                row[offset..offset + block.dim].copy_from_slice(r);
                rows.push(row);
            }
            offset += block.dim;
        }
        Self::from_factor_rows(rows)
    }

    /// The N-fold independent product of this model.
    pub fn power(&self, copies: usize) -> Result<Self> {
        Self::block_diagonal(&vec![self.clone(); copies])
    }

    /// Copy of the model with one extra variable `<Y, row>` appended.
    pub fn with_extra_row(&self, row: Vec<f64>) -> Result<Self> {
        if row.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: row.len() });
        }
        let mut rows = self.factor_rows.clone();
        rows.push(row);
        Self::from_factor_rows(rows)
    }

    /// Copy of the model with `X_i` replaced by `-X_i`.
    pub fn with_negated_row(&self, i: usize) -> Self {
        let mut rows = self.factor_rows.clone();
        rows[i].iter_mut().for_each(|v| *v = -*v);
        Self::from_factor_rows(rows).expect("negation preserves validity")
    }

    /// Rescale every variable to unit variance. Zero-variance variables are
    /// left as they are.
    pub fn standardized(&self) -> Self {
        let rows = self
            .factor_rows
            .iter()
            .map(|r| {
                let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    r.iter().map(|x| x / norm).collect()
                } else {
                    r.clone()
                }
            })
            .collect();
        Self::from_factor_rows(rows).expect("rescaling preserves validity")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.size + j]
    }

    pub fn sigma_rows(&self) -> Vec<Vec<f64>> {
        self.sigma.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    pub fn factor_rows(&self) -> &[Vec<f64>] {
        &self.factor_rows
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.sigma(i, i)
    }

    pub fn std_dev(&self, i: usize) -> f64 {
        self.variance(i).max(0.0).sqrt()
    }

    /// Gram matrix of the factor rows.
    pub fn gram(&self) -> Vec<f64> {
        gram(&self.factor_rows)
    }

    /// Largest entrywise gap between `sigma` and the Gram matrix of the rows.
    pub fn factorization_error(&self) -> f64 {
        self.gram().iter().zip(&self.sigma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Whether every variance equals one within `tol`.
    pub fn check_standardized(&self, tol: f64) -> Result<()> {
        for i in 0..self.size {
            let v = self.variance(i);
            if (v - 1.0).abs() > tol {
                return Err(Error::NotStandardized { index: i, variance: v });
            }
        }
        Ok(())
    }
}

fn gram(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Outer-product Cholesky with diagonal pivoting.
///
/// Returns the pivot order, the lower trapezoidal factor in pivoted order
/// (row `k` belongs to variable `perm[k]`) and the detected rank.
fn pivoted_cholesky(matrix: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<Vec<f64>>, usize)> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut lower = vec![vec![0.0; n]; n];
    let mut rank = 0;

    for k in 0..n {
        let (best, pivot) =
            (k..n).map(|i| (i, a[i][i])).fold((k, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pivot <= PIVOT_TOL {
            // Remaining Schur complement must be numerically zero.
            for i in k..n {
                if a[i][i] < -PIVOT_TOL {
                    return Err(Error::NotPsd { index: perm[i], pivot: a[i][i] });
                }
            }
            break;
        }
        a.swap(k, best);
        for row in a.iter_mut() {
            row.swap(k, best);
        }
        lower.swap(k, best);
        perm.swap(k, best);

        let d = pivot.sqrt();
        lower[k][k] = d;
        for i in (k + 1)..n {
            lower[i][k] = a[i][k] / d;
        }
        for i in (k + 1)..n {
            for j in (k + 1)..=i {
                let v = a[i][j] - lower[i][k] * lower[j][k];
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        rank += 1;
    }
    Ok((perm, lower, rank))
}

/// Per-coordinate symmetric bounds `c_i` in `(0, inf]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ExtF64>", into = "Vec<ExtF64>")]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(bounds: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidBounds("threshold vector is empty".into()));
        }
        if let Some((i, v)) = bounds.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
            return Err(Error::InvalidBounds(format!("threshold {i} must be positive, got {v}")));
        }
        Ok(Self(bounds))
    }

    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise minimum; `min(inf, x) = x`.
    pub fn min(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a.min(*b)).collect())
    }

    /// Componentwise sum; `inf + x = inf`.
    pub fn sum(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Multiply every entry by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        Self(self.0.iter().map(|c| c * factor).collect())
    }

    /// Copy with entry `i` replaced.
    pub fn with(&self, i: usize, value: f64) -> Result<Self> {
        let mut v = self.0.clone();
        v[i] = value;
        Self::new(v)
    }

    /// Copy with every entry outside `keep` set to infinity.
    pub fn masked(&self, keep: impl Fn(usize) -> bool) -> Self {
        Self(self.0.iter().enumerate().map(|(i, &c)| if keep(i) { c } else { f64::INFINITY }).collect())
    }

    /// N copies concatenated, matching [`CorrelationModel::power`].
    pub fn repeated(&self, copies: usize) -> Self {
        Self(self.0.iter().copied().cycle().take(self.0.len() * copies).collect())
    }
}

impl TryFrom<Vec<ExtF64>> for ThresholdVector {
    type Error = Error;
    fn try_from(v: Vec<ExtF64>) -> Result<Self> {
        Self::new(v.into_iter().map(|x| x.0).collect())
    }
}

impl From<ThresholdVector> for Vec<ExtF64> {
    fn from(t: ThresholdVector) -> Self {
        t.0.into_iter().map(ExtF64).collect()
    }
}
