//! Embedding-space metrics: location-paired cosine similarity and the
//! Fréchet distance between Gaussian fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{EvalError, Result};
use crate::tensor::ptsr::RawTensor;

/// `N × D` matrix of embedding vectors, one row per patch.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    rows: DMatrix<f64>,
}

impl EmbeddingSet {
    pub fn from_matrix(rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() == 0 || rows.ncols() == 0 {
            return Err(EvalError::Shape("embedding set must be non-empty".into()));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::Shape("embedding set has non-finite entries".into()));
        }
        Ok(Self { rows })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != d) {
            return Err(EvalError::Shape("embedding rows differ in length".into()));
        }
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.as_ref().iter().map(|&v| v as f64)).collect();
        Self::from_matrix(DMatrix::from_row_slice(n, d, &flat))
    }

    pub fn from_raw(raw: &RawTensor) -> Result<Self> {
        let [n, d] = raw.dims[..] else {
            return Err(EvalError::Shape(format!(
                "embedding file must be rank 2, found rank {}",
                raw.dims.len()
            )));
        };
        let flat: Vec<f64> = raw.data.iter().map(|&v| v as f64).collect();
        Self::from_matrix(DMatrix::from_row_slice(n, d, &flat))
    }

    pub fn to_raw(&self) -> RawTensor {
        let (n, d) = self.rows.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(self.rows.row(i).iter().map(|&v| v as f32));
        }
        RawTensor { dims: vec![n, d], data }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    fn mean(&self) -> DVector<f64> {
        self.rows.row_mean().transpose()
    }

    /// Sample covariance with the `1 / (N − 1)` normalization.
    fn covariance(&self, mean: &DVector<f64>) -> DMatrix<f64> {
        let n = self.rows.nrows();
        let mut centered = self.rows.clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.transpose() * &centered / (n as f64 - 1.0);
        (&cov + cov.transpose()) * 0.5
    }
}

/// Mean cosine similarity between row `i` of `gen` and row `i` of `real`.
pub fn clip_score(gen: &EmbeddingSet, real: &EmbeddingSet) -> Result<f64> {
    if gen.rows.shape() != real.rows.shape() {
        return Err(EvalError::Shape(format!(
            "paired sets differ in shape: {:?} vs {:?}",
            gen.rows.shape(),
            real.rows.shape()
        )));
    }
    let mut total = 0.0;
    for (i, (g, r)) in gen.rows.row_iter().zip(real.rows.row_iter()).enumerate() {
        let gg = g.dot(&g);
        let rr = r.dot(&r);
        if gg == 0.0 || rr == 0.0 {
            return Err(EvalError::DegenerateEmbedding { index: i });
        }
        // sqrt(gg * rr) == gg exactly when g == r, so identical pairs score 1.
        let cos = g.dot(&r) / (gg * rr).sqrt();
        total += cos.clamp(-1.0, 1.0);
    }
    Ok(total / gen.len() as f64)
}

/// Principal square root of a symmetric positive semi-definite matrix via
/// symmetric eigendecomposition. Eigenvalues down to `-1e-8` (relative to
/// the largest entry, floor 1) are clamped to zero.
pub fn matrix_sqrt_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(EvalError::NumericalDomain(format!(
            "matrix is {}x{}, not square",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NumericalDomain("matrix has non-finite entries".into()));
    }
    let scale = s.amax().max(1.0);
    let tol = 1e-8 * scale;
    let asym = (s - s.transpose()).amax();
    if asym > tol {
        return Err(EvalError::NumericalDomain(format!(
            "matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if let Some(&lo) = eig.eigenvalues.iter().find(|&&l| l < -tol) {
        return Err(EvalError::NumericalDomain(format!(
            "matrix is indefinite (eigenvalue {lo:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&roots) * v.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Fréchet distance between the Gaussian fits of two embedding sets:
/// `‖μ₁ − μ₂‖² + tr(Σ₁ + Σ₂ − 2·(Σ₁^{1/2} Σ₂ Σ₁^{1/2})^{1/2})`.
pub fn fid(gen: &EmbeddingSet, real: &EmbeddingSet) -> Result<f64> {
    if gen.len() < 2 || real.len() < 2 {
        return Err(EvalError::InsufficientSamples {
            needed: 2,
            found: gen.len().min(real.len()),
        });
    }
    if gen.dim() != real.dim() {
        return Err(EvalError::Shape(format!(
            "embedding dimensions differ: {} vs {}",
            gen.dim(),
            real.dim()
        )));
    }
    let mu1 = gen.mean();
    let mu2 = real.mean();
    let s1 = gen.covariance(&mu1);
    let s2 = real.covariance(&mu2);
    let root1 = matrix_sqrt_psd(&s1)?;
    let inner = &root1 * &s2 * &root1;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = matrix_sqrt_psd(&inner)?;
    let diff = mu1 - mu2;
    let value = diff.dot(&diff) + s1.trace() + s2.trace() - 2.0 * cross.trace();
    Ok(value.max(0.0))
}
