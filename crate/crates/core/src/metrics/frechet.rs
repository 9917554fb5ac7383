use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Gaussian fitted to a feature sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of the rows of `features`.
pub fn fit_gaussian(features: &DMatrix<f64>) -> Result<GaussianStats> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "need at least 2 samples to fit a Gaussian, got {n}"
        )));
    }
    let mean = features.row_mean().transpose();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    Ok(GaussianStats { mean, cov, n })
}

fn scale_of(m: &DMatrix<f64>) -> f64 {
    m.amax().max(1.0)
}

/// Symmetric square root of a positive semidefinite matrix.
///
/// Eigenvalues down to `-1e-8` (relative to the largest magnitude when that
/// exceeds one) are treated as rounding noise and clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::shape(format!(
            "psd_sqrt needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = scale_of(m);
    let asym = (m - m.transpose()).amax();
    if !(asym <= 1e-9 * scale) {
        return Err(Error::Domain(format!(
            "matrix is not symmetric (max |m - mᵀ| = {asym:e})"
        )));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let tol = 1e-8 * eig.eigenvalues.amax().max(1.0);
    if let Some(&worst) = eig.eigenvalues.iter().find(|&&l| !(l >= -tol)) {
        return Err(Error::Domain(format!(
            "matrix is indefinite (eigenvalue {worst:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `||mu1 - mu2||² + tr(S1 + S2 - 2 (S1 S2)^{1/2})`, clamped at zero.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() || a.cov.shape() != b.cov.shape() {
        return Err(Error::shape(format!(
            "Fréchet distance between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = (&a.mean - &b.mean).norm_squared();
    // tr((A B)^{1/2}) = tr((A^{1/2} B A^{1/2})^{1/2}); the inner matrix is symmetric PSD.
    let ra = psd_sqrt(&a.cov)?;
    let inner = &ra * &b.cov * &ra;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let d = diff + a.cov.trace() + b.cov.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        let two = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let s = fit_gaussian(&two).unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, 0.0]);
        assert_eq!(s.cov, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
        assert!(fit_gaussian(&DMatrix::zeros(1, 3)).is_err());

        let r = psd_sqrt(&DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert!((r - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))).amax() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(psd_sqrt(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).is_err());
        assert!(psd_sqrt(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.1]))).is_err());
        let tiny = psd_sqrt(&DMatrix::from_diagonal(&DVector::from_vec(vec![
            1.0, -1e-10,
        ])))
        .unwrap();
        assert_eq!(tiny[(1, 1)], 0.0);
    }
}
