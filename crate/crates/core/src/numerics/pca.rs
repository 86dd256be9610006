use alloc::format;
use alloc::vec::Vec;

use super::linalg::{axpy, dot, symmetric_eigen, Matrix};
use crate::error::{Error, Result};

/// Principal components of a column-centred `N × P` matrix.
#[derive(Debug, Clone)]
pub struct PcaSpectrum {
    /// Eigenvalues of the sample covariance (`n − 1` denominator), descending.
    pub eigenvalues: Vec<f64>,
    /// `P × min(N, P)` orthonormal loadings, one column per eigenvalue.
    pub loadings: Matrix,
}

impl PcaSpectrum {
    /// Fraction of total variance explained by the leading `q` components.
    pub fn explained_fraction(&self, q: usize) -> f64 {
        let total: f64 = self.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        if total <= 0.0 {
            return 1.0;
        }
        self.eigenvalues.iter().take(q).map(|v| v.max(0.0)).sum::<f64>() / total
    }
}

/// Eigen-decomposition of the sample covariance of `x`. Works on the
/// `N × N` Gram matrix when `N < P`, on the `P × P` covariance otherwise.
pub fn pca_spectrum(x: &Matrix) -> Result<PcaSpectrum> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::DegenerateInput(format!("PCA needs at least 2 rows, got {n}")));
    }
    if p == 0 {
        return Err(Error::DegenerateInput("PCA needs at least one column".into()));
    }
    let denom = (n - 1) as f64;
    if n >= p {
        let mut cov = x.gram();
        cov.scale(1.0 / denom);
        let (values, vectors) = symmetric_eigen(&cov);
        let eigenvalues = values.into_iter().map(|v| v.max(0.0)).collect();
        return Ok(PcaSpectrum { eigenvalues, loadings: vectors });
    }

    let mut gram = x.matmul_t(x);
    gram.scale(1.0 / denom);
    let (values, u) = symmetric_eigen(&gram);
    let xt = x.transpose();
    let mut loadings = Matrix::zeros(p, n);
    let tol = 1e-12 * values.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut filled = Vec::new();
    for (k, &lambda) in values.iter().enumerate() {
        eigenvalues.push(lambda.max(0.0));
        if lambda > tol {
            let v = xt.mul_vec(&u.column(k));
            let norm = libm::sqrt(dot(&v, &v));
            let v: Vec<f64> = v.iter().map(|a| a / norm).collect();
            loadings.set_column(k, &v);
            filled.push(v);
        }
    }
    // Null directions: complete the basis by Gram–Schmidt on unit vectors.
    let mut candidate = 0;
    for k in 0..n {
        if values[k] > tol {
            continue;
        }
        loop {
            let mut v = alloc::vec![0.0; p];
            v[candidate % p] = 1.0;
            candidate += 1;
            for f in &filled {
                let c = dot(&v, f);
                axpy(-c, f, &mut v);
            }
            let norm = libm::sqrt(dot(&v, &v));
            if norm > 1e-6 {
                v.iter_mut().for_each(|a| *a /= norm);
                loadings.set_column(k, &v);
                filled.push(v);
                break;
            }
            if candidate > 2 * p + n {
                return Err(Error::DegenerateInput("could not complete PCA basis".into()));
            }
        }
    }
    Ok(PcaSpectrum { eigenvalues, loadings })
}
