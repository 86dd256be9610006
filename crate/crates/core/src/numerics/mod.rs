//! Linear-algebra kernels, principal components, and random-variate generators.

mod linalg;
mod pca;
mod random;

pub use linalg::{axpy, cholesky_factor, dot, symmetric_eigen, Cholesky, Matrix, SpdMatrix};
pub use pca::{pca_spectrum, PcaSpectrum};
pub use random::{
    sample_beta, sample_exponential, sample_gamma, sample_inverse_gaussian, sample_mvn, RngStream,
    RNG_ALGORITHM,
};

pub(crate) use random::{gamma_unchecked, inverse_gaussian_unchecked, mvn_precision_with};
