//! Seeded random streams and the variate generators used by the sampler.
//!
//! Gamma variates use the shape–rate parameterization everywhere: a
//! `Gamma(a, b)` draw has mean `a / b`.

use alloc::format;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::linalg::{Cholesky, SpdMatrix};
use crate::error::{Error, Result};

pub const RNG_ALGORITHM: &str = "chacha20";

/// Reproducible random stream. The same seed yields the same variates on
/// every platform: the generator is ChaCha20 and all transcendental
/// functions come from `libm`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha20Rng,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream { seed, inner: ChaCha20Rng::seed_from_u64(seed), spare_normal: None }
    }

    /// Independent child stream `index` of this stream's seed. Children of
    /// the same seed never overlap each other or the parent.
    pub fn substream(&self, index: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(index.wrapping_add(1));
        RngStream { seed: self.seed, inner, spare_normal: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        RNG_ALGORITHM
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire-style rejection keeps the draw unbiased.
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.inner.next_u64();
            if v <= zone {
                return (v % n) as usize;
            }
        }
    }

    /// Standard normal by the Marsaglia polar method.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s < 1.0 && s > 0.0 {
                let f = libm::sqrt(-2.0 * libm::log(s) / s);
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.normal();
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

/// `Gamma(shape, rate)` by Marsaglia–Tsang, with the `U^{1/a}` boost for
/// shape below one.
pub fn sample_gamma(shape: f64, rate: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("shape", shape)?;
    check_positive("rate", rate)?;
    Ok(gamma_unchecked(shape, rng) / rate)
}

pub(crate) fn gamma_unchecked(shape: f64, rng: &mut RngStream) -> f64 {
    if shape < 1.0 {
        let g = gamma_unchecked(shape + 1.0, rng);
        return g * libm::pow(rng.uniform(), 1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / libm::sqrt(9.0 * d);
    loop {
        let x = rng.normal();
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = rng.uniform();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if libm::log(u) < 0.5 * x2 + d * (1.0 - v + libm::log(v)) {
            return d * v;
        }
    }
}

pub fn sample_beta(a: f64, b: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    loop {
        let x = gamma_unchecked(a, rng);
        let y = gamma_unchecked(b, rng);
        let s = x + y;
        if s > 0.0 {
            let v = x / s;
            if v > 0.0 && v < 1.0 {
                return Ok(v);
            }
        }
    }
}

pub fn sample_exponential(rate: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("rate", rate)?;
    Ok(-libm::log(rng.uniform()) / rate)
}

/// Inverse-Gaussian variate with mean `mu` and shape `shape` by the
/// Michael–Schucany–Haas transformation with a Bernoulli root selection.
pub fn sample_inverse_gaussian(mu: f64, shape: f64, rng: &mut RngStream) -> Result<f64> {
    check_positive("mu", mu)?;
    check_positive("shape", shape)?;
    Ok(inverse_gaussian_unchecked(mu, shape, rng))
}

pub(crate) fn inverse_gaussian_unchecked(mu: f64, shape: f64, rng: &mut RngStream) -> f64 {
    let n = rng.normal();
    let y = mu * n * n;
    // smaller root of the quadratic, written without cancellation
    let x = mu - 2.0 * mu * y / (y + libm::sqrt(y * y + 4.0 * shape * y));
    if rng.uniform() <= mu / (mu + x) {
        x
    } else {
        mu * mu / x
    }
}

/// Draw from `N(mean, cov)`.
pub fn sample_mvn(mean: &[f64], cov: &SpdMatrix, rng: &mut RngStream) -> Result<Vec<f64>> {
    if mean.len() != cov.dim() {
        return Err(Error::shape(format!("mean of length {}", cov.dim()), format!("{}", mean.len())));
    }
    let ch = Cholesky::factor(cov)?;
    Ok(mvn_from_factor(mean, &ch, rng))
}

pub(crate) fn mvn_from_factor(mean: &[f64], ch: &Cholesky, rng: &mut RngStream) -> Vec<f64> {
    let l = ch.l();
    let n = mean.len();
    let mut eps = alloc::vec![0.0; n];
    rng.fill_normal(&mut eps);
    let mut out = mean.to_vec();
    for i in 0..n {
        let row = l.row(i);
        out[i] += super::linalg::dot(&row[..=i], &eps[..=i]);
    }
    out
}

/// Draw from `N(K⁻¹ h, K⁻¹)` given the Cholesky factor of the precision `K`.
/// Overwrites `h` with the draw; `eps` is scratch of the same length.
pub(crate) fn mvn_precision_with(h: &mut [f64], precision: &Cholesky, eps: &mut [f64], rng: &mut RngStream) {
    precision.solve_in_place(h);
    rng.fill_normal(eps);
    precision.solve_upper_in_place(eps);
    for (a, e) in h.iter_mut().zip(eps.iter()) {
        *a += e;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linalg::Matrix;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn deterministic_streams() {
        let a: Vec<f64> = {
            let mut r = RngStream::new(7);
            (0..5).map(|_| r.normal()).collect()
        };
        let b: Vec<f64> = {
            let mut r = RngStream::new(7);
            (0..5).map(|_| r.normal()).collect()
        };
        assert_eq!(a, b);
        let mut s0 = RngStream::new(7).substream(0);
        let mut s1 = RngStream::new(7).substream(1);
        assert_ne!(s0.next_u64(), s1.next_u64());
    }

    #[test]
    fn standard_normal_moments() {
        let mut r = RngStream::new(1);
        let xs: Vec<f64> = (0..100_000).map(|_| r.normal()).collect();
        let (m, v) = moments(&xs);
        let se = 1.0 / libm::sqrt(1e5);
        assert!(m.abs() < 5.0 * se, "mean {m}");
        assert!((v - 1.0).abs() < 5.0 * libm::sqrt(2.0) * se, "var {v}");
    }

    #[test]
    fn gamma_moments() {
        // Gamma(1, 2) is Exp(2): mean 0.5
        let mut r = RngStream::new(2);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(1.0, 2.0, &mut r).unwrap()).collect();
        let (m, v) = moments(&xs);
        assert!((m - 0.5).abs() < 5.0 * 0.5 / libm::sqrt(1e5), "mean {m}");
        assert!((v - 0.25).abs() < 0.02, "var {v}");
        // Gamma(2.5, 0.1): mean 25, variance 250
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(2.5, 0.1, &mut r).unwrap()).collect();
        let (m, v) = moments(&xs);
        assert!((m - 25.0).abs() < 5.0 * libm::sqrt(250.0 / 1e5), "mean {m}");
        assert!((v / 250.0 - 1.0).abs() < 0.05, "var {v}");
        // shape below one
        let xs: Vec<f64> = (0..100_000).map(|_| sample_gamma(0.3, 1.0, &mut r).unwrap()).collect();
        let (m, _) = moments(&xs);
        assert!((m - 0.3).abs() < 5.0 * libm::sqrt(0.3 / 1e5), "mean {m}");
    }

    #[test]
    fn beta_uniform_case() {
        let mut r = RngStream::new(3);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta(1.0, 1.0, &mut r).unwrap()).collect();
        let (m, v) = moments(&xs);
        assert!((m - 0.5).abs() < 5.0 * libm::sqrt(1.0 / 12.0 / 1e5));
        assert!((v - 1.0 / 12.0).abs() < 0.002, "var {v}");
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut r = RngStream::new(4);
        let xs: Vec<f64> =
            (0..100_000).map(|_| sample_inverse_gaussian(1.0, 1.0, &mut r).unwrap()).collect();
        let (m, _) = moments(&xs);
        assert!((0.96..=1.04).contains(&m), "mean {m}");
        let xs: Vec<f64> =
            (0..100_000).map(|_| sample_inverse_gaussian(2.0, 8.0, &mut r).unwrap()).collect();
        let (m, v) = moments(&xs);
        assert!((m - 2.0).abs() < 5.0 * libm::sqrt(1.0 / 1e5), "mean {m}");
        assert!((v - 1.0).abs() < 0.1, "var {v}");
    }

    #[test]
    fn inverse_gaussian_degenerate_limit() {
        let mut r = RngStream::new(5);
        for _ in 0..1000 {
            let x = sample_inverse_gaussian(3.0, 1e12, &mut r).unwrap();
            assert!((x - 3.0).abs() < 1e-4, "{x}");
        }
    }

    #[test]
    fn invalid_parameters() {
        let mut r = RngStream::new(0);
        assert!(sample_gamma(0.0, 1.0, &mut r).is_err());
        assert!(sample_gamma(1.0, -1.0, &mut r).is_err());
        assert!(sample_beta(1.0, 0.0, &mut r).is_err());
        assert!(sample_inverse_gaussian(-1.0, 1.0, &mut r).is_err());
        assert!(sample_inverse_gaussian(1.0, 0.0, &mut r).is_err());
    }

    #[test]
    fn mvn_standard_moments() {
        let cov = SpdMatrix::new(Matrix::identity(2)).unwrap();
        let mut r = RngStream::new(6);
        let mut sums = [0.0; 2];
        for _ in 0..100_000 {
            let d = sample_mvn(&[0.0, 0.0], &cov, &mut r).unwrap();
            sums[0] += d[0];
            sums[1] += d[1];
        }
        for s in sums {
            assert!((s / 1e5).abs() < 4.0 / libm::sqrt(1e5));
        }
    }

    #[test]
    fn mvn_degenerate_and_deterministic() {
        let mut tiny = Matrix::identity(3);
        tiny.scale(1e-30);
        let cov = SpdMatrix::new(tiny).unwrap();
        let mean = [1.0, -2.0, 3.0];
        let d = sample_mvn(&mean, &cov, &mut RngStream::new(8)).unwrap();
        for (a, b) in d.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-10);
        }
        let cov = SpdMatrix::new(Matrix::identity(3)).unwrap();
        let a = sample_mvn(&mean, &cov, &mut RngStream::new(9)).unwrap();
        let b = sample_mvn(&mean, &cov, &mut RngStream::new(9)).unwrap();
        assert_eq!(a, b);
    }
}
