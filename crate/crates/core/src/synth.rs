//! Synthetic latent-factor data with known loadings.

use alloc::format;
use alloc::vec::Vec;

use crate::data::RawDataset;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RngStream};

/// Zero pattern imposed on the true response loadings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sparsity {
    #[default]
    None,
    /// Columns 1, 3, 5, … (1-based) set to zero.
    ColumnWise,
    /// A random half of every row set to zero.
    ElementWise,
}

impl Sparsity {
    pub fn as_str(self) -> &'static str {
        match self {
            Sparsity::None => "none",
            Sparsity::ColumnWise => "column-wise",
            Sparsity::ElementWise => "element-wise",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Sparsity::None),
            "column-wise" | "column_wise" => Some(Sparsity::ColumnWise),
            "element-wise" | "element_wise" => Some(Sparsity::ElementWise),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub p: usize,
    pub r: usize,
    pub q_true: usize,
    pub sigma2: f64,
    pub psi2: f64,
    pub sparsity: Sparsity,
    pub seed: u64,
}

/// Low- and high-noise variances of the reference simulation design.
pub const LOW_NOISE: f64 = 0.1;
pub const HIGH_NOISE: f64 = 0.5;

impl SynthConfig {
    /// Reference design: `R = 4`, `Q = 10`, 1000 test rows.
    pub fn reference(n_train: usize, p: usize, noise: f64, seed: u64) -> Self {
        SynthConfig {
            n_train,
            n_test: 1000,
            p,
            r: 4,
            q_true: 10,
            sigma2: noise,
            psi2: noise,
            sparsity: Sparsity::None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n_train", self.n_train), ("n_test", self.n_test), ("p", self.p), ("r", self.r), ("q_true", self.q_true)] {
            if v == 0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        for (name, v) in [("sigma2", self.sigma2), ("psi2", self.psi2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("{v} is not a finite non-negative variance")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: RawDataset,
    pub test: RawDataset,
    /// `P × Q` true predictor loadings.
    pub w0: Matrix,
    /// `R × Q` true response loadings (after sparsification).
    pub c0: Matrix,
}

/// Zeroes half of `c0` and scales the survivors by `√2`, keeping the
/// expected per-row sum of loading variances unchanged.
pub fn sparsify_c(c0: &Matrix, mode: Sparsity, rng: &mut RngStream) -> Matrix {
    let mut c = c0.clone();
    let q = c.cols();
    match mode {
        Sparsity::None => return c,
        Sparsity::ColumnWise => {
            for r in 0..c.rows() {
                for j in (0..q).step_by(2) {
                    c[(r, j)] = 0.0;
                }
            }
        }
        Sparsity::ElementWise => {
            let mut cols: Vec<usize> = (0..q).collect();
            for r in 0..c.rows() {
                rng.shuffle(&mut cols);
                for &j in &cols[..q / 2] {
                    c[(r, j)] = 0.0;
                }
            }
        }
    }
    c.scale(core::f64::consts::SQRT_2);
    c
}

/// Expected `Σ_q V[c_rq]` per row for loadings drawn as `N(0, 1/Q)` and
/// then sparsified by `mode`.
pub fn prior_row_variance(q: usize, mode: Sparsity) -> f64 {
    let per = 1.0 / q as f64;
    match mode {
        Sparsity::None => q as f64 * per,
        Sparsity::ColumnWise => (q / 2) as f64 * 2.0 * per,
        Sparsity::ElementWise => (q - q / 2) as f64 * 2.0 * per,
    }
}

fn names(prefix: &str, k: usize) -> Vec<alloc::string::String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

fn draw(n: usize, w0: &Matrix, c0: &Matrix, cfg: &SynthConfig, rng: &mut RngStream) -> Result<RawDataset> {
    let q = w0.cols();
    let z = Matrix::from_fn(n, q, |_, _| rng.normal());
    let (sx, sy) = (libm::sqrt(cfg.sigma2), libm::sqrt(cfg.psi2));
    let mut x = z.matmul_t(w0);
    x.as_mut_slice().iter_mut().for_each(|v| *v += sx * rng.normal());
    let mut y = z.matmul_t(c0);
    y.as_mut_slice().iter_mut().for_each(|v| *v += sy * rng.normal());
    RawDataset::new(x, y, names("x", cfg.p), names("y", cfg.r))
}

/// Draws the true loadings, then training and test sets that share them.
pub fn generate(cfg: &SynthConfig, rng: &mut RngStream) -> Result<SynthData> {
    cfg.validate()?;
    let sd = libm::sqrt(1.0 / cfg.q_true as f64);
    let w0 = Matrix::from_fn(cfg.p, cfg.q_true, |_, _| sd * rng.normal());
    let c_dense = Matrix::from_fn(cfg.r, cfg.q_true, |_, _| sd * rng.normal());
    let c0 = sparsify_c(&c_dense, cfg.sparsity, rng);
    let train = draw(cfg.n_train, &w0, &c0, cfg, rng)?;
    let test = draw(cfg.n_test, &w0, &c0, cfg, rng)?;
    Ok(SynthData { train, test, w0, c0 })
}

/// Independent stream for replicate `index` of a study seeded by `master`.
pub fn replicate_rng(master: u64, index: u64) -> RngStream {
    RngStream::new(master).substream(index)
}
