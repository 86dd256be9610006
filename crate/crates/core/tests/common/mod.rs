//! Independent dense reference computations shared by integration tests.
#![allow(dead_code)]

pub mod geweke;
pub mod predictive;

use bpls_core::data::StandardizedDataset;
use bpls_core::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};
use bpls_core::sampler::{sample_prior, simulate_data};
use bpls_core::{Matrix, RngStream};

/// Gauss-Jordan inverse with partial pivoting.
pub fn dense_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs())).unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[i][j] -= f * m[col][j];
                    }
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| m[i][n + j])
}

pub fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..a.rows()).map(|i| (0..a.cols()).map(|j| a[(i, j)] * v[j]).sum()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Prior draw plus data simulated from it.
pub fn random_problem(
    n: usize,
    p: usize,
    r: usize,
    q: usize,
    kind: VariantKind,
    seed: u64,
) -> (ParamState, StandardizedDataset) {
    let mut rng = RngStream::new(seed);
    let hp = Hyperparameters::default();
    let variant = ModelVariant::new(kind);
    let mut state = sample_prior(n, p, r, q, &hp, &variant, &mut rng);
    let data = simulate_data(&mut state, &mut rng);
    // Scramble the scores so they are not the ones that generated the data.
    state.z = Matrix::from_fn(n, q, |_, _| rng.normal());
    (state, data)
}

/// `C B` by explicit loops.
fn switched(c: &Matrix, b: &[bool]) -> Matrix {
    Matrix::from_fn(c.rows(), c.cols(), |i, j| if b[j] { c[(i, j)] } else { 0.0 })
}

/// Score conditional: `S = (I + WᵀΣ⁻¹W + C̃ᵀΨ⁻¹C̃)⁻¹`, mean of row `n` is
/// `S (WᵀΣ⁻¹xₙ + C̃ᵀΨ⁻¹yₙ)`.
pub fn scores_oracle(s: &ParamState, d: &StandardizedDataset) -> (Matrix, Matrix) {
    let q = s.q();
    let ct = switched(&s.c, &s.b);
    let mut prec = Matrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { 0.0 });
    for i in 0..q {
        for j in 0..q {
            for p in 0..s.w.rows() {
                prec[(i, j)] += s.w[(p, i)] * s.w[(p, j)] / s.sigma2[p];
            }
            for r in 0..ct.rows() {
                prec[(i, j)] += ct[(r, i)] * ct[(r, j)] / s.psi2[r];
            }
        }
    }
    let cov = dense_inverse(&prec);
    let mut mean = Matrix::zeros(d.n(), q);
    for n in 0..d.n() {
        let mut h = vec![0.0; q];
        for (k, hk) in h.iter_mut().enumerate() {
            for p in 0..s.w.rows() {
                *hk += s.w[(p, k)] * d.x[(n, p)] / s.sigma2[p];
            }
            for r in 0..ct.rows() {
                *hk += ct[(r, k)] * d.y[(n, r)] / s.psi2[r];
            }
        }
        let m = mat_vec(&cov, &h);
        for k in 0..q {
            mean[(n, k)] = m[k];
        }
    }
    (mean, cov)
}

/// Row conditional of a loading matrix whose rows regress column `col` of
/// `obs` on `regressors` with noise variance `var` and prior precisions
/// `tau_q * local_q`.
fn row_oracle(regressors: &Matrix, obs: &Matrix, col: usize, var: f64, local: &[f64], tau: &[f64]) -> (Vec<f64>, Matrix) {
    let q = regressors.cols();
    let mut prec = Matrix::zeros(q, q);
    for i in 0..q {
        for j in 0..q {
            let g: f64 = (0..regressors.rows()).map(|n| regressors[(n, i)] * regressors[(n, j)]).sum();
            prec[(i, j)] = g / var + if i == j { tau[i] * local[i] } else { 0.0 };
        }
    }
    let cov = dense_inverse(&prec);
    let h: Vec<f64> =
        (0..q).map(|k| (0..regressors.rows()).map(|n| regressors[(n, k)] * obs[(n, col)]).sum::<f64>() / var).collect();
    (mat_vec(&cov, &h), cov)
}

pub fn w_row_oracle(s: &ParamState, d: &StandardizedDataset, p: usize) -> (Vec<f64>, Matrix) {
    row_oracle(&s.z, &d.x, p, s.sigma2[p], s.phi.row(p), s.tau())
}

pub fn c_row_oracle(s: &ParamState, d: &StandardizedDataset, r: usize) -> (Vec<f64>, Matrix) {
    let zb = switched(&s.z, &s.b);
    row_oracle(&zb, &d.y, r, s.psi2[r], s.phi_dot.row(r), s.tau())
}

/// Gaussian log-likelihood of `Y` given the state, with constants.
pub fn log_lik_y(s: &ParamState, d: &StandardizedDataset) -> f64 {
    let ct = switched(&s.c, &s.b);
    let mut total = 0.0;
    for n in 0..d.n() {
        for r in 0..d.r() {
            let fit: f64 = (0..s.q()).map(|k| ct[(r, k)] * s.z[(n, k)]).sum();
            let e = d.y[(n, r)] - fit;
            total += -0.5 * (2.0 * std::f64::consts::PI * s.psi2[r]).ln() - 0.5 * e * e / s.psi2[r];
        }
    }
    total
}

/// Ordinary least squares with intercept: returns fitted values at `x_new`.
pub fn ols_predict(x: &Matrix, y: &Matrix, x_new: &Matrix) -> Matrix {
    let (n, p, r) = (x.rows(), x.cols(), y.cols());
    let xm: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let ym: Vec<f64> = (0..r).map(|j| (0..n).map(|i| y[(i, j)]).sum::<f64>() / n as f64).collect();
    let xtx = Matrix::from_fn(p, p, |a, b| (0..n).map(|i| (x[(i, a)] - xm[a]) * (x[(i, b)] - xm[b])).sum());
    let inv = dense_inverse(&xtx);
    let beta = Matrix::from_fn(p, r, |a, k| {
        (0..p).map(|b| inv[(a, b)] * (0..n).map(|i| (x[(i, b)] - xm[b]) * (y[(i, k)] - ym[k])).sum::<f64>()).sum()
    });
    Matrix::from_fn(x_new.rows(), r, |i, k| ym[k] + (0..p).map(|a| (x_new[(i, a)] - xm[a]) * beta[(a, k)]).sum::<f64>())
}
