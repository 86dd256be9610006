//! Reference computations for the predictive distribution of `y` given `x`.

use super::{dense_inverse, mat_vec};
use bpls_core::model::ParamState;
use bpls_core::{Matrix, RngStream};

fn effective_c(s: &ParamState) -> Matrix {
    Matrix::from_fn(s.c.rows(), s.c.cols(), |i, j| if s.b[j] { s.c[(i, j)] } else { 0.0 })
}

fn cholesky_lower(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            l[(i, j)] = if i == j { (a[(i, i)] - s).sqrt() } else { (a[(i, j)] - s) / l[(j, j)] };
        }
    }
    l
}

/// Posterior of the scores given `x` alone: `(S_z WᵀΣ⁻¹x, S_z)`.
fn latent_given_x(s: &ParamState, x: &[f64]) -> (Vec<f64>, Matrix) {
    let q = s.q();
    let prec = Matrix::from_fn(q, q, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) + (0..s.w.rows()).map(|p| s.w[(p, i)] * s.w[(p, j)] / s.sigma2[p]).sum::<f64>()
    });
    let sz = dense_inverse(&prec);
    let h: Vec<f64> = (0..q).map(|k| (0..s.w.rows()).map(|p| s.w[(p, k)] * x[p] / s.sigma2[p]).sum()).collect();
    (mat_vec(&sz, &h), sz)
}

/// One predictive draw of `y` given `x` under fixed parameters, by first
/// drawing the scores.
pub fn draw_response(s: &ParamState, x: &[f64], rng: &mut RngStream) -> Vec<f64> {
    let (a, sz) = latent_given_x(s, x);
    let l = cholesky_lower(&sz);
    let e: Vec<f64> = (0..a.len()).map(|_| rng.normal()).collect();
    let z: Vec<f64> = (0..a.len()).map(|i| a[i] + (0..=i).map(|k| l[(i, k)] * e[k]).sum::<f64>()).collect();
    let cb = effective_c(s);
    (0..cb.rows()).map(|r| mat_vec(&cb, &z)[r] + s.psi2[r].sqrt() * rng.normal()).collect()
}

/// Monte Carlo mean and covariance of `y | x` from `draws` latent draws.
pub fn latent_mc_moments(s: &ParamState, x: &[f64], draws: usize, rng: &mut RngStream) -> (Vec<f64>, Matrix) {
    let r = s.c.rows();
    let mut sum = vec![0.0; r];
    let mut sq = Matrix::zeros(r, r);
    for _ in 0..draws {
        let y = draw_response(s, x, rng);
        for i in 0..r {
            sum[i] += y[i];
            for j in 0..r {
                sq[(i, j)] += y[i] * y[j];
            }
        }
    }
    let m = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|v| v / m).collect();
    let cov = Matrix::from_fn(r, r, |i, j| sq[(i, j)] / m - mean[i] * mean[j]);
    (mean, cov)
}

/// Exact conditioning of the joint Gaussian of `(x, y)`:
/// `y | x ~ N(C̃Wᵀ V⁻¹ x, C̃C̃ᵀ + Ψ − C̃Wᵀ V⁻¹ W C̃ᵀ)` with `V = WWᵀ + Σ`.
pub fn joint_gaussian_moments(s: &ParamState, x: &[f64]) -> (Vec<f64>, Matrix) {
    let (p, q) = (s.w.rows(), s.q());
    let cb = effective_c(s);
    let r = cb.rows();
    let v = Matrix::from_fn(p, p, |i, j| {
        (0..q).map(|k| s.w[(i, k)] * s.w[(j, k)]).sum::<f64>() + if i == j { s.sigma2[i] } else { 0.0 }
    });
    let vinv = dense_inverse(&v);
    // K = C̃ Wᵀ, R × P
    let k = Matrix::from_fn(r, p, |i, j| (0..q).map(|l| cb[(i, l)] * s.w[(j, l)]).sum());
    let kv = Matrix::from_fn(r, p, |i, j| (0..p).map(|l| k[(i, l)] * vinv[(l, j)]).sum());
    let mean = mat_vec(&kv, x);
    let cov = Matrix::from_fn(r, r, |i, j| {
        (0..q).map(|l| cb[(i, l)] * cb[(j, l)]).sum::<f64>() + if i == j { s.psi2[i] } else { 0.0 }
            - (0..p).map(|l| kv[(i, l)] * k[(j, l)]).sum::<f64>()
    });
    (mean, cov)
}
