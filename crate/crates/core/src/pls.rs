//! Classical PLS regression by NIPALS, with cross-validated component count.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::mean_sd;
use crate::error::{Error, Result};
use crate::folds::shuffled_blocks;
use crate::numerics::{dot, symmetric_eigen, Matrix, RngStream};

/// Inner-loop iteration cap per component.
pub const NIPALS_MAX_ITER: usize = 500;
/// Convergence tolerance on the change of the unit weight vector.
pub const NIPALS_TOL: f64 = 1e-10;
/// Relative size below which a deflated block counts as exhausted.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PlsModel {
    /// Number of components.
    pub q: usize,
    /// `P × Q` unit weight vectors.
    pub weights: Matrix,
    /// `P × Q` predictor loadings.
    pub x_loadings: Matrix,
    /// `R × Q` response loadings.
    pub y_loadings: Matrix,
    /// `P × R` regression coefficients on centered predictors.
    pub coefficients: Matrix,
    /// `N × Q` training scores.
    pub scores: Matrix,
    pub x_mean: Vec<f64>,
    pub y_mean: Vec<f64>,
}

fn column_means(m: &Matrix) -> Vec<f64> {
    (0..m.cols()).map(|j| mean_sd(&m.column(j)).0).collect()
}

fn center(m: &Matrix, mean: &[f64]) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] - mean[j])
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Fits `q` components. Inputs are centered internally.
pub fn fit_nipals(x: &Matrix, y: &Matrix, q: usize) -> Result<PlsModel> {
    let (n, p, r) = (x.rows(), x.cols(), y.cols());
    if y.rows() != n {
        return Err(Error::shape(format!("{n} response rows"), format!("{}", y.rows())));
    }
    if q == 0 || q > p.min(n.saturating_sub(1)) {
        return Err(Error::invalid("q", format!("{q} components need 1 <= q <= min(N - 1, P) = {}", p.min(n.saturating_sub(1)))));
    }
    let x_mean = column_means(x);
    let y_mean = column_means(y);
    let mut xr = center(x, &x_mean);
    let mut yr = center(y, &y_mean);
    let x_scale = xr.frobenius_norm().max(f64::MIN_POSITIVE);
    let y_scale = yr.frobenius_norm().max(f64::MIN_POSITIVE);

    let mut weights = Matrix::zeros(p, q);
    let mut x_loadings = Matrix::zeros(p, q);
    let mut y_loadings = Matrix::zeros(r, q);
    let mut scores = Matrix::zeros(n, q);

    for a in 0..q {
        if xr.frobenius_norm() < RANK_TOL * x_scale || yr.frobenius_norm() < RANK_TOL * y_scale {
            return Err(Error::RankDeficient(a + 1));
        }
        // Start from the response column with the largest sum of squares.
        let start = (0..r)
            .max_by(|&i, &j| {
                let si: f64 = yr.column(i).iter().map(|v| v * v).sum();
                let sj: f64 = yr.column(j).iter().map(|v| v * v).sum();
                si.total_cmp(&sj)
            })
            .unwrap_or(0);
        let mut u = yr.column(start);
        let mut w = vec![0.0; p];
        let mut t = vec![0.0; n];
        let mut c = vec![0.0; r];
        let mut converged = false;
        for _ in 0..NIPALS_MAX_ITER {
            let mut w_new = xr.t_mul_vec(&u);
            let wn = norm(&w_new);
            if wn < RANK_TOL * x_scale {
                return Err(Error::RankDeficient(a + 1));
            }
            w_new.iter_mut().for_each(|v| *v /= wn);
            t = xr.mul_vec(&w_new);
            let tt = dot(&t, &t);
            c = yr.t_mul_vec(&t);
            c.iter_mut().for_each(|v| *v /= tt);
            let cc = dot(&c, &c);
            let delta: f64 = w_new.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum();
            w = w_new;
            if libm::sqrt(delta) < NIPALS_TOL || r == 1 {
                converged = true;
                break;
            }
            if cc == 0.0 {
                return Err(Error::RankDeficient(a + 1));
            }
            u = yr.mul_vec(&c);
            u.iter_mut().for_each(|v| *v /= cc);
        }
        if !converged {
            // Nearly tied leading singular values of XᵀY stall the power
            // iteration. Its fixed point is the leading eigenvector of
            // YᵀXXᵀY mapped through XᵀY, so take that directly.
            let xty = xr.t_matmul(&yr);
            let (values, vectors) = symmetric_eigen(&xty.t_matmul(&xty));
            let mut w_new = xty.mul_vec(&vectors.column(0));
            let wn = norm(&w_new);
            if !(values[0].is_finite() && wn > RANK_TOL * x_scale) {
                return Err(Error::ConvergenceFailure { component: a + 1, iterations: NIPALS_MAX_ITER });
            }
            let sign = if dot(&w_new, &w) < 0.0 { -1.0 } else { 1.0 };
            w_new.iter_mut().for_each(|v| *v *= sign / wn);
            w = w_new;
            t = xr.mul_vec(&w);
            let tt = dot(&t, &t);
            c = yr.t_mul_vec(&t);
            c.iter_mut().for_each(|v| *v /= tt);
        }
        let tt = dot(&t, &t);
        if tt < RANK_TOL * x_scale * x_scale {
            return Err(Error::RankDeficient(a + 1));
        }
        let mut pl = xr.t_mul_vec(&t);
        pl.iter_mut().for_each(|v| *v /= tt);
        for i in 0..n {
            for j in 0..p {
                xr[(i, j)] -= t[i] * pl[j];
            }
            for j in 0..r {
                yr[(i, j)] -= t[i] * c[j];
            }
        }
        weights.set_column(a, &w);
        x_loadings.set_column(a, &pl);
        y_loadings.set_column(a, &c);
        scores.set_column(a, &t);
    }
    let coefficients = assemble_coefficients(&weights, &x_loadings, &y_loadings, q);
    Ok(PlsModel { q, weights, x_loadings, y_loadings, coefficients, scores, x_mean, y_mean })
}

/// `B = W (PᵀW)⁻¹ Cᵀ` from the first `q` components. `PᵀW` is unit upper
/// triangular under NIPALS deflation, so back substitution suffices.
fn assemble_coefficients(w: &Matrix, pl: &Matrix, c: &Matrix, q: usize) -> Matrix {
    let w = w.column_block(0, q);
    let pw = pl.column_block(0, q).t_matmul(&w);
    let ct = c.column_block(0, q).transpose();
    let r = ct.cols();
    let mut m = ct;
    for j in 0..r {
        for i in (0..q).rev() {
            let mut s = m[(i, j)];
            for k in i + 1..q {
                s -= pw[(i, k)] * m[(k, j)];
            }
            m[(i, j)] = s / pw[(i, i)];
        }
    }
    w.matmul(&m)
}

impl PlsModel {
    /// Coefficients using only the first `q` components.
    pub fn coefficients_for(&self, q: usize) -> Matrix {
        assemble_coefficients(&self.weights, &self.x_loadings, &self.y_loadings, q.min(self.q))
    }

    fn predict_with(&self, coef: &Matrix, x_new: &Matrix) -> Result<Matrix> {
        if x_new.cols() != self.x_mean.len() {
            return Err(Error::shape(format!("{} predictor columns", self.x_mean.len()), format!("{}", x_new.cols())));
        }
        let mut y = center(x_new, &self.x_mean).matmul(coef);
        for i in 0..y.rows() {
            for (v, m) in y.row_mut(i).iter_mut().zip(&self.y_mean) {
                *v += m;
            }
        }
        Ok(y)
    }

    /// Score propagation through the deflation steps, without assembling
    /// coefficients.
    pub fn predict_by_deflation(&self, x_new: &Matrix) -> Result<Matrix> {
        if x_new.cols() != self.x_mean.len() {
            return Err(Error::shape(format!("{} predictor columns", self.x_mean.len()), format!("{}", x_new.cols())));
        }
        let r = self.y_mean.len();
        let mut out = Matrix::zeros(x_new.rows(), r);
        for i in 0..x_new.rows() {
            let mut xc: Vec<f64> = x_new.row(i).iter().zip(&self.x_mean).map(|(v, m)| v - m).collect();
            let mut yi = self.y_mean.clone();
            for a in 0..self.q {
                let w = self.weights.column(a);
                let t = dot(&xc, &w);
                for (j, v) in xc.iter_mut().enumerate() {
                    *v -= t * self.x_loadings[(j, a)];
                }
                for (j, v) in yi.iter_mut().enumerate() {
                    *v += t * self.y_loadings[(j, a)];
                }
            }
            out.row_mut(i).copy_from_slice(&yi);
        }
        Ok(out)
    }
}

pub fn predict_pls(model: &PlsModel, x_new: &Matrix) -> Result<Matrix> {
    model.predict_with(&model.coefficients, x_new)
}

/// Component-count selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvRule {
    /// Smallest cross-validated RMSE.
    Min,
    /// Fewest components within one standard error of the minimum.
    OneSigma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub q: usize,
    /// Mean over folds of the per-fold RMSE, for `Q = 1..=len`.
    pub rmse: Vec<f64>,
    /// Standard error of that mean.
    pub se: Vec<f64>,
}

/// Picks `Q ≤ q_max` by K-fold cross-validation. With several responses
/// the per-fold error is the square root of the unweighted mean of the
/// per-trait mean squared errors.
pub fn cross_validate_q(
    x: &Matrix,
    y: &Matrix,
    q_max: usize,
    folds: usize,
    rule: CvRule,
    rng: &mut RngStream,
) -> Result<CvResult> {
    let n = x.rows();
    if folds < 2 || folds > n {
        return Err(Error::InvalidFolds(format!("{folds} folds for {n} observations")));
    }
    let blocks = shuffled_blocks(n, folds, rng)?;
    let largest_test = blocks.iter().map(|b| b.len()).max().unwrap_or(0);
    let q_max = q_max.min(x.cols()).min(n - largest_test - 1);
    if q_max == 0 {
        return Err(Error::InvalidFolds(format!("{folds} folds leave too few training rows")));
    }
    let mut per_fold = vec![vec![0.0; q_max]; folds];
    for (f, test) in blocks.iter().enumerate() {
        let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
        let (xt, yt) = (x.select_rows(&train), y.select_rows(&train));
        let (xv, yv) = (x.select_rows(test), y.select_rows(test));
        let (model, fitted) = fit_up_to(&xt, &yt, q_max)?;
        for q in 1..=q_max {
            let pred = if q <= fitted { model.predict_with(&model.coefficients_for(q), &xv)? } else {
                model.predict_with(&model.coefficients_for(fitted), &xv)?
            };
            let mut mse = 0.0;
            for j in 0..y.cols() {
                let s: f64 = (0..xv.rows()).map(|i| { let e = pred[(i, j)] - yv[(i, j)]; e * e }).sum();
                mse += s / xv.rows() as f64;
            }
            per_fold[f][q - 1] = libm::sqrt(mse / y.cols() as f64);
        }
    }
    let mut rmse = Vec::with_capacity(q_max);
    let mut se = Vec::with_capacity(q_max);
    for q in 0..q_max {
        let v: Vec<f64> = per_fold.iter().map(|f| f[q]).collect();
        let (m, sd) = mean_sd(&v);
        rmse.push(m);
        se.push(sd / libm::sqrt(folds as f64));
    }
    let best = (0..q_max).min_by(|&a, &b| rmse[a].total_cmp(&rmse[b])).unwrap_or(0);
    let q = match rule {
        CvRule::Min => best + 1,
        CvRule::OneSigma => {
            let bound = rmse[best] + se[best];
            (0..=best).find(|&i| rmse[i] <= bound).unwrap_or(best) + 1
        }
    };
    Ok(CvResult { q, rmse, se })
}

/// Fits as many components as the data support, up to `q_max`. Late
/// components whose weight iteration stalls count as unsupported.
fn fit_up_to(x: &Matrix, y: &Matrix, q_max: usize) -> Result<(PlsModel, usize)> {
    let mut q = q_max;
    loop {
        match fit_nipals(x, y, q) {
            Ok(m) => return Ok((m, q)),
            Err(Error::RankDeficient(a) | Error::ConvergenceFailure { component: a, .. }) if a > 1 => q = a - 1,
            Err(e) => return Err(e),
        }
    }
}
