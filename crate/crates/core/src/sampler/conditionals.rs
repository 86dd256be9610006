//! Full-conditional updates of the Gibbs sweep.
//!
//! Gaussian blocks are sampled in precision form: with `K = L Lᵀ` and
//! right-hand side `h`, the draw is `K⁻¹ h + L⁻ᵀ ε`. The `*_conditional`
//! functions expose the same mean and covariance for inspection.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::StandardizedDataset;
use crate::error::Result;
use crate::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};
use crate::numerics::{
    dot, gamma_unchecked, inverse_gaussian_unchecked, mvn_precision_with, Cholesky, Matrix, RngStream,
};

/// Floor applied to `|c|` before forming the inverse-Gaussian mean.
pub const LASSO_C_FLOOR: f64 = 1e-12;

fn gamma(shape: f64, rate: f64, rng: &mut RngStream) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0, "gamma({shape}, {rate})");
    gamma_unchecked(shape, rng) / rate
}

/// `W` with row `p` divided by `σ²_p`.
fn scaled_rows(m: &Matrix, var: &[f64]) -> Matrix {
    let mut out = m.clone();
    for (i, v) in var.iter().enumerate() {
        let inv = 1.0 / v;
        out.row_mut(i).iter_mut().for_each(|x| *x *= inv);
    }
    out
}

/// Precision of the score conditional, `I + WᵀΣ⁻¹W + C̃ᵀΨ⁻¹C̃` with
/// `C̃ = C B`.
pub fn scores_precision(state: &ParamState) -> Matrix {
    let cb = state.effective_c();
    let mut k = scaled_rows(&state.w, &state.sigma2).t_matmul(&state.w);
    k.add_assign(&scaled_rows(&cb, &state.psi2).t_matmul(&cb));
    for i in 0..k.rows() {
        k[(i, i)] += 1.0;
    }
    k
}

/// Right-hand sides `WᵀΣ⁻¹x_n + C̃ᵀΨ⁻¹y_n`, one row per observation.
fn scores_rhs(state: &ParamState, data: &StandardizedDataset) -> Matrix {
    let cb = state.effective_c();
    // `matmul_t` against the transposed factor runs as long dot products.
    let mut h = data.x.matmul_t(&scaled_rows(&state.w, &state.sigma2).transpose());
    h.add_assign(&data.y.matmul_t(&scaled_rows(&cb, &state.psi2).transpose()));
    h
}

/// Conditional means (`N × Q`) and the shared covariance of the scores.
pub fn scores_conditional(state: &ParamState, data: &StandardizedDataset) -> Result<(Matrix, Matrix)> {
    let ch = Cholesky::factor_matrix(&scores_precision(state))?;
    let mut h = scores_rhs(state, data);
    for n in 0..h.rows() {
        ch.solve_in_place(h.row_mut(n));
    }
    Ok((h, ch.inverse()))
}

pub fn update_scores(state: &mut ParamState, data: &StandardizedDataset, rng: &mut RngStream) -> Result<()> {
    let ch = Cholesky::factor_matrix(&scores_precision(state))?;
    let mut h = scores_rhs(state, data);
    let mut eps = vec![0.0; h.cols()];
    for n in 0..h.rows() {
        mvn_precision_with(h.row_mut(n), &ch, &mut eps, rng);
    }
    state.z = h;
    Ok(())
}

/// Transposed data and squared column norms, fixed for a whole chain.
#[derive(Debug, Clone)]
pub struct DataCache {
    xt: Matrix,
    yt: Matrix,
    x_sq: Vec<f64>,
    y_sq: Vec<f64>,
}

impl DataCache {
    pub fn new(data: &StandardizedDataset) -> Self {
        let xt = data.x.transpose();
        let yt = data.y.transpose();
        let x_sq = (0..xt.rows()).map(|p| dot(xt.row(p), xt.row(p))).collect();
        let y_sq = (0..yt.rows()).map(|r| dot(yt.row(r), yt.row(r))).collect();
        DataCache { xt, yt, x_sq, y_sq }
    }
}

/// Cross-products of the current scores with themselves and the data.
#[derive(Debug, Clone)]
pub struct ScoreProducts {
    /// `ZᵀZ`
    pub ztz: Matrix,
    /// `XᵀZ`, `P × Q`
    pub xtz: Matrix,
    /// `YᵀZ`, `R × Q`
    pub ytz: Matrix,
}

impl ScoreProducts {
    pub fn new(cache: &DataCache, z: &Matrix) -> Self {
        let zt = z.transpose();
        ScoreProducts { ztz: z.gram(), xtz: cache.xt.matmul_t(&zt), ytz: cache.yt.matmul_t(&zt) }
    }
}

/// `‖o − Z l‖² = ‖o‖² − 2 lᵀ(Zᵀo) + lᵀ(ZᵀZ)l` per row `l` of `load`.
fn rss_from_products(sq: &[f64], otz: &Matrix, ztz: &Matrix, load: &Matrix) -> Vec<f64> {
    let q = ztz.rows();
    let mut g = vec![0.0; q];
    (0..load.rows())
        .map(|i| {
            let l = load.row(i);
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = dot(ztz.row(j), l);
            }
            (sq[i] - 2.0 * dot(l, otz.row(i)) + dot(l, &g)).max(0.0)
        })
        .collect()
}

/// Row precision `diag(τ_q φ_q) + ZᵀZ / σ²` in place over `ztz`.
fn row_precision(ztz: &Matrix, local: &[f64], tau: &[f64], noise_var: f64) -> Matrix {
    let mut k = ztz.clone();
    k.scale(1.0 / noise_var);
    for q in 0..k.rows() {
        k[(q, q)] += tau[q] * local[q];
    }
    k
}

/// Mean and covariance of row `p` of `W`.
pub fn w_row_conditional(state: &ParamState, data: &StandardizedDataset, p: usize) -> Result<(Vec<f64>, Matrix)> {
    let ztz = state.z.gram();
    let k = row_precision(&ztz, state.phi.row(p), state.tau(), state.sigma2[p]);
    let ch = Cholesky::factor_matrix(&k)?;
    let xp = data.x.column(p);
    let mut h = state.z.t_mul_vec(&xp);
    h.iter_mut().for_each(|v| *v /= state.sigma2[p]);
    ch.solve_in_place(&mut h);
    Ok((h, ch.inverse()))
}

pub fn update_loadings_w(state: &mut ParamState, data: &StandardizedDataset, rng: &mut RngStream) -> Result<()> {
    let prods = ScoreProducts::new(&DataCache::new(data), &state.z);
    update_loadings_w_with(state, &prods, rng)
}

/// Reusable buffers for drawing one loading row after another.
struct RowDraw {
    k: Matrix,
    ch: Cholesky,
    h: Vec<f64>,
    eps: Vec<f64>,
}

impl RowDraw {
    fn new(q: usize) -> Self {
        RowDraw { k: Matrix::zeros(q, q), ch: Cholesky::unit(q), h: vec![0.0; q], eps: vec![0.0; q] }
    }

    /// Draws from the row conditional with precision `gram / v + diag(tau * local)`
    /// and linear term `h` (already filled). The draw is left in `self.h`.
    fn draw(&mut self, gram: &Matrix, local: &[f64], tau: &[f64], noise_var: f64, rng: &mut RngStream) -> Result<()> {
        let inv = 1.0 / noise_var;
        for (d, s) in self.k.as_mut_slice().iter_mut().zip(gram.as_slice()) {
            *d = s * inv;
        }
        for q in 0..self.k.rows() {
            self.k[(q, q)] += tau[q] * local[q];
        }
        self.ch.refactor(&self.k)?;
        mvn_precision_with(&mut self.h, &self.ch, &mut self.eps, rng);
        Ok(())
    }
}

pub(crate) fn update_loadings_w_with(state: &mut ParamState, prods: &ScoreProducts, rng: &mut RngStream) -> Result<()> {
    let (ztz, xtz) = (&prods.ztz, &prods.xtz);
    let mut buf = RowDraw::new(ztz.rows());
    for p in 0..state.w.rows() {
        let inv = 1.0 / state.sigma2[p];
        for (d, v) in buf.h.iter_mut().zip(xtz.row(p)) {
            *d = v * inv;
        }
        buf.draw(ztz, state.phi.row(p), state.tau(), state.sigma2[p], rng)?;
        state.w.row_mut(p).copy_from_slice(&buf.h);
    }
    Ok(())
}

/// `B ZᵀZ B`: switched-off columns contribute nothing to the regression.
fn switched_gram(z: &Matrix, b: &[bool]) -> Matrix {
    switch_gram(&z.gram(), b)
}

fn switch_gram(ztz: &Matrix, b: &[bool]) -> Matrix {
    let mut g = ztz.clone();
    for (q, &on) in b.iter().enumerate() {
        if !on {
            for j in 0..g.cols() {
                g[(q, j)] = 0.0;
                g[(j, q)] = 0.0;
            }
        }
    }
    g
}

/// Mean and covariance of row `r` of `C`. In ss-BPLS the regressors are
/// `Z B`, so entries of switched-off columns follow their prior.
pub fn c_row_conditional(state: &ParamState, data: &StandardizedDataset, r: usize) -> Result<(Vec<f64>, Matrix)> {
    let g = switched_gram(&state.z, &state.b);
    let k = row_precision(&g, state.phi_dot.row(r), state.tau(), state.psi2[r]);
    let ch = Cholesky::factor_matrix(&k)?;
    let mut h = state.z.t_mul_vec(&data.y.column(r));
    for (q, v) in h.iter_mut().enumerate() {
        *v = if state.b[q] { *v / state.psi2[r] } else { 0.0 };
    }
    ch.solve_in_place(&mut h);
    Ok((h, ch.inverse()))
}

pub fn update_loadings_c(state: &mut ParamState, data: &StandardizedDataset, rng: &mut RngStream) -> Result<()> {
    let prods = ScoreProducts::new(&DataCache::new(data), &state.z);
    update_loadings_c_with(state, &prods, rng)
}

pub(crate) fn update_loadings_c_with(state: &mut ParamState, prods: &ScoreProducts, rng: &mut RngStream) -> Result<()> {
    let g = switch_gram(&prods.ztz, &state.b);
    let ytz = &prods.ytz;
    let mut buf = RowDraw::new(g.rows());
    for r in 0..state.c.rows() {
        let inv = 1.0 / state.psi2[r];
        for ((d, v), &on) in buf.h.iter_mut().zip(ytz.row(r)).zip(&state.b) {
            *d = if on { v * inv } else { 0.0 };
        }
        buf.draw(&g, state.phi_dot.row(r), state.tau(), state.psi2[r], rng)?;
        state.c.row_mut(r).copy_from_slice(&buf.h);
    }
    Ok(())
}

/// Squared residual norms per predictor column and per response column.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSums {
    /// `‖x⁽ᵖ⁾ − Z w_p‖²`
    pub x: Vec<f64>,
    /// `‖y⁽ʳ⁾ − Z B c_r‖²`
    pub y: Vec<f64>,
}

fn column_rss(obs: &Matrix, z: &Matrix, load: &Matrix) -> Vec<f64> {
    let mut rss = vec![0.0; obs.cols()];
    for n in 0..obs.rows() {
        let zn = z.row(n);
        for (j, (&o, acc)) in obs.row(n).iter().zip(rss.iter_mut()).enumerate() {
            let e = o - dot(zn, load.row(j));
            *acc += e * e;
        }
    }
    rss
}

pub fn residual_sums(state: &ParamState, data: &StandardizedDataset) -> ResidualSums {
    ResidualSums { x: column_rss(&data.x, &state.z, &state.w), y: response_rss(state, data) }
}

pub(crate) fn response_rss(state: &ParamState, data: &StandardizedDataset) -> Vec<f64> {
    column_rss(&data.y, &state.z, &state.effective_c())
}

/// Gamma shape and rate of each uniqueness precision (`σ⁻²`, then `ψ⁻²`).
/// Isotropic blocks return a single pooled pair.
pub fn uniqueness_conditionals(
    rss: &ResidualSums,
    n: usize,
    hp: &Hyperparameters,
    variant: &ModelVariant,
) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let block = |rss: &[f64], a: f64, b: f64, iso: bool| -> Vec<(f64, f64)> {
        if iso {
            let total: f64 = rss.iter().sum();
            vec![(a + (n * rss.len()) as f64 / 2.0, b + 0.5 * total)]
        } else {
            rss.iter().map(|s| (a + n as f64 / 2.0, b + 0.5 * s)).collect()
        }
    };
    (
        block(&rss.x, hp.a_sigma, hp.b_sigma, variant.isotropic_sigma),
        block(&rss.y, hp.a_psi, hp.b_psi, variant.isotropic_psi),
    )
}

/// Residual sums from cached cross-products; agrees with
/// [`residual_sums`] up to rounding.
pub fn residual_sums_from_products(state: &ParamState, cache: &DataCache, prods: &ScoreProducts) -> ResidualSums {
    ResidualSums {
        x: rss_from_products(&cache.x_sq, &prods.xtz, &prods.ztz, &state.w),
        y: rss_from_products(&cache.y_sq, &prods.ytz, &prods.ztz, &state.effective_c()),
    }
}

/// Redraws `Σ` and `Ψ`; returns the residual sums used.
pub fn update_uniquenesses(
    state: &mut ParamState,
    data: &StandardizedDataset,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) -> Result<ResidualSums> {
    let rss = residual_sums(state, data);
    draw_uniquenesses(state, &rss, data.n(), hp, variant, rng);
    Ok(rss)
}

pub(crate) fn draw_uniquenesses(
    state: &mut ParamState,
    rss: &ResidualSums,
    n: usize,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) {
    let (sx, sy) = uniqueness_conditionals(rss, n, hp, variant);
    let draw = |params: &[(f64, f64)], out: &mut [f64], rng: &mut RngStream| {
        if params.len() == 1 && out.len() != 1 {
            let v = 1.0 / gamma(params[0].0, params[0].1, rng);
            out.iter_mut().for_each(|x| *x = v);
        } else {
            for (x, &(a, b)) in out.iter_mut().zip(params) {
                *x = 1.0 / gamma(a, b, rng);
            }
        }
    };
    draw(&sx, &mut state.sigma2, rng);
    draw(&sy, &mut state.psi2, rng);
}

/// Redraws `φ` and, except in L-BPLS, `φ̇`.
pub fn update_local_precisions(
    state: &mut ParamState,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) {
    let tau = state.tau().to_vec();
    for p in 0..state.w.rows() {
        for (q, &t) in tau.iter().enumerate() {
            let w = state.w[(p, q)];
            state.phi[(p, q)] = gamma(hp.nu1_w + 0.5, hp.nu2_w + 0.5 * w * w * t, rng);
        }
    }
    if variant.kind != VariantKind::LBpls {
        for r in 0..state.c.rows() {
            for (q, &t) in tau.iter().enumerate() {
                let c = state.c[(r, q)];
                state.phi_dot[(r, q)] = gamma(hp.nu1_c + 0.5, hp.nu2_c + 0.5 * c * c * t, rng);
            }
        }
    }
}

/// `Σ_p φ_pq w²_pq + Σ_r φ̇_rq c²_rq` per column.
pub fn column_shrinkage_sums(state: &ParamState) -> Vec<f64> {
    let q = state.q();
    let mut s = vec![0.0; q];
    for (m, loc) in [(&state.w, &state.phi), (&state.c, &state.phi_dot)] {
        for i in 0..m.rows() {
            for (j, acc) in s.iter_mut().enumerate() {
                let v = m[(i, j)];
                *acc += loc[(i, j)] * v * v;
            }
        }
    }
    s
}

/// Gamma shape and rate of `δ_k` (0-based `k ≥ 1`) given the rest.
pub fn delta_conditional(state: &ParamState, hp: &Hyperparameters, k: usize) -> (f64, f64) {
    delta_conditional_with(state, hp, k, &column_shrinkage_sums(state))
}

fn delta_conditional_with(state: &ParamState, hp: &Hyperparameters, k: usize, sums: &[f64]) -> (f64, f64) {
    let q_star = state.q();
    let rows = state.w.rows() + if hp.delta_shape_includes_r { state.c.rows() } else { 0 };
    let shape = hp.alpha + (rows * (q_star - k)) as f64 / 2.0;
    let dk = state.delta()[k];
    let tail: f64 = (k..q_star).map(|q| state.tau()[q] / dk * sums[q]).sum();
    (shape, hp.beta + 0.5 * tail)
}

/// Redraws `δ_2, …, δ_Q*` in increasing order; `τ` follows each draw.
pub fn update_global_shrinkage(state: &mut ParamState, hp: &Hyperparameters, rng: &mut RngStream) {
    let sums = column_shrinkage_sums(state);
    for k in 1..state.q() {
        let (a, b) = delta_conditional_with(state, hp, k, &sums);
        let d = gamma(a, b, rng);
        state.set_delta_k(k, d);
    }
}

/// Log Metropolis–Hastings ratio for flipping switch `q`, before the
/// `min(1, ·)`: the likelihood change of `Y` plus the prior odds.
pub fn flip_log_ratio(state: &ParamState, data: &StandardizedDataset, q: usize) -> f64 {
    let cb = state.effective_c();
    let resid = data.y.sub(&state.z.matmul_t(&cb));
    flip_log_ratio_with(state, &resid, q)
}

fn flip_log_ratio_with(state: &ParamState, resid: &Matrix, q: usize) -> f64 {
    let gamma_sign = if state.b[q] { -1.0 } else { 1.0 };
    let zq = state.z.column(q);
    let zz = dot(&zq, &zq);
    let mut quad = 0.0;
    let mut cross = 0.0;
    for r in 0..state.c.rows() {
        let c = state.c[(r, q)];
        let w = c / state.psi2[r];
        quad += w * c;
        let mut e = 0.0;
        for (n, &z) in zq.iter().enumerate() {
            e += resid[(n, r)] * z;
        }
        cross += w * e;
    }
    let upsilon = quad * zz - 2.0 * gamma_sign * cross;
    -0.5 * upsilon + gamma_sign * (libm::log(state.p0) - libm::log(1.0 - state.p0))
}

/// One Metropolis sweep over the switches followed by the conjugate `p0` draw.
pub fn update_spike_slab(
    state: &mut ParamState,
    data: &StandardizedDataset,
    hp: &Hyperparameters,
    rng: &mut RngStream,
) {
    let cb = state.effective_c();
    let mut resid = data.y.sub(&state.z.matmul_t(&cb));
    for q in 0..state.q() {
        let log_ratio = flip_log_ratio_with(state, &resid, q);
        if log_ratio >= 0.0 || libm::log(rng.uniform()) < log_ratio {
            let sign = if state.b[q] { 1.0 } else { -1.0 };
            state.b[q] = !state.b[q];
            for n in 0..resid.rows() {
                let z = state.z[(n, q)];
                for r in 0..resid.cols() {
                    resid[(n, r)] += sign * z * state.c[(r, q)];
                }
            }
        }
    }
    let on = state.b.iter().filter(|&&b| b).count() as f64;
    let a = hp.alpha_s + on;
    let b = hp.beta_s + state.q() as f64 - on;
    let x = gamma_unchecked(a, rng);
    let y = gamma_unchecked(b, rng);
    let p0 = x / (x + y);
    state.p0 = p0.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
}

/// Inverse-Gaussian mean of `φ̇_rq` given `λ²`, `τ_q` and `c_rq`.
pub fn lasso_ig_mean(lambda2: f64, tau: f64, c: f64) -> f64 {
    let c = c.abs().max(LASSO_C_FLOOR);
    libm::sqrt(lambda2 / (tau * c * c))
}

/// Gamma shape and rate of `λ²` given the current `φ̇`.
pub fn lambda2_conditional(state: &ParamState, hp: &Hyperparameters) -> (f64, f64) {
    let inv_sum: f64 = state.phi_dot.as_slice().iter().map(|v| 1.0 / v).sum();
    let count = state.phi_dot.as_slice().len() as f64;
    (hp.a_lambda + count, hp.b_lambda + 0.5 * inv_sum)
}

/// L-BPLS block: `φ̇_rq ~ IG(μ_rq, λ²)` then `λ²` from its gamma conditional.
pub fn update_lasso(state: &mut ParamState, hp: &Hyperparameters, rng: &mut RngStream) {
    let tau = state.tau().to_vec();
    let lambda2 = state.lambda2;
    for r in 0..state.c.rows() {
        for (q, &t) in tau.iter().enumerate() {
            let mu = lasso_ig_mean(lambda2, t, state.c[(r, q)]);
            let v = inverse_gaussian_unchecked(mu, lambda2, rng);
            state.phi_dot[(r, q)] = v.max(f64::MIN_POSITIVE);
        }
    }
    let (a, b) = lambda2_conditional(state, hp);
    state.lambda2 = gamma(a, b, rng);
}
