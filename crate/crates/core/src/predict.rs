//! Posterior predictive distribution of responses given new predictors.
//!
//! For one parameter state the predictive is Gaussian with mean
//! `C̃ S_z Wᵀ Σ⁻¹ x₊` and covariance `C̃ S_z C̃ᵀ + Ψ`, where
//! `S_z = (I + Wᵀ Σ⁻¹ W)⁻¹` and `C̃ = C B`. The sampler stores the `R × P`
//! projection and the `R × R` covariance of every retained state, which is
//! all that prediction needs.

use alloc::vec;
use alloc::format;
use alloc::vec::Vec;

use crate::data::{ResponseTransform, Standardizer};
use crate::error::{Error, Result};
use crate::model::ParamState;
use crate::numerics::{dot, Cholesky, Matrix, RngStream};
use crate::sampler::ChainOutput;

/// Per-state predictive summaries, stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictiveSummaries {
    r: usize,
    p: usize,
    projections: Vec<f64>,
    covariances: Vec<f64>,
}

impl PredictiveSummaries {
    pub fn new(r: usize, p: usize) -> Self {
        PredictiveSummaries { r, p, projections: Vec::new(), covariances: Vec::new() }
    }

    pub fn with_capacity(r: usize, p: usize, states: usize) -> Self {
        PredictiveSummaries {
            r,
            p,
            projections: Vec::with_capacity(states * r * p),
            covariances: Vec::with_capacity(states * r * r),
        }
    }

    /// Rebuilds summaries from flat row-major buffers.
    pub fn from_parts(r: usize, p: usize, projections: Vec<f64>, covariances: Vec<f64>) -> Result<Self> {
        let per_proj = r * p;
        let per_cov = r * r;
        if per_proj == 0 || projections.len() % per_proj != 0 {
            return Err(Error::shape(alloc::format!("multiple of {per_proj}"), alloc::format!("{}", projections.len())));
        }
        let m = projections.len() / per_proj;
        if covariances.len() != m * per_cov {
            return Err(Error::shape(alloc::format!("{}", m * per_cov), alloc::format!("{}", covariances.len())));
        }
        Ok(PredictiveSummaries { r, p, projections, covariances })
    }

    pub fn push(&mut self, projection: &Matrix, covariance: &Matrix) {
        debug_assert_eq!((projection.rows(), projection.cols()), (self.r, self.p));
        debug_assert_eq!((covariance.rows(), covariance.cols()), (self.r, self.r));
        self.projections.extend_from_slice(projection.as_slice());
        self.covariances.extend_from_slice(covariance.as_slice());
    }

    pub fn len(&self) -> usize {
        if self.r == 0 {
            0
        } else {
            self.covariances.len() / (self.r * self.r)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Row-major `R × P` projection of state `m`.
    pub fn projection(&self, m: usize) -> &[f64] {
        let k = self.r * self.p;
        &self.projections[m * k..(m + 1) * k]
    }

    /// Row-major `R × R` covariance of state `m`.
    pub fn covariance(&self, m: usize) -> &[f64] {
        let k = self.r * self.r;
        &self.covariances[m * k..(m + 1) * k]
    }

    pub fn projections(&self) -> &[f64] {
        &self.projections
    }

    pub fn covariances(&self) -> &[f64] {
        &self.covariances
    }

    /// Predictive mean of state `m` at `x`.
    pub fn mean_at(&self, m: usize, x: &[f64], out: &mut [f64]) {
        let proj = self.projection(m);
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(&proj[r * self.p..(r + 1) * self.p], x);
        }
    }
}

/// Per-state `S_z Wᵀ Σ⁻¹` (`Q × P`) and `S_z` (`Q × Q`), used when the
/// response loadings are held fixed at one state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LatentSummaries {
    q: usize,
    p: usize,
    projections: Vec<f64>,
    covariances: Vec<f64>,
}

impl LatentSummaries {
    pub fn new(q: usize, p: usize) -> Self {
        LatentSummaries { q, p, projections: Vec::new(), covariances: Vec::new() }
    }

    pub fn push(&mut self, projection: &Matrix, covariance: &Matrix) {
        self.projections.extend_from_slice(projection.as_slice());
        self.covariances.extend_from_slice(covariance.as_slice());
    }

    pub fn len(&self) -> usize {
        if self.q == 0 {
            0
        } else {
            self.covariances.len() / (self.q * self.q)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn projection(&self, m: usize) -> &[f64] {
        let k = self.q * self.p;
        &self.projections[m * k..(m + 1) * k]
    }

    pub fn covariance(&self, m: usize) -> &[f64] {
        let k = self.q * self.q;
        &self.covariances[m * k..(m + 1) * k]
    }
}

/// Everything prediction needs from one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSummary {
    /// `C̃ S_z Wᵀ Σ⁻¹`, `R × P`.
    pub projection: Matrix,
    /// `C̃ S_z C̃ᵀ + Ψ`, `R × R`.
    pub covariance: Matrix,
    /// `S_z Wᵀ Σ⁻¹`, `Q × P`.
    pub latent_projection: Matrix,
    /// `S_z`, `Q × Q`.
    pub latent_covariance: Matrix,
}

pub fn state_summary(state: &ParamState) -> Result<StateSummary> {
    let q = state.q();
    // Wᵀ Σ⁻¹ as a Q × P matrix.
    let mut wts = state.w.transpose();
    for j in 0..q {
        for (v, s) in wts.row_mut(j).iter_mut().zip(&state.sigma2) {
            *v /= s;
        }
    }
    let mut k = wts.matmul(&state.w);
    for i in 0..q {
        k[(i, i)] += 1.0;
    }
    let ch = Cholesky::factor_matrix(&k)?;
    let s_z = ch.inverse();
    // S_z Wᵀ Σ⁻¹ column by column.
    let mut latent_projection = wts;
    let mut col = vec![0.0; q];
    for p in 0..latent_projection.cols() {
        for (j, c) in col.iter_mut().enumerate() {
            *c = latent_projection[(j, p)];
        }
        ch.solve_in_place(&mut col);
        for (j, c) in col.iter().enumerate() {
            latent_projection[(j, p)] = *c;
        }
    }
    let cb = state.effective_c();
    let projection = cb.matmul(&latent_projection);
    let covariance = response_covariance(&cb, &s_z, &state.psi2);
    Ok(StateSummary { projection, covariance, latent_projection, latent_covariance: s_z })
}

/// `C S Cᵀ + diag(ψ²)`, symmetrised.
fn response_covariance(c: &Matrix, s: &Matrix, psi2: &[f64]) -> Matrix {
    let mut cov = c.matmul(s).matmul_t(c);
    let r = cov.rows();
    for i in 0..r {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] += psi2[i];
    }
    cov
}

/// Predictive mean and covariance of `y₊` given one parameter state.
pub fn predictive_moments_given_params(state: &ParamState, x_plus: &[f64]) -> Result<(Vec<f64>, Matrix)> {
    if x_plus.len() != state.w.rows() {
        return Err(Error::shape(alloc::format!("{} predictors", state.w.rows()), alloc::format!("{}", x_plus.len())));
    }
    let s = state_summary(state)?;
    Ok((s.projection.mul_vec(x_plus), s.covariance))
}

/// Rao-Blackwellised predictive moments for every test row.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveMoments {
    /// `N_test × R` means.
    pub mean: Matrix,
    /// One `R × R` covariance per test row.
    pub covariance: Vec<Matrix>,
}

impl PredictiveMoments {
    /// `N_test × R` marginal variances.
    pub fn variances(&self) -> Matrix {
        let r = self.mean.cols();
        Matrix::from_fn(self.mean.rows(), r, |n, j| self.covariance[n][(j, j)])
    }
}

fn check_columns(expected: usize, x: &Matrix) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::shape(alloc::format!("{expected} predictor columns"), alloc::format!("{}", x.cols())));
    }
    Ok(())
}

/// Average of per-state means, and average per-state covariance plus the
/// population covariance of the per-state means (two-pass).
pub fn rao_blackwell_predict(summaries: &PredictiveSummaries, x_test: &Matrix) -> Result<PredictiveMoments> {
    check_columns(summaries.p(), x_test)?;
    rao_blackwell_with(summaries, x_test.rows(), |m, n, out| summaries.mean_at(m, x_test.row(n), out))
}

/// As [`rao_blackwell_predict`], reading the per-state means from a trace
/// recorded during the chain (`trace[m]` is `N_test × R`).
pub fn rao_blackwell_from_trace(summaries: &PredictiveSummaries, trace: &[Matrix]) -> Result<PredictiveMoments> {
    let rows = check_trace(summaries, trace)?;
    rao_blackwell_with(summaries, rows, |m, n, out| out.copy_from_slice(trace[m].row(n)))
}

fn check_trace(summaries: &PredictiveSummaries, trace: &[Matrix]) -> Result<usize> {
    if trace.len() != summaries.len() {
        return Err(Error::shape(format!("{} traced states", summaries.len()), format!("{}", trace.len())));
    }
    let rows = trace.first().map_or(0, Matrix::rows);
    if let Some(bad) = trace.iter().find(|t| t.rows() != rows || t.cols() != summaries.r()) {
        return Err(Error::shape(format!("{rows} x {}", summaries.r()), format!("{} x {}", bad.rows(), bad.cols())));
    }
    Ok(rows)
}

fn rao_blackwell_with(
    summaries: &PredictiveSummaries,
    rows: usize,
    mean_at: impl Fn(usize, usize, &mut [f64]),
) -> Result<PredictiveMoments> {
    let m_states = summaries.len();
    if m_states < 2 {
        return Err(Error::InsufficientChain(m_states));
    }
    let r = summaries.r();
    let inv_m = 1.0 / m_states as f64;

    let mut avg_cov = Matrix::zeros(r, r);
    for m in 0..m_states {
        for (a, v) in avg_cov.as_mut_slice().iter_mut().zip(summaries.covariance(m)) {
            *a += v;
        }
    }
    avg_cov.scale(inv_m);

    let mut mean = Matrix::zeros(rows, r);
    let mut covariance = Vec::with_capacity(rows);
    let mut means = vec![0.0; m_states * r];
    for n in 0..rows {
        for m in 0..m_states {
            mean_at(m, n, &mut means[m * r..(m + 1) * r]);
        }
        let mu = mean.row_mut(n);
        for m in 0..m_states {
            for (a, v) in mu.iter_mut().zip(&means[m * r..(m + 1) * r]) {
                *a += v;
            }
        }
        mu.iter_mut().for_each(|v| *v *= inv_m);
        let mu = mu.to_vec();
        let mut cov = avg_cov.clone();
        for m in 0..m_states {
            let d = &means[m * r..(m + 1) * r];
            for i in 0..r {
                let di = d[i] - mu[i];
                for j in 0..r {
                    cov[(i, j)] += inv_m * di * (d[j] - mu[j]);
                }
            }
        }
        debug_assert!((0..r).all(|i| cov[(i, i)] >= avg_cov[(i, i)] - 1e-12 * avg_cov[(i, i)].abs()));
        covariance.push(cov);
    }
    Ok(PredictiveMoments { mean, covariance })
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// [`quantile_sorted`] by selection; reorders `values` but returns the
/// same number as sorting first.
pub fn quantile_select(values: &mut [f64], prob: f64) -> f64 {
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let (_, &mut a, upper) = values.select_nth_unstable_by(lo, f64::total_cmp);
    let b = upper.iter().copied().min_by(f64::total_cmp).unwrap_or(a);
    a + (h - lo as f64) * (b - a)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", alloc::format!("{level} is not in (0, 1)")));
    }
    Ok(())
}

/// Equal-tail interval bounds (`N_test × R` each) from one predictive draw
/// per retained state.
pub fn prediction_intervals(
    summaries: &PredictiveSummaries,
    x_test: &Matrix,
    level: f64,
    rng: &mut RngStream,
) -> Result<(Matrix, Matrix)> {
    check_level(level)?;
    check_columns(summaries.p(), x_test)?;
    intervals_with(summaries, x_test.rows(), level, rng, |m, n, out| summaries.mean_at(m, x_test.row(n), out))
}

/// As [`prediction_intervals`], reading the per-state means from a trace
/// recorded during the chain. Consumes the generator identically.
pub fn intervals_from_trace(
    summaries: &PredictiveSummaries,
    trace: &[Matrix],
    level: f64,
    rng: &mut RngStream,
) -> Result<(Matrix, Matrix)> {
    check_level(level)?;
    let rows = check_trace(summaries, trace)?;
    intervals_with(summaries, rows, level, rng, |m, n, out| out.copy_from_slice(trace[m].row(n)))
}

fn intervals_with(
    summaries: &PredictiveSummaries,
    rows: usize,
    level: f64,
    rng: &mut RngStream,
    mean_at: impl Fn(usize, usize, &mut [f64]),
) -> Result<(Matrix, Matrix)> {
    let m_states = summaries.len();
    if m_states < 2 {
        return Err(Error::InsufficientChain(m_states));
    }
    let r = summaries.r();
    let factors = covariance_factors(summaries)?;
    let (p_lo, p_hi) = (0.5 * (1.0 - level), 0.5 * (1.0 + level));

    let mut lo = Matrix::zeros(rows, r);
    let mut hi = Matrix::zeros(rows, r);
    let mut draws = vec![0.0; r * m_states];
    let mut mean = vec![0.0; r];
    let mut eps = vec![0.0; r];
    for n in 0..rows {
        for m in 0..m_states {
            mean_at(m, n, &mut mean);
            rng.fill_normal(&mut eps);
            let l = &factors[m * r * r..(m + 1) * r * r];
            for i in 0..r {
                let noise: f64 = (0..=i).map(|j| l[i * r + j] * eps[j]).sum();
                draws[i * m_states + m] = mean[i] + noise;
            }
        }
        for i in 0..r {
            let d = &mut draws[i * m_states..(i + 1) * m_states];
            lo[(n, i)] = quantile_select(d, p_lo);
            hi[(n, i)] = quantile_select(d, p_hi);
        }
    }
    Ok((lo, hi))
}

/// Lower Cholesky factors of every stored covariance, flattened.
fn covariance_factors(summaries: &PredictiveSummaries) -> Result<Vec<f64>> {
    let r = summaries.r();
    let mut out = Vec::with_capacity(summaries.len() * r * r);
    for m in 0..summaries.len() {
        let cov = Matrix::from_vec(r, r, summaries.covariance(m).to_vec())?;
        out.extend_from_slice(Cholesky::factor_matrix(&cov)?.l().as_slice());
    }
    Ok(out)
}

/// Which scale a [`PredictiveResult`] is expressed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Standardized (and, for positive traits, log-transformed) responses.
    Transformed,
    /// Original measurement units.
    Original,
}

/// Predictive means, variances and interval bounds, each `N_test × R`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveResult {
    pub mean: Matrix,
    /// Marginal variances; absent on the original scale.
    pub variance: Option<Matrix>,
    pub lower: Matrix,
    pub upper: Matrix,
    pub level: f64,
    pub scale: Scale,
}

/// Rao-Blackwellised moments plus equal-tail intervals on the transformed scale.
pub fn predict(
    summaries: &PredictiveSummaries,
    x_test: &Matrix,
    level: f64,
    rng: &mut RngStream,
) -> Result<PredictiveResult> {
    let moments = rao_blackwell_predict(summaries, x_test)?;
    let (lower, upper) = prediction_intervals(summaries, x_test, level, rng)?;
    Ok(PredictiveResult {
        variance: Some(moments.variances()),
        mean: moments.mean,
        lower,
        upper,
        level,
        scale: Scale::Transformed,
    })
}

/// Maps means and bounds back to original units. Variances are dropped
/// because the inverse transform is not affine.
pub fn to_original_scale(
    pr: &PredictiveResult,
    standardizer: &Standardizer,
    transform: &ResponseTransform,
) -> PredictiveResult {
    if pr.scale == Scale::Original {
        return pr.clone();
    }
    let map = |m: &Matrix| {
        Matrix::from_fn(m.rows(), m.cols(), |n, r| transform.invert_value(r, standardizer.invert_y_value(r, m[(n, r)])))
    };
    PredictiveResult {
        mean: map(&pr.mean),
        variance: None,
        lower: map(&pr.lower),
        upper: map(&pr.upper),
        level: pr.level,
        scale: Scale::Original,
    }
}

/// How much of the modal state is held fixed in [`predict_from_mode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeScope {
    /// Predict with every parameter at the highest-density retained state.
    AllParams,
    /// Hold `C̃` at the modal state; average everything else over the chain.
    COnly,
}

/// Index of the retained state with the largest log joint density.
pub fn mode_index(retained_log_density: &[f64]) -> Option<usize> {
    retained_log_density
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// Predictions anchored at the posterior-mode state.
pub fn predict_from_mode(chain: &ChainOutput, x_test: &Matrix, scope: ModeScope) -> Result<PredictiveMoments> {
    let dens = chain.retained_log_density();
    let m_states = chain.summaries.len();
    if m_states == 0 {
        return Err(Error::InsufficientChain(0));
    }
    check_columns(chain.summaries.p(), x_test)?;
    let mode = mode_index(&dens).ok_or(Error::InsufficientChain(0))?;
    let r = chain.summaries.r();
    match scope {
        ModeScope::AllParams => {
            let cov = Matrix::from_vec(r, r, chain.summaries.covariance(mode).to_vec())?;
            let mut mean = Matrix::zeros(x_test.rows(), r);
            for n in 0..x_test.rows() {
                chain.summaries.mean_at(mode, x_test.row(n), mean.row_mut(n));
            }
            Ok(PredictiveMoments { mean, covariance: vec![cov; x_test.rows()] })
        }
        ModeScope::COnly => {
            let latent = chain.latent.as_ref().ok_or(Error::MissingLatentSummaries)?;
            let q = chain.q_star;
            let p = chain.summaries.p();
            let cb = chain.effective_c_trace(mode);
            let mut per_state = PredictiveSummaries::with_capacity(r, p, m_states);
            for m in 0..latent.len() {
                let proj = cb.matmul(&Matrix::from_vec(q, p, latent.projection(m).to_vec())?);
                let s_z = Matrix::from_vec(q, q, latent.covariance(m).to_vec())?;
                let cov = response_covariance(&cb, &s_z, &chain.psi2_trace[m]);
                per_state.push(&proj, &cov);
            }
            if per_state.len() == 1 {
                let cov = Matrix::from_vec(r, r, per_state.covariance(0).to_vec())?;
                let mut mean = Matrix::zeros(x_test.rows(), r);
                for n in 0..x_test.rows() {
                    per_state.mean_at(0, x_test.row(n), mean.row_mut(n));
                }
                return Ok(PredictiveMoments { mean, covariance: vec![cov; x_test.rows()] });
            }
            rao_blackwell_predict(&per_state, x_test)
        }
    }
}
