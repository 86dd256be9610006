use alloc::vec;
use alloc::vec::Vec;

use crate::data::StandardizedDataset;
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};
use crate::numerics::{gamma_unchecked, pca_spectrum, Cholesky, Matrix, PcaSpectrum, RngStream};

/// Floor on the initial predictor noise variance.
const MIN_INITIAL_SIGMA2: f64 = 1e-6;

/// Smallest number of components explaining `threshold` of the variance,
/// clamped to `[2, min(N − 1, P)]`.
pub fn truncation_from_spectrum(spectrum: &PcaSpectrum, n: usize, p: usize, threshold: f64) -> usize {
    let mut q = spectrum.eigenvalues.len();
    for k in 1..=spectrum.eigenvalues.len() {
        if spectrum.explained_fraction(k) >= threshold {
            q = k;
            break;
        }
    }
    let upper = (n - 1).min(p).max(1);
    q.clamp(2.min(upper), upper)
}

/// Working truncation `Q*` for standardized predictors.
pub fn select_truncation(x_std: &Matrix, hp: &Hyperparameters) -> Result<usize> {
    if let Some(q) = hp.q_star_override {
        return Ok(q);
    }
    let spectrum = pca_spectrum(x_std)?;
    Ok(truncation_from_spectrum(&spectrum, x_std.rows(), x_std.cols(), hp.q_star_variance_threshold))
}

fn gamma(shape: f64, rate: f64, rng: &mut RngStream) -> f64 {
    gamma_unchecked(shape, rng) / rate
}

/// Warm start: `W` from the leading principal axes, `σ²` from the mean
/// discarded eigenvalue, `Z` at its conditional mean given `X`, `C` by
/// least squares, everything else from the prior.
pub fn init_chain(
    data: &StandardizedDataset,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) -> Result<ParamState> {
    let (n, p, r) = (data.n(), data.p(), data.r());
    let spectrum = pca_spectrum(&data.x)?;
    let q_star = match hp.q_star_override {
        Some(q) => q,
        None => truncation_from_spectrum(&spectrum, n, p, hp.q_star_variance_threshold),
    };
    if q_star == 0 {
        return Err(Error::invalid("q_star", "must be at least 1"));
    }
    let available = spectrum.loadings.cols();
    let used = q_star.min(available);

    let mut s = ParamState::zeros(n, p, r, q_star);
    for q in 0..used {
        for i in 0..p {
            s.w[(i, q)] = spectrum.loadings[(i, q)];
        }
    }
    let rest = &spectrum.eigenvalues[used.min(spectrum.eigenvalues.len())..];
    let sigma2 = if rest.is_empty() { 0.0 } else { rest.iter().sum::<f64>() / rest.len() as f64 };
    s.sigma2 = vec![sigma2.max(MIN_INITIAL_SIGMA2); p];

    s.z = conditional_mean_scores(&data.x, &s.w, &s.sigma2)?;

    // Least squares on the columns that carry a principal axis.
    let zu = s.z.column_block(0, used);
    let ztz = zu.gram();
    let ch = Cholesky::factor_matrix(&ztz).map_err(|_| Error::SingularScores)?;
    let zty = zu.t_matmul(&data.y);
    for rr in 0..r {
        let coef = ch.solve(&zty.column(rr));
        if coef.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularScores);
        }
        for (q, v) in coef.into_iter().enumerate() {
            s.c[(rr, q)] = v;
        }
    }

    let delta: Vec<f64> = (0..q_star).map(|k| if k == 0 { 1.0 } else { gamma(hp.alpha, hp.beta, rng) }).collect();
    s.set_delta(delta);
    s.phi = Matrix::from_fn(p, q_star, |_, _| gamma(hp.nu1_w, hp.nu2_w, rng));
    s.lambda2 = gamma(hp.a_lambda, hp.b_lambda, rng);
    if variant.kind == VariantKind::LBpls {
        let half = 0.5 * s.lambda2;
        s.phi_dot = Matrix::from_fn(r, q_star, |_, _| half / -libm::log(rng.uniform()));
    } else {
        s.phi_dot = Matrix::from_fn(r, q_star, |_, _| gamma(hp.nu1_c, hp.nu2_c, rng));
    }
    s.psi2 = if variant.isotropic_psi {
        vec![1.0 / gamma(hp.a_psi, hp.b_psi, rng); r]
    } else {
        (0..r).map(|_| 1.0 / gamma(hp.a_psi, hp.b_psi, rng)).collect()
    };
    let x = gamma_unchecked(hp.alpha_s, rng);
    let y = gamma_unchecked(hp.beta_s, rng);
    s.p0 = (x / (x + y)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    Ok(s)
}

/// `X Σ⁻¹ W S_z` with `S_z = (I + WᵀΣ⁻¹W)⁻¹`.
pub fn conditional_mean_scores(x: &Matrix, w: &Matrix, sigma2: &[f64]) -> Result<Matrix> {
    let q = w.cols();
    let mut ws = w.clone();
    for (i, v) in sigma2.iter().enumerate() {
        ws.row_mut(i).iter_mut().for_each(|a| *a /= v);
    }
    let mut k = ws.t_matmul(w);
    for i in 0..q {
        k[(i, i)] += 1.0;
    }
    let ch = Cholesky::factor_matrix(&k)?;
    let mut z = x.matmul(&ws);
    for n in 0..z.rows() {
        ch.solve_in_place(z.row_mut(n));
    }
    Ok(z)
}
