//! Forward simulation from the prior and the generative model.

use alloc::vec;

use crate::data::StandardizedDataset;
use crate::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};
use crate::numerics::{gamma_unchecked, Matrix, RngStream};

fn gamma(shape: f64, rate: f64, rng: &mut RngStream) -> f64 {
    gamma_unchecked(shape, rng) / rate
}

fn precisions_to_variances(len: usize, shape: f64, rate: f64, iso: bool, rng: &mut RngStream) -> alloc::vec::Vec<f64> {
    if iso {
        vec![1.0 / gamma(shape, rate, rng); len]
    } else {
        (0..len).map(|_| 1.0 / gamma(shape, rate, rng)).collect()
    }
}

/// Draws every parameter, and `n` scores, from the prior.
pub fn sample_prior(
    n: usize,
    p: usize,
    r: usize,
    q: usize,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) -> ParamState {
    let mut s = ParamState::zeros(n, p, r, q);
    let delta: alloc::vec::Vec<f64> =
        (0..q).map(|k| if k == 0 { 1.0 } else { gamma(hp.alpha, hp.beta, rng) }).collect();
    s.set_delta(delta);
    s.phi = Matrix::from_fn(p, q, |_, _| gamma(hp.nu1_w, hp.nu2_w, rng));
    match variant.kind {
        VariantKind::LBpls => {
            s.lambda2 = gamma(hp.a_lambda, hp.b_lambda, rng);
            let half = 0.5 * s.lambda2;
            s.phi_dot = Matrix::from_fn(r, q, |_, _| half / -libm::log(rng.uniform()));
        }
        _ => {
            s.lambda2 = gamma(hp.a_lambda, hp.b_lambda, rng);
            s.phi_dot = Matrix::from_fn(r, q, |_, _| gamma(hp.nu1_c, hp.nu2_c, rng));
        }
    }
    let tau = s.tau().to_vec();
    s.w = Matrix::from_fn(p, q, |_, _| 0.0);
    for i in 0..p {
        for j in 0..q {
            s.w[(i, j)] = rng.normal() / libm::sqrt(s.phi[(i, j)] * tau[j]);
        }
    }
    for i in 0..r {
        for j in 0..q {
            s.c[(i, j)] = rng.normal() / libm::sqrt(s.phi_dot[(i, j)] * tau[j]);
        }
    }
    s.sigma2 = precisions_to_variances(p, hp.a_sigma, hp.b_sigma, variant.isotropic_sigma, rng);
    s.psi2 = precisions_to_variances(r, hp.a_psi, hp.b_psi, variant.isotropic_psi, rng);
    let x = gamma_unchecked(hp.alpha_s, rng);
    let y = gamma_unchecked(hp.beta_s, rng);
    s.p0 = (x / (x + y)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    if variant.kind == VariantKind::SsBpls {
        for b in s.b.iter_mut() {
            *b = rng.uniform() < s.p0;
        }
    }
    s.z = Matrix::from_fn(n, q, |_, _| rng.normal());
    s
}

/// Redraws the scores of `state` from `N(0, I)` and returns data generated
/// from `x = W z + ε`, `y = C B z + η`.
pub fn simulate_data(state: &mut ParamState, rng: &mut RngStream) -> StandardizedDataset {
    let (n, q) = (state.z.rows(), state.q());
    state.z = Matrix::from_fn(n, q, |_, _| rng.normal());
    let mut x = state.z.matmul_t(&state.w);
    for i in 0..n {
        for (j, v) in x.row_mut(i).iter_mut().enumerate() {
            *v += libm::sqrt(state.sigma2[j]) * rng.normal();
        }
    }
    let mut y = state.z.matmul_t(&state.effective_c());
    for i in 0..n {
        for (j, v) in y.row_mut(i).iter_mut().enumerate() {
            *v += libm::sqrt(state.psi2[j]) * rng.normal();
        }
    }
    StandardizedDataset { x, y }
}
