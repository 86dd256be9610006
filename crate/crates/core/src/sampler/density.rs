//! Unnormalized log joint density of data, scores and parameters.
//!
//! Uniqueness priors are expressed on the precisions; in L-BPLS the local
//! precision prior is expressed on `φ̇⁻¹ ~ Exp(λ²/2)`.

use crate::data::StandardizedDataset;
use crate::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};

use super::conditionals::{residual_sums, response_rss};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub(crate) fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * libm::log(rate) - libm::lgamma(shape) + (shape - 1.0) * libm::log(x) - rate * x
}

fn ln_beta_density(x: f64, a: f64, b: f64) -> f64 {
    libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + (a - 1.0) * libm::log(x)
        + (b - 1.0) * libm::log(1.0 - x)
}

fn gaussian_block(rss: &[f64], var: &[f64], n: usize) -> f64 {
    rss.iter()
        .zip(var)
        .map(|(s, v)| -0.5 * n as f64 * (LN_2PI + libm::log(*v)) - 0.5 * s / v)
        .sum()
}

fn precision_prior(var: &[f64], shape: f64, rate: f64, isotropic: bool) -> f64 {
    if isotropic {
        var.first().map_or(0.0, |v| ln_gamma_density(1.0 / v, shape, rate))
    } else {
        var.iter().map(|v| ln_gamma_density(1.0 / v, shape, rate)).sum()
    }
}

/// Log joint density, reusing predictor residual sums when supplied.
pub fn log_joint_density(
    state: &ParamState,
    data: &StandardizedDataset,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    x_rss: Option<&[f64]>,
) -> f64 {
    let n = data.n();
    let owned;
    let x_rss = match x_rss {
        Some(v) => v,
        None => {
            owned = residual_sums(state, data).x;
            &owned
        }
    };
    let y_rss = response_rss(state, data);
    let tau = state.tau();

    let mut lp = gaussian_block(x_rss, &state.sigma2, n) + gaussian_block(&y_rss, &state.psi2, n);
    let zz: f64 = state.z.as_slice().iter().map(|v| v * v).sum();
    lp += -0.5 * (state.z.as_slice().len() as f64) * LN_2PI - 0.5 * zz;

    for (m, loc) in [(&state.w, &state.phi), (&state.c, &state.phi_dot)] {
        for i in 0..m.rows() {
            for (q, &t) in tau.iter().enumerate() {
                let prec = loc[(i, q)] * t;
                let v = m[(i, q)];
                lp += 0.5 * (libm::log(prec) - LN_2PI) - 0.5 * prec * v * v;
            }
        }
    }

    lp += precision_prior(&state.sigma2, hp.a_sigma, hp.b_sigma, variant.isotropic_sigma);
    lp += precision_prior(&state.psi2, hp.a_psi, hp.b_psi, variant.isotropic_psi);
    lp += state.phi.as_slice().iter().map(|&v| ln_gamma_density(v, hp.nu1_w, hp.nu2_w)).sum::<f64>();
    if variant.kind == VariantKind::LBpls {
        let half = 0.5 * state.lambda2;
        lp += state.phi_dot.as_slice().iter().map(|&v| libm::log(half) - half / v).sum::<f64>();
        lp += ln_gamma_density(state.lambda2, hp.a_lambda, hp.b_lambda);
    } else {
        lp += state.phi_dot.as_slice().iter().map(|&v| ln_gamma_density(v, hp.nu1_c, hp.nu2_c)).sum::<f64>();
    }
    lp += state.delta().iter().skip(1).map(|&d| ln_gamma_density(d, hp.alpha, hp.beta)).sum::<f64>();
    if variant.kind == VariantKind::SsBpls {
        let (lp1, lp0) = (libm::log(state.p0), libm::log(1.0 - state.p0));
        lp += state.b.iter().map(|&b| if b { lp1 } else { lp0 }).sum::<f64>();
        lp += ln_beta_density(state.p0, hp.alpha_s, hp.beta_s);
    }
    lp
}
