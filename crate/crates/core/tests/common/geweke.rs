//! Joint-distribution ("getting it right") check of the Gibbs sweep.
//!
//! The marginal-conditional simulator draws parameters from the prior. The
//! successive-conditional simulator alternates fresh data given the
//! parameters with one sweep given the data. Both target the prior, so the
//! first two moments of every scalar must agree.

use bpls_core::diagnostics::effective_sample_size;
use bpls_core::model::{Hyperparameters, ModelVariant, ParamState, VariantKind};
use bpls_core::sampler::{sample_prior, simulate_data, sweep};
use bpls_core::RngStream;

pub const N: usize = 20;
pub const P: usize = 3;
pub const R: usize = 2;
pub const Q: usize = 2;

/// Default hyperparameters, raised where needed so that every tested
/// statistic has a finite variance under the prior: the fourth moments of
/// the loadings need `ν1 > 4`, `α > 4` and, for the LASSO, `A_λ > 4`.
pub fn finite_moment_hyperparameters() -> Hyperparameters {
    Hyperparameters {
        alpha: 5.0,
        beta: 1.0,
        nu1_w: 5.0,
        nu2_w: 4.0,
        nu1_c: 5.0,
        nu2_c: 4.0,
        a_lambda: 5.0,
        b_lambda: 5.0,
        ..Hyperparameters::default()
    }
}

/// Every scalar of the state on a scale with finite prior moments.
/// In L-BPLS `φ̇` has no prior mean, so its reciprocal is used.
pub fn scalars(s: &ParamState, kind: VariantKind) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut push_matrix = |name: &str, m: &bpls_core::Matrix, f: &dyn Fn(f64) -> f64| {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                out.push((format!("{name}[{i},{j}]"), f(m[(i, j)])));
            }
        }
    };
    push_matrix("w", &s.w, &|v| v);
    push_matrix("c", &s.c, &|v| v);
    push_matrix("z", &s.z, &|v| v);
    push_matrix("phi", &s.phi, &|v| v);
    if kind == VariantKind::LBpls {
        push_matrix("1/phi_dot", &s.phi_dot, &|v| 1.0 / v);
    } else {
        push_matrix("phi_dot", &s.phi_dot, &|v| v);
    }
    for (p, v) in s.sigma2.iter().enumerate() {
        out.push((format!("1/sigma2[{p}]"), 1.0 / v));
    }
    for (r, v) in s.psi2.iter().enumerate() {
        out.push((format!("1/psi2[{r}]"), 1.0 / v));
    }
    for k in 1..s.q() {
        out.push((format!("delta[{k}]"), s.delta()[k]));
    }
    match kind {
        VariantKind::LBpls => out.push(("lambda2".into(), s.lambda2)),
        VariantKind::SsBpls => {
            out.push(("p0".into(), s.p0));
            for (q, &b) in s.b.iter().enumerate() {
                out.push((format!("b[{q}]"), if b { 1.0 } else { 0.0 }));
            }
        }
        VariantKind::Bpls => {}
    }
    out
}

#[derive(Debug, Clone)]
pub struct GewekeStat {
    pub name: String,
    pub z: f64,
    pub ess: f64,
}

#[derive(Debug, Clone)]
pub struct GewekeReport {
    pub stats: Vec<GewekeStat>,
    pub sweeps: usize,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.stats.iter().map(|s| s.ess).fold(f64::INFINITY, f64::min)
    }

    pub fn worst(&self) -> &GewekeStat {
        self.stats.iter().max_by(|a, b| a.z.abs().total_cmp(&b.z.abs())).unwrap()
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

/// Runs both simulators. The successive chain records every `thin`-th of
/// `sweeps` states; the marginal sample has `prior_draws` independent states.
/// Effective sizes refer to the recorded successive draws.
pub fn run(kind: VariantKind, sweeps: usize, thin: usize, prior_draws: usize, seed: u64) -> GewekeReport {
    let hp = finite_moment_hyperparameters();
    let variant = ModelVariant::new(kind);
    let root = RngStream::new(seed);

    let mut rng = root.substream(0);
    let names: Vec<String> =
        scalars(&sample_prior(N, P, R, Q, &hp, &variant, &mut rng.clone()), kind).into_iter().map(|(n, _)| n).collect();
    let k = names.len();
    let mut marginal = vec![Vec::with_capacity(prior_draws); 2 * k];
    for _ in 0..prior_draws {
        let s = sample_prior(N, P, R, Q, &hp, &variant, &mut rng);
        for (i, (_, v)) in scalars(&s, kind).into_iter().enumerate() {
            marginal[i].push(v);
            marginal[k + i].push(v * v);
        }
    }

    let mut rng = root.substream(1);
    let mut state = sample_prior(N, P, R, Q, &hp, &variant, &mut rng);
    let mut successive = vec![Vec::with_capacity(sweeps / thin); 2 * k];
    for it in 0..sweeps {
        let data = simulate_data(&mut state, &mut rng);
        sweep(&mut state, &data, &hp, &variant, &mut rng).expect("sweep failed");
        if (it + 1) % thin == 0 {
            for (i, (_, v)) in scalars(&state, kind).into_iter().enumerate() {
                successive[i].push(v);
                successive[k + i].push(v * v);
            }
        }
    }

    let stats = (0..2 * k)
        .map(|i| {
            let name = if i < k { names[i].clone() } else { format!("{}^2", names[i - k]) };
            let (m1, v1) = mean_var(&successive[i]);
            let (m2, v2) = mean_var(&marginal[i]);
            let ess = if v1 > 0.0 { effective_sample_size(&successive[i]).unwrap() } else { f64::INFINITY };
            let se = (v1 / ess + v2 / marginal[i].len() as f64).sqrt();
            let z = if se > 0.0 { (m1 - m2) / se } else { 0.0 };
            GewekeStat { name, z, ess }
        })
        .collect();
    GewekeReport { stats, sweeps }
}
