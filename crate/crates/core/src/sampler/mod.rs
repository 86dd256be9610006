//! Gibbs sampler for the three model variants.

pub mod conditionals;
pub mod density;
pub mod init;
pub mod prior;

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::StandardizedDataset;
use crate::error::{Error, Result};
use crate::model::{ChainConfig, Hyperparameters, ModelVariant, ParamState, Severity, VariantKind};
use crate::numerics::{Matrix, RngStream};
use crate::predict::{state_summary, LatentSummaries, PredictiveSummaries};

pub use conditionals::*;
pub use density::log_joint_density;
pub use init::{conditional_mean_scores, init_chain, select_truncation, truncation_from_spectrum};
pub use prior::{sample_prior, simulate_data};

/// One full sweep in the fixed order Z, W, C, Σ/Ψ, φ, (φ̇ | LASSO), δ,
/// (B, p0). Returns the residual sums computed during the sweep; the
/// predictor part stays valid afterwards.
pub fn sweep(
    state: &mut ParamState,
    data: &StandardizedDataset,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) -> Result<ResidualSums> {
    sweep_cached(state, data, &DataCache::new(data), hp, variant, rng)
}

/// [`sweep`] with the data-dependent constants precomputed.
pub fn sweep_cached(
    state: &mut ParamState,
    data: &StandardizedDataset,
    cache: &DataCache,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    rng: &mut RngStream,
) -> Result<ResidualSums> {
    update_scores(state, data, rng)?;
    let prods = ScoreProducts::new(cache, &state.z);
    update_loadings_w_with(state, &prods, rng)?;
    update_loadings_c_with(state, &prods, rng)?;
    let rss = residual_sums_from_products(state, cache, &prods);
    draw_uniquenesses(state, &rss, data.n(), hp, variant, rng);
    update_local_precisions(state, hp, variant, rng);
    if variant.kind == VariantKind::LBpls {
        update_lasso(state, hp, rng);
    }
    update_global_shrinkage(state, hp, rng);
    if variant.kind == VariantKind::SsBpls {
        update_spike_slab(state, data, hp, rng);
    }
    Ok(rss)
}

/// Fraction of the leading-column loading scale below which a column is
/// treated as switched off by the truncation check.
pub const TRUNCATION_NEGLIGIBLE_FRACTION: f64 = 0.01;
/// Number of leading columns defining that scale.
pub const TRUNCATION_REFERENCE_COLUMNS: usize = 3;

/// Advisory check that the working truncation leaves some columns unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationCheck {
    /// Sweep after which the check ran.
    pub iteration: usize,
    /// `max_p |w_pq|` per column.
    pub column_max: Vec<f64>,
    /// First column (0-based) from which every later column is negligible.
    pub negligible_from: Option<usize>,
}

impl TruncationCheck {
    pub fn from_state(state: &ParamState, iteration: usize) -> Self {
        let q = state.q();
        let column_max: Vec<f64> = (0..q)
            .map(|j| (0..state.w.rows()).map(|i| state.w[(i, j)].abs()).fold(0.0, f64::max))
            .collect();
        let reference = column_max.iter().take(TRUNCATION_REFERENCE_COLUMNS).copied().fold(0.0, f64::max);
        let cut = TRUNCATION_NEGLIGIBLE_FRACTION * reference;
        let mut negligible_from = None;
        for j in (TRUNCATION_REFERENCE_COLUMNS.min(q)..q).rev() {
            if column_max[j] < cut {
                negligible_from = Some(j);
            } else {
                break;
            }
        }
        TruncationCheck { iteration, column_max, negligible_from }
    }

    /// True when at least one trailing column is negligible.
    pub fn adequate(&self) -> bool {
        self.negligible_from.is_some()
    }
}

/// Running posterior means over retained states.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMeans {
    pub c: Matrix,
    /// Mean of `C B` (equal to `c` outside ss-BPLS).
    pub cb: Matrix,
    pub w_abs: Matrix,
    pub c_abs: Matrix,
    pub sigma2: Vec<f64>,
    pub psi2: Vec<f64>,
    pub tau: Vec<f64>,
}

impl PosteriorMeans {
    fn zeros(p: usize, r: usize, q: usize) -> Self {
        PosteriorMeans {
            c: Matrix::zeros(r, q),
            cb: Matrix::zeros(r, q),
            w_abs: Matrix::zeros(p, q),
            c_abs: Matrix::zeros(r, q),
            sigma2: vec![0.0; p],
            psi2: vec![0.0; r],
            tau: vec![0.0; q],
        }
    }

    fn accumulate(&mut self, s: &ParamState, cb: &Matrix) {
        let add = |dst: &mut [f64], src: &[f64], f: fn(f64) -> f64| {
            dst.iter_mut().zip(src).for_each(|(d, v)| *d += f(*v));
        };
        add(self.c.as_mut_slice(), s.c.as_slice(), |v| v);
        add(self.cb.as_mut_slice(), cb.as_slice(), |v| v);
        add(self.w_abs.as_mut_slice(), s.w.as_slice(), f64::abs);
        add(self.c_abs.as_mut_slice(), s.c.as_slice(), f64::abs);
        add(&mut self.sigma2, &s.sigma2, |v| v);
        add(&mut self.psi2, &s.psi2, |v| v);
        add(&mut self.tau, s.tau(), |v| v);
    }

    fn finish(&mut self, count: usize) {
        if count == 0 {
            return;
        }
        let inv = 1.0 / count as f64;
        for m in [&mut self.c, &mut self.cb, &mut self.w_abs, &mut self.c_abs] {
            m.scale(inv);
        }
        for v in [&mut self.sigma2, &mut self.psi2, &mut self.tau] {
            v.iter_mut().for_each(|x| *x *= inv);
        }
    }
}

/// Everything a chain keeps.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub variant: ModelVariant,
    pub q_star: usize,
    pub seed: u64,
    /// Unnormalized log joint density after every sweep, burn-in included.
    pub log_density: Vec<f64>,
    /// Sweep index (0-based) of every retained state.
    pub retained_iterations: Vec<usize>,
    pub summaries: PredictiveSummaries,
    pub latent: Option<LatentSummaries>,
    /// `R × Q*` response loadings per retained state.
    pub c_trace: Vec<Matrix>,
    pub b_trace: Vec<Vec<bool>>,
    pub tau_trace: Vec<Vec<f64>>,
    pub psi2_trace: Vec<Vec<f64>>,
    pub lambda2_trace: Vec<f64>,
    pub p0_trace: Vec<f64>,
    pub posterior_means: PosteriorMeans,
    /// Full states, only when requested in the chain configuration.
    pub full_states: Vec<ParamState>,
    /// `N_test × R` predictive means per retained state, when test
    /// predictors were supplied.
    pub test_trace: Option<Vec<Matrix>>,
    pub truncation: Option<TruncationCheck>,
    pub final_state: ParamState,
}

impl ChainOutput {
    pub fn retained(&self) -> usize {
        self.retained_iterations.len()
    }

    pub fn retained_log_density(&self) -> Vec<f64> {
        self.retained_iterations.iter().map(|&i| self.log_density[i]).collect()
    }

    /// `C B` of retained state `m`.
    pub fn effective_c_trace(&self, m: usize) -> Matrix {
        let mut cb = self.c_trace[m].clone();
        for (q, &on) in self.b_trace[m].iter().enumerate() {
            if !on {
                for r in 0..cb.rows() {
                    cb[(r, q)] = 0.0;
                }
            }
        }
        cb
    }
}

fn at(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Sampler { iteration, source: Box::new(e) }
}

/// Runs burn-in plus `keep` sweeps from the warm start, retaining every
/// `thin`-th post-burn-in state.
pub fn run_gibbs(
    data: &StandardizedDataset,
    hp: &Hyperparameters,
    variant: &ModelVariant,
    config: &ChainConfig,
    x_test: Option<&Matrix>,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    if let Some(v) = hp.validate().into_iter().find(|v| v.severity == Severity::Error) {
        return Err(Error::invalid(v.field, v.rule));
    }
    if config.thin == 0 {
        return Err(Error::invalid("thin", "must be at least 1"));
    }
    if config.keep == 0 {
        return Err(Error::invalid("keep", "must be at least 1"));
    }
    if let Some(x) = x_test {
        if x.cols() != data.p() {
            return Err(Error::shape(format!("{} test predictor columns", data.p()), format!("{}", x.cols())));
        }
    }
    let mut state = init_chain(data, hp, variant, rng)?;
    let (p, r, q) = (data.p(), data.r(), state.q());
    log::debug!("chain start: variant {}, Q* = {q}, seed {}", variant.kind.as_str(), rng.seed());

    let total = config.burn_in + config.keep;
    let capacity = config.retained();
    let mut out = ChainOutput {
        variant: *variant,
        q_star: q,
        seed: rng.seed(),
        log_density: Vec::with_capacity(total),
        retained_iterations: Vec::with_capacity(capacity),
        summaries: PredictiveSummaries::with_capacity(r, p, capacity),
        latent: config.store_latent_summaries.then(|| LatentSummaries::new(q, p)),
        c_trace: Vec::with_capacity(capacity),
        b_trace: Vec::with_capacity(capacity),
        tau_trace: Vec::with_capacity(capacity),
        psi2_trace: Vec::with_capacity(capacity),
        lambda2_trace: Vec::new(),
        p0_trace: Vec::new(),
        posterior_means: PosteriorMeans::zeros(p, r, q),
        full_states: Vec::new(),
        test_trace: x_test.map(|_| Vec::with_capacity(capacity)),
        truncation: None,
        final_state: state.clone(),
    };

    let cache = DataCache::new(data);
    for it in 0..total {
        let rss = sweep_cached(&mut state, data, &cache, hp, variant, rng).map_err(at(it))?;
        state.check_invariants().map_err(|msg| at(it)(Error::DegenerateInput(msg)))?;
        let lp = log_joint_density(&state, data, hp, variant, Some(&rss.x));
        if !lp.is_finite() {
            return Err(at(it)(Error::DegenerateInput(format!("log joint density is {lp}"))));
        }
        out.log_density.push(lp);

        if config.warm_up_for_truncation > 0 && it + 1 == config.warm_up_for_truncation {
            let check = TruncationCheck::from_state(&state, it + 1);
            match check.negligible_from {
                Some(k) => log::info!("truncation check: columns {}..{q} negligible", k + 1),
                None => log::warn!("truncation check: no negligible trailing column at Q* = {q}; consider a larger Q*"),
            }
            out.truncation = Some(check);
        }

        if it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0 {
            retain(&mut out, &state, x_test, config).map_err(at(it))?;
            out.retained_iterations.push(it);
        }
    }
    out.posterior_means.finish(out.retained_iterations.len());
    out.final_state = state;
    Ok(out)
}

fn retain(out: &mut ChainOutput, state: &ParamState, x_test: Option<&Matrix>, config: &ChainConfig) -> Result<()> {
    let summary = state_summary(state)?;
    out.summaries.push(&summary.projection, &summary.covariance);
    if let Some(latent) = out.latent.as_mut() {
        latent.push(&summary.latent_projection, &summary.latent_covariance);
    }
    if let (Some(x), Some(trace)) = (x_test, out.test_trace.as_mut()) {
        trace.push(x.matmul_t(&summary.projection));
    }
    let cb = state.effective_c();
    out.posterior_means.accumulate(state, &cb);
    out.c_trace.push(state.c.clone());
    out.b_trace.push(state.b.clone());
    out.tau_trace.push(state.tau().to_vec());
    out.psi2_trace.push(state.psi2.clone());
    match out.variant.kind {
        VariantKind::LBpls => out.lambda2_trace.push(state.lambda2),
        VariantKind::SsBpls => out.p0_trace.push(state.p0),
        VariantKind::Bpls => {}
    }
    if config.store_full_states {
        out.full_states.push(state.clone());
    }
    Ok(())
}
