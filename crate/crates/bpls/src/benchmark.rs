//! Held-out evaluation of the model variants and the PLS baseline over
//! folds of a dataset or over synthetic replicates.

use bpls_core::data::{fit_standardizer, mean_sd, RawDataset};
use bpls_core::diagnostics::{effective_dimension, empirical_coverage, median, rmsep, stored_trace_ess, EFFECTIVE_DIMENSION_FRACTION};
use bpls_core::folds::{splits, FoldScheme, FoldSplit};
use bpls_core::model::ModelVariant;
use bpls_core::pls::{cross_validate_q, fit_nipals, predict_pls, CvRule};
use bpls_core::synth::{generate, replicate_rng, SynthConfig};
use bpls_core::{Matrix, RngStream};
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::fit::{fit_model, prediction_rng, resolve_transform, FitOptions};

/// Environment variable holding the number of benchmark worker threads.
pub const WORKERS_ENV: &str = "BPLS_WORKERS";

/// First substream index used for per-job seeds; lower indices belong to
/// the replicate data streams.
const JOB_STREAM_BASE: u64 = 1 << 40;

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// Folds of one dataset; each replicate reshuffles the fold assignment.
    Data(RawDataset),
    /// A fresh training and test set per replicate.
    Synthetic(SynthConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlsBaseline {
    pub folds: usize,
    pub q_max: usize,
    pub rule: CvRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub source: Source,
    pub folds: FoldScheme,
    pub variants: Vec<ModelVariant>,
    pub replicates: usize,
    pub baseline: Option<PlsBaseline>,
    /// Shared model and chain settings; the chain seed is replaced per job.
    pub fit: FitOptions,
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bayes(ModelVariant),
    Pls,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Bayes(v) => v.kind.as_str(),
            Method::Pls => "pls",
        }
    }
}

/// Held-out results of one fitted model on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub replicate: usize,
    pub fold: usize,
    pub method: Method,
    pub seed: u64,
    /// Per trait, original units.
    pub rmsep: Vec<f64>,
    /// Per trait; absent for the baseline.
    pub coverage: Option<Vec<f64>>,
    /// Effective dimension per trait; the selected component count for the baseline.
    pub q_hat: Vec<usize>,
    /// Smallest ESS over the test prediction trace.
    pub ess_min: Option<f64>,
    /// Mean posterior-mean absolute loading of each latent column, over
    /// the rows of `W` and `C`.
    pub column_scale: Option<Vec<f64>>,
}

impl JobOutcome {
    /// Median over traits of the coverage.
    pub fn median_coverage(&self) -> Option<f64> {
        self.coverage.as_deref().map(median)
    }

    pub fn mean_rmsep(&self) -> f64 {
        self.rmsep.iter().sum::<f64>() / self.rmsep.len() as f64
    }
}

struct Split {
    replicate: usize,
    fold: usize,
    train: RawDataset,
    test: RawDataset,
}

fn build_splits(plan: &BenchmarkPlan) -> Result<Vec<Split>> {
    let mut out = Vec::new();
    for rep in 0..plan.replicates {
        let mut rng = replicate_rng(plan.seed, rep as u64);
        match &plan.source {
            Source::Synthetic(cfg) => {
                let d = generate(cfg, &mut rng)?;
                out.push(Split { replicate: rep, fold: 0, train: d.train, test: d.test });
            }
            Source::Data(d) => {
                for (fold, FoldSplit { train, test }) in splits(plan.folds, d.n(), &mut rng)?.into_iter().enumerate() {
                    out.push(Split { replicate: rep, fold, train: d.subset(&train), test: d.subset(&test) });
                }
            }
        }
    }
    Ok(out)
}

/// Seed of the job for `method_index` on split (`replicate`, `fold`).
pub fn job_seed(master: u64, replicate: usize, fold: usize, method_index: usize) -> u64 {
    let index = JOB_STREAM_BASE + ((replicate as u64) << 20) + ((fold as u64) << 8) + method_index as u64;
    RngStream::new(master).substream(index).next_u64()
}

fn run_bayes(split: &Split, variant: ModelVariant, seed: u64, plan: &BenchmarkPlan) -> Result<JobOutcome> {
    let mut opts = plan.fit.clone();
    opts.variant = variant;
    opts.chain.seed = seed;
    let model = fit_model(&split.train, &opts, Some(&split.test.x))?;
    let pred = model.predict_recorded(plan.level, &mut prediction_rng(seed))?;
    let truth = &split.test.y;
    let trace = model.chain.test_trace.as_deref().unwrap_or(&[]);
    let means = &model.chain.posterior_means;
    let q = means.w_abs.cols();
    let rows = (means.w_abs.rows() + means.c_abs.rows()) as f64;
    let column_scale = (0..q)
        .map(|j| (means.w_abs.column(j).iter().sum::<f64>() + means.c_abs.column(j).iter().sum::<f64>()) / rows)
        .collect();
    Ok(JobOutcome {
        replicate: split.replicate,
        fold: split.fold,
        method: Method::Bayes(variant),
        seed,
        rmsep: rmsep(&pred.original.mean, truth)?,
        coverage: Some(empirical_coverage(&pred.original.lower, &pred.original.upper, truth)?),
        q_hat: effective_dimension(&means.cb, EFFECTIVE_DIMENSION_FRACTION),
        ess_min: Some(stored_trace_ess(trace)?.min),
        column_scale: Some(column_scale),
    })
}

/// Cross-validated NIPALS fit on the standardized (and transformed)
/// training responses, mapped back to original units.
fn run_pls(split: &Split, pls: PlsBaseline, seed: u64, plan: &BenchmarkPlan) -> Result<JobOutcome> {
    let transform = resolve_transform(&split.train, &plan.fit.positive_traits, plan.fit.policy)?;
    let st = fit_standardizer(&split.train, &transform)?;
    let data = st.standardize(&split.train, &transform)?;
    let cv = cross_validate_q(&data.x, &data.y, pls.q_max, pls.folds, pls.rule, &mut RngStream::new(seed))?;
    let model = fit_nipals(&data.x, &data.y, cv.q)?;
    let pred = predict_pls(&model, &st.apply_x(&split.test.x)?)?;
    let original = Matrix::from_fn(pred.rows(), pred.cols(), |n, r| transform.invert_value(r, st.invert_y_value(r, pred[(n, r)])));
    Ok(JobOutcome {
        replicate: split.replicate,
        fold: split.fold,
        method: Method::Pls,
        seed,
        rmsep: rmsep(&original, &split.test.y)?,
        coverage: None,
        q_hat: vec![cv.q; split.test.y.cols()],
        ess_min: None,
        column_scale: None,
    })
}

/// Runs every split × method job on a pool of `workers` threads. Results
/// come back in job order, independent of scheduling.
pub fn run_benchmark(plan: &BenchmarkPlan, workers: usize) -> Result<Vec<JobOutcome>> {
    if plan.replicates == 0 {
        return Err(CliError::Usage("replicates must be at least 1".into()));
    }
    if plan.variants.is_empty() && plan.baseline.is_none() {
        return Err(CliError::Usage("nothing to benchmark: no variants and no baseline".into()));
    }
    let splits = build_splits(plan)?;
    let mut methods: Vec<Method> = plan.variants.iter().map(|&v| Method::Bayes(v)).collect();
    if plan.baseline.is_some() {
        methods.push(Method::Pls);
    }
    let jobs: Vec<(&Split, usize, Method)> =
        splits.iter().flat_map(|s| methods.iter().enumerate().map(move |(i, &m)| (s, i, m))).collect();
    log::info!("benchmark: {} jobs on {workers} workers", jobs.len());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<JobOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(split, i, method)| {
                let seed = job_seed(plan.seed, split.replicate, split.fold, i);
                let out = match method {
                    Method::Bayes(v) => run_bayes(split, v, seed, plan),
                    Method::Pls => run_pls(split, plan.baseline.expect("baseline job without settings"), seed, plan),
                };
                log::info!("job replicate {} fold {} {} done", split.replicate, split.fold, method.name());
                out
            })
            .collect()
    });
    results.into_iter().collect()
}

/// Mean and standard deviation of one quantity over replicates and folds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(v: &[f64]) -> Self {
        if v.len() < 2 {
            return MeanSd { mean: v.first().copied().unwrap_or(f64::NAN), sd: f64::NAN };
        }
        let (mean, sd) = mean_sd(v);
        MeanSd { mean, sd }
    }
}

impl std::fmt::Display for MeanSd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.sd.is_nan() {
            // A single value has no spread.
            return write!(f, "{:.3} (-)", self.mean);
        }
        write!(f, "{:.3} ({:.3})", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraitSummary {
    pub rmsep: MeanSd,
    pub coverage: Option<MeanSd>,
    pub q_hat: MeanSd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: &'static str,
    pub traits: Vec<TraitSummary>,
    /// Mean (sd) over jobs of the per-job median coverage across traits.
    pub median_coverage: Option<MeanSd>,
}

pub fn summarize(outcomes: &[JobOutcome]) -> Vec<MethodSummary> {
    let mut names: Vec<&'static str> = Vec::new();
    for o in outcomes {
        if !names.contains(&o.method.name()) {
            names.push(o.method.name());
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rows: Vec<&JobOutcome> = outcomes.iter().filter(|o| o.method.name() == name).collect();
            let r = rows[0].rmsep.len();
            let traits = (0..r)
                .map(|t| {
                    let cov: Option<Vec<f64>> = rows.iter().map(|o| o.coverage.as_ref().map(|c| c[t])).collect();
                    TraitSummary {
                        rmsep: MeanSd::of(&rows.iter().map(|o| o.rmsep[t]).collect::<Vec<_>>()),
                        coverage: cov.map(|c| MeanSd::of(&c)),
                        q_hat: MeanSd::of(&rows.iter().map(|o| o.q_hat[t] as f64).collect::<Vec<_>>()),
                    }
                })
                .collect();
            let med: Option<Vec<f64>> = rows.iter().map(|o| o.median_coverage()).collect();
            MethodSummary { method: name, traits, median_coverage: med.map(|m| MeanSd::of(&m)) }
        })
        .collect()
}

/// Text table with one row per method and `RMSEP`, `Q̂_y` per trait,
/// each as `mean (sd)`; coverage follows when available.
pub fn render_table(summaries: &[MethodSummary], trait_names: &[String]) -> String {
    let mut out = format!("{:<10}", "method");
    for n in trait_names {
        out.push_str(&format!(" | {:^33}", n));
    }
    out.push_str(" | median coverage\n");
    out.push_str(&format!("{:<10}", ""));
    for _ in trait_names {
        out.push_str(&format!(" | {:<16} {:<16}", "RMSEP", "Q̂_y"));
    }
    out.push_str(" |\n");
    for s in summaries {
        out.push_str(&format!("{:<10}", s.method));
        for t in &s.traits {
            out.push_str(&format!(" | {:<16} {:<16}", t.rmsep.to_string(), t.q_hat.to_string()));
        }
        let cov = s.median_coverage.map_or("-".to_string(), |c| c.to_string());
        out.push_str(&format!(" | {cov}\n"));
    }
    out
}

/// Per-job, per-trait rows for `folds.csv`.
pub fn outcome_rows(outcomes: &[JobOutcome], trait_names: &[String]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for o in outcomes {
        for (t, name) in trait_names.iter().enumerate() {
            rows.push(vec![
                o.replicate.to_string(),
                o.fold.to_string(),
                o.method.name().to_string(),
                o.seed.to_string(),
                name.clone(),
                format!("{:?}", o.rmsep[t]),
                o.coverage.as_ref().map_or(String::new(), |c| format!("{:?}", c[t])),
                o.q_hat[t].to_string(),
                o.ess_min.map_or(String::new(), |e| format!("{e:.1}")),
            ]);
        }
    }
    rows
}

pub const OUTCOME_HEADER: [&str; 9] = ["replicate", "fold", "method", "seed", "trait", "rmsep", "coverage", "q_hat", "ess_min"];
