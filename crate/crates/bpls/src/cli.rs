//! Command-line interface. Every command writes into one run directory
//! (`--out`) and leaves a `manifest.json` there.

use std::path::{Path, PathBuf};

use bpls_core::diagnostics::{empirical_coverage, rmsep, DiagnosticsReport};
use bpls_core::folds::FoldScheme;
use bpls_core::model::{ModelVariant, VariantKind};
use bpls_core::synth::{generate, replicate_rng};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::artifact::ModelArtifact;
use crate::benchmark::{self, BenchmarkPlan, PlsBaseline, Source};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::fit::{fit_model, prediction_rng, FitOptions};
use crate::manifest::{ChainSettings, RunManifest};
use crate::table::{self, CsvLayout};

pub const MODEL_FILE: &str = "model.bpls";
pub const REPORT_FILE: &str = "report.txt";
pub const CONFIG_FILE: &str = "config.txt";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

#[derive(Debug, Parser)]
#[command(name = "bpls", version, about = "Bayesian probabilistic partial least squares regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a CSV file and write the model artifact and diagnostics.
    Fit(FitArgs),
    /// Predict responses for new predictors with a fitted model.
    Predict(PredictArgs),
    /// Generate synthetic training and test sets with known loadings.
    Simulate(SimulateArgs),
    /// Held-out evaluation over folds or synthetic replicates.
    Benchmark(BenchmarkArgs),
    /// Diagnostics of a fitted model, optionally against test data.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration file (`key = value`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<VariantKind>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Truncation level; overrides the explained-variance rule.
    #[arg(long)]
    pub q_star: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated response column names.
    #[arg(long, value_delimiter = ',')]
    pub responses: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model artifact written by `fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub level: Option<f64>,
    /// Also write transformed-scale columns.
    #[arg(long)]
    pub transformed: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Dataset to split into folds; synthetic replicates when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub responses: Option<Vec<String>>,
    /// `3-1`, `2-2` or a fold count.
    #[arg(long)]
    pub folds: Option<String>,
    #[arg(long)]
    pub level: Option<f64>,
    /// Include the cross-validated NIPALS baseline.
    #[arg(long)]
    pub baseline_pls: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: PathBuf,
    /// Test data; responses in it, when present, give RMSEP and coverage.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub level: Option<f64>,
}

fn parse_variant(s: &str) -> std::result::Result<VariantKind, String> {
    VariantKind::parse(s).ok_or_else(|| format!("unknown variant `{s}` (bpls, ss-bpls or l-bpls)"))
}

/// Loads the configuration file (if any) and applies the common flags.
fn load_config(common: &Common, manifest: &mut RunManifest) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            manifest.config_paths.push(p.clone());
            manifest.add_input(p)?;
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.chain.seed = s;
    }
    Ok(cfg)
}

fn apply_chain_args(cfg: &mut RunConfig, a: &ChainArgs) {
    if let Some(v) = a.variant {
        cfg.variant.kind = v;
        cfg.bench.variants = vec![v];
    }
    if let Some(v) = a.burn_in {
        cfg.chain.burn_in = v;
    }
    if let Some(v) = a.keep {
        cfg.chain.keep = v;
    }
    if let Some(v) = a.thin {
        cfg.chain.thin = v;
    }
    if let Some(q) = a.q_star {
        cfg.hp.q_star_override = Some(q);
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(dir: &Path, name: &str, text: &str, manifest: &mut RunManifest) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    manifest.add_output(name);
    Ok(())
}

fn chain_settings(cfg: &RunConfig) -> ChainSettings {
    ChainSettings { burn_in: cfg.chain.burn_in, keep: cfg.chain.keep, thin: cfg.chain.thin }
}

fn layout(cfg: &RunConfig, responses: &Option<Vec<String>>) -> CsvLayout {
    CsvLayout { delimiter: cfg.delimiter, responses: responses.clone().unwrap_or_else(|| cfg.responses.clone()) }
}

/// The report as an aligned table for the terminal.
pub fn render_report(report: &DiagnosticsReport, y_names: &[String]) -> String {
    let mut out = format!(
        "variant {}   Q* {}   retained states {}\n",
        report.variant, report.q_star, report.retained
    );
    if let Some(e) = &report.ess {
        out.push_str(&format!(
            "prediction ESS ({}): min {:.1}, median {:.1}{}\n",
            report.ess_method,
            e.min,
            e.median,
            if e.flagged() { "   FLAGGED: below 1000" } else { "" }
        ));
    }
    if let Some(a) = report.truncation_adequate {
        out.push_str(&format!("truncation adequate: {a}\n"));
    }
    out.push_str(&format!("\n{:>4}  {:>12}  {:>12}  {:>12}\n", "col", "tau mean", "2.5%", "97.5%"));
    for (q, t) in report.tau.iter().enumerate() {
        out.push_str(&format!("{:>4}  {:>12.4e}  {:>12.4e}  {:>12.4e}\n", q + 1, t.mean, t.lower, t.upper));
    }
    out.push_str(&format!("\n{:<16} {:>6}", "trait", "Q̂_y"));
    let has_eval = report.rmsep.is_some();
    if has_eval {
        out.push_str(&format!(" {:>12} {:>10}", "RMSEP", "coverage"));
    }
    out.push('\n');
    for (r, name) in y_names.iter().enumerate() {
        out.push_str(&format!("{:<16} {:>6}", name, report.q_hat.get(r).copied().unwrap_or(0)));
        if let (Some(rm), Some(cv)) = (&report.rmsep, &report.coverage) {
            out.push_str(&format!(" {:>12.6} {:>10.4}", rm[r], cv[r]));
        }
        out.push('\n');
    }
    if let Some(l) = &report.lambda2 {
        out.push_str(&format!("\nlambda2: {:.6} [{:.6}, {:.6}]\n", l.mean, l.lower, l.upper));
    }
    if let Some(p) = &report.p0 {
        out.push_str(&format!("\np0: {:.6} [{:.6}, {:.6}]\n", p.mean, p.lower, p.upper));
    }
    out
}

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let mut manifest = RunManifest::new("fit");
    let mut cfg = load_config(&a.common, &mut manifest)?;
    apply_chain_args(&mut cfg, &a.chain);
    cfg.validate()?;
    prepare_out(&a.common.out)?;
    manifest.add_input(&a.data)?;
    let data = table::load_csv(&a.data, &layout(&cfg, &a.responses))?;
    cfg.responses = data.y_names.clone();
    manifest.seeds.insert("chain".into(), cfg.chain.seed);
    manifest.chain = Some(chain_settings(&cfg));

    let opts = FitOptions::from_config(&cfg);
    let model = manifest.timed("chain", || fit_model(&data, &opts, None))?;
    let artifact = ModelArtifact::from_fit(&model);
    let path = a.common.out.join(MODEL_FILE);
    artifact.write(&path)?;
    manifest.add_output(MODEL_FILE);
    let report = artifact.report(None)?;
    write_text(&a.common.out, REPORT_FILE, &report.to_string(), &mut manifest)?;
    write_text(&a.common.out, CONFIG_FILE, &cfg.render(), &mut manifest)?;
    manifest.write(&a.common.out)?;
    print!("{}", render_report(&report, &artifact.y_names));
    Ok(())
}

pub fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let mut manifest = RunManifest::new("predict");
    let cfg = load_config(&a.common, &mut manifest)?;
    prepare_out(&a.common.out)?;
    manifest.add_input(&a.model)?;
    manifest.add_input(&a.data)?;
    let model = ModelArtifact::read(&a.model)?;
    let input = table::load_predictors(&a.data, cfg.delimiter, &model.x_names, &model.y_names)?;
    let level = a.level.unwrap_or(cfg.level);
    let seed = a.common.seed.unwrap_or(model.seed);
    manifest.seeds.insert("predict".into(), seed);
    let pred = manifest.timed("predict", || model.predict(&input.x, level, &mut prediction_rng(seed)))?;
    let transformed = (a.transformed || cfg.transformed_columns).then_some(&pred.transformed);
    table::write_predictions(&a.common.out.join(PREDICTIONS_FILE), &model.y_names, &pred.original, transformed)?;
    manifest.add_output(PREDICTIONS_FILE);
    manifest.write(&a.common.out)?;
    Ok(())
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    n_train: usize,
    n_test: usize,
    p: usize,
    r: usize,
    q_true: usize,
    sigma2: f64,
    psi2: f64,
    sparsity: &'static str,
    seed: u64,
    /// Row-major `P × Q`.
    w0: &'a [f64],
    /// Row-major `R × Q`.
    c0: &'a [f64],
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut manifest = RunManifest::new("simulate");
    let cfg = load_config(&a.common, &mut manifest)?;
    prepare_out(&a.common.out)?;
    let mut synth = cfg.synth.clone();
    synth.seed = cfg.chain.seed;
    manifest.seeds.insert("simulate".into(), synth.seed);
    let d = generate(&synth, &mut replicate_rng(synth.seed, 0))?;
    let out = &a.common.out;
    table::write_dataset(&out.join("train.csv"), &d.train)?;
    table::write_dataset(&out.join("test.csv"), &d.test)?;
    let truth = GroundTruth {
        n_train: synth.n_train,
        n_test: synth.n_test,
        p: synth.p,
        r: synth.r,
        q_true: synth.q_true,
        sigma2: synth.sigma2,
        psi2: synth.psi2,
        sparsity: synth.sparsity.as_str(),
        seed: synth.seed,
        w0: d.w0.as_slice(),
        c0: d.c0.as_slice(),
    };
    let text = serde_json::to_string_pretty(&truth)? + "\n";
    std::fs::write(out.join("truth.json"), text).map_err(|e| CliError::io(out.join("truth.json"), e))?;
    for f in ["train.csv", "test.csv", "truth.json"] {
        manifest.add_output(f);
    }
    manifest.write(out)?;
    Ok(())
}

pub fn cmd_benchmark(a: &BenchmarkArgs) -> Result<()> {
    let mut manifest = RunManifest::new("benchmark");
    let mut cfg = load_config(&a.common, &mut manifest)?;
    apply_chain_args(&mut cfg, &a.chain);
    if let Some(f) = &a.folds {
        cfg.bench.folds = FoldScheme::parse(f)?;
    }
    if let Some(l) = a.level {
        cfg.level = l;
    }
    cfg.bench.baseline_pls |= a.baseline_pls;
    cfg.validate()?;
    prepare_out(&a.common.out)?;
    let source = match &a.data {
        Some(p) => {
            manifest.add_input(p)?;
            let d = table::load_csv(p, &layout(&cfg, &a.responses))?;
            cfg.responses = d.y_names.clone();
            Source::Data(d)
        }
        None => Source::Synthetic(cfg.synth.clone()),
    };
    let trait_names = match &source {
        Source::Data(d) => d.y_names.clone(),
        Source::Synthetic(s) => (1..=s.r).map(|i| format!("y{i}")).collect(),
    };
    let workers = benchmark::worker_count()?;
    manifest.workers = Some(workers);
    manifest.seeds.insert("benchmark".into(), cfg.chain.seed);
    manifest.chain = Some(chain_settings(&cfg));
    let plan = BenchmarkPlan {
        source,
        folds: cfg.bench.folds,
        variants: cfg
            .bench
            .variants
            .iter()
            .map(|&k| ModelVariant { kind: k, ..cfg.variant })
            .collect(),
        replicates: cfg.bench.replicates,
        baseline: cfg.bench.baseline_pls.then_some(PlsBaseline {
            folds: cfg.bench.pls_folds,
            q_max: cfg.bench.pls_q_max,
            rule: cfg.bench.pls_rule,
        }),
        fit: FitOptions::from_config(&cfg),
        level: cfg.level,
        seed: cfg.chain.seed,
    };
    let outcomes = manifest.timed("benchmark", || benchmark::run_benchmark(&plan, workers))?;
    let out = &a.common.out;
    table::write_records(&out.join("folds.csv"), &benchmark::OUTCOME_HEADER, &benchmark::outcome_rows(&outcomes, &trait_names))?;
    manifest.add_output("folds.csv");
    let summaries = benchmark::summarize(&outcomes);
    let mut rows = Vec::new();
    for s in &summaries {
        for (t, ts) in s.traits.iter().enumerate() {
            let f = |v: f64| format!("{v:?}");
            rows.push(vec![
                s.method.to_string(),
                trait_names[t].clone(),
                f(ts.rmsep.mean),
                f(ts.rmsep.sd),
                ts.coverage.map_or(String::new(), |c| f(c.mean)),
                ts.coverage.map_or(String::new(), |c| f(c.sd)),
                f(ts.q_hat.mean),
                f(ts.q_hat.sd),
            ]);
        }
    }
    let header = ["method", "trait", "rmsep_mean", "rmsep_sd", "coverage_mean", "coverage_sd", "q_hat_mean", "q_hat_sd"];
    table::write_records(&out.join("summary.csv"), &header, &rows)?;
    manifest.add_output("summary.csv");
    let rendered = benchmark::render_table(&summaries, &trait_names);
    write_text(out, "table.txt", &rendered, &mut manifest)?;
    write_text(out, CONFIG_FILE, &cfg.render(), &mut manifest)?;
    manifest.write(out)?;
    print!("{rendered}");
    Ok(())
}

pub fn cmd_diagnose(a: &DiagnoseArgs) -> Result<()> {
    let mut manifest = RunManifest::new("diagnose");
    let cfg = load_config(&a.common, &mut manifest)?;
    prepare_out(&a.common.out)?;
    manifest.add_input(&a.model)?;
    let model = ModelArtifact::read(&a.model)?;
    let input = match &a.data {
        Some(p) => {
            manifest.add_input(p)?;
            Some(table::load_predictors(p, cfg.delimiter, &model.x_names, &model.y_names)?)
        }
        None => None,
    };
    let mut report = manifest.timed("diagnose", || model.report(input.as_ref().map(|i| &i.x)))?;
    if let Some((x, y)) = input.as_ref().and_then(|i| i.y.as_ref().map(|y| (&i.x, y))) {
        let seed = a.common.seed.unwrap_or(model.seed);
        manifest.seeds.insert("predict".into(), seed);
        let pred = model.predict(x, a.level.unwrap_or(cfg.level), &mut prediction_rng(seed))?;
        report.rmsep = Some(rmsep(&pred.original.mean, y)?);
        report.coverage = Some(empirical_coverage(&pred.original.lower, &pred.original.upper, y)?);
    }
    write_text(&a.common.out, REPORT_FILE, &report.to_string(), &mut manifest)?;
    manifest.write(&a.common.out)?;
    print!("{}", render_report(&report, &model.y_names));
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Diagnose(a) => cmd_diagnose(a),
    }
}
