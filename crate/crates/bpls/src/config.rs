//! `key = value` run configuration.
//!
//! Keys use the field names of the library types. `#` starts a comment.
//! Unknown and repeated keys are errors; command-line flags override
//! whatever the file sets.

use std::collections::HashSet;
use std::path::Path;

use bpls_core::data::ChangepointPolicy;
use bpls_core::folds::FoldScheme;
use bpls_core::model::{ChainConfig, Hyperparameters, ModelVariant, VariantKind};
use bpls_core::pls::CvRule;
use bpls_core::synth::{Sparsity, SynthConfig, LOW_NOISE};

use crate::error::{CliError, Result};

/// Which traits get the positive-support response transform.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum PositiveTraits {
    #[default]
    None,
    /// Every trait whose training values are all strictly positive.
    Auto,
    Named(Vec<String>),
}

impl PositiveTraits {
    fn parse(s: &str) -> Self {
        match s {
            "none" => PositiveTraits::None,
            "auto" => PositiveTraits::Auto,
            names => PositiveTraits::Named(split_list(names)),
        }
    }

    fn render(&self) -> String {
        match self {
            PositiveTraits::None => "none".into(),
            PositiveTraits::Auto => "auto".into(),
            PositiveTraits::Named(n) => n.join(","),
        }
    }
}

/// Settings of the `benchmark` command.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    pub folds: FoldScheme,
    pub variants: Vec<VariantKind>,
    pub replicates: usize,
    pub baseline_pls: bool,
    pub pls_folds: usize,
    pub pls_q_max: usize,
    pub pls_rule: CvRule,
}

impl Default for BenchSettings {
    fn default() -> Self {
        BenchSettings {
            folds: FoldScheme::ThreeOne,
            variants: vec![VariantKind::Bpls],
            replicates: 1,
            baseline_pls: false,
            pls_folds: 10,
            pls_q_max: 30,
            pls_rule: CvRule::OneSigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hp: Hyperparameters,
    pub chain: ChainConfig,
    pub variant: ModelVariant,
    pub responses: Vec<String>,
    pub delimiter: u8,
    pub positive_traits: PositiveTraits,
    pub changepoint_policy: ChangepointPolicy,
    pub level: f64,
    /// Also write transformed-scale columns to prediction files.
    pub transformed_columns: bool,
    pub bench: BenchSettings,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            hp: Hyperparameters::default(),
            chain: ChainConfig::default(),
            variant: ModelVariant::default(),
            responses: Vec::new(),
            delimiter: b',',
            positive_traits: PositiveTraits::default(),
            changepoint_policy: ChangepointPolicy::default(),
            level: 0.95,
            transformed_columns: false,
            bench: BenchSettings::default(),
            synth: SynthConfig::reference(500, 100, LOW_NOISE, 0),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("`{v}` is not a valid number"))
}

fn flag(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn variant_kind(v: &str) -> std::result::Result<VariantKind, String> {
    VariantKind::parse(v).ok_or_else(|| format!("unknown variant `{v}` (bpls, ss-bpls or l-bpls)"))
}

/// Hyperparameter fields in a fixed order, as text.
pub fn hyperparameter_pairs(hp: &Hyperparameters) -> Vec<(&'static str, String)> {
    let f = |v: f64| format!("{v:?}");
    vec![
        ("a_sigma", f(hp.a_sigma)),
        ("b_sigma", f(hp.b_sigma)),
        ("a_psi", f(hp.a_psi)),
        ("b_psi", f(hp.b_psi)),
        ("alpha", f(hp.alpha)),
        ("beta", f(hp.beta)),
        ("nu1_w", f(hp.nu1_w)),
        ("nu2_w", f(hp.nu2_w)),
        ("nu1_c", f(hp.nu1_c)),
        ("nu2_c", f(hp.nu2_c)),
        ("a_lambda", f(hp.a_lambda)),
        ("b_lambda", f(hp.b_lambda)),
        ("alpha_s", f(hp.alpha_s)),
        ("beta_s", f(hp.beta_s)),
        ("q_star_variance_threshold", f(hp.q_star_variance_threshold)),
        ("q_star", hp.q_star_override.map_or("auto".into(), |q| q.to_string())),
        ("delta_shape_includes_r", hp.delta_shape_includes_r.to_string()),
    ]
}

/// Sets one hyperparameter. `Ok(false)` when `key` is not one.
pub fn set_hyperparameter(hp: &mut Hyperparameters, key: &str, v: &str) -> std::result::Result<bool, String> {
    let slot = match key {
        "a_sigma" => &mut hp.a_sigma,
        "b_sigma" => &mut hp.b_sigma,
        "a_psi" => &mut hp.a_psi,
        "b_psi" => &mut hp.b_psi,
        "alpha" => &mut hp.alpha,
        "beta" => &mut hp.beta,
        "nu1_w" => &mut hp.nu1_w,
        "nu2_w" => &mut hp.nu2_w,
        "nu1_c" => &mut hp.nu1_c,
        "nu2_c" => &mut hp.nu2_c,
        "a_lambda" => &mut hp.a_lambda,
        "b_lambda" => &mut hp.b_lambda,
        "alpha_s" => &mut hp.alpha_s,
        "beta_s" => &mut hp.beta_s,
        "q_star_variance_threshold" => &mut hp.q_star_variance_threshold,
        "q_star" => {
            hp.q_star_override = if v == "auto" { None } else { Some(num(v)?) };
            return Ok(true);
        }
        "delta_shape_includes_r" => {
            hp.delta_shape_includes_r = flag(v)?;
            return Ok(true);
        }
        _ => return Ok(false),
    };
    *slot = num(v)?;
    Ok(true)
}

impl RunConfig {
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        if set_hyperparameter(&mut self.hp, key, v)? {
            return Ok(());
        }
        match key {
            "burn_in" => self.chain.burn_in = num(v)?,
            "keep" => self.chain.keep = num(v)?,
            "thin" => self.chain.thin = num(v)?,
            "seed" => self.chain.seed = num(v)?,
            "warm_up_for_truncation" => self.chain.warm_up_for_truncation = num(v)?,
            "variant" => self.variant.kind = variant_kind(v)?,
            "isotropic_sigma" => self.variant.isotropic_sigma = flag(v)?,
            "isotropic_psi" => self.variant.isotropic_psi = flag(v)?,
            "responses" => self.responses = split_list(v),
            "delimiter" => {
                self.delimiter = match v {
                    "tab" | "\\t" => b'\t',
                    s if s.len() == 1 => s.as_bytes()[0],
                    _ => return Err(format!("delimiter must be one byte or `tab`, got `{v}`")),
                }
            }
            "positive_traits" => self.positive_traits = PositiveTraits::parse(v),
            "changepoint_policy" => {
                self.changepoint_policy = ChangepointPolicy::parse(v)
                    .ok_or_else(|| format!("unknown policy `{v}` (min-observed or mean-minus-2sd)"))?
            }
            "level" => self.level = num(v)?,
            "transformed_columns" => self.transformed_columns = flag(v)?,
            "folds" => self.bench.folds = FoldScheme::parse(v).map_err(|e| e.to_string())?,
            "variants" => self.bench.variants = split_list(v).iter().map(|s| variant_kind(s)).collect::<std::result::Result<_, _>>()?,
            "replicates" => self.bench.replicates = num(v)?,
            "baseline_pls" => self.bench.baseline_pls = flag(v)?,
            "pls_folds" => self.bench.pls_folds = num(v)?,
            "pls_q_max" => self.bench.pls_q_max = num(v)?,
            "pls_rule" => {
                self.bench.pls_rule = match v {
                    "one-sigma" => CvRule::OneSigma,
                    "min" => CvRule::Min,
                    _ => return Err(format!("unknown rule `{v}` (one-sigma or min)")),
                }
            }
            "n_train" => self.synth.n_train = num(v)?,
            "n_test" => self.synth.n_test = num(v)?,
            "p" => self.synth.p = num(v)?,
            "r" => self.synth.r = num(v)?,
            "q_true" => self.synth.q_true = num(v)?,
            "sigma2" => self.synth.sigma2 = num(v)?,
            "psi2" => self.synth.psi2 = num(v)?,
            "sparsity" => {
                self.synth.sparsity =
                    Sparsity::parse(v).ok_or_else(|| format!("unknown sparsity `{v}` (none, column-wise or element-wise)"))?
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Applies `text` on top of the defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |message: String| CliError::Config { path: path.into(), line: i + 1, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("`{key}` set twice")));
            }
            cfg.set(key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Every setting as `key = value` lines that [`RunConfig::parse`] reads back.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        for (k, v) in hyperparameter_pairs(&self.hp) {
            put(k, v);
        }
        put("burn_in", self.chain.burn_in.to_string());
        put("keep", self.chain.keep.to_string());
        put("thin", self.chain.thin.to_string());
        put("seed", self.chain.seed.to_string());
        put("warm_up_for_truncation", self.chain.warm_up_for_truncation.to_string());
        put("variant", self.variant.kind.as_str().into());
        put("isotropic_sigma", self.variant.isotropic_sigma.to_string());
        put("isotropic_psi", self.variant.isotropic_psi.to_string());
        put("responses", self.responses.join(","));
        put("delimiter", if self.delimiter == b'\t' { "tab".into() } else { (self.delimiter as char).to_string() });
        put("positive_traits", self.positive_traits.render());
        put("changepoint_policy", self.changepoint_policy.as_str().into());
        put("level", format!("{:?}", self.level));
        put("transformed_columns", self.transformed_columns.to_string());
        put("folds", self.bench.folds.to_string());
        put("variants", self.bench.variants.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(","));
        put("replicates", self.bench.replicates.to_string());
        put("baseline_pls", self.bench.baseline_pls.to_string());
        put("pls_folds", self.bench.pls_folds.to_string());
        put("pls_q_max", self.bench.pls_q_max.to_string());
        put("pls_rule", match self.bench.pls_rule { CvRule::OneSigma => "one-sigma", CvRule::Min => "min" }.into());
        put("n_train", self.synth.n_train.to_string());
        put("n_test", self.synth.n_test.to_string());
        put("p", self.synth.p.to_string());
        put("r", self.synth.r.to_string());
        put("q_true", self.synth.q_true.to_string());
        put("sigma2", format!("{:?}", self.synth.sigma2));
        put("psi2", format!("{:?}", self.synth.psi2));
        put("sparsity", self.synth.sparsity.as_str().into());
        out
    }

    /// Rejects settings no command can run with.
    pub fn validate(&self) -> Result<()> {
        if let Err(errors) = self.hp.check() {
            let msgs: Vec<String> = errors.iter().map(|v| format!("{}: {}", v.field, v.rule)).collect();
            return Err(CliError::Usage(format!("invalid hyperparameters: {}", msgs.join("; "))));
        }
        if let Some(v) = self.chain.validate().first() {
            return Err(CliError::Usage(format!("invalid chain settings: {}: {}", v.field, v.rule)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Usage(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}
