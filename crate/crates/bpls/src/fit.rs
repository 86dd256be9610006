//! Training-set preprocessing, the chain, and prediction on raw inputs.

use bpls_core::data::{fit_standardizer, ChangepointPolicy, RawDataset, ResponseTransform, Standardizer};
use bpls_core::model::{ChainConfig, Hyperparameters, ModelVariant};
use bpls_core::predict::{
    intervals_from_trace, predict, rao_blackwell_from_trace, to_original_scale, PredictiveResult, PredictiveSummaries,
    Scale,
};
use bpls_core::sampler::{run_gibbs, ChainOutput};
use bpls_core::{Matrix, RngStream};

use crate::config::{PositiveTraits, RunConfig};
use crate::error::{CliError, Result};

/// Substream of the run seed that drives predictive interval draws.
pub const PREDICT_STREAM: u64 = 0x7072_6564;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub hp: Hyperparameters,
    pub variant: ModelVariant,
    pub chain: ChainConfig,
    pub positive_traits: PositiveTraits,
    pub policy: ChangepointPolicy,
}

impl FitOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        FitOptions {
            hp: cfg.hp.clone(),
            variant: cfg.variant,
            chain: cfg.chain.clone(),
            positive_traits: cfg.positive_traits.clone(),
            policy: cfg.changepoint_policy,
        }
    }
}

/// Response transform fitted to the training rows only.
pub fn resolve_transform(train: &RawDataset, which: &PositiveTraits, policy: ChangepointPolicy) -> Result<ResponseTransform> {
    Ok(match which {
        PositiveTraits::None => ResponseTransform::identity(train.y.cols()),
        PositiveTraits::Auto => ResponseTransform::fit_auto(&train.y, policy)?,
        PositiveTraits::Named(names) => {
            if let Some(bad) = names.iter().find(|n| !train.y_names.contains(n)) {
                return Err(CliError::Usage(format!("positive trait `{bad}` is not a response")));
            }
            let flags: Vec<bool> = train.y_names.iter().map(|n| names.contains(n)).collect();
            ResponseTransform::fit(&train.y, &flags, policy)?
        }
    })
}

#[derive(Debug, Clone)]
pub struct FittedModel {
    pub hp: Hyperparameters,
    pub chain_config: ChainConfig,
    pub standardizer: Standardizer,
    pub transform: ResponseTransform,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub chain: ChainOutput,
}

/// Predictions on both scales.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub transformed: PredictiveResult,
    pub original: PredictiveResult,
}

/// Standardizes `train`, runs the chain and, when `x_test` (raw units) is
/// given, records the per-state test predictions along the way.
pub fn fit_model(train: &RawDataset, opts: &FitOptions, x_test: Option<&Matrix>) -> Result<FittedModel> {
    let transform = resolve_transform(train, &opts.positive_traits, opts.policy)?;
    let standardizer = fit_standardizer(train, &transform)?;
    let data = standardizer.standardize(train, &transform)?;
    let x_test = x_test.map(|x| standardizer.apply_x(x)).transpose()?;
    let mut rng = RngStream::new(opts.chain.seed);
    let chain = run_gibbs(&data, &opts.hp, &opts.variant, &opts.chain, x_test.as_ref(), &mut rng)?;
    Ok(FittedModel {
        hp: opts.hp.clone(),
        chain_config: opts.chain.clone(),
        standardizer,
        transform,
        x_names: train.x_names.clone(),
        y_names: train.y_names.clone(),
        chain,
    })
}

/// Generator for the predictive interval draws of a run seeded by `seed`.
pub fn prediction_rng(seed: u64) -> RngStream {
    RngStream::new(seed).substream(PREDICT_STREAM)
}

/// Predictions for raw predictors `x` from stored summaries.
pub fn predict_raw(
    summaries: &PredictiveSummaries,
    standardizer: &Standardizer,
    transform: &ResponseTransform,
    x: &Matrix,
    level: f64,
    rng: &mut RngStream,
) -> Result<Predictions> {
    let xs = standardizer.apply_x(x)?;
    let transformed = predict(summaries, &xs, level, rng)?;
    let original = to_original_scale(&transformed, standardizer, transform);
    Ok(Predictions { transformed, original })
}

impl FittedModel {
    pub fn predict(&self, x: &Matrix, level: f64, rng: &mut RngStream) -> Result<Predictions> {
        predict_raw(&self.chain.summaries, &self.standardizer, &self.transform, x, level, rng)
    }

    /// Predictions for the test rows given to [`fit_model`], read from the
    /// trace recorded during the chain.
    pub fn predict_recorded(&self, level: f64, rng: &mut RngStream) -> Result<Predictions> {
        let trace = self
            .chain
            .test_trace
            .as_ref()
            .ok_or_else(|| CliError::Usage("no test predictors were given to the chain".into()))?;
        let moments = rao_blackwell_from_trace(&self.chain.summaries, trace)?;
        let (lower, upper) = intervals_from_trace(&self.chain.summaries, trace, level, rng)?;
        let transformed = PredictiveResult {
            variance: Some(moments.variances()),
            mean: moments.mean,
            lower,
            upper,
            level,
            scale: Scale::Transformed,
        };
        let original = to_original_scale(&transformed, &self.standardizer, &self.transform);
        Ok(Predictions { transformed, original })
    }
}
