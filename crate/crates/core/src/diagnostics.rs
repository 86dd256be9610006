//! Chain and prediction diagnostics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::predict::{quantile_sorted, PredictiveSummaries};
use crate::sampler::ChainOutput;

/// Shortest trace accepted by [`effective_sample_size`].
pub const MIN_TRACE_LEN: usize = 10;
/// ESS every prediction-trace entry should reach.
pub const ESS_TARGET: f64 = 1000.0;
/// Default fraction of the largest `|ĉ|` counted by [`effective_dimension`].
pub const EFFECTIVE_DIMENSION_FRACTION: f64 = 0.05;
pub const ESS_METHOD: &str = "geyer-initial-monotone";

/// Effective sample size by Geyer's initial monotone sequence estimator.
pub fn effective_sample_size(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::invalid("trace", format!("length {n} is below {MIN_TRACE_LEN}")));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let c0 = autocov(0);
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateTrace);
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    let tau = (-1.0 + 2.0 * sum).max(1.0 / n as f64);
    Ok((n as f64 / tau).min(n as f64))
}

/// Minimum and median of a set of ESS values.
#[derive(Debug, Clone, PartialEq)]
pub struct EssSummary {
    pub values: Vec<f64>,
    pub min: f64,
    pub median: f64,
}

impl EssSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let median = median(&values);
        EssSummary { values, min, median }
    }

    /// True when some entry falls short of [`ESS_TARGET`].
    pub fn flagged(&self) -> bool {
        !(self.min >= ESS_TARGET)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Test rows processed together when rebuilding prediction traces.
const TRACE_BLOCK_ROWS: usize = 32;

/// ESS of every entry of the per-state predictive mean `Ŷ_test`, rebuilt
/// block by block from the stored projections.
pub fn prediction_trace_ess(summaries: &PredictiveSummaries, x_test: &Matrix) -> Result<EssSummary> {
    if x_test.cols() != summaries.p() {
        return Err(Error::shape(format!("{} predictor columns", summaries.p()), format!("{}", x_test.cols())));
    }
    let (m_states, r) = (summaries.len(), summaries.r());
    let mut values = Vec::with_capacity(x_test.rows() * r);
    let mut mean = vec![0.0; r];
    let mut start = 0;
    while start < x_test.rows() {
        let end = (start + TRACE_BLOCK_ROWS).min(x_test.rows());
        let width = (end - start) * r;
        let mut traces = vec![0.0; width * m_states];
        for m in 0..m_states {
            for n in start..end {
                summaries.mean_at(m, x_test.row(n), &mut mean);
                for (j, v) in mean.iter().enumerate() {
                    traces[((n - start) * r + j) * m_states + m] = *v;
                }
            }
        }
        for e in 0..width {
            values.push(effective_sample_size(&traces[e * m_states..(e + 1) * m_states])?);
        }
        start = end;
    }
    Ok(EssSummary::from_values(values))
}

/// ESS of every entry of explicitly stored `N_test × R` traces.
pub fn stored_trace_ess(trace: &[Matrix]) -> Result<EssSummary> {
    let Some(first) = trace.first() else {
        return Err(Error::InsufficientChain(0));
    };
    let entries = first.as_slice().len();
    let mut values = Vec::with_capacity(entries);
    let mut buf = vec![0.0; trace.len()];
    for e in 0..entries {
        for (b, m) in buf.iter_mut().zip(trace) {
            *b = m.as_slice()[e];
        }
        values.push(effective_sample_size(&buf)?);
    }
    Ok(EssSummary::from_values(values))
}

/// Per response row, the number of columns with `|ĉ_rq| ≥ fraction · max|ĉ|`.
pub fn effective_dimension(c_hat: &Matrix, fraction: f64) -> Vec<usize> {
    let c_star = c_hat.as_slice().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    (0..c_hat.rows())
        .map(|r| {
            if c_star == 0.0 {
                0
            } else {
                c_hat.row(r).iter().filter(|v| v.abs() >= fraction * c_star).count()
            }
        })
        .collect()
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::shape(
            format!("{}x{}", a.rows(), a.cols()),
            format!("{}x{}", b.rows(), b.cols()),
        ));
    }
    Ok(())
}

/// Root mean squared error per column.
pub fn rmsep(pred: &Matrix, truth: &Matrix) -> Result<Vec<f64>> {
    same_shape(pred, truth)?;
    let n = pred.rows() as f64;
    Ok((0..pred.cols())
        .map(|j| {
            let ss: f64 = (0..pred.rows()).map(|i| { let e = pred[(i, j)] - truth[(i, j)]; e * e }).sum();
            libm::sqrt(ss / n)
        })
        .collect())
}

/// Average of the per-column RMSEP.
pub fn mean_rmsep(pred: &Matrix, truth: &Matrix) -> Result<f64> {
    let v = rmsep(pred, truth)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Fraction of truths inside the closed interval `[lo, hi]`, per column.
pub fn empirical_coverage(lower: &Matrix, upper: &Matrix, truth: &Matrix) -> Result<Vec<f64>> {
    same_shape(lower, truth)?;
    same_shape(upper, truth)?;
    let n = truth.rows() as f64;
    Ok((0..truth.cols())
        .map(|j| {
            let inside = (0..truth.rows())
                .filter(|&i| lower[(i, j)] <= truth[(i, j)] && truth[(i, j)] <= upper[(i, j)])
                .count();
            inside as f64 / n
        })
        .collect())
}

/// Mean and equal-tail 95% band of one scalar across retained states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ScalarSummary {
    pub fn from_draws(draws: &[f64]) -> Self {
        let mut v = draws.to_vec();
        v.sort_unstable_by(f64::total_cmp);
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        if v.is_empty() {
            return ScalarSummary { mean: f64::NAN, lower: f64::NAN, upper: f64::NAN };
        }
        ScalarSummary { mean, lower: quantile_sorted(&v, 0.025), upper: quantile_sorted(&v, 0.975) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub variant: &'static str,
    pub q_star: usize,
    pub retained: usize,
    pub ess_method: &'static str,
    /// ESS of the test prediction trace, when test predictors were given.
    pub ess: Option<EssSummary>,
    pub tau: Vec<ScalarSummary>,
    pub q_hat: Vec<usize>,
    pub truncation_adequate: Option<bool>,
    pub lambda2: Option<ScalarSummary>,
    pub p0: Option<ScalarSummary>,
    pub rmsep: Option<Vec<f64>>,
    pub coverage: Option<Vec<f64>>,
}

impl DiagnosticsReport {
    pub fn from_chain(chain: &ChainOutput, x_test: Option<&Matrix>) -> Result<Self> {
        let ess = match x_test {
            Some(x) => Some(prediction_trace_ess(&chain.summaries, x)?),
            None => None,
        };
        let tau = (0..chain.q_star)
            .map(|q| {
                let d: Vec<f64> = chain.tau_trace.iter().map(|t| t[q]).collect();
                ScalarSummary::from_draws(&d)
            })
            .collect();
        let nonempty = |v: &[f64]| (!v.is_empty()).then(|| ScalarSummary::from_draws(v));
        Ok(DiagnosticsReport {
            variant: chain.variant.kind.as_str(),
            q_star: chain.q_star,
            retained: chain.retained(),
            ess_method: ESS_METHOD,
            ess,
            tau,
            q_hat: effective_dimension(&chain.posterior_means.cb, EFFECTIVE_DIMENSION_FRACTION),
            truncation_adequate: chain.truncation.as_ref().map(|t| t.adequate()),
            lambda2: nonempty(&chain.lambda2_trace),
            p0: nonempty(&chain.p0_trace),
            rmsep: None,
            coverage: None,
        })
    }
}

fn join<T: fmt::Display>(v: &[T]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&format!("{x}"));
    }
    s
}

impl fmt::Display for DiagnosticsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant = {}", self.variant)?;
        writeln!(f, "q_star = {}", self.q_star)?;
        writeln!(f, "retained = {}", self.retained)?;
        writeln!(f, "ess_method = {}", self.ess_method)?;
        if let Some(e) = &self.ess {
            writeln!(f, "ess_min = {:.1}", e.min)?;
            writeln!(f, "ess_median = {:.1}", e.median)?;
            writeln!(f, "ess_flagged = {}", e.flagged())?;
        }
        let means: Vec<String> = self.tau.iter().map(|t| format!("{:.4e}", t.mean)).collect();
        writeln!(f, "tau_mean = {}", join(&means))?;
        writeln!(f, "q_hat = {}", join(&self.q_hat))?;
        if let Some(a) = self.truncation_adequate {
            writeln!(f, "truncation_adequate = {a}")?;
        }
        if let Some(l) = &self.lambda2 {
            writeln!(f, "lambda2 = {:.6} [{:.6}, {:.6}]", l.mean, l.lower, l.upper)?;
        }
        if let Some(p) = &self.p0 {
            writeln!(f, "p0 = {:.6} [{:.6}, {:.6}]", p.mean, p.lower, p.upper)?;
        }
        if let Some(r) = &self.rmsep {
            let v: Vec<String> = r.iter().map(|x| format!("{x:.6}")).collect();
            writeln!(f, "rmsep = {}", join(&v))?;
        }
        if let Some(c) = &self.coverage {
            let v: Vec<String> = c.iter().map(|x| format!("{x:.4}")).collect();
            writeln!(f, "coverage = {}", join(&v))?;
        }
        Ok(())
    }
}
