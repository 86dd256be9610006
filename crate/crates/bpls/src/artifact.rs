//! Fitted-model file.
//!
//! A UTF-8 `key = value` header ending in a line `end`, followed by a
//! little-endian `f64` payload. The header holds everything small and
//! human-relevant (hyperparameters, names, standardization, changepoints);
//! the payload holds the per-state predictive summaries and diagnostic
//! traces, in the order the `section` lines list them. Floats in the
//! header use shortest round-trip formatting, so reloading is exact.

use std::path::Path;

use bpls_core::data::{ChangepointPolicy, ResponseTransform, Standardizer};
use bpls_core::diagnostics::{
    effective_dimension, prediction_trace_ess, DiagnosticsReport, ScalarSummary, EFFECTIVE_DIMENSION_FRACTION,
    ESS_METHOD,
};
use bpls_core::model::{Hyperparameters, ModelVariant, VariantKind};
use bpls_core::predict::PredictiveSummaries;
use bpls_core::{Matrix, RngStream};
use sha2::{Digest, Sha256};

use crate::config::{hyperparameter_pairs, set_hyperparameter};
use crate::error::{CliError, Result};
use crate::fit::{predict_raw, FittedModel, Predictions};

pub const MAGIC: &str = "bpls-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub variant: ModelVariant,
    pub hp: Hyperparameters,
    pub q_star: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub standardizer: Standardizer,
    pub transform: ResponseTransform,
    pub summaries: PredictiveSummaries,
    /// `τ` of every retained state.
    pub tau_trace: Vec<Vec<f64>>,
    pub lambda2_trace: Vec<f64>,
    pub p0_trace: Vec<f64>,
    /// Posterior mean of `C B`, `R × Q*`.
    pub cb_mean: Matrix,
    pub truncation_adequate: Option<bool>,
}

impl ModelArtifact {
    pub fn from_fit(m: &FittedModel) -> Self {
        let c = &m.chain;
        ModelArtifact {
            variant: c.variant,
            hp: m.hp.clone(),
            q_star: c.q_star,
            seed: m.chain_config.seed,
            burn_in: m.chain_config.burn_in,
            keep: m.chain_config.keep,
            thin: m.chain_config.thin,
            x_names: m.x_names.clone(),
            y_names: m.y_names.clone(),
            standardizer: m.standardizer.clone(),
            transform: m.transform.clone(),
            summaries: c.summaries.clone(),
            tau_trace: c.tau_trace.clone(),
            lambda2_trace: c.lambda2_trace.clone(),
            p0_trace: c.p0_trace.clone(),
            cb_mean: c.posterior_means.cb.clone(),
            truncation_adequate: c.truncation.as_ref().map(|t| t.adequate()),
        }
    }

    pub fn predict(&self, x: &Matrix, level: f64, rng: &mut RngStream) -> Result<Predictions> {
        predict_raw(&self.summaries, &self.standardizer, &self.transform, x, level, rng)
    }

    /// Shrinkage and dimension summaries, plus the ESS of the prediction
    /// trace when raw test predictors are given.
    pub fn report(&self, x_test: Option<&Matrix>) -> Result<DiagnosticsReport> {
        let ess = match x_test {
            Some(x) => Some(prediction_trace_ess(&self.summaries, &self.standardizer.apply_x(x)?)?),
            None => None,
        };
        let tau = (0..self.q_star)
            .map(|q| ScalarSummary::from_draws(&self.tau_trace.iter().map(|t| t[q]).collect::<Vec<_>>()))
            .collect();
        let nonempty = |v: &[f64]| (!v.is_empty()).then(|| ScalarSummary::from_draws(v));
        Ok(DiagnosticsReport {
            variant: self.variant.kind.as_str(),
            q_star: self.q_star,
            retained: self.summaries.len(),
            ess_method: ESS_METHOD,
            ess,
            tau,
            q_hat: effective_dimension(&self.cb_mean, EFFECTIVE_DIMENSION_FRACTION),
            truncation_adequate: self.truncation_adequate,
            lambda2: nonempty(&self.lambda2_trace),
            p0: nonempty(&self.p0_trace),
            rmsep: None,
            coverage: None,
        })
    }

    fn sections(&self) -> Vec<(&'static str, Vec<f64>)> {
        vec![
            ("projections", self.summaries.projections().to_vec()),
            ("covariances", self.summaries.covariances().to_vec()),
            ("tau", self.tau_trace.concat()),
            ("lambda2", self.lambda2_trace.clone()),
            ("p0", self.p0_trace.clone()),
            ("cb_mean", self.cb_mean.as_slice().to_vec()),
        ]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        for n in self.x_names.iter().chain(&self.y_names) {
            if n.contains('\n') || n.contains('\r') {
                return Err(CliError::Usage(format!("column name {n:?} contains a line break")));
            }
        }
        let mut h = String::new();
        let mut put = |k: &str, v: String| h.push_str(&format!("{k} = {v}\n"));
        let f = |v: f64| format!("{v:?}");
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
        put("version", VERSION.to_string());
        put("variant", self.variant.kind.as_str().into());
        put("isotropic_sigma", self.variant.isotropic_sigma.to_string());
        put("isotropic_psi", self.variant.isotropic_psi.to_string());
        for (k, v) in hyperparameter_pairs(&self.hp) {
            put(k, v);
        }
        put("q_star_selected", self.q_star.to_string());
        put("seed", self.seed.to_string());
        put("burn_in", self.burn_in.to_string());
        put("keep", self.keep.to_string());
        put("thin", self.thin.to_string());
        for n in &self.x_names {
            put("x_name", n.clone());
        }
        for n in &self.y_names {
            put("y_name", n.clone());
        }
        put("changepoint_policy", self.transform.policy.as_str().into());
        for cp in &self.transform.changepoints {
            put("y0", cp.map_or("none".into(), f));
        }
        put("x_mean", floats(&self.standardizer.x_mean));
        put("x_sd", floats(&self.standardizer.x_sd));
        put("y_mean", floats(&self.standardizer.y_mean));
        put("y_sd", floats(&self.standardizer.y_sd));
        put("truncation_adequate", self.truncation_adequate.map_or("unknown".into(), |b| b.to_string()));
        put("states", self.summaries.len().to_string());
        let sections = self.sections();
        let mut payload = Vec::new();
        for (name, data) in &sections {
            put("section", format!("{name} {}", data.len()));
            for v in data {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
        put("payload_sha256", hex::encode(Sha256::digest(&payload)));
        let mut out = format!("{MAGIC}\n{h}end\n").into_bytes();
        out.extend_from_slice(&payload);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: String| CliError::artifact(path, m);
        let end = find(bytes, b"\nend\n").ok_or_else(|| bad("header terminator not found".into()))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
        let payload = &bytes[end + 5..];
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad(format!("missing `{MAGIC}` signature")));
        }
        let mut h = Header::default();
        for line in lines {
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            h.entries.push((k.to_string(), v.to_string()));
        }
        let version: u32 = h.parse_one("version").map_err(&bad)?;
        if version != VERSION {
            return Err(bad(format!("version {version} is not supported (expected {VERSION})")));
        }

        let mut hp = Hyperparameters::default();
        for (k, _) in hyperparameter_pairs(&Hyperparameters::default()) {
            let v = h.one(k).map_err(&bad)?;
            set_hyperparameter(&mut hp, k, v).map_err(&bad)?;
        }
        let kind = h.one("variant").map_err(&bad)?;
        let variant = ModelVariant {
            kind: VariantKind::parse(kind).ok_or_else(|| bad(format!("unknown variant `{kind}`")))?,
            isotropic_sigma: h.parse_one("isotropic_sigma").map_err(&bad)?,
            isotropic_psi: h.parse_one("isotropic_psi").map_err(&bad)?,
        };
        let x_names: Vec<String> = h.all("x_name").map(str::to_string).collect();
        let y_names: Vec<String> = h.all("y_name").map(str::to_string).collect();
        let (p, r) = (x_names.len(), y_names.len());
        let policy = h.one("changepoint_policy").map_err(&bad)?;
        let changepoints = h
            .all("y0")
            .map(|v| if v == "none" { Ok(None) } else { v.parse::<f64>().map(Some).map_err(|_| bad(format!("bad y0 `{v}`"))) })
            .collect::<Result<Vec<_>>>()?;
        let transform = ResponseTransform {
            changepoints,
            policy: ChangepointPolicy::parse(policy).ok_or_else(|| bad(format!("unknown policy `{policy}`")))?,
        };
        let standardizer = Standardizer {
            x_mean: h.floats("x_mean").map_err(&bad)?,
            x_sd: h.floats("x_sd").map_err(&bad)?,
            y_mean: h.floats("y_mean").map_err(&bad)?,
            y_sd: h.floats("y_sd").map_err(&bad)?,
        };
        if transform.changepoints.len() != r || standardizer.x_mean.len() != p || standardizer.x_sd.len() != p
            || standardizer.y_mean.len() != r || standardizer.y_sd.len() != r
        {
            return Err(bad("names, changepoints and standardization disagree in length".into()));
        }
        let truncation_adequate = match h.one("truncation_adequate").map_err(&bad)? {
            "unknown" => None,
            v => Some(v.parse::<bool>().map_err(|_| bad(format!("bad truncation flag `{v}`")))?),
        };
        let q_star: usize = h.parse_one("q_star_selected").map_err(&bad)?;
        let states: usize = h.parse_one("states").map_err(&bad)?;

        let digest = hex::encode(Sha256::digest(payload));
        if h.one("payload_sha256").map_err(&bad)? != digest {
            return Err(bad("payload checksum mismatch".into()));
        }
        let mut floats = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        if payload.len() % 8 != 0 {
            return Err(bad("payload length is not a whole number of f64 values".into()));
        }
        let mut take = |name: &str, expected: Option<usize>| -> Result<Vec<f64>> {
            let entry = h.all("section").find(|s| s.split(' ').next() == Some(name)).ok_or_else(|| bad(format!("missing section `{name}`")))?;
            let n: usize = entry.split(' ').nth(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad(format!("bad section `{entry}`")))?;
            if expected.is_some_and(|e| e != n) {
                return Err(bad(format!("section `{name}` has {n} values, expected {}", expected.unwrap_or(0))));
            }
            let v: Vec<f64> = floats.by_ref().take(n).collect();
            if v.len() != n {
                return Err(bad(format!("payload ends inside section `{name}`")));
            }
            Ok(v)
        };
        let projections = take("projections", Some(states * r * p))?;
        let covariances = take("covariances", Some(states * r * r))?;
        let tau = take("tau", Some(states * q_star))?;
        let lambda2_trace = take("lambda2", None)?;
        let p0_trace = take("p0", None)?;
        let cb = take("cb_mean", Some(r * q_star))?;
        if floats.next().is_some() {
            return Err(bad("trailing payload data".into()));
        }
        Ok(ModelArtifact {
            variant,
            hp,
            q_star,
            seed: h.parse_one("seed").map_err(&bad)?,
            burn_in: h.parse_one("burn_in").map_err(&bad)?,
            keep: h.parse_one("keep").map_err(&bad)?,
            thin: h.parse_one("thin").map_err(&bad)?,
            x_names,
            y_names,
            standardizer,
            transform,
            summaries: PredictiveSummaries::from_parts(r, p, projections, covariances)?,
            tau_trace: tau.chunks(q_star.max(1)).map(<[f64]>::to_vec).collect(),
            lambda2_trace,
            p0_trace,
            cb_mean: Matrix::from_vec(r, q_star, cb)?,
            truncation_adequate,
        })
    }
}

fn find(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

#[derive(Default)]
struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    fn all(&self, key: &str) -> std::vec::IntoIter<&str> {
        self.entries.iter().filter(|(k, _)| k == key).map(|(_, v)| v.as_str()).collect::<Vec<_>>().into_iter()
    }

    fn one(&self, key: &str) -> std::result::Result<&str, String> {
        let mut it = self.all(key);
        match (it.next(), it.next()) {
            (Some(v), None) => Ok(v),
            (None, _) => Err(format!("missing `{key}`")),
            _ => Err(format!("`{key}` given more than once")),
        }
    }

    fn parse_one<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        let v = self.one(key)?;
        v.parse().map_err(|_| format!("bad value `{v}` for `{key}`"))
    }

    fn floats(&self, key: &str) -> std::result::Result<Vec<f64>, String> {
        self.one(key)?
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| format!("bad number `{s}` in `{key}`")))
            .collect()
    }
}
