//! Model variants, prior hyperparameters, chain settings, and the parameter
//! state carried through one Gibbs iteration.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::Matrix;

/// Prior on the response loadings `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VariantKind {
    /// Multiplicative gamma process shrinkage on both `W` and `C`.
    #[default]
    Bpls,
    /// `y = C B z + η` with binary column switches `B`.
    SsBpls,
    /// Bayesian LASSO local precisions on `C`.
    LBpls,
}

impl VariantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Bpls => "bpls",
            VariantKind::SsBpls => "ss-bpls",
            VariantKind::LBpls => "l-bpls",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpls" => Some(VariantKind::Bpls),
            "ss-bpls" | "ss_bpls" => Some(VariantKind::SsBpls),
            "l-bpls" | "l_bpls" => Some(VariantKind::LBpls),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelVariant {
    pub kind: VariantKind,
    /// One shared predictor noise variance.
    pub isotropic_sigma: bool,
    /// One shared response noise variance.
    pub isotropic_psi: bool,
}

impl ModelVariant {
    pub fn new(kind: VariantKind) -> Self {
        ModelVariant { kind, ..Default::default() }
    }
}

/// Prior constants. Gamma priors use shape–rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub a_psi: f64,
    pub b_psi: f64,
    /// Shape of the column increments `δ_k`, `k ≥ 2`.
    pub alpha: f64,
    /// Rate of the column increments.
    pub beta: f64,
    pub nu1_w: f64,
    pub nu2_w: f64,
    pub nu1_c: f64,
    pub nu2_c: f64,
    pub a_lambda: f64,
    pub b_lambda: f64,
    pub alpha_s: f64,
    pub beta_s: f64,
    pub q_star_variance_threshold: f64,
    pub q_star_override: Option<usize>,
    /// Whether the `δ_k` conditional shape counts the `R` response rows as
    /// well as the `P` predictor rows.
    pub delta_shape_includes_r: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            a_sigma: 2.5,
            b_sigma: 0.1,
            a_psi: 2.5,
            b_psi: 1.5,
            alpha: 2.2,
            beta: 1.0,
            nu1_w: 2.0,
            nu2_w: 3.0,
            nu1_c: 2.0,
            nu2_c: 3.0,
            a_lambda: 1.0,
            b_lambda: 1.0,
            alpha_s: 1.0,
            beta_s: 1.0,
            q_star_variance_threshold: 0.99,
            q_star_override: None,
            delta_shape_includes_r: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Accepted, but outside published guidance.
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
    pub severity: Severity,
}

impl Hyperparameters {
    /// Checks every constraint. The `ν2 ≤ ν1 − 1` sparsity guideline is
    /// reported as a warning only: the default `(ν1, ν2) = (2, 3)` breaks it.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut err = |field: &'static str, rule: String| {
            out.push(Violation { field, rule, severity: Severity::Error })
        };
        let positives: [(&'static str, f64); 14] = [
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
            ("a_psi", self.a_psi),
            ("b_psi", self.b_psi),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("nu1_w", self.nu1_w),
            ("nu2_w", self.nu2_w),
            ("nu1_c", self.nu1_c),
            ("nu2_c", self.nu2_c),
            ("a_lambda", self.a_lambda),
            ("b_lambda", self.b_lambda),
            ("alpha_s", self.alpha_s),
            ("beta_s", self.beta_s),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                err(name, format!("{name} > 0"));
            }
        }
        if !(self.a_sigma > 1.0) {
            err("a_sigma", "a_sigma > 1".into());
        }
        if !(self.a_psi > 1.0) {
            err("a_psi", "a_psi > 1".into());
        }
        if !(self.alpha > self.beta + 1.0) {
            err("alpha", "alpha > beta + 1".into());
        }
        if !(self.q_star_variance_threshold > 0.0 && self.q_star_variance_threshold < 1.0) {
            err("q_star_variance_threshold", "0 < q_star_variance_threshold < 1".into());
        }
        if self.q_star_override == Some(0) {
            err("q_star_override", "q_star_override >= 1".into());
        }
        if !(self.nu2_w <= self.nu1_w - 1.0) {
            out.push(Violation { field: "nu2_w", rule: "nu2_w <= nu1_w - 1".into(), severity: Severity::Warning });
        }
        if !(self.nu2_c <= self.nu1_c - 1.0) {
            out.push(Violation { field: "nu2_c", rule: "nu2_c <= nu1_c - 1".into(), severity: Severity::Warning });
        }
        out
    }

    /// Violations with [`Severity::Error`]; warnings are logged.
    pub fn check(&self) -> Result<(), Vec<Violation>> {
        let all = self.validate();
        for v in all.iter().filter(|v| v.severity == Severity::Warning) {
            log::warn!("hyperparameter guideline not met: {}", v.rule);
        }
        let errors: Vec<Violation> = all.into_iter().filter(|v| v.severity == Severity::Error).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Sweeps after which the advisory truncation check runs (0 disables it).
    pub warm_up_for_truncation: usize,
    /// Retain every full parameter state (memory heavy).
    pub store_full_states: bool,
    /// Retain the per-state latent projection `S_z Wᵀ Σ⁻¹` and `S_z`.
    pub store_latent_summaries: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 9000,
            keep: 21000,
            thin: 1,
            seed: 0,
            warm_up_for_truncation: 5000,
            store_full_states: false,
            store_latent_summaries: false,
        }
    }
}

impl ChainConfig {
    pub fn retained(&self) -> usize {
        self.keep / self.thin.max(1)
    }

    /// `keep / thin ≥ 1000` is required for production runs; shorter
    /// chains are accepted by the sampler itself for testing.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.thin == 0 {
            out.push(Violation { field: "thin", rule: "thin >= 1".into(), severity: Severity::Error });
        }
        if self.keep == 0 {
            out.push(Violation { field: "keep", rule: "keep >= 1".into(), severity: Severity::Error });
        } else if self.retained() < 1000 {
            out.push(Violation { field: "keep", rule: "keep / thin >= 1000".into(), severity: Severity::Error });
        }
        out
    }
}

/// One Gibbs state. `tau` is always the running product of `delta`; the
/// two are only reachable through methods that keep them consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    /// `P × Q*` predictor loadings.
    pub w: Matrix,
    /// `R × Q*` response loadings.
    pub c: Matrix,
    /// `N × Q*` scores.
    pub z: Matrix,
    /// Predictor noise variances (all equal when isotropic).
    pub sigma2: Vec<f64>,
    /// Response noise variances (all equal when isotropic).
    pub psi2: Vec<f64>,
    /// `P × Q*` local precisions of `W`.
    pub phi: Matrix,
    /// `R × Q*` local precisions of `C`.
    pub phi_dot: Matrix,
    delta: Vec<f64>,
    tau: Vec<f64>,
    /// Column switches (ss-BPLS); all ones otherwise.
    pub b: Vec<bool>,
    /// Slab probability (ss-BPLS).
    pub p0: f64,
    /// LASSO penalty squared (L-BPLS).
    pub lambda2: f64,
}

impl ParamState {
    /// Zero loadings and scores with unit variances and precisions.
    pub fn zeros(n: usize, p: usize, r: usize, q: usize) -> Self {
        ParamState {
            w: Matrix::zeros(p, q),
            c: Matrix::zeros(r, q),
            z: Matrix::zeros(n, q),
            sigma2: vec![1.0; p],
            psi2: vec![1.0; r],
            phi: Matrix::from_fn(p, q, |_, _| 1.0),
            phi_dot: Matrix::from_fn(r, q, |_, _| 1.0),
            delta: vec![1.0; q],
            tau: vec![1.0; q],
            b: vec![true; q],
            p0: 0.5,
            lambda2: 1.0,
        }
    }

    pub fn q(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Replaces `delta` (its first entry is forced to 1) and recomputes `tau`.
    pub fn set_delta(&mut self, delta: Vec<f64>) {
        self.delta = delta;
        if let Some(d) = self.delta.first_mut() {
            *d = 1.0;
        }
        self.recompute_tau();
    }

    pub fn set_delta_k(&mut self, k: usize, value: f64) {
        if k > 0 {
            self.delta[k] = value;
            self.recompute_tau();
        }
    }

    fn recompute_tau(&mut self) {
        self.tau.resize(self.delta.len(), 1.0);
        let mut acc = 1.0;
        for (t, d) in self.tau.iter_mut().zip(&self.delta) {
            acc *= d;
            *t = acc;
        }
    }

    /// `C B`: response loadings with switched-off columns zeroed.
    pub fn effective_c(&self) -> Matrix {
        let mut cb = self.c.clone();
        for (q, &on) in self.b.iter().enumerate() {
            if !on {
                for r in 0..cb.rows() {
                    cb[(r, q)] = 0.0;
                }
            }
        }
        cb
    }

    /// Checks positivity, `tau` consistency and `delta[0] = 1`.
    pub fn check_invariants(&self) -> Result<(), String> {
        let pos = |name: &str, v: &[f64]| -> Result<(), String> {
            match v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                Some(i) => Err(format!("{name}[{i}] = {} is not positive", v[i])),
                None => Ok(()),
            }
        };
        pos("sigma2", &self.sigma2)?;
        pos("psi2", &self.psi2)?;
        pos("phi", self.phi.as_slice())?;
        pos("phi_dot", self.phi_dot.as_slice())?;
        pos("delta", &self.delta)?;
        pos("tau", &self.tau)?;
        pos("lambda2", &[self.lambda2])?;
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(format!("p0 = {} outside (0, 1)", self.p0));
        }
        if self.delta.first().copied() != Some(1.0) && !self.delta.is_empty() {
            return Err("delta[0] must be 1".into());
        }
        let mut acc = 1.0;
        for (q, (&d, &t)) in self.delta.iter().zip(&self.tau).enumerate() {
            acc *= d;
            if acc != t {
                return Err(format!("tau[{q}] is stale"));
            }
        }
        if !(self.w.is_finite() && self.c.is_finite() && self.z.is_finite()) {
            return Err("non-finite loadings or scores".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_with_guideline_warnings() {
        let hp = Hyperparameters::default();
        let v = hp.validate();
        assert!(v.iter().all(|x| x.severity == Severity::Warning));
        assert_eq!(v.len(), 2);
        assert!(v.iter().any(|x| x.rule == "nu2_w <= nu1_w - 1"));
        assert!(hp.check().is_ok());
    }

    #[test]
    fn alpha_rule() {
        let hp = Hyperparameters { alpha: 1.5, ..Default::default() };
        let errs = hp.check().unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].rule, "alpha > beta + 1");
    }

    #[test]
    fn shape_rules() {
        let hp = Hyperparameters { a_sigma: 1.0, b_psi: -1.0, ..Default::default() };
        let errs = hp.check().unwrap_err();
        assert!(errs.iter().any(|v| v.field == "a_sigma"));
        assert!(errs.iter().any(|v| v.field == "b_psi"));
    }

    #[test]
    fn chain_defaults() {
        let c = ChainConfig::default();
        assert_eq!((c.burn_in, c.keep, c.thin), (9000, 21000, 1));
        assert_eq!(c.retained(), 21000);
        assert!(c.validate().is_empty());
        let short = ChainConfig { keep: 500, ..c };
        assert_eq!(short.validate().len(), 1);
    }

    #[test]
    fn tau_tracks_delta() {
        let mut s = ParamState::zeros(2, 3, 1, 3);
        s.set_delta(vec![5.0, 2.0, 3.0]);
        assert_eq!(s.delta(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.tau(), &[1.0, 2.0, 6.0]);
        s.set_delta_k(1, 4.0);
        assert_eq!(s.tau(), &[1.0, 4.0, 12.0]);
        s.set_delta_k(0, 9.0);
        assert_eq!(s.delta()[0], 1.0);
        assert!(s.check_invariants().is_ok());
    }

    #[test]
    fn effective_c_zeroes_switched_columns() {
        let mut s = ParamState::zeros(1, 1, 2, 3);
        s.c = Matrix::from_fn(2, 3, |i, j| (i * 3 + j + 1) as f64);
        s.b = vec![true, false, true];
        let cb = s.effective_c();
        assert_eq!(cb.column(1), vec![0.0, 0.0]);
        assert_eq!(cb.column(2), vec![3.0, 6.0]);
    }

    #[test]
    fn variant_names_round_trip() {
        for k in [VariantKind::Bpls, VariantKind::SsBpls, VariantKind::LBpls] {
            assert_eq!(VariantKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(VariantKind::parse("pls"), None);
    }
}
