//! Experiment configuration read from a single JSON file.

use std::path::{Path, PathBuf};

use exitlab::lanczos::LanczosSettings;
use exitlab::mc::{default_dt, McSettings};
use exitlab::operator::check_h_range;
use exitlab::potential::kappa;
use exitlab::spectra::EigenSettings;
use exitlab::{beta_from_h, h_from_beta, Bump, DomainPair, Field, GridPolicy, Potential, ScalarField, DEFAULT_NU_EXPONENT};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub potential: Potential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<Bump>,
    /// Catalog default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<DomainPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default)]
    pub eigen: EigenConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default = "default_nu_exponent")]
    pub nu_exponent: f64,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_nu_exponent() -> f64 {
    DEFAULT_NU_EXPONENT
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenConfig {
    /// Eigenpairs computed per solve.
    pub k: usize,
    /// Eigenvectors written per solve.
    pub vectors: usize,
    pub tol: f64,
    pub max_restarts: usize,
    pub shift_rel: f64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        let l = LanczosSettings::default();
        let s = EigenSettings::default();
        EigenConfig { k: 4, vectors: 2, tol: l.tol, max_restarts: l.max_restarts, shift_rel: s.shift_rel }
    }
}

impl EigenConfig {
    pub fn settings(&self) -> EigenSettings {
        EigenSettings {
            lanczos: LanczosSettings { tol: self.tol, max_restarts: self.max_restarts, ..Default::default() },
            shift_rel: self.shift_rel,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n: usize,
    /// min(h²/10, 10⁻³) when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub seed: u64,
    pub max_steps: u64,
    /// Angle bins for 2D exit histograms.
    pub bins: usize,
    pub time_bins: usize,
    pub alpha: f64,
    pub tv_tolerance: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { n: 2000, dt: None, seed: 1, max_steps: 100_000_000, bins: 20, time_bins: 10, alpha: 0.01, tv_tolerance: 0.05 }
    }
}

impl McConfig {
    pub fn settings(&self, h: f64) -> McSettings {
        McSettings {
            beta: beta_from_h(h),
            dt: self.dt.unwrap_or_else(|| default_dt(h)),
            n: self.n,
            seed: self.seed,
            max_steps: self.max_steps,
        }
    }
}

/// Settings of the hypothesis check.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Lattice spacing for critical points and Agmon distances; scaled to
    /// the outer domain when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    /// h values and ν scalings over which small-eigenvalue counts must be
    /// stable when the field is not Morse.
    pub count_h: Vec<f64>,
    pub nu_scales: Vec<f64>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { spacing: None, count_h: vec![0.1, 0.15, 0.2], nu_scales: vec![0.5, 1.0, 2.0] }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn field(&self) -> Field {
        Field { potential: self.potential.clone(), bump: self.bump.clone() }
    }

    pub fn pair(&self) -> DomainPair {
        self.domains.clone().unwrap_or_else(|| self.potential.default_domains())
    }

    pub fn field_id(&self) -> String {
        match self.bump {
            Some(_) => format!("{}+bump", self.potential.name()),
            None => self.potential.name().to_string(),
        }
    }

    /// The h list, whichever way it was given.
    pub fn hs(&self) -> Vec<f64> {
        match (&self.h, &self.beta) {
            (Some(h), _) => h.clone(),
            (None, Some(b)) => b.iter().map(|&b| h_from_beta(b)).collect(),
            (None, None) => Vec::new(),
        }
    }

    pub fn check_spacing(&self) -> f64 {
        let plus = self.pair().plus;
        self.check.spacing.unwrap_or(plus.diameter() / if plus.dim() == 1 { 2000.0 } else { 120.0 })
    }

    /// Apply command-line overrides of h, β and the seed.
    pub fn apply_overrides(&mut self, h: Option<f64>, beta: Option<f64>, seed: Option<u64>) {
        if let Some(h) = h {
            self.h = Some(vec![h]);
            self.beta = None;
        }
        if let Some(b) = beta {
            self.beta = Some(vec![b]);
            self.h = None;
        }
        if let Some(s) = seed {
            self.mc.seed = s;
        }
    }

    /// Checks that do not need a solve. `needs_h` is false for commands
    /// that take no temperature.
    pub fn validate(&self, needs_h: bool) -> Result<(), ConfigError> {
        let pair = self.pair();
        pair.validate().map_err(|e| ConfigError(format!("domains: {e}")))?;
        if pair.dim() != self.potential.dim() {
            return bad(format!("{} is {}D but the domains are {}D", self.potential.name(), self.potential.dim(), pair.dim()));
        }
        if let Some(b) = &self.bump {
            if !(b.radius > 0.0) || !b.amplitude.is_finite() {
                return bad("bump needs a positive radius and a finite amplitude");
            }
        }
        if self.h.is_some() && self.beta.is_some() {
            return bad("give either h or beta, not both");
        }
        if needs_h {
            let hs = self.hs();
            if hs.is_empty() {
                return bad("an h or beta list is required");
            }
            let f: &dyn ScalarField = &self.field();
            let k = kappa(f, &pair.plus, self.check_spacing());
            for &h in &hs {
                if !(h > 0.0 && h.is_finite()) {
                    return bad(format!("h = {h} must be positive"));
                }
                check_h_range(k, h).map_err(|e| ConfigError(e.to_string()))?;
            }
        }
        if self.eigen.k == 0 || self.eigen.vectors > self.eigen.k {
            return bad("eigen.k must be positive and at least eigen.vectors");
        }
        if !(self.nu_exponent > 1.0) {
            return bad("nu_exponent must exceed 1");
        }
        if self.mc.dt.is_some_and(|dt| !(dt > 0.0)) {
            return bad("mc.dt must be positive");
        }
        if self.mc.bins == 0 || self.mc.time_bins < 2 {
            return bad("mc.bins must be positive and mc.time_bins at least 2");
        }
        if self.check.count_h.iter().chain(&self.check.nu_scales).any(|v| !(*v > 0.0)) {
            return bad("check.count_h and check.nu_scales must be positive");
        }
        Ok(())
    }
}
