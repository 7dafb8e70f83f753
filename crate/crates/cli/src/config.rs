//! Experiment configuration (TOML, schema version 1).

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use kdvlab::averaging::{QuadratureSpec, TorusQuadrature};
use kdvlab::dynamics::{NoiseProfile, NoiseSpec, SpdeConfig};
use kdvlab::effective::IntegrationConfig;
use kdvlab::{AngleVector, BackendSpec, BirkhoffBackend, FourierField};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Spde,
    Effective,
    Convergence,
    Equidistribution,
    Diagnostics,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Spde => "spde",
            Mode::Effective => "effective",
            Mode::Convergence => "convergence",
            Mode::Equidistribution => "equidistribution",
            Mode::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub mode: Mode,
    pub seed: u64,
    #[serde(default = "one")]
    pub paths: usize,
    /// Viscosities, one SPDE arm each; strictly decreasing in convergence mode.
    #[serde(default)]
    pub nus: Vec<f64>,
    /// Field truncation `S`.
    pub s_max: usize,
    /// Birkhoff pairs `N`.
    pub n_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub spde: SpdeOptions,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    pub time: TimeGrid,
    pub backend: BackendSpec,
    pub noise: NoiseProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSpec>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Slow-time horizon `T`.
    pub horizon: f64,
    /// Number of equally spaced records on `[0, T]` (just `T` when 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    /// Explicit record times; overrides `snapshots`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<Vec<f64>>,
    /// Slow-time step of the effective equation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Fast-time step of the SPDE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_fast: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    /// `(s, u_s)` pairs; unlisted modes are zero.
    #[serde(default)]
    pub modes: Vec<(i64, f64)>,
    /// Initial angles of the effective equation; default: angles of `Psi(u0)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeOptions {
    #[serde(default = "yes")]
    pub nonlinearity: bool,
    #[serde(default = "yes")]
    pub noise: bool,
    #[serde(default = "default_blowup")]
    pub blowup_bound: f64,
    #[serde(default)]
    pub store_fields: bool,
}

fn default_blowup() -> f64 {
    50.0
}

impl Default for SpdeOptions {
    fn default() -> Self {
        Self {
            nonlinearity: true,
            noise: true,
            blowup_bound: default_blowup(),
            store_fields: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mollifier {
    Smooth,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "default_mollifier")]
    pub mollifier: Mollifier,
    #[serde(default = "default_replicates")]
    pub floor_replicates: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Occupation levels reported in effective mode.
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

fn default_bootstrap() -> usize {
    100
}

fn default_mollifier() -> Mollifier {
    Mollifier::Smooth
}

fn default_replicates() -> usize {
    20
}

fn default_bins() -> usize {
    32
}

fn default_deltas() -> Vec<f64> {
    vec![0.1, 0.01, 0.001]
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            bootstrap: default_bootstrap(),
            mollifier: default_mollifier(),
            floor_replicates: default_replicates(),
            histogram_bins: default_bins(),
            deltas: default_deltas(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl From<kdvlab::Error> for ConfigError {
    fn from(e: kdvlab::Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Everything a run needs, built and checked up front.
pub struct Plan {
    pub config: ExperimentConfig,
    pub backend: Arc<dyn BirkhoffBackend>,
    pub noise: NoiseSpec,
    pub u0: FourierField,
    pub theta: Option<AngleVector>,
    pub record: Vec<f64>,
    pub quadrature: TorusQuadrature,
}

impl Plan {
    pub fn spde_config(&self, nu: f64) -> SpdeConfig {
        let c = &self.config;
        SpdeConfig {
            nu,
            horizon: c.time.horizon,
            dt_fast: c.time.dt_fast,
            s_max: c.s_max,
            seed: c.seed,
            record: self.record.clone(),
            nonlinearity: c.spde.nonlinearity,
            noise: c.spde.noise,
            blowup_bound: c.spde.blowup_bound,
            store_fields: c.spde.store_fields,
        }
    }

    pub fn integration_config(&self) -> IntegrationConfig {
        let mut cfg = IntegrationConfig::new(self.config.time.horizon, self.config.seed, self.record.clone());
        if let Some(dt) = self.config.time.dt {
            cfg.dt = dt;
        }
        cfg
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config does not match schema: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn record_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let t = &self.time;
        if let Some(r) = &t.record {
            return Ok(r.clone());
        }
        match t.snapshots {
            Some(0) => fail("time.snapshots must be at least 1"),
            Some(1) => Ok(vec![t.horizon]),
            Some(n) => Ok((0..n).map(|i| t.horizon * i as f64 / (n - 1) as f64).collect()),
            None => fail("time needs either `snapshots` or `record`"),
        }
    }

    /// Schema and capability checks; builds every component of the run.
    pub fn plan(&self) -> Result<Plan, ConfigError> {
        if self.version != SCHEMA_VERSION {
            return fail(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if self.paths == 0 {
            return fail("paths must be at least 1");
        }
        if self.s_max == 0 || self.n_pairs == 0 || self.n_pairs > self.s_max {
            return fail(format!("need 1 <= n_pairs <= s_max (got n_pairs = {}, s_max = {})", self.n_pairs, self.s_max));
        }
        if let Some(bad) = self.nus.iter().find(|nu| !(**nu > 0.0 && **nu <= 1.0)) {
            return fail(format!("nu = {bad} outside (0, 1]"));
        }
        let needs_nu = matches!(self.mode, Mode::Spde | Mode::Convergence | Mode::Equidistribution);
        if needs_nu && self.nus.is_empty() {
            return fail(format!("mode `{}` needs a non-empty `nus` list", self.mode.as_str()));
        }
        if self.mode == Mode::Convergence && self.nus.windows(2).any(|w| w[1] >= w[0]) {
            return fail("convergence mode needs `nus` strictly decreasing");
        }
        if !(self.time.horizon > 0.0) {
            return fail("time.horizon must be positive");
        }
        let record = self.record_grid()?;

        let backend: Arc<dyn BirkhoffBackend> = Arc::from(self.backend.build(self.n_pairs)?);
        if backend.n_pairs() != self.n_pairs {
            return fail(format!(
                "backend `{}` provides {} pairs but n_pairs = {}",
                backend.name(),
                backend.n_pairs(),
                self.n_pairs
            ));
        }
        let caps = backend.capabilities();
        match self.mode {
            Mode::Effective | Mode::Convergence if !caps.full() => {
                return fail(format!(
                    "mode `{}` needs forward, inverse and jacobian; backend `{}` lacks them",
                    self.mode.as_str(),
                    backend.name()
                ))
            }
            Mode::Equidistribution if !caps.angles => {
                return fail(format!("mode `equidistribution` needs angles; backend `{}` has none", backend.name()))
            }
            _ => {}
        }

        let noise = NoiseSpec::from_profile(&self.noise, self.s_max, &[])?;
        if self.initial.modes.iter().any(|(s, _)| *s == 0 || s.unsigned_abs() as usize > self.s_max) {
            return fail(format!("initial modes must satisfy 1 <= |s| <= s_max = {}", self.s_max));
        }
        let u0 = FourierField::from_modes(self.s_max, &self.initial.modes)?;
        let theta = match &self.initial.angles {
            Some(a) if a.len() != self.n_pairs => {
                return fail(format!("initial.angles has {} entries, expected {}", a.len(), self.n_pairs))
            }
            Some(a) => Some(AngleVector(a.clone())),
            None => None,
        };
        let quadrature = self
            .quadrature
            .clone()
            .unwrap_or_else(|| QuadratureSpec::default_for(self.n_pairs))
            .build(self.n_pairs)?;
        if self.analysis.deltas.iter().any(|d| !(*d > 0.0)) {
            return fail("analysis.deltas must be positive");
        }
        if self.analysis.floor_replicates == 0 || self.analysis.histogram_bins == 0 {
            return fail("analysis.floor_replicates and analysis.histogram_bins must be positive");
        }

        let plan = Plan {
            config: self.clone(),
            backend,
            noise,
            u0,
            theta,
            record,
            quadrature,
        };
        for nu in &self.nus {
            plan.spde_config(*nu).validate()?;
        }
        plan.integration_config().validate()?;
        Ok(plan)
    }
}
