//! Run configuration: one TOML file, optionally overridden from the command
//! line. Its hash names every output file of the run.

use std::path::{Path, PathBuf};

use lfcbench_core::dynamics::{ModelVariant, TurbineParams};
use lfcbench_core::mpc::MpcConfig;
use lfcbench_core::qp::QpSettings;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Scenario reference prefix selecting the built-in generator.
pub const SYNTHETIC_PREFIX: &str = "synthetic:";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Path to a scenario CSV, or `synthetic:calm` / `synthetic:volatile`.
    pub scenario: String,
    pub controller: String,
    pub variant: String,
    pub steps: usize,
    /// Seed of the synthetic generator; recorded for file scenarios too.
    pub seed: u64,
    /// Simulation steps per hour of data; fixes the sampling time.
    pub steps_per_hour: usize,
    /// Output directory; not part of the hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for parallel controllers, 0 for all cores; not hashed.
    pub threads: usize,
    pub mpc: MpcSection,
    pub solver: SolverSection,
    pub turbine: TurbineSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcSection {
    pub horizon: usize,
    pub r: [f64; 3],
    pub q: [f64; 3],
    pub soft_constraints: bool,
    pub slack_weight: f64,
    pub warm_start: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol_prim: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub adaptive_rho: bool,
    pub polish: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurbineSection {
    pub t_t: f64,
    pub t_c: f64,
    pub t_d: f64,
    pub k_t: f64,
    pub k_c: f64,
    pub k_d: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: format!("{SYNTHETIC_PREFIX}calm"),
            controller: "centralized".into(),
            variant: ModelVariant::Linear.name().into(),
            steps: 1440,
            seed: 7,
            steps_per_hour: 1440,
            output_dir: None,
            threads: 0,
            mpc: MpcSection::default(),
            solver: SolverSection::default(),
            turbine: TurbineSection::default(),
        }
    }
}

impl Default for MpcSection {
    fn default() -> Self {
        let m = MpcConfig::default();
        MpcSection {
            horizon: m.horizon,
            r: m.r,
            q: m.q,
            soft_constraints: m.soft_constraints,
            slack_weight: m.slack_weight,
            warm_start: m.warm_start,
        }
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = QpSettings::default();
        SolverSection {
            tol_prim: s.tol_prim,
            tol_dual: s.tol_dual,
            max_iter: s.max_iter,
            rho: s.rho,
            adaptive_rho: s.adaptive_rho,
            polish: s.polish,
        }
    }
}

impl Default for TurbineSection {
    fn default() -> Self {
        let t = TurbineParams::default();
        TurbineSection {
            t_t: t.t_t,
            t_c: t.t_c,
            t_d: t.t_d,
            k_t: t.k_t,
            k_c: t.k_c,
            k_d: t.k_d,
        }
    }
}

/// Where the scenario comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioSource {
    Synthetic(lfcbench_core::signals::Profile),
    File(PathBuf),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.message().to_string(),
        })?;
        // relative scenario paths are relative to the config file
        if !cfg.scenario.starts_with(SYNTHETIC_PREFIX) {
            let p = Path::new(&cfg.scenario);
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.scenario = dir.join(p).display().to_string();
                }
            }
        }
        Ok(cfg)
    }

    pub fn variant(&self) -> Result<ModelVariant, ConfigError> {
        ModelVariant::from_name(&self.variant).ok_or_else(|| {
            let known: Vec<&str> = ModelVariant::ALL.iter().map(|v| v.name()).collect();
            ConfigError::Invalid(format!(
                "unknown variant `{}` (known: {})",
                self.variant,
                known.join(", ")
            ))
        })
    }

    pub fn scenario_source(&self) -> Result<ScenarioSource, ConfigError> {
        use lfcbench_core::signals::Profile;
        match self.scenario.strip_prefix(SYNTHETIC_PREFIX) {
            Some("calm") => Ok(ScenarioSource::Synthetic(Profile::Calm)),
            Some("volatile") => Ok(ScenarioSource::Synthetic(Profile::Volatile)),
            Some(other) => Err(ConfigError::Invalid(format!(
                "unknown synthetic profile `{other}` (known: calm, volatile)"
            ))),
            None => Ok(ScenarioSource::File(PathBuf::from(&self.scenario))),
        }
    }

    /// Sampling time in seconds.
    pub fn tau(&self) -> f64 {
        3600.0 / self.steps_per_hour as f64
    }

    pub fn mpc_config(&self) -> MpcConfig {
        let m = &self.mpc;
        let s = &self.solver;
        MpcConfig {
            horizon: m.horizon,
            r: m.r,
            q: m.q,
            qp: QpSettings {
                tol_prim: s.tol_prim,
                tol_dual: s.tol_dual,
                max_iter: s.max_iter,
                rho: s.rho,
                adaptive_rho: s.adaptive_rho,
                polish: s.polish,
                ..QpSettings::default()
            },
            soft_constraints: m.soft_constraints,
            slack_weight: m.slack_weight,
            warm_start: m.warm_start,
        }
    }

    pub fn turbine_params(&self) -> TurbineParams {
        let t = &self.turbine;
        TurbineParams {
            t_t: t.t_t,
            t_c: t.t_c,
            t_d: t.t_d,
            k_t: t.k_t,
            k_c: t.k_c,
            k_d: t.k_d,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.steps == 0 {
            return Err(ConfigError::Invalid("steps must be at least 1".into()));
        }
        if self.steps_per_hour == 0 {
            return Err(ConfigError::Invalid("steps_per_hour must be at least 1".into()));
        }
        self.variant()?;
        self.scenario_source()?;
        self.mpc_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Canonical TOML of everything that influences the results.
    pub fn canonical(&self) -> String {
        let hashed = RunConfig {
            output_dir: None,
            threads: 0,
            ..self.clone()
        };
        toml::to_string(&hashed).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&digest[..8])
    }

    /// Stem shared by every output file of this run.
    pub fn run_stem(&self) -> String {
        format!("run-{}-{}-{}", self.controller, self.variant, self.hash())
    }
}
