//! Closed-loop runs from a [`RunConfig`], with artifacts on disk.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lfcbench_core::dynamics::{ModelVariant, Plant};
use lfcbench_core::model::{default_params, NetworkParams};
use lfcbench_core::signals::{interpolate_to_steps, synthetic_scenario, Scenario, SignalError, StepSignals};
use lfcbench_core::sim::{initial_state, run_streaming, Clock, LogSink, RunSetup, RunSummary, SimError, StepRecord};
use lfcbench_core::topology::build_eea_topology;
use log::info;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, ScenarioSource};
use crate::exit;
use crate::output::{write_atomic, write_timing, CsvLog, OutputError, RunFiles, Summary};
use crate::registry::{self, BuildContext, RegistryError};
use crate::scenario_io::{read_scenario, ScenarioError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario cannot be used: {0}")]
    Signals(#[from] SignalError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(
        "{steps} steps requested but the scenario provides at most {limit} (24 h at {steps_per_hour} steps per hour)"
    )]
    TooManySteps {
        steps: usize,
        limit: usize,
        steps_per_hour: usize,
    },
    #[error("invalid model setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => exit::CONFIG,
            RunError::Scenario(ScenarioError::Io { .. }) | RunError::Output(_) => exit::IO,
            RunError::Scenario(_) | RunError::Signals(_) => exit::SCHEMA,
            RunError::Registry(RegistryError::Unknown { .. }) => exit::UNKNOWN_CONTROLLER,
            RunError::Registry(RegistryError::Incompatible { .. }) => exit::INCOMPATIBLE,
            RunError::Registry(_) => exit::CONFIG,
            RunError::TooManySteps { .. } => exit::TOO_MANY_STEPS,
            RunError::Sim(_) => exit::RUNTIME,
        }
    }
}

/// Monotonic wall clock.
pub struct WallClock(Instant);

impl Default for WallClock {
    fn default() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn seconds(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub fn load_scenario(cfg: &RunConfig) -> Result<Scenario, RunError> {
    match cfg.scenario_source()? {
        ScenarioSource::Synthetic(profile) => Ok(synthetic_scenario(cfg.seed, profile)),
        ScenarioSource::File(path) => Ok(read_scenario(&path)?),
    }
}

/// Everything derived from the configuration before the loop starts.
pub struct Prepared {
    pub variant: ModelVariant,
    pub scenario: Scenario,
    pub signals: StepSignals,
    pub plant: Plant,
}

pub fn network_params(cfg: &RunConfig, scenario: &Scenario) -> Result<NetworkParams, RunError> {
    let mut params = default_params()
        .with_capacities(&scenario.capacities)
        .map_err(|e| RunError::Setup(e.to_string()))?;
    params.tau = cfg.tau();
    params.validate().map_err(|e| RunError::Setup(e.to_string()))?;
    Ok(params)
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, RunError> {
    cfg.validate()?;
    let variant = cfg.variant()?;
    registry::lookup(&cfg.controller)?;
    let raw = load_scenario(cfg)?;
    let limit = lfcbench_core::signals::HOURS * cfg.steps_per_hour;
    if cfg.steps > limit {
        return Err(RunError::TooManySteps {
            steps: cfg.steps,
            limit,
            steps_per_hour: cfg.steps_per_hour,
        });
    }
    let scenario = raw.repaired()?;
    scenario.validate()?;
    let signals = interpolate_to_steps(&scenario, cfg.steps_per_hour)?;
    let params = network_params(cfg, &scenario)?;
    let mut plant = Plant::new(variant, build_eea_topology(), params);
    plant.turbine = cfg.turbine_params();
    if variant == ModelVariant::Turbine {
        plant
            .turbine
            .validate(&plant.params)
            .map_err(|e| RunError::Setup(format!("{e}; raise steps_per_hour to at least 144000")))?;
    }
    Ok(Prepared {
        variant,
        scenario,
        signals,
        plant,
    })
}

/// Result of a run written to disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub files: RunFiles,
    pub summary: RunSummary,
}

/// Logs progress roughly every tenth of the run.
struct Progress {
    every: usize,
    total: usize,
}

impl LogSink for Progress {
    fn record(&mut self, rec: &StepRecord) -> Result<(), String> {
        if (rec.k + 1).is_multiple_of(self.every) || rec.k + 1 == self.total {
            info!(
                "step {}/{}: cumulative cost {:.6e}, {} violations",
                rec.k + 1,
                self.total,
                rec.cumulative_cost,
                rec.violations.len()
            );
        }
        Ok(())
    }
}

/// Runs the configured benchmark and writes log, timing, summary and the
/// resolved config into `out_dir`.
pub fn execute(cfg: &RunConfig, out_dir: &Path, clock: &mut dyn Clock) -> Result<RunOutcome, RunError> {
    let prep = prepare(cfg)?;
    let plant = &prep.plant;
    let mpc = cfg.mpc_config();
    let ctx = BuildContext {
        variant: prep.variant,
        topology: &plant.topology,
        params: &plant.params,
        turbine: &plant.turbine,
        mpc,
        threads: cfg.threads,
    };
    let mut controller = registry::build(&cfg.controller, &ctx)?;
    let x0 = initial_state(prep.variant, &plant.params, Some(&prep.scenario))?;

    let stem = cfg.run_stem();
    let files = RunFiles::new(out_dir, &stem);
    info!(
        "running {} on the {} plant for {} steps into {}",
        cfg.controller,
        cfg.variant,
        cfg.steps,
        files.log.display()
    );
    let n = plant.params.n_areas();
    let mut sink = (
        CsvLog::create(&files.log, prep.variant, n)?,
        Progress {
            every: (cfg.steps / 10).max(1),
            total: cfg.steps,
        },
    );
    let setup = RunSetup {
        plant,
        signals: &prep.signals,
        initial: &x0,
        steps: cfg.steps,
        weights: &mpc,
    };
    let summary = run_streaming(setup, controller.as_mut(), clock, &mut sink)?;
    let wall_times = sink.0.finish()?;
    write_timing(&files.timing, &wall_times)?;
    write_atomic(&files.config, cfg.canonical().as_bytes())?;

    let mut s = Summary::default();
    s.push("config_hash", cfg.hash());
    s.push("controller", &summary.controller);
    s.push("variant", summary.variant.name());
    s.push("scenario", &cfg.scenario);
    s.push("seed", cfg.seed);
    s.push("steps_per_hour", cfg.steps_per_hour);
    s.push("horizon", cfg.mpc.horizon);
    s.push("log_file", file_name(&files.log));
    s.push("timing_file", file_name(&files.timing));
    s.add_metrics(&summary.metrics);
    write_atomic(&files.summary, s.to_text().as_bytes())?;
    Ok(RunOutcome { files, summary })
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Output directory: explicit flag, then config, then `LFCBENCH_OUT`, then
/// `lfcbench-out` in the working directory.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lfcbench-out"))
}

pub const OUT_ENV: &str = "LFCBENCH_OUT";
