//! Closed-loop simulation and benchmark metrics.
//!
//! Row `k` of a run holds the input `u(k)`, the state `x(k+1)` it produced
//! and the stage cost `l(x(k+1), u(k))`, so every logged row is
//! self-contained.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dynamics::{initial_dispatch, DynamicsError, ModelVariant, NetworkState, Plant};
use crate::model::{
    check_violations, constraint_sets, ModelError, NetworkInput, NetworkParams, Quantity, ViolationReport,
    FREQUENCY_LIMIT,
};
use crate::mpc::{Controller, MpcConfig, MpcError, StepDiagnostics};
use crate::signals::{Scenario, SeriesKind, StepSignals};
use crate::topology::tie_power;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("run length must be at least one step")]
    NoSteps,
    #[error("{steps} steps requested but the signals cover only {available}")]
    SignalsTooShort { steps: usize, available: usize },
    #[error("controller `{controller}` cannot drive the {} plant", .variant.name())]
    Incompatible { controller: String, variant: ModelVariant },
    #[error("initial state does not match the {} plant", .0.name())]
    InitialState(ModelVariant),
    #[error("controller failed at step {k}: {source}")]
    Controller { k: usize, source: MpcError },
    #[error("controller returned a non-finite input at step {k}")]
    NonFiniteInput { k: usize },
    #[error("plant update failed at step {k}: {source}")]
    Plant { k: usize, source: DynamicsError },
    #[error("log sink failed at step {k}: {message}")]
    Sink { k: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Monotonic time source in seconds.
pub trait Clock {
    fn seconds(&mut self) -> f64;
}

/// Clock that never advances; keeps runs free of timing noise.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn seconds(&mut self) -> f64 {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// Input applied during step `k`.
    pub input: NetworkInput,
    /// State reached at the end of step `k`.
    pub state: NetworkState,
    /// Tie power of every area at the end of step `k`.
    pub tie: Vec<f64>,
    pub stage_cost: f64,
    pub cumulative_cost: f64,
    /// Seconds spent inside the controller.
    pub wall_time: f64,
    pub violations: ViolationReport,
    /// Solver report; the full plan is dropped to keep records small.
    pub diagnostics: StepDiagnostics,
}

/// Receives records as the loop produces them.
pub trait LogSink {
    fn record(&mut self, rec: &StepRecord) -> Result<(), String>;
}

/// Keeps every record in memory.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    pub records: Vec<StepRecord>,
}

impl LogSink for MemorySink {
    fn record(&mut self, rec: &StepRecord) -> Result<(), String> {
        self.records.push(rec.clone());
        Ok(())
    }
}

impl<A: LogSink, B: LogSink> LogSink for (A, B) {
    fn record(&mut self, rec: &StepRecord) -> Result<(), String> {
        self.0.record(rec)?;
        self.1.record(rec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub controller: String,
    pub variant: ModelVariant,
    pub initial: NetworkState,
    pub records: Vec<StepRecord>,
    pub cumulative_cost: f64,
    pub total_wall_time: f64,
}

impl RunLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Totals returned by a streaming run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub controller: String,
    pub variant: ModelVariant,
    pub steps: usize,
    pub cumulative_cost: f64,
    pub total_wall_time: f64,
    pub metrics: MetricsReport,
}

/// `xᵀR x + uᵀQ u` with per-area weights on `[Δδ, Δf, e]` and
/// `[ΔP_disp, P_c, P_d]`. Extra states of the larger models are unweighted.
pub fn stage_cost(x: &NetworkState, u: &NetworkInput, cfg: &MpcConfig) -> f64 {
    let [r0, r1, r2] = cfg.r;
    let [q0, q1, q2] = cfg.q;
    let sx: f64 = x
        .areas
        .iter()
        .map(|a| r0 * a.d_delta * a.d_delta + r1 * a.d_f * a.d_f + r2 * a.e * a.e)
        .sum();
    let su: f64 = u
        .areas
        .iter()
        .map(|a| q0 * a.d_p_disp * a.d_p_disp + q1 * a.p_c * a.p_c + q2 * a.p_d * a.p_d)
        .sum();
    sx + su
}

/// Storage half full, everything else at rest. The augmented model starts
/// with the dispatch that covers the hour-1 net load of `scenario`.
pub fn initial_state(
    variant: ModelVariant,
    params: &NetworkParams,
    scenario: Option<&Scenario>,
) -> Result<NetworkState, SimError> {
    let n = params.n_areas();
    let mut x = NetworkState::zeros_for(variant, n);
    for (a, p) in x.areas.iter_mut().zip(&params.areas) {
        a.e = 0.5 * p.e_max;
    }
    if let (Some(aug), Some(sc)) = (x.augmented.as_mut(), scenario) {
        if sc.n_areas() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: sc.n_areas(),
            }
            .into());
        }
        for (i, s) in aug.iter_mut().enumerate() {
            let first = |kind| sc.series(i, kind).values.first().copied().flatten().unwrap_or(0.0);
            s.p_disp = initial_dispatch(first(SeriesKind::LoadMeas), first(SeriesKind::RenMeas));
        }
    }
    Ok(x)
}

/// Everything a closed-loop run needs besides the controller.
#[derive(Clone, Copy, Debug)]
pub struct RunSetup<'a> {
    pub plant: &'a Plant,
    pub signals: &'a StepSignals,
    pub initial: &'a NetworkState,
    pub steps: usize,
    /// Weights of the logged stage cost.
    pub weights: &'a MpcConfig,
}

/// Runs the loop and keeps the whole log in memory.
pub fn run_closed_loop(
    setup: RunSetup<'_>,
    controller: &mut dyn Controller,
    clock: &mut dyn Clock,
) -> Result<RunLog, SimError> {
    let mut sink = MemorySink::default();
    let summary = run_streaming(setup, controller, clock, &mut sink)?;
    Ok(RunLog {
        controller: summary.controller,
        variant: summary.variant,
        initial: setup.initial.clone(),
        records: sink.records,
        cumulative_cost: summary.cumulative_cost,
        total_wall_time: summary.total_wall_time,
    })
}

/// Runs the loop, handing each record to `sink` as soon as it exists.
/// The plant only ever sees measured signals.
pub fn run_streaming(
    setup: RunSetup<'_>,
    controller: &mut dyn Controller,
    clock: &mut dyn Clock,
    sink: &mut dyn LogSink,
) -> Result<RunSummary, SimError> {
    let RunSetup {
        plant,
        signals,
        initial,
        steps,
        weights,
    } = setup;
    if steps == 0 {
        return Err(SimError::NoSteps);
    }
    if steps > signals.len() {
        return Err(SimError::SignalsTooShort {
            steps,
            available: signals.len(),
        });
    }
    if !controller.supports(plant.variant) {
        return Err(SimError::Incompatible {
            controller: controller.name().into(),
            variant: plant.variant,
        });
    }
    let n = plant.params.n_areas();
    if initial.n_areas() != n || !initial.fits(plant.variant) {
        return Err(SimError::InitialState(plant.variant));
    }
    let sets = constraint_sets(&plant.params)?;
    let mut metrics = MetricsBuilder::new(n, plant.params.tau);

    let start = clock.seconds();
    let mut x = initial.clone();
    let mut cumulative = 0.0;
    for k in 0..steps {
        let t0 = clock.seconds();
        let out = controller
            .observe(k, &x, signals)
            .map_err(|source| SimError::Controller { k, source })?;
        let wall_time = clock.seconds() - t0;
        if out.input.areas.len() != n || !out.input.is_finite() {
            return Err(SimError::NonFiniteInput { k });
        }
        let next = plant
            .step(&x, &out.input, &signals.measured(k))
            .map_err(|source| SimError::Plant { k, source })?;
        let tie = tie_power(&next.angles(), &plant.topology).map_err(|e| SimError::Plant { k, source: e.into() })?;
        let cost = stage_cost(&next, &out.input, weights);
        cumulative += cost;
        let rec = StepRecord {
            k,
            violations: check_violations(&next, &out.input, &sets)?,
            input: out.input,
            state: next,
            tie,
            stage_cost: cost,
            cumulative_cost: cumulative,
            wall_time,
            diagnostics: StepDiagnostics {
                plan: Vec::new(),
                ..out.diagnostics
            },
        };
        metrics.push(&rec);
        sink.record(&rec).map_err(|message| SimError::Sink { k, message })?;
        x = rec.state;
    }
    let total_wall_time = clock.seconds() - start;
    let mut report = metrics.finish();
    report.total_wall_time = total_wall_time;
    Ok(RunSummary {
        controller: controller.name().into(),
        variant: plant.variant,
        steps,
        cumulative_cost: cumulative,
        total_wall_time,
        metrics: report,
    })
}

/// Time outside the frequency band for one area, in simulated seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BandMetrics {
    pub total_outside: f64,
    /// Mean length of one contiguous excursion; 0 without excursions.
    pub average_outside: f64,
    pub excursions: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub steps: usize,
    pub cumulative_cost: f64,
    pub wall_time_mean: f64,
    pub wall_time_max: f64,
    pub total_wall_time: f64,
    pub bands: Vec<BandMetrics>,
    /// Violation counts, indexed like [`Quantity::ALL`].
    pub violations: [usize; 7],
    pub max_abs_frequency: f64,
    pub max_abs_angle: f64,
    pub softened_steps: usize,
}

impl MetricsReport {
    pub fn violation_count(&self, q: Quantity) -> usize {
        self.violations[q as usize]
    }

    pub fn total_violations(&self) -> usize {
        self.violations.iter().sum()
    }

    pub fn time_outside_band(&self) -> f64 {
        self.bands.iter().map(|b| b.total_outside).sum()
    }
}

/// Incremental form of [`metrics`], usable on a stream of records.
#[derive(Clone, Debug)]
pub struct MetricsBuilder {
    tau: f64,
    steps: usize,
    cost: f64,
    wall_sum: f64,
    wall_max: f64,
    outside_steps: Vec<usize>,
    excursions: Vec<usize>,
    inside: Vec<bool>,
    violations: [usize; 7],
    max_f: f64,
    max_delta: f64,
    softened: usize,
}

impl MetricsBuilder {
    pub fn new(n_areas: usize, tau: f64) -> Self {
        MetricsBuilder {
            tau,
            steps: 0,
            cost: 0.0,
            wall_sum: 0.0,
            wall_max: 0.0,
            outside_steps: vec![0; n_areas],
            excursions: vec![0; n_areas],
            inside: vec![true; n_areas],
            violations: [0; 7],
            max_f: 0.0,
            max_delta: 0.0,
            softened: 0,
        }
    }

    pub fn push(&mut self, rec: &StepRecord) {
        self.steps += 1;
        self.cost += rec.stage_cost;
        self.wall_sum += rec.wall_time;
        self.wall_max = self.wall_max.max(rec.wall_time);
        for (i, a) in rec.state.areas.iter().enumerate().take(self.inside.len()) {
            let out = !(a.d_f.abs() <= FREQUENCY_LIMIT);
            if out {
                self.outside_steps[i] += 1;
                if self.inside[i] {
                    self.excursions[i] += 1;
                }
            }
            self.inside[i] = !out;
            self.max_f = self.max_f.max(a.d_f.abs());
            self.max_delta = self.max_delta.max(a.d_delta.abs());
        }
        for v in &rec.violations.violations {
            self.violations[v.quantity as usize] += 1;
        }
        self.softened += usize::from(rec.diagnostics.softened > 0);
    }

    pub fn finish(&self) -> MetricsReport {
        let bands = self
            .outside_steps
            .iter()
            .zip(&self.excursions)
            .map(|(&s, &e)| {
                let total = s as f64 * self.tau;
                BandMetrics {
                    total_outside: total,
                    average_outside: if e == 0 { 0.0 } else { total / e as f64 },
                    excursions: e,
                }
            })
            .collect();
        MetricsReport {
            steps: self.steps,
            cumulative_cost: self.cost,
            wall_time_mean: if self.steps == 0 {
                0.0
            } else {
                self.wall_sum / self.steps as f64
            },
            wall_time_max: self.wall_max,
            total_wall_time: self.wall_sum,
            bands,
            violations: self.violations,
            max_abs_frequency: self.max_f,
            max_abs_angle: self.max_delta,
            softened_steps: self.softened,
        }
    }
}

pub fn metrics(log: &RunLog, params: &NetworkParams) -> MetricsReport {
    let mut b = MetricsBuilder::new(params.n_areas(), params.tau);
    for rec in &log.records {
        b.push(rec);
    }
    let mut report = b.finish();
    report.total_wall_time = log.total_wall_time;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelVariant;
    use crate::dynamics::TurbineParams;
    use crate::model::{default_params, AreaInput, AreaState};
    use crate::mpc::{CentralizedMpc, ZeroController};
    use crate::topology::build_eea_topology;

    fn one_area(d_delta: f64, d_f: f64, e: f64) -> NetworkState {
        NetworkState {
            areas: vec![AreaState { d_delta, d_f, e }],
            ..Default::default()
        }
    }

    #[test]
    fn stage_cost_weights() {
        let cfg = MpcConfig::default();
        let zero_u = NetworkInput::zeros(1);
        assert_eq!(stage_cost(&one_area(0.0, 0.0, 0.0), &zero_u, &cfg), 0.0);
        assert_eq!(stage_cost(&one_area(1.0, 0.0, 0.0), &zero_u, &cfg), 100.0);
        let x = one_area(0.3, -0.02, 1.5);
        let x2 = one_area(0.6, -0.04, 3.0);
        assert!((stage_cost(&x2, &zero_u, &cfg) - 4.0 * stage_cost(&x, &zero_u, &cfg)).abs() < 1e-12);
        let u = NetworkInput {
            areas: vec![AreaInput {
                d_p_disp: 1.0,
                p_c: 2.0,
                p_d: 3.0,
            }],
        };
        assert_eq!(stage_cost(&one_area(0.0, 0.0, 0.0), &u, &cfg), 14.0);
    }

    fn record_with_frequency(k: usize, fs: &[f64]) -> StepRecord {
        StepRecord {
            k,
            input: NetworkInput::zeros(fs.len()),
            state: NetworkState {
                areas: fs
                    .iter()
                    .map(|&d_f| AreaState {
                        d_f,
                        ..Default::default()
                    })
                    .collect(),
                ..Default::default()
            },
            tie: vec![0.0; fs.len()],
            stage_cost: 1.0,
            cumulative_cost: (k + 1) as f64,
            wall_time: 0.0,
            violations: ViolationReport::default(),
            diagnostics: StepDiagnostics::default(),
        }
    }

    #[test]
    fn three_steps_outside_is_seven_and_a_half_seconds() {
        let mut b = MetricsBuilder::new(2, 2.5);
        let fs = [0.0, 0.05, 0.06, 0.01, -0.041, 0.0];
        for (k, &f) in fs.iter().enumerate() {
            b.push(&record_with_frequency(k, &[f, 0.0]));
        }
        let m = b.finish();
        assert_eq!(m.bands[0].total_outside, 7.5);
        assert_eq!(m.bands[0].excursions, 2);
        assert_eq!(m.bands[0].average_outside, 3.75);
        assert_eq!(m.bands[1], BandMetrics::default());
        assert_eq!(m.cumulative_cost, 6.0);
    }

    #[test]
    fn zero_world_stays_at_zero() {
        let topo = build_eea_topology();
        let params = default_params();
        let plant = Plant::new(ModelVariant::Linear, topo.clone(), params.clone());
        let signals = StepSignals::zeros(26, 5, 1440);
        let x0 = NetworkState::zeros(26);
        let cfg = MpcConfig::default();
        let mut mpc =
            CentralizedMpc::new(ModelVariant::Linear, &topo, &params, &TurbineParams::default(), cfg).unwrap();
        let setup = RunSetup {
            plant: &plant,
            signals: &signals,
            initial: &x0,
            steps: 5,
            weights: &cfg,
        };
        let log = run_closed_loop(setup, &mut mpc, &mut FrozenClock).unwrap();
        assert_eq!(log.len(), 5);
        for r in &log.records {
            assert!(r.state.to_vec().iter().all(|&v| v == 0.0));
            assert!(r.input.to_vec().iter().all(|&v| v == 0.0));
            assert_eq!(r.stage_cost, 0.0);
        }
        assert_eq!(log.cumulative_cost, 0.0);
    }

    #[test]
    fn single_step_cumulative_is_stage_cost() {
        let topo = build_eea_topology();
        let params = default_params();
        let plant = Plant::new(ModelVariant::Linear, topo, params.clone());
        let mut signals = StepSignals::zeros(26, 3, 1440);
        signals.areas[4].load_meas[0] = 0.5;
        let x0 = initial_state(ModelVariant::Linear, &params, None).unwrap();
        let cfg = MpcConfig::default();
        let setup = RunSetup {
            plant: &plant,
            signals: &signals,
            initial: &x0,
            steps: 1,
            weights: &cfg,
        };
        let log = run_closed_loop(setup, &mut ZeroController::default(), &mut FrozenClock).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.cumulative_cost, log.records[0].stage_cost);
        assert!(log.records[0].state.areas[4].d_f < 0.0);
    }

    #[test]
    fn rejects_runs_longer_than_signals() {
        let topo = build_eea_topology();
        let params = default_params();
        let plant = Plant::new(ModelVariant::Linear, topo, params);
        let signals = StepSignals::zeros(26, 3, 1440);
        let x0 = NetworkState::zeros(26);
        let cfg = MpcConfig::default();
        let setup = RunSetup {
            plant: &plant,
            signals: &signals,
            initial: &x0,
            steps: 4,
            weights: &cfg,
        };
        let err = run_closed_loop(setup, &mut ZeroController::default(), &mut FrozenClock).unwrap_err();
        assert_eq!(err, SimError::SignalsTooShort { steps: 4, available: 3 });
    }

    #[test]
    fn controller_must_support_plant() {
        let topo = build_eea_topology();
        let params = default_params();
        let plant = Plant::new(ModelVariant::Augmented, topo.clone(), params.clone());
        let signals = StepSignals::zeros(26, 3, 1440);
        let x0 = NetworkState::zeros_for(ModelVariant::Augmented, 26);
        let cfg = MpcConfig::default();
        let mut mpc =
            CentralizedMpc::new(ModelVariant::Linear, &topo, &params, &TurbineParams::default(), cfg).unwrap();
        let setup = RunSetup {
            plant: &plant,
            signals: &signals,
            initial: &x0,
            steps: 1,
            weights: &cfg,
        };
        assert!(matches!(
            run_closed_loop(setup, &mut mpc, &mut FrozenClock),
            Err(SimError::Incompatible { .. })
        ));
    }

    struct NanController;

    impl Controller for NanController {
        fn name(&self) -> &str {
            "nan"
        }
        fn supports(&self, _: ModelVariant) -> bool {
            true
        }
        fn observe(
            &mut self,
            k: usize,
            s: &NetworkState,
            _: &StepSignals,
        ) -> Result<crate::mpc::ControlOutput, MpcError> {
            let mut input = NetworkInput::zeros(s.n_areas());
            if k == 2 {
                input.areas[0].p_c = f64::NAN;
            }
            Ok(crate::mpc::ControlOutput {
                input,
                diagnostics: StepDiagnostics::default(),
            })
        }
    }

    #[test]
    fn non_finite_input_aborts_with_step() {
        let topo = build_eea_topology();
        let params = default_params();
        let plant = Plant::new(ModelVariant::Linear, topo, params);
        let signals = StepSignals::zeros(26, 5, 1440);
        let x0 = NetworkState::zeros(26);
        let cfg = MpcConfig::default();
        let setup = RunSetup {
            plant: &plant,
            signals: &signals,
            initial: &x0,
            steps: 5,
            weights: &cfg,
        };
        let err = run_closed_loop(setup, &mut NanController, &mut FrozenClock).unwrap_err();
        assert_eq!(err, SimError::NonFiniteInput { k: 2 });
    }
}
