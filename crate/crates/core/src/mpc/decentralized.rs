use alloc::vec;
use alloc::vec::Vec;

use crate::dynamics::{ModelVariant, NetworkState, TurbineParams};
use crate::model::{AreaExogenous, NetworkInput, NetworkParams};
use crate::signals::StepSignals;
use crate::topology::{tie_power, Topology};

use super::centralized::variant_of;
use super::horizon::{HorizonSolver, PlanResult};
use super::prediction::{prediction_variant, PredictionModel, INPUTS_PER_AREA};
use super::{splice_exogenous, worse, ControlOutput, Controller, ExoWindow, MpcConfig, MpcError, StepDiagnostics};

/// Single-area MPC that sees its neighbours only through the measured tie
/// power, held constant over the horizon.
pub struct LocalMpc {
    pub area: usize,
    inner: HorizonSolver,
}

/// Inputs of one local problem, independent of every other area.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTask {
    pub area: usize,
    pub x0: Vec<f64>,
    /// Local disturbances with the frozen tie power folded into the load.
    pub window: ExoWindow,
}

impl LocalMpc {
    pub fn solve(&mut self, task: &LocalTask) -> Result<PlanResult, MpcError> {
        self.inner.plan(&task.x0, &task.window)
    }

    pub fn model(&self) -> &PredictionModel {
        &self.inner.model
    }
}

pub struct DecentralizedMpc {
    locals: Vec<LocalMpc>,
    topo: Topology,
    variant: ModelVariant,
    horizon: usize,
}

impl DecentralizedMpc {
    pub fn new(
        plant: ModelVariant,
        topo: &Topology,
        params: &NetworkParams,
        turbine: &TurbineParams,
        cfg: MpcConfig,
    ) -> Result<Self, MpcError> {
        // a local model cannot integrate the exchange with its neighbours
        if plant == ModelVariant::Augmented {
            return Err(MpcError::UnsupportedVariant(plant));
        }
        let variant = prediction_variant(plant);
        let isolated = Topology::isolated(1);
        let locals = (0..topo.n_areas())
            .map(|i| {
                let local = NetworkParams {
                    areas: vec![params.areas[i]],
                    ..params.clone()
                };
                let model = PredictionModel::new(variant, &isolated, &local, turbine, &cfg)?;
                Ok(LocalMpc {
                    area: i,
                    inner: HorizonSolver::new(model, cfg)?,
                })
            })
            .collect::<Result<_, MpcError>>()?;
        Ok(DecentralizedMpc {
            locals,
            topo: topo.clone(),
            variant,
            horizon: cfg.horizon,
        })
    }

    pub fn locals_mut(&mut self) -> &mut [LocalMpc] {
        &mut self.locals
    }

    /// Builds the per-area problems for step `k`.
    pub fn prepare(&self, k: usize, state: &NetworkState, signals: &StepSignals) -> Result<Vec<LocalTask>, MpcError> {
        let window = splice_exogenous(k, signals, self.horizon)?;
        self.prepare_window(state, &window)
    }

    pub fn prepare_window(&self, state: &NetworkState, window: &ExoWindow) -> Result<Vec<LocalTask>, MpcError> {
        let model = self
            .locals
            .first()
            .map(|l| l.model())
            .ok_or(MpcError::Config("no areas"))?;
        let sx = model.states_per_area();
        if state.n_areas() != self.locals.len() {
            return Err(MpcError::DimensionMismatch {
                what: "state",
                expected: self.locals.len(),
                found: state.n_areas(),
            });
        }
        let fits =
            state.fits(self.variant) || (self.variant == ModelVariant::Linear && state.fits(ModelVariant::PwaEss));
        if !fits {
            return Err(MpcError::UnsupportedVariant(self.variant));
        }
        let x = state.to_vec();
        let tie = tie_power(&state.angles(), &self.topo).map_err(|e| MpcError::Dynamics(e.into()))?;
        Ok((0..self.locals.len())
            .map(|i| LocalTask {
                area: i,
                x0: x[i * sx..(i + 1) * sx].to_vec(),
                window: ExoWindow {
                    stages: window
                        .stages
                        .iter()
                        .map(|s| {
                            vec![AreaExogenous {
                                d_p_load: s[i].d_p_load + tie[i],
                                d_p_ren: s[i].d_p_ren,
                            }]
                        })
                        .collect(),
                },
            })
            .collect())
    }

    /// Assembles per-area results, ordered by area index.
    pub fn gather(&self, results: Vec<PlanResult>) -> ControlOutput {
        let n = results.len();
        let nu = INPUTS_PER_AREA;
        let mut u0 = Vec::with_capacity(n * nu);
        let mut plan = vec![0.0; self.horizon * n * nu];
        let mut diag = StepDiagnostics {
            polished: true,
            ..Default::default()
        };
        for (i, r) in results.iter().enumerate() {
            u0.extend_from_slice(&r.u0);
            for j in 0..self.horizon {
                let dst = j * n * nu + i * nu;
                plan[dst..dst + nu].copy_from_slice(&r.inputs[j * nu..(j + 1) * nu]);
            }
            diag.open_loop_cost += r.cost;
            diag.iterations += r.iterations;
            diag.factorizations += r.factorizations;
            diag.status = worse(diag.status, r.status);
            diag.softened += usize::from(r.softened);
            diag.polished &= r.polished;
        }
        diag.plan = plan;
        ControlOutput {
            input: NetworkInput::from_vec(&u0),
            diagnostics: diag,
        }
    }

    /// Sequential solve of all local problems for a given window.
    pub fn plan_window(&mut self, state: &NetworkState, window: &ExoWindow) -> Result<ControlOutput, MpcError> {
        let tasks = self.prepare_window(state, window)?;
        let results = self
            .locals
            .iter_mut()
            .zip(&tasks)
            .map(|(l, t)| l.solve(t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.gather(results))
    }
}

impl Controller for DecentralizedMpc {
    fn name(&self) -> &str {
        "decentralized"
    }

    fn supports(&self, plant: ModelVariant) -> bool {
        plant != ModelVariant::Augmented && prediction_variant(plant) == self.variant
    }

    fn observe(&mut self, k: usize, state: &NetworkState, signals: &StepSignals) -> Result<ControlOutput, MpcError> {
        let window = splice_exogenous(k, signals, self.horizon)?;
        self.plan_window(state, &window)
    }
}

/// One-off decentralized step for the variant that `state` carries.
pub fn decentralized_step(
    k: usize,
    state: &NetworkState,
    signals: &StepSignals,
    topo: &Topology,
    params: &NetworkParams,
    cfg: &MpcConfig,
) -> Result<ControlOutput, MpcError> {
    let mut mpc = DecentralizedMpc::new(variant_of(state), topo, params, &TurbineParams::default(), *cfg)?;
    mpc.observe(k, state, signals)
}
