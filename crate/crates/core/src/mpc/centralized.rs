use crate::dynamics::{ModelVariant, NetworkState, TurbineParams};
use crate::model::{NetworkInput, NetworkParams};
use crate::signals::StepSignals;
use crate::topology::Topology;

use super::horizon::{HorizonSolver, PlanResult};
use super::prediction::{prediction_variant, PredictionModel};
use super::{splice_exogenous, ControlOutput, Controller, ExoWindow, MpcConfig, MpcError, StepDiagnostics};

/// Network-wide MPC with tie-line coupling inside the prediction model.
pub struct CentralizedMpc {
    inner: HorizonSolver,
}

impl CentralizedMpc {
    /// Controller for a plant of variant `plant`.
    pub fn new(
        plant: ModelVariant,
        topo: &Topology,
        params: &NetworkParams,
        turbine: &TurbineParams,
        cfg: MpcConfig,
    ) -> Result<Self, MpcError> {
        let model = PredictionModel::new(prediction_variant(plant), topo, params, turbine, &cfg)?;
        Ok(CentralizedMpc {
            inner: HorizonSolver::new(model, cfg)?,
        })
    }

    pub fn model(&self) -> &PredictionModel {
        &self.inner.model
    }

    pub fn config(&self) -> &MpcConfig {
        &self.inner.cfg
    }

    pub fn plan(&mut self, x_k: &[f64], window: &ExoWindow) -> Result<PlanResult, MpcError> {
        self.inner.plan(x_k, window)
    }
}

pub(crate) fn state_vector(state: &NetworkState, model: &PredictionModel) -> Result<alloc::vec::Vec<f64>, MpcError> {
    if !state.fits(model.variant) && !(model.variant == ModelVariant::Linear && state.fits(ModelVariant::PwaEss)) {
        return Err(MpcError::UnsupportedVariant(model.variant));
    }
    let x = state.to_vec();
    if x.len() != model.nx {
        return Err(MpcError::DimensionMismatch {
            what: "state",
            expected: model.nx,
            found: x.len(),
        });
    }
    Ok(x)
}

impl Controller for CentralizedMpc {
    fn name(&self) -> &str {
        "centralized"
    }

    fn supports(&self, plant: ModelVariant) -> bool {
        prediction_variant(plant) == self.inner.model.variant
    }

    fn observe(&mut self, k: usize, state: &NetworkState, signals: &StepSignals) -> Result<ControlOutput, MpcError> {
        let x = state_vector(state, &self.inner.model)?;
        let window = splice_exogenous(k, signals, self.inner.cfg.horizon)?;
        let plan = self.inner.plan(&x, &window)?;
        Ok(ControlOutput {
            input: NetworkInput::from_vec(&plan.u0),
            diagnostics: StepDiagnostics {
                open_loop_cost: plan.cost,
                iterations: plan.iterations,
                factorizations: plan.factorizations,
                status: Some(plan.status),
                softened: usize::from(plan.softened),
                polished: plan.polished,
                plan: plan.inputs,
            },
        })
    }
}

/// One-off centralized step for the variant that `state` carries.
pub fn centralized_step(
    k: usize,
    state: &NetworkState,
    signals: &StepSignals,
    topo: &Topology,
    params: &NetworkParams,
    cfg: &MpcConfig,
) -> Result<ControlOutput, MpcError> {
    let variant = variant_of(state);
    let mut mpc = CentralizedMpc::new(variant, topo, params, &TurbineParams::default(), *cfg)?;
    mpc.observe(k, state, signals)
}

pub(crate) fn variant_of(state: &NetworkState) -> ModelVariant {
    if state.augmented.is_some() {
        ModelVariant::Augmented
    } else if state.turbine.is_some() {
        ModelVariant::Turbine
    } else {
        ModelVariant::Linear
    }
}
