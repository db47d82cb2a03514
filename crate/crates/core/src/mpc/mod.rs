//! Receding-horizon controllers.
//!
//! The centralized controller solves one sparse QP over the whole network;
//! the decentralized baseline solves one small QP per area with the tie
//! power frozen at its measured value.

mod centralized;
mod decentralized;
mod horizon;
pub mod prediction;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::dynamics::{DynamicsError, ModelVariant, NetworkState};
use crate::model::{AreaExogenous, ModelError, NetworkInput};
use crate::qp::{CscMatrix, QpError, QpSettings, QpStatus, QuadraticProgram, Triplets};
use crate::signals::StepSignals;

pub use centralized::{centralized_step, CentralizedMpc};
pub use decentralized::{decentralized_step, DecentralizedMpc, LocalMpc, LocalTask};
pub use horizon::PlanResult;
pub use prediction::{prediction_variant, PredictionModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("the {} model cannot be used for prediction", .0.name())]
    UnsupportedVariant(ModelVariant),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error("step {k} is outside the {len} available signal steps")]
    SignalsExhausted { k: usize, len: usize },
    #[error("softened problem did not solve (status {0:?})")]
    SoftenedFailed(QpStatus),
    #[error("controller returned a non-finite input")]
    NonFiniteInput,
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Model(ModelError),
    #[error(transparent)]
    Dynamics(DynamicsError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// State weights for `[Δδ, Δf, e]`.
    pub r: [f64; 3],
    /// Input weights for `[ΔP_disp, P_c, P_d]`.
    pub q: [f64; 3],
    pub qp: QpSettings,
    /// Solve the softened problem every step instead of only as a fallback.
    pub soft_constraints: bool,
    /// Quadratic penalty on state-box slacks.
    pub slack_weight: f64,
    pub warm_start: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 30,
            r: [100.0, 10.0, 1.0],
            q: [1.0, 1.0, 1.0],
            qp: QpSettings::default(),
            soft_constraints: false,
            slack_weight: 1e6,
            warm_start: true,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<(), MpcError> {
        if self.horizon == 0 {
            return Err(MpcError::Config("horizon must be at least 1"));
        }
        if !self.r.iter().chain(&self.q).all(|w| w.is_finite() && *w >= 0.0) {
            return Err(MpcError::Config("weights must be finite and nonnegative"));
        }
        if !(self.slack_weight.is_finite() && self.slack_weight > 0.0) {
            return Err(MpcError::Config("slack weight must be positive"));
        }
        if !(self.qp.tol_prim > 0.0 && self.qp.tol_dual > 0.0) {
            return Err(MpcError::Config("solver tolerances must be positive"));
        }
        Ok(())
    }
}

/// Disturbances over the horizon, one entry per area and stage.
#[derive(Clone, Debug, PartialEq)]
pub struct ExoWindow {
    pub stages: Vec<Vec<AreaExogenous>>,
}

impl ExoWindow {
    pub fn zeros(n_areas: usize, horizon: usize) -> Self {
        ExoWindow {
            stages: vec![vec![AreaExogenous::default(); n_areas]; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Stage `j` (0-based) as `[load, ren]` per area.
    pub fn flat(&self, j: usize) -> Vec<f64> {
        self.stages[j].iter().flat_map(|w| [w.d_p_load, w.d_p_ren]).collect()
    }
}

/// Stage 1 uses the measurement at `k`; stages `j ≥ 2` use the forecast at
/// `k + j − 1`, holding the last available forecast.
pub fn splice_exogenous(k: usize, signals: &StepSignals, horizon: usize) -> Result<ExoWindow, MpcError> {
    let len = signals.len();
    if k >= len {
        return Err(MpcError::SignalsExhausted { k, len });
    }
    let mut stages = Vec::with_capacity(horizon);
    for j in 1..=horizon {
        stages.push(if j == 1 {
            signals.measured(k)
        } else {
            signals.forecast((k + j - 1).min(len - 1))
        });
    }
    Ok(ExoWindow { stages })
}

/// Variable positions of the sparse multiple-shooting QP.
///
/// Order: states `x(1..N)`, inputs `u(0..N−1)`, and in the softened
/// problem the slacks `s(1..N)`, with the predicted state `x = v + s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QpLayout {
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    pub soft: bool,
}

impl QpLayout {
    pub fn n_vars(&self) -> usize {
        let base = self.horizon * (self.nx + self.nu);
        if self.soft {
            base + self.horizon * self.nx
        } else {
            base
        }
    }

    pub fn n_eq(&self) -> usize {
        self.horizon * self.nx
    }

    /// First index of `x(j)`, `1 ≤ j ≤ N`.
    pub fn x(&self, j: usize) -> usize {
        (j - 1) * self.nx
    }

    /// First index of `u(j)`, `0 ≤ j < N`.
    pub fn u(&self, j: usize) -> usize {
        self.horizon * self.nx + j * self.nu
    }

    pub fn s(&self, j: usize) -> usize {
        self.horizon * (self.nx + self.nu) + (j - 1) * self.nx
    }

    /// Predicted states `x(1..N)` from a solution vector.
    pub fn states(&self, z: &[f64]) -> Vec<f64> {
        let mut out = z[..self.horizon * self.nx].to_vec();
        if self.soft {
            let s0 = self.s(1);
            for (k, v) in out.iter_mut().enumerate() {
                *v += z[s0 + k];
            }
        }
        out
    }

    pub fn inputs<'a>(&self, z: &'a [f64]) -> &'a [f64] {
        &z[self.u(0)..self.u(0) + self.horizon * self.nu]
    }
}

/// Right-hand side of the dynamics equalities: `E w(j)`, plus `A x_k` on
/// the first stage.
pub fn mpc_rhs(model: &PredictionModel, x_k: &[f64], window: &ExoWindow) -> Vec<f64> {
    let nx = model.nx;
    let mut b = vec![0.0; window.horizon() * nx];
    for j in 0..window.horizon() {
        let w = window.flat(j);
        model.e.mul_vec_acc(&w, &mut b[j * nx..(j + 1) * nx]);
    }
    model.a.mul_vec_acc(x_k, &mut b[..nx]);
    b
}

/// Sparse QP whose objective equals `Σ_{j=1}^{N} x(j)ᵀR x(j) + u(j−1)ᵀQ u(j−1)`
/// (plus the slack penalty when `slack_weight` is given).
pub fn build_mpc_qp(
    model: &PredictionModel,
    x_k: &[f64],
    window: &ExoWindow,
    slack_weight: Option<f64>,
) -> Result<QuadraticProgram, MpcError> {
    if x_k.len() != model.nx {
        return Err(MpcError::DimensionMismatch {
            what: "initial state",
            expected: model.nx,
            found: x_k.len(),
        });
    }
    if window.stages.iter().any(|s| s.len() != model.n_areas) {
        return Err(MpcError::DimensionMismatch {
            what: "exogenous window",
            expected: model.n_areas,
            found: window
                .stages
                .iter()
                .map(Vec::len)
                .find(|&l| l != model.n_areas)
                .unwrap_or(0),
        });
    }
    let layout = QpLayout {
        horizon: window.horizon(),
        nx: model.nx,
        nu: model.nu,
        soft: slack_weight.is_some(),
    };
    let (h, a, lb, ub) = qp_structure(model, &layout, slack_weight.unwrap_or(0.0));
    let b = mpc_rhs(model, x_k, window);
    let g = vec![0.0; layout.n_vars()];
    Ok(QuadraticProgram::new(h, g, a, b, lb, ub)?)
}

fn qp_structure(
    model: &PredictionModel,
    l: &QpLayout,
    slack_weight: f64,
) -> (CscMatrix, CscMatrix, Vec<f64>, Vec<f64>) {
    let (nx, nu, n) = (l.nx, l.nu, l.horizon);
    let nv = l.n_vars();
    let mut h = Triplets::new(nv, nv);
    let mut a = Triplets::new(l.n_eq(), nv);
    let mut lb = vec![f64::NEG_INFINITY; nv];
    let mut ub = vec![f64::INFINITY; nv];

    for j in 1..=n {
        for r in 0..nx {
            let (xv, w) = (l.x(j) + r, 2.0 * model.r[r]);
            h.push(xv, xv, w);
            if l.soft {
                let sv = l.s(j) + r;
                h.push(xv, sv, w);
                h.push(sv, xv, w);
                h.push(sv, sv, w + 2.0 * slack_weight);
            }
            lb[xv] = model.x_lb[r];
            ub[xv] = model.x_ub[r];
        }
        for c in 0..nu {
            let uv = l.u(j - 1) + c;
            h.push(uv, uv, 2.0 * model.q[c]);
            lb[uv] = model.u_lb[c];
            ub[uv] = model.u_ub[c];
        }
        let row0 = (j - 1) * nx;
        for r in 0..nx {
            a.push(row0 + r, l.x(j) + r, 1.0);
            if l.soft {
                a.push(row0 + r, l.s(j) + r, 1.0);
            }
        }
        if j >= 2 {
            for (r, c, v) in model.a.entries() {
                a.push(row0 + r, l.x(j - 1) + c, -v);
                if l.soft {
                    a.push(row0 + r, l.s(j - 1) + c, -v);
                }
            }
        }
        for (r, c, v) in model.b.entries() {
            a.push(row0 + r, l.u(j - 1) + c, -v);
        }
    }
    (h.to_csc(), a.to_csc(), lb, ub)
}

/// Outcome of simulating an input sequence in a prediction model.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanEvaluation {
    pub cost: f64,
    pub states: Vec<f64>,
    pub state_violation: f64,
    pub input_violation: f64,
}

impl PlanEvaluation {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.state_violation <= tol && self.input_violation <= tol
    }
}

/// Cost of `inputs` (`N · nu` values) from `x_k` over `window`.
pub fn evaluate_plan(
    model: &PredictionModel,
    x_k: &[f64],
    window: &ExoWindow,
    inputs: &[f64],
) -> Result<PlanEvaluation, MpcError> {
    let n = window.horizon();
    if inputs.len() != n * model.nu {
        return Err(MpcError::DimensionMismatch {
            what: "plan",
            expected: n * model.nu,
            found: inputs.len(),
        });
    }
    let mut x = x_k.to_vec();
    let mut eval = PlanEvaluation {
        cost: 0.0,
        states: Vec::with_capacity(n * model.nx),
        state_violation: 0.0,
        input_violation: 0.0,
    };
    for j in 0..n {
        let u = &inputs[j * model.nu..(j + 1) * model.nu];
        x = model.step(&x, u, &window.flat(j));
        eval.cost += model.stage_cost(&x, u);
        eval.state_violation = eval.state_violation.max(model.state_violation(&x));
        eval.input_violation = eval.input_violation.max(model.input_violation(u));
        eval.states.extend_from_slice(&x);
    }
    Ok(eval)
}

/// Per-step report of a controller.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Optimal value of the open-loop problem(s).
    pub open_loop_cost: f64,
    pub iterations: usize,
    pub factorizations: usize,
    /// Worst solver status among the subproblems.
    pub status: Option<QpStatus>,
    /// Number of subproblems that fell back to softened state constraints.
    pub softened: usize,
    pub polished: bool,
    /// Planned inputs `u(0..N−1)` over the whole network, `N · nu` values.
    pub plan: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlOutput {
    pub input: NetworkInput,
    pub diagnostics: StepDiagnostics,
}

/// Contract every controller fulfils. `observe` sees the state and the
/// signal record; it must not look at measurements beyond step `k`.
pub trait Controller {
    fn name(&self) -> &str;

    /// Whether the controller can drive a plant of this variant.
    fn supports(&self, plant: ModelVariant) -> bool;

    fn observe(&mut self, k: usize, state: &NetworkState, signals: &StepSignals) -> Result<ControlOutput, MpcError>;
}

/// Applies no control at all.
#[derive(Clone, Debug, Default)]
pub struct ZeroController {
    pub n_areas: usize,
}

impl Controller for ZeroController {
    fn name(&self) -> &str {
        "zero"
    }

    fn supports(&self, _plant: ModelVariant) -> bool {
        true
    }

    fn observe(&mut self, _k: usize, state: &NetworkState, _signals: &StepSignals) -> Result<ControlOutput, MpcError> {
        Ok(ControlOutput {
            input: NetworkInput::zeros(state.n_areas()),
            diagnostics: StepDiagnostics::default(),
        })
    }
}

pub(crate) fn worse(a: Option<QpStatus>, b: QpStatus) -> Option<QpStatus> {
    let rank = |s: QpStatus| match s {
        QpStatus::Optimal => 0,
        QpStatus::MaxIter => 1,
        QpStatus::Unbounded => 2,
        QpStatus::Infeasible => 3,
    };
    match a {
        Some(s) if rank(s) >= rank(b) => Some(s),
        _ => Some(b),
    }
}
