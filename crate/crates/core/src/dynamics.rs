//! Forward-Euler network dynamics.
//!
//! Every step function is pure: it maps the state at `k` to the state at
//! `k + 1`. Tie-line power is always computed from the pre-step angle
//! snapshot, so per-area rows could be evaluated in any order.

use alloc::vec::Vec;
use core::f64::consts::PI;

use thiserror::Error;

use crate::model::{AreaExogenous, AreaInput, AreaParams, AreaState, NetworkInput, NetworkParams};
use crate::topology::{tie_power_into, Topology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("state lacks the fields required by the {0:?} model")]
    MissingFields(ModelVariant),
    #[error("turbine model requires tau <= {max} s, got {tau}")]
    SamplingTooCoarse { tau: f64, max: f64 },
    #[error("invalid turbine parameter `{0}`")]
    InvalidTurbine(&'static str),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Which plant equations advance the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    /// Linear storage model with separate charge/discharge inputs.
    Linear,
    /// Piecewise-affine storage driven by the net power `p_c − p_d`.
    PwaEss,
    /// Turbine and pump first-order lags; the inputs become commands.
    Turbine,
    /// Linear model plus integrated total dispatch and tie exchange.
    Augmented,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Linear,
        ModelVariant::PwaEss,
        ModelVariant::Turbine,
        ModelVariant::Augmented,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Linear => "linear",
            ModelVariant::PwaEss => "pwa_ess",
            ModelVariant::Turbine => "turbine",
            ModelVariant::Augmented => "augmented",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ModelVariant::ALL.into_iter().find(|v| v.name() == name)
    }

    /// States per area in the flattened state vector.
    pub fn states_per_area(self) -> usize {
        match self {
            ModelVariant::Linear | ModelVariant::PwaEss => 3,
            ModelVariant::Augmented => 5,
            ModelVariant::Turbine => 6,
        }
    }
}

/// Integrated production states of the augmented model.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AugmentedState {
    /// Total dispatchable production [GW].
    pub p_disp: f64,
    /// Integrated tie-line exchange.
    pub p_tie: f64,
}

/// Actuator outputs that become states in the turbine model [GW].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TurbineState {
    pub d_p_disp: f64,
    pub p_c: f64,
    pub p_d: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkState {
    pub areas: Vec<AreaState>,
    pub augmented: Option<Vec<AugmentedState>>,
    pub turbine: Option<Vec<TurbineState>>,
}

impl NetworkState {
    pub fn zeros(n_areas: usize) -> Self {
        NetworkState {
            areas: alloc::vec![AreaState::default(); n_areas],
            augmented: None,
            turbine: None,
        }
    }

    /// Zero state carrying exactly the fields required by `variant`.
    pub fn zeros_for(variant: ModelVariant, n_areas: usize) -> Self {
        let mut s = NetworkState::zeros(n_areas);
        match variant {
            ModelVariant::Augmented => s.augmented = Some(alloc::vec![AugmentedState::default(); n_areas]),
            ModelVariant::Turbine => s.turbine = Some(alloc::vec![TurbineState::default(); n_areas]),
            ModelVariant::Linear | ModelVariant::PwaEss => {}
        }
        s
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.areas.iter().map(|a| a.d_delta).collect()
    }

    pub fn is_finite(&self) -> bool {
        let base = self
            .areas
            .iter()
            .all(|a| a.d_delta.is_finite() && a.d_f.is_finite() && a.e.is_finite());
        let aug = self
            .augmented
            .iter()
            .flatten()
            .all(|a| a.p_disp.is_finite() && a.p_tie.is_finite());
        let tur = self
            .turbine
            .iter()
            .flatten()
            .all(|t| t.d_p_disp.is_finite() && t.p_c.is_finite() && t.p_d.is_finite());
        base && aug && tur
    }

    /// True when the optional fields match `variant`.
    pub fn fits(&self, variant: ModelVariant) -> bool {
        let n = self.areas.len();
        let aug_ok = self.augmented.as_ref().map(|a| a.len() == n);
        let tur_ok = self.turbine.as_ref().map(|t| t.len() == n);
        match variant {
            ModelVariant::Linear | ModelVariant::PwaEss => aug_ok.is_none() && tur_ok.is_none(),
            ModelVariant::Augmented => aug_ok == Some(true) && tur_ok.is_none(),
            ModelVariant::Turbine => tur_ok == Some(true) && aug_ok.is_none(),
        }
    }

    /// Flattens area by area: `[Δδ, Δf, e]`, followed by `[P_disp, P_tie]`
    /// (augmented) or `[ΔP_disp, P_c, P_d]` (turbine).
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for (i, a) in self.areas.iter().enumerate() {
            v.extend_from_slice(&[a.d_delta, a.d_f, a.e]);
            if let Some(aug) = &self.augmented {
                v.extend_from_slice(&[aug[i].p_disp, aug[i].p_tie]);
            }
            if let Some(tur) = &self.turbine {
                v.extend_from_slice(&[tur[i].d_p_disp, tur[i].p_c, tur[i].p_d]);
            }
        }
        v
    }

    pub fn from_vec(variant: ModelVariant, v: &[f64]) -> Result<Self, DynamicsError> {
        let nx = variant.states_per_area();
        if !v.len().is_multiple_of(nx) {
            return Err(DynamicsError::DimensionMismatch {
                what: "state vector",
                expected: nx * (v.len() / nx + 1),
                found: v.len(),
            });
        }
        let n = v.len() / nx;
        let mut s = NetworkState::zeros_for(variant, n);
        for (i, chunk) in v.chunks_exact(nx).enumerate() {
            s.areas[i] = AreaState {
                d_delta: chunk[0],
                d_f: chunk[1],
                e: chunk[2],
            };
            if let Some(aug) = &mut s.augmented {
                aug[i] = AugmentedState {
                    p_disp: chunk[3],
                    p_tie: chunk[4],
                };
            }
            if let Some(tur) = &mut s.turbine {
                tur[i] = TurbineState {
                    d_p_disp: chunk[3],
                    p_c: chunk[4],
                    p_d: chunk[5],
                };
            }
        }
        Ok(s)
    }
}

/// Time constants [s] and gains of the turbine / pump lags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TurbineParams {
    pub t_t: f64,
    pub t_c: f64,
    pub t_d: f64,
    pub k_t: f64,
    pub k_c: f64,
    pub k_d: f64,
}

impl Default for TurbineParams {
    /// Time constants at the largest admissible value (T_p / 10) with unit
    /// gains.
    fn default() -> Self {
        TurbineParams {
            t_t: 2.5,
            t_c: 2.5,
            t_d: 2.5,
            k_t: 1.0,
            k_c: 1.0,
            k_d: 1.0,
        }
    }
}

/// Largest sampling time usable with the turbine lags.
pub const TURBINE_MAX_TAU: f64 = 0.025;

impl TurbineParams {
    pub fn validate(&self, params: &NetworkParams) -> Result<(), DynamicsError> {
        if params.tau > TURBINE_MAX_TAU {
            return Err(DynamicsError::SamplingTooCoarse {
                tau: params.tau,
                max: TURBINE_MAX_TAU,
            });
        }
        let min_tp = params.areas.iter().map(|a| a.t_p).fold(f64::INFINITY, f64::min);
        for (name, t) in [("t_t", self.t_t), ("t_c", self.t_c), ("t_d", self.t_d)] {
            if !(t > 0.0) || t > min_tp / 10.0 {
                return Err(DynamicsError::InvalidTurbine(name));
            }
        }
        for (name, k) in [("k_t", self.k_t), ("k_c", self.k_c), ("k_d", self.k_d)] {
            if !k.is_finite() {
                return Err(DynamicsError::InvalidTurbine(name));
            }
        }
        Ok(())
    }
}

fn check_dims(
    state: &NetworkState,
    input: &NetworkInput,
    exo: &[AreaExogenous],
    topo: &Topology,
    params: &NetworkParams,
) -> Result<(), DynamicsError> {
    let n = topo.n_areas();
    let dims = [
        ("state", state.areas.len()),
        ("input", input.areas.len()),
        ("exogenous", exo.len()),
        ("parameters", params.areas.len()),
    ];
    for (what, found) in dims {
        if found != n {
            return Err(DynamicsError::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite("state"));
    }
    if !input.is_finite() {
        return Err(DynamicsError::NonFinite("input"));
    }
    if !exo.iter().all(|w| w.d_p_load.is_finite() && w.d_p_ren.is_finite()) {
        return Err(DynamicsError::NonFinite("exogenous"));
    }
    Ok(())
}

/// Angle and frequency rows of one area; the storage row is left to the
/// caller.
#[inline]
fn swing_rows(x: &AreaState, u: &AreaInput, w: &AreaExogenous, tie: f64, p: &AreaParams, tau: f64) -> (f64, f64) {
    let d_delta = x.d_delta + tau * 2.0 * PI * x.d_f;
    let balance = u.d_p_disp - w.d_p_load + w.d_p_ren - tie - u.p_c + u.p_d;
    let d_f = (1.0 - tau / p.t_p) * x.d_f + tau * (p.k_p / p.t_p) * balance;
    (d_delta, d_f)
}

#[inline]
fn linear_storage(e: f64, u: &AreaInput, p: &AreaParams, tau: f64) -> f64 {
    e + tau * (p.eta_c * u.p_c - u.p_d / p.eta_d)
}

fn advance(
    state: &NetworkState,
    input: &NetworkInput,
    exo: &[AreaExogenous],
    topo: &Topology,
    params: &NetworkParams,
    storage: impl Fn(f64, &AreaInput, &AreaParams, f64) -> f64,
) -> Result<(NetworkState, Vec<f64>), DynamicsError> {
    let tie = tie_power(state, topo)?;
    let areas = state
        .areas
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (u, w, p) = (&input.areas[i], &exo[i], &params.areas[i]);
            let (d_delta, d_f) = swing_rows(x, u, w, tie[i], p, params.tau);
            AreaState {
                d_delta,
                d_f,
                e: storage(x.e, u, p, params.tau),
            }
        })
        .collect();
    Ok((
        NetworkState {
            areas,
            augmented: None,
            turbine: None,
        },
        tie,
    ))
}

fn tie_power(state: &NetworkState, topo: &Topology) -> Result<Vec<f64>, DynamicsError> {
    let mut tie = alloc::vec![0.0; topo.n_areas()];
    tie_power_into(&state.angles(), topo, &mut tie)?;
    Ok(tie)
}

/// One step of the baseline linear network model.
pub fn step_linear(
    state: &NetworkState,
    input: &NetworkInput,
    exo: &[AreaExogenous],
    topo: &Topology,
    params: &NetworkParams,
) -> Result<NetworkState, DynamicsError> {
    check_dims(state, input, exo, topo, params)?;
    Ok(advance(state, input, exo, topo, params, linear_storage)?.0)
}

/// Piecewise-affine storage update driven by the signed net storage power
/// (positive when charging). The charging branch owns `p_ess = 0`.
pub fn step_pwa_ess(e: f64, p_ess: f64, params: &AreaParams, tau: f64) -> f64 {
    if p_ess >= 0.0 {
        e + tau * params.eta_c * p_ess
    } else {
        e + tau * (1.0 / params.eta_d) * p_ess
    }
}

/// Network step with piecewise-affine storage. The net storage power is
/// `p_c − p_d`; the swing rows are those of the linear model.
pub fn step_network_pwa(
    state: &NetworkState,
    input: &NetworkInput,
    exo: &[AreaExogenous],
    topo: &Topology,
    params: &NetworkParams,
) -> Result<NetworkState, DynamicsError> {
    check_dims(state, input, exo, topo, params)?;
    let storage = |e: f64, u: &AreaInput, p: &AreaParams, tau: f64| step_pwa_ess(e, u.p_c - u.p_d, p, tau);
    Ok(advance(state, input, exo, topo, params, storage)?.0)
}

/// Linear model augmented with the total dispatch `P_disp` and the
/// integrated tie exchange `P_tie`.
pub fn step_augmented(
    state: &NetworkState,
    input: &NetworkInput,
    exo: &[AreaExogenous],
    topo: &Topology,
    params: &NetworkParams,
) -> Result<NetworkState, DynamicsError> {
    check_dims(state, input, exo, topo, params)?;
    let aug = match &state.augmented {
        Some(a) if a.len() == topo.n_areas() => a,
        _ => return Err(DynamicsError::MissingFields(ModelVariant::Augmented)),
    };
    let (mut next, tie) = advance(state, input, exo, topo, params, linear_storage)?;
    let tau = params.tau;
    next.augmented = Some(
        aug.iter()
            .zip(&input.areas)
            .zip(&tie)
            .map(|((a, u), t)| AugmentedState {
                p_disp: a.p_disp + tau * u.d_p_disp,
                p_tie: a.p_tie + tau * t,
            })
            .collect(),
    );
    Ok(next)
}

/// Turbine / pump model. `commands` carries `(u_disp, u_c, u_d)` in the
/// `(d_p_disp, p_c, p_d)` fields; the physical powers are states. The swing
/// and storage rows advance with the current actuator states.
pub fn step_turbine(
    state: &NetworkState,
    commands: &NetworkInput,
    exo: &[AreaExogenous],
    topo: &Topology,
    params: &NetworkParams,
    turbine: &TurbineParams,
) -> Result<NetworkState, DynamicsError> {
    turbine.validate(params)?;
    check_dims(state, commands, exo, topo, params)?;
    let act = match &state.turbine {
        Some(t) if t.len() == topo.n_areas() => t,
        _ => return Err(DynamicsError::MissingFields(ModelVariant::Turbine)),
    };
    let physical = NetworkInput {
        areas: act
            .iter()
            .map(|t| AreaInput {
                d_p_disp: t.d_p_disp,
                p_c: t.p_c,
                p_d: t.p_d,
            })
            .collect(),
    };
    let (mut next, _) = advance(state, &physical, exo, topo, params, linear_storage)?;
    let tau = params.tau;
    let lag = |x: f64, t: f64, k: f64, u: f64| (1.0 - tau / t) * x + tau * (k / t) * u;
    next.turbine = Some(
        act.iter()
            .zip(&commands.areas)
            .map(|(s, u)| TurbineState {
                d_p_disp: lag(s.d_p_disp, turbine.t_t, turbine.k_t, u.d_p_disp),
                p_c: lag(s.p_c, turbine.t_c, turbine.k_c, u.p_c),
                p_d: lag(s.p_d, turbine.t_d, turbine.k_d, u.p_d),
            })
            .collect(),
    );
    Ok(next)
}

/// Dispatch that covers the initial net load, never negative.
pub fn initial_dispatch(load0: f64, ren0: f64) -> f64 {
    (load0 - ren0).max(0.0)
}

/// Plant description used by the closed loop.
#[derive(Clone, Debug)]
pub struct Plant {
    pub variant: ModelVariant,
    pub topology: Topology,
    pub params: NetworkParams,
    pub turbine: TurbineParams,
}

impl Plant {
    pub fn new(variant: ModelVariant, topology: Topology, params: NetworkParams) -> Self {
        Plant {
            variant,
            topology,
            params,
            turbine: TurbineParams::default(),
        }
    }

    pub fn step(
        &self,
        state: &NetworkState,
        input: &NetworkInput,
        exo: &[AreaExogenous],
    ) -> Result<NetworkState, DynamicsError> {
        let (t, p) = (&self.topology, &self.params);
        match self.variant {
            ModelVariant::Linear => step_linear(state, input, exo, t, p),
            ModelVariant::PwaEss => step_network_pwa(state, input, exo, t, p),
            ModelVariant::Augmented => step_augmented(state, input, exo, t, p),
            ModelVariant::Turbine => step_turbine(state, input, exo, t, p, &self.turbine),
        }
    }

    /// Powers that physically act on the swing equation: the inputs
    /// themselves, or the actuator states in the turbine model.
    pub fn physical_input(&self, state: &NetworkState, input: &NetworkInput) -> NetworkInput {
        match (&self.variant, &state.turbine) {
            (ModelVariant::Turbine, Some(t)) => NetworkInput {
                areas: t
                    .iter()
                    .map(|s| AreaInput {
                        d_p_disp: s.d_p_disp,
                        p_c: s.p_c,
                        p_d: s.p_d,
                    })
                    .collect(),
            },
            _ => input.clone(),
        }
    }
}
