//! Domain types shared by the whole benchmark: area identifiers, physical
//! parameters, per-area state/input/exogenous vectors and the operating
//! constraint boxes.
//!
//! Units follow the benchmark conventions: angles in degrees, frequency in
//! Hz, power in GW, stored energy in GWh and time in seconds. States are never
//! clamped by these types; [`check_violations`] reports excursions so that
//! controllers which break the limits can still be simulated and compared.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::dynamics::NetworkState;

/// Number of electrical areas in the European benchmark network.
pub const EEA_AREAS: usize = 26;

/// ISO codes of the benchmark areas, in tie-line table order.
pub const ISO_CODES: [&str; EEA_AREAS] = [
    "AT", "BE", "BG", "HR", "CZ", "DK", "EE", "FI", "FR", "DE", "GR", "HU", "IE", "IT", "LV", "LT", "NL", "NO", "PL",
    "PT", "RO", "SK", "SI", "ES", "SE", "CH",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected} areas, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Index of an electrical area, bijective with its ISO code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AreaId(u8);

impl AreaId {
    pub fn new(index: usize) -> Option<Self> {
        (index < EEA_AREAS).then_some(AreaId(index as u8))
    }

    pub fn from_iso(code: &str) -> Option<Self> {
        ISO_CODES
            .iter()
            .position(|c| c.eq_ignore_ascii_case(code.trim()))
            .map(|i| AreaId(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn iso_code(self) -> &'static str {
        ISO_CODES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = AreaId> {
        (0..EEA_AREAS as u8).map(AreaId)
    }
}

impl fmt::Display for AreaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.iso_code())
    }
}

/// Physical constants of one area's equivalent machine and storage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaParams {
    /// Rotating-mass time constant [s].
    pub t_p: f64,
    /// Rotating-mass gain [Hz/GW].
    pub k_p: f64,
    /// Storage charging efficiency.
    pub eta_c: f64,
    /// Storage discharging efficiency.
    pub eta_d: f64,
    /// Total dispatchable capacity [GW].
    pub p_disp_max: f64,
    /// Storage capacity [GWh], numerically equal to `p_disp_max`.
    pub e_max: f64,
}

impl AreaParams {
    /// Same parameters with the dispatchable (and storage) capacity replaced.
    pub fn with_capacity(self, p_disp_max: f64) -> Self {
        AreaParams {
            p_disp_max,
            e_max: p_disp_max,
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("t_p", self.t_p),
            ("k_p", self.k_p),
            ("eta_c", self.eta_c),
            ("eta_d", self.eta_d),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        if !(self.p_disp_max.is_finite() && self.p_disp_max >= 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "p_disp_max",
                value: self.p_disp_max,
            });
        }
        if self.e_max != self.p_disp_max {
            return Err(ModelError::InvalidParameter {
                name: "e_max",
                value: self.e_max,
            });
        }
        Ok(())
    }
}

/// Network-wide parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    /// Sampling time [s].
    pub tau: f64,
    pub areas: Vec<AreaParams>,
    /// Angle operating point [deg].
    pub delta0: f64,
    /// Frequency operating point [Hz].
    pub f0: f64,
    /// Simulation steps per hour of input data.
    pub steps_per_hour: usize,
}

impl NetworkParams {
    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    /// Replaces every area's capacity, typically with values from a scenario.
    pub fn with_capacities(mut self, capacities: &[f64]) -> Result<Self, ModelError> {
        if capacities.len() != self.areas.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.areas.len(),
                found: capacities.len(),
            });
        }
        for (area, &p) in self.areas.iter_mut().zip(capacities) {
            if !(p.is_finite() && p >= 0.0) {
                return Err(ModelError::InvalidParameter {
                    name: "p_disp_max",
                    value: p,
                });
            }
            *area = area.with_capacity(p);
        }
        Ok(self)
    }

    /// Keeps only the first `n` areas (toy networks in tests and examples).
    pub fn truncated(mut self, n: usize) -> Self {
        self.areas.truncate(n);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(ModelError::InvalidParameter {
                name: "tau",
                value: self.tau,
            });
        }
        if !(self.delta0 > 0.0 && self.delta0 < 90.0) {
            return Err(ModelError::InvalidParameter {
                name: "delta0",
                value: self.delta0,
            });
        }
        if self.steps_per_hour == 0 {
            return Err(ModelError::InvalidParameter {
                name: "steps_per_hour",
                value: 0.0,
            });
        }
        self.areas.iter().try_for_each(AreaParams::validate)
    }
}

/// Benchmark parameter set: τ = 2.5 s, T_p = 25 s, K_p = 0.05 Hz/GW,
/// η_c = 0.9, η_d = 1.1 for all 26 areas. Capacities are left at zero until a
/// scenario supplies them.
pub fn default_params() -> NetworkParams {
    let area = AreaParams {
        t_p: 25.0,
        k_p: 0.05,
        eta_c: 0.9,
        eta_d: 1.1,
        p_disp_max: 0.0,
        e_max: 0.0,
    };
    NetworkParams {
        tau: 2.5,
        areas: alloc::vec![area; EEA_AREAS],
        delta0: 30.0,
        f0: 50.0,
        steps_per_hour: 1440,
    }
}

/// State of one area: angle deviation [deg], frequency deviation [Hz] and
/// stored energy [GWh].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AreaState {
    pub d_delta: f64,
    pub d_f: f64,
    pub e: f64,
}

/// Control input of one area [GW].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AreaInput {
    pub d_p_disp: f64,
    pub p_c: f64,
    pub p_d: f64,
}

impl AreaInput {
    pub fn to_array(self) -> [f64; 3] {
        [self.d_p_disp, self.p_c, self.p_d]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        AreaInput {
            d_p_disp: v[0],
            p_c: v[1],
            p_d: v[2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_p_disp.is_finite() && self.p_c.is_finite() && self.p_d.is_finite()
    }
}

/// Exogenous deviations of one area [GW]. Tie-line power is not stored here:
/// it follows from the angles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AreaExogenous {
    pub d_p_load: f64,
    pub d_p_ren: f64,
}

/// Inputs of every area, indexed by area.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkInput {
    pub areas: Vec<AreaInput>,
}

impl NetworkInput {
    pub fn zeros(n_areas: usize) -> Self {
        NetworkInput {
            areas: alloc::vec![AreaInput::default(); n_areas],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.areas.iter().all(AreaInput::is_finite)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.areas.iter().flat_map(|a| a.to_array()).collect()
    }

    pub fn from_vec(v: &[f64]) -> Self {
        NetworkInput {
            areas: v.chunks_exact(3).map(AreaInput::from_slice).collect(),
        }
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Bounds { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Signed excursion outside the box: positive above `hi`, negative below
    /// `lo`, zero inside.
    pub fn violation(&self, x: f64) -> f64 {
        if x > self.hi {
            x - self.hi
        } else if x < self.lo {
            x - self.lo
        } else {
            0.0
        }
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

/// Operating limits of one area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintSet {
    pub d_delta: Bounds,
    pub d_f: Bounds,
    pub e: Bounds,
    pub d_p_disp: Bounds,
    pub p_c: Bounds,
    pub p_d: Bounds,
    /// Limits on the total dispatchable production (augmented model only).
    pub p_disp_total: Bounds,
}

pub const ANGLE_LIMIT: f64 = 30.0;
pub const FREQUENCY_LIMIT: f64 = 0.04;

/// Operating limits for an area. Inputs may move the full capacity within one
/// hour, i.e. `p_disp_max / 1440` per step.
pub fn constraint_set(params: &AreaParams) -> Result<ConstraintSet, ModelError> {
    let p = params.p_disp_max;
    if !(p.is_finite() && p >= 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "p_disp_max",
            value: p,
        });
    }
    let rate = p / 1440.0;
    Ok(ConstraintSet {
        d_delta: Bounds::new(-ANGLE_LIMIT, ANGLE_LIMIT),
        d_f: Bounds::new(-FREQUENCY_LIMIT, FREQUENCY_LIMIT),
        e: Bounds::new(0.0, params.e_max),
        d_p_disp: Bounds::new(-rate, rate),
        p_c: Bounds::new(0.0, rate),
        p_d: Bounds::new(0.0, rate),
        p_disp_total: Bounds::new(0.0, p),
    })
}

pub fn constraint_sets(params: &NetworkParams) -> Result<Vec<ConstraintSet>, ModelError> {
    params.areas.iter().map(constraint_set).collect()
}

/// Quantity that a violation refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Angle,
    Frequency,
    Energy,
    Dispatch,
    Charge,
    Discharge,
    TotalDispatch,
}

impl Quantity {
    pub const ALL: [Quantity; 7] = [
        Quantity::Angle,
        Quantity::Frequency,
        Quantity::Energy,
        Quantity::Dispatch,
        Quantity::Charge,
        Quantity::Discharge,
        Quantity::TotalDispatch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Angle => "angle",
            Quantity::Frequency => "frequency",
            Quantity::Energy => "energy",
            Quantity::Dispatch => "dispatch",
            Quantity::Charge => "charge",
            Quantity::Discharge => "discharge",
            Quantity::TotalDispatch => "total_dispatch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub area: usize,
    pub quantity: Quantity,
    /// Signed excursion, see [`Bounds::violation`].
    pub amount: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn count(&self, quantity: Quantity) -> usize {
        self.violations.iter().filter(|v| v.quantity == quantity).count()
    }
}

/// Lists every bound that `state` or `input` exceeds. The total-dispatch
/// limit is only checked when the state carries the augmented fields.
pub fn check_violations(
    state: &NetworkState,
    input: &NetworkInput,
    sets: &[ConstraintSet],
) -> Result<ViolationReport, ModelError> {
    let n = sets.len();
    for found in [state.areas.len(), input.areas.len()] {
        if found != n {
            return Err(ModelError::DimensionMismatch { expected: n, found });
        }
    }
    let mut report = ViolationReport::default();
    let mut push = |area: usize, quantity: Quantity, bounds: &Bounds, x: f64| {
        let amount = bounds.violation(x);
        if amount != 0.0 || x.is_nan() {
            report.violations.push(Violation {
                area,
                quantity,
                amount: if x.is_nan() { f64::NAN } else { amount },
            });
        }
    };
    for (i, set) in sets.iter().enumerate() {
        let x = &state.areas[i];
        let u = &input.areas[i];
        push(i, Quantity::Angle, &set.d_delta, x.d_delta);
        push(i, Quantity::Frequency, &set.d_f, x.d_f);
        push(i, Quantity::Energy, &set.e, x.e);
        push(i, Quantity::Dispatch, &set.d_p_disp, u.d_p_disp);
        push(i, Quantity::Charge, &set.p_c, u.p_c);
        push(i, Quantity::Discharge, &set.p_d, u.p_d);
        if let Some(aug) = &state.augmented {
            push(i, Quantity::TotalDispatch, &set.p_disp_total, aug[i].p_disp);
        }
    }
    Ok(report)
}
