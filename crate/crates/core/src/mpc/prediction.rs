//! Linear prediction model `x⁺ = A x + B u + E w` in sparse form.
//!
//! Layout is area-major. Per area the state is `[Δδ, Δf, e]`, extended by
//! `[P_disp, P_tie]` (augmented) or `[ΔP_disp, P_c, P_d]` (turbine); the
//! input is `[ΔP_disp, P_c, P_d]` and the disturbance `[ΔP_load, ΔP_ren]`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dynamics::{ModelVariant, TurbineParams};
use crate::model::{constraint_set, NetworkParams};
use crate::qp::{CscMatrix, Triplets};
use crate::topology::Topology;

use super::{MpcConfig, MpcError};

pub const INPUTS_PER_AREA: usize = 3;
pub const DISTURBANCES_PER_AREA: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionModel {
    pub variant: ModelVariant,
    pub n_areas: usize,
    pub nx: usize,
    pub nu: usize,
    pub nw: usize,
    pub a: CscMatrix,
    pub b: CscMatrix,
    pub e: CscMatrix,
    pub x_lb: Vec<f64>,
    pub x_ub: Vec<f64>,
    pub u_lb: Vec<f64>,
    pub u_ub: Vec<f64>,
    /// Diagonal state weights.
    pub r: Vec<f64>,
    /// Diagonal input weights.
    pub q: Vec<f64>,
}

/// Variant the controller predicts with when the plant runs `plant`. The
/// piecewise-affine storage is simulate-only, so its controller uses the
/// linear model.
pub fn prediction_variant(plant: ModelVariant) -> ModelVariant {
    match plant {
        ModelVariant::PwaEss => ModelVariant::Linear,
        v => v,
    }
}

impl PredictionModel {
    pub fn new(
        variant: ModelVariant,
        topo: &Topology,
        params: &NetworkParams,
        turbine: &TurbineParams,
        cfg: &MpcConfig,
    ) -> Result<Self, MpcError> {
        if variant == ModelVariant::PwaEss {
            return Err(MpcError::UnsupportedVariant(variant));
        }
        let n = topo.n_areas();
        if params.areas.len() != n {
            return Err(MpcError::DimensionMismatch {
                what: "parameters",
                expected: n,
                found: params.areas.len(),
            });
        }
        if variant == ModelVariant::Turbine {
            turbine.validate(params).map_err(MpcError::Dynamics)?;
        }
        let sx = variant.states_per_area();
        let (nx, nu, nw) = (n * sx, n * INPUTS_PER_AREA, n * DISTURBANCES_PER_AREA);
        let tau = params.tau;
        let mut a = Triplets::new(nx, nx);
        let mut b = Triplets::new(nx, nu);
        let mut e = Triplets::new(nx, nw);
        let mut x_lb = Vec::with_capacity(nx);
        let mut x_ub = Vec::with_capacity(nx);
        let mut u_lb = Vec::with_capacity(nu);
        let mut u_ub = Vec::with_capacity(nu);
        let mut r = Vec::with_capacity(nx);
        let mut q = Vec::with_capacity(nu);

        for i in 0..n {
            let p = &params.areas[i];
            let set = constraint_set(p).map_err(MpcError::Model)?;
            let (d, f, en) = (i * sx, i * sx + 1, i * sx + 2);
            let (ud, uc, ux) = (3 * i, 3 * i + 1, 3 * i + 2);
            let c = tau * p.k_p / p.t_p;

            a.push(d, d, 1.0);
            a.push(d, f, tau * 2.0 * PI);
            a.push(f, f, 1.0 - tau / p.t_p);
            a.push(en, en, 1.0);
            for nb in topo.neighbors(i) {
                a.push(f, d, -c * nb.coefficient);
                a.push(f, nb.area * sx, c * nb.coefficient);
            }
            e.push(f, 2 * i, -c);
            e.push(f, 2 * i + 1, c);

            // columns that carry the physical powers: inputs, or actuator
            // states in the turbine model
            match variant {
                ModelVariant::Turbine => {
                    let (sd, sc, sdis) = (i * sx + 3, i * sx + 4, i * sx + 5);
                    a.push(f, sd, c);
                    a.push(f, sc, -c);
                    a.push(f, sdis, c);
                    a.push(en, sc, tau * p.eta_c);
                    a.push(en, sdis, -tau / p.eta_d);
                    for (s, u, t, k) in [
                        (sd, ud, turbine.t_t, turbine.k_t),
                        (sc, uc, turbine.t_c, turbine.k_c),
                        (sdis, ux, turbine.t_d, turbine.k_d),
                    ] {
                        a.push(s, s, 1.0 - tau / t);
                        b.push(s, u, tau * k / t);
                    }
                }
                _ => {
                    b.push(f, ud, c);
                    b.push(f, uc, -c);
                    b.push(f, ux, c);
                    b.push(en, uc, tau * p.eta_c);
                    b.push(en, ux, -tau / p.eta_d);
                }
            }
            if variant == ModelVariant::Augmented {
                let (pd, pt) = (i * sx + 3, i * sx + 4);
                a.push(pd, pd, 1.0);
                b.push(pd, ud, tau);
                a.push(pt, pt, 1.0);
                for nb in topo.neighbors(i) {
                    a.push(pt, d, tau * nb.coefficient);
                    a.push(pt, nb.area * sx, -tau * nb.coefficient);
                }
            }

            x_lb.extend_from_slice(&[set.d_delta.lo, set.d_f.lo, set.e.lo]);
            x_ub.extend_from_slice(&[set.d_delta.hi, set.d_f.hi, set.e.hi]);
            r.extend_from_slice(&cfg.r);
            match variant {
                ModelVariant::Augmented => {
                    x_lb.extend_from_slice(&[set.p_disp_total.lo, f64::NEG_INFINITY]);
                    x_ub.extend_from_slice(&[set.p_disp_total.hi, f64::INFINITY]);
                    r.extend_from_slice(&[0.0, 0.0]);
                }
                ModelVariant::Turbine => {
                    x_lb.extend_from_slice(&[set.d_p_disp.lo, set.p_c.lo, set.p_d.lo]);
                    x_ub.extend_from_slice(&[set.d_p_disp.hi, set.p_c.hi, set.p_d.hi]);
                    r.extend_from_slice(&[0.0, 0.0, 0.0]);
                }
                _ => {}
            }
            u_lb.extend_from_slice(&[set.d_p_disp.lo, set.p_c.lo, set.p_d.lo]);
            u_ub.extend_from_slice(&[set.d_p_disp.hi, set.p_c.hi, set.p_d.hi]);
            q.extend_from_slice(&cfg.q);
        }
        Ok(PredictionModel {
            variant,
            n_areas: n,
            nx,
            nu,
            nw,
            a: a.to_csc(),
            b: b.to_csc(),
            e: e.to_csc(),
            x_lb,
            x_ub,
            u_lb,
            u_ub,
            r,
            q,
        })
    }

    pub fn states_per_area(&self) -> usize {
        self.nx / self.n_areas.max(1)
    }

    pub fn step(&self, x: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.nx];
        self.a.mul_vec_acc(x, &mut next);
        self.b.mul_vec_acc(u, &mut next);
        self.e.mul_vec_acc(w, &mut next);
        next
    }

    /// `xᵀR x + uᵀQ u`.
    pub fn stage_cost(&self, x: &[f64], u: &[f64]) -> f64 {
        let sx: f64 = x.iter().zip(&self.r).map(|(v, r)| r * v * v).sum();
        let su: f64 = u.iter().zip(&self.q).map(|(v, q)| q * v * v).sum();
        sx + su
    }

    pub fn clamp_input(&self, u: &mut [f64]) {
        for (j, v) in u.iter_mut().enumerate() {
            *v = v.clamp(self.u_lb[j], self.u_ub[j]);
        }
    }

    /// Largest amount by which `x` leaves the state box.
    pub fn state_violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &v)| (self.x_lb[j] - v).max(v - self.x_ub[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn input_violation(&self, u: &[f64]) -> f64 {
        u.iter()
            .enumerate()
            .map(|(j, &v)| (self.u_lb[j] - v).max(v - self.u_ub[j]).max(0.0))
            .fold(0.0, f64::max)
    }
}
