use alloc::vec;
use alloc::vec::Vec;

use super::ldl::{Factor, LdlError, Symbolic};
use super::sparse::{CscMatrix, Triplets};
use super::{is_finite_bound, QpError, QpSettings, QpSolution, QpStatus, QuadraticProgram, WarmStart};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
/// Residual level at which a first, speculative polish is attempted.
const EARLY_POLISH: f64 = 1e-3;
/// Sign and bound slack used when updating the polish active set, relative
/// to the largest bound multiplier and bound magnitude.
const ACTIVE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Active {
    Free,
    Lower,
    Upper,
}

/// Positions of each data block inside the KKT upper-triangle values.
#[derive(Clone, Debug)]
struct KktPattern {
    matrix: CscMatrix,
    p_pos: Vec<usize>,
    diag_pos: Vec<usize>,
    a_pos: Vec<usize>,
    eq_pos: Vec<usize>,
}

impl KktPattern {
    fn new(p: &CscMatrix, a: &CscMatrix) -> Self {
        let (n, m) = (p.ncols, a.nrows);
        let mut t = Triplets::new(n + m, n + m);
        for (i, j, _) in p.entries() {
            t.push(i, j, 0.0);
        }
        for j in 0..n {
            t.push(j, j, 0.0);
        }
        for (i, j, _) in a.entries() {
            t.push(j, n + i, 0.0);
        }
        for i in 0..m {
            t.push(n + i, n + i, 0.0);
        }
        let (matrix, map) = CscMatrix::from_triplets_mapped(&t);
        let (np, na) = (p.nnz(), a.nnz());
        KktPattern {
            matrix,
            p_pos: map[..np].to_vec(),
            diag_pos: map[np..np + n].to_vec(),
            a_pos: map[np + n..np + n + na].to_vec(),
            eq_pos: map[np + n + na..].to_vec(),
        }
    }
}

/// Scaled `(x, y, z)` of a polish solve plus the released
/// `(variable, row)` pairs.
type PolishPoint = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<(usize, usize)>);

struct Residuals {
    prim: f64,
    dual: f64,
}

pub struct QpSolver {
    settings: QpSettings,
    n: usize,
    m: usize,
    // unscaled data
    p: CscMatrix,
    q: Vec<f64>,
    a: CscMatrix,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    // scaled data
    ps: CscMatrix,
    qs: Vec<f64>,
    as_: CscMatrix,
    /// Row-wise pattern of the equality matrix.
    a_rows: CscMatrix,
    bs: Vec<f64>,
    ls: Vec<f64>,
    us: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
    // linear algebra
    kkt: KktPattern,
    sym: Symbolic,
    admm: Factor,
    polish: Option<Factor>,
    vals: Vec<f64>,
    rho: f64,
    rho_b: Vec<f64>,
    rho_e: Vec<f64>,
    factorizations: usize,
    // iterate, scaled
    x: Vec<f64>,
    zb: Vec<f64>,
    yb: Vec<f64>,
    ye: Vec<f64>,
    rhs: Vec<f64>,
}

impl QpSolver {
    pub fn new(qp: &QuadraticProgram, settings: QpSettings) -> Result<Self, QpError> {
        qp.validate()?;
        let (n, m) = (qp.n(), qp.m());
        let p = qp.h.upper_triangle();
        let inf = |v: f64, s: f64| if is_finite_bound(v) { v } else { s * f64::INFINITY };
        let lb: Vec<f64> = qp.lb.iter().map(|&v| inf(v, -1.0)).collect();
        let ub: Vec<f64> = qp.ub.iter().map(|&v| inf(v, 1.0)).collect();

        let kkt = KktPattern::new(&p, &qp.a_eq);
        let sym = Symbolic::new(&kkt.matrix).map_err(|_| QpError::Factorization(0))?;
        let admm = Factor::new(&sym);
        let vals = vec![0.0; kkt.matrix.nnz()];
        let mut s = QpSolver {
            settings,
            n,
            m,
            ps: p.clone(),
            qs: qp.g.clone(),
            as_: qp.a_eq.clone(),
            a_rows: qp.a_eq.transpose(),
            bs: qp.b_eq.clone(),
            ls: lb.clone(),
            us: ub.clone(),
            p,
            q: qp.g.clone(),
            a: qp.a_eq.clone(),
            b: qp.b_eq.clone(),
            lb,
            ub,
            d: vec![1.0; n],
            e: vec![1.0; m],
            c: 1.0,
            kkt,
            sym,
            admm,
            polish: None,
            vals,
            rho: settings.rho,
            rho_b: vec![0.0; n],
            rho_e: vec![0.0; m],
            factorizations: 0,
            x: vec![0.0; n],
            zb: vec![0.0; n],
            yb: vec![0.0; n],
            ye: vec![0.0; m],
            rhs: vec![0.0; n + m],
        };
        s.scale();
        s.set_rho(settings.rho)?;
        Ok(s)
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    /// Replaces the equality right-hand side; the factorization is kept.
    pub fn update_b_eq(&mut self, b: &[f64]) -> Result<(), QpError> {
        if b.len() != self.m {
            return Err(QpError::DimensionMismatch {
                what: "b_eq",
                expected: self.m,
                found: b.len(),
            });
        }
        if !b.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite("b_eq"));
        }
        self.b.copy_from_slice(b);
        for i in 0..self.m {
            self.bs[i] = self.e[i] * b[i];
        }
        Ok(())
    }

    /// Replaces the linear cost; the factorization is kept.
    pub fn update_g(&mut self, g: &[f64]) -> Result<(), QpError> {
        if g.len() != self.n {
            return Err(QpError::DimensionMismatch {
                what: "g",
                expected: self.n,
                found: g.len(),
            });
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite("g"));
        }
        self.q.copy_from_slice(g);
        for j in 0..self.n {
            self.qs[j] = self.c * self.d[j] * g[j];
        }
        Ok(())
    }

    /// Modified Ruiz equilibration of `[P Aᵀ; A 0]` plus a cost scale.
    fn scale(&mut self) {
        let (n, m) = (self.n, self.m);
        let clamp = |v: f64| {
            if v < SCALE_MIN {
                1.0
            } else {
                v.min(SCALE_MAX)
            }
        };
        for _ in 0..self.settings.scaling_iters {
            let mut dn = vec![0.0f64; n];
            let mut en = vec![0.0f64; m];
            for (i, j, v) in self.ps.entries() {
                dn[j] = dn[j].max(v.abs());
                dn[i] = dn[i].max(v.abs());
            }
            for (i, j, v) in self.as_.entries() {
                dn[j] = dn[j].max(v.abs());
                en[i] = en[i].max(v.abs());
            }
            let dt: Vec<f64> = dn.iter().map(|&v| 1.0 / libm::sqrt(clamp(v))).collect();
            let et: Vec<f64> = en.iter().map(|&v| 1.0 / libm::sqrt(clamp(v))).collect();
            scale_matrix(&mut self.ps, &dt, &dt);
            scale_matrix(&mut self.as_, &et, &dt);
            for j in 0..n {
                self.qs[j] *= dt[j];
                self.d[j] *= dt[j];
            }
            for i in 0..m {
                self.e[i] *= et[i];
            }

            let mut col = vec![0.0f64; n];
            for (i, j, v) in self.ps.entries() {
                col[j] = col[j].max(v.abs());
                col[i] = col[i].max(v.abs());
            }
            let mean = if n > 0 { col.iter().sum::<f64>() / n as f64 } else { 0.0 };
            let qn = self.qs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let ct = 1.0 / clamp(mean.max(qn));
            self.ps.scale(ct);
            self.qs.iter_mut().for_each(|v| *v *= ct);
            self.c *= ct;
        }
        for i in 0..m {
            self.bs[i] = self.e[i] * self.b[i];
        }
        for j in 0..n {
            self.ls[j] = self.lb[j] / self.d[j];
            self.us[j] = self.ub[j] / self.d[j];
        }
    }

    fn set_rho(&mut self, rho: f64) -> Result<(), QpError> {
        self.rho = rho.clamp(RHO_MIN, RHO_MAX);
        for j in 0..self.n {
            let (l, u) = (self.ls[j], self.us[j]);
            self.rho_b[j] = if !l.is_finite() && !u.is_finite() {
                RHO_MIN
            } else if l == u {
                RHO_EQ_FACTOR * self.rho
            } else {
                self.rho
            };
        }
        self.rho_e.iter_mut().for_each(|r| *r = RHO_EQ_FACTOR * self.rho);

        self.vals.iter_mut().for_each(|v| *v = 0.0);
        for (k, &v) in self.ps.values.iter().enumerate() {
            self.vals[self.kkt.p_pos[k]] += v;
        }
        for j in 0..self.n {
            self.vals[self.kkt.diag_pos[j]] += self.settings.sigma + self.rho_b[j];
        }
        for (k, &v) in self.as_.values.iter().enumerate() {
            self.vals[self.kkt.a_pos[k]] += v;
        }
        for i in 0..self.m {
            self.vals[self.kkt.eq_pos[i]] -= 1.0 / self.rho_e[i];
        }
        self.factorizations += 1;
        self.admm.factor(&self.sym, &self.vals).map_err(|e| match e {
            LdlError::ZeroPivot(k) => QpError::Factorization(k),
            _ => QpError::Factorization(0),
        })
    }

    fn load_warm_start(&mut self, w: &WarmStart) {
        let (n, m) = (self.n, self.m);
        if w.x.len() == n {
            for j in 0..n {
                self.x[j] = w.x[j] / self.d[j];
            }
        } else {
            self.x.iter_mut().for_each(|v| *v = 0.0);
        }
        if w.y.len() == m {
            for i in 0..m {
                self.ye[i] = self.c * w.y[i] / self.e[i];
            }
        } else {
            self.ye.iter_mut().for_each(|v| *v = 0.0);
        }
        if w.z.len() == n {
            for j in 0..n {
                self.yb[j] = self.c * self.d[j] * w.z[j];
            }
        } else {
            self.yb.iter_mut().for_each(|v| *v = 0.0);
        }
        for j in 0..n {
            self.zb[j] = self.x[j].clamp(self.ls[j], self.us[j]);
        }
    }

    fn cold_start(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        self.ye.iter_mut().for_each(|v| *v = 0.0);
        self.yb.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n {
            self.zb[j] = 0.0f64.clamp(self.ls[j], self.us[j]);
        }
    }

    pub fn solve(&mut self, warm: Option<&WarmStart>) -> QpSolution {
        let start_factorizations = self.factorizations;
        match warm {
            Some(w) => self.load_warm_start(w),
            None => self.cold_start(),
        }
        if self.settings.polish && warm.is_some() {
            if let Some(mut sol) = self.try_polish() {
                sol.factorizations = self.factorizations - start_factorizations;
                return sol;
            }
        }

        let (n, m) = (self.n, self.m);
        let st = self.settings;
        let alpha = st.alpha;
        let mut x_prev = vec![0.0; n];
        let mut ye_prev = vec![0.0; m];
        let mut yb_prev = vec![0.0; n];
        let mut early_polish_done = false;
        let mut status = QpStatus::MaxIter;
        let mut iterations = 0;
        let mut res = Residuals {
            prim: f64::INFINITY,
            dual: f64::INFINITY,
        };

        for iter in 1..=st.max_iter {
            iterations = iter;
            x_prev.copy_from_slice(&self.x);
            ye_prev.copy_from_slice(&self.ye);
            yb_prev.copy_from_slice(&self.yb);

            for j in 0..n {
                self.rhs[j] = st.sigma * self.x[j] - self.qs[j] + self.rho_b[j] * self.zb[j] - self.yb[j];
            }
            for i in 0..m {
                self.rhs[n + i] = self.bs[i] - self.ye[i] / self.rho_e[i];
            }
            self.admm.solve(&self.sym, &mut self.rhs);

            for j in 0..n {
                let xt = self.rhs[j];
                self.x[j] = alpha * xt + (1.0 - alpha) * x_prev[j];
                let v = alpha * xt + (1.0 - alpha) * self.zb[j];
                let z = (v + self.yb[j] / self.rho_b[j]).clamp(self.ls[j], self.us[j]);
                self.yb[j] += self.rho_b[j] * (v - z);
                self.zb[j] = z;
            }
            for i in 0..m {
                self.ye[i] += alpha * (self.rhs[n + i] - self.ye[i]);
            }

            let check = iter % st.check_every.max(1) == 0 || iter == st.max_iter;
            if check {
                let (x, y, z) = self.unscaled();
                res = self.residuals(&x, &y, &z, &self.zb_unscaled());
                if res.prim <= st.tol_prim && res.dual <= st.tol_dual {
                    status = QpStatus::Optimal;
                    break;
                }
                if self.primal_infeasible(&ye_prev, &yb_prev) {
                    status = QpStatus::Infeasible;
                    break;
                }
                if self.dual_infeasible(&x_prev) {
                    status = QpStatus::Unbounded;
                    break;
                }
                if st.polish && !early_polish_done && res.prim <= EARLY_POLISH && res.dual <= EARLY_POLISH {
                    early_polish_done = true;
                    let saved = (self.x.clone(), self.zb.clone(), self.yb.clone(), self.ye.clone());
                    if let Some(mut sol) = self.try_polish() {
                        sol.iterations = iter;
                        sol.factorizations = self.factorizations - start_factorizations;
                        return sol;
                    }
                    (self.x, self.zb, self.yb, self.ye) = saved;
                }
            }
            if st.adaptive_rho && iter % st.adaptive_interval.max(1) == 0 {
                let new_rho = self.rho_estimate();
                if new_rho > 5.0 * self.rho || new_rho < 0.2 * self.rho {
                    // a failed refactorization keeps the previous factor, which
                    // is still valid for the old rho
                    let old = self.rho;
                    if self.set_rho(new_rho).is_err() {
                        let _ = self.set_rho(old);
                    }
                }
            }
        }

        if st.polish && matches!(status, QpStatus::Optimal | QpStatus::MaxIter) {
            if let Some(mut sol) = self.try_polish() {
                sol.iterations = iterations;
                sol.factorizations = self.factorizations - start_factorizations;
                return sol;
            }
        }
        let (x, y, z) = self.unscaled();
        if matches!(status, QpStatus::Infeasible | QpStatus::Unbounded) {
            res = self.residuals(&x, &y, &z, &self.zb_unscaled());
        }
        QpSolution {
            x,
            y,
            z,
            status,
            r_prim: res.prim,
            r_dual: res.dual,
            iterations,
            polished: false,
            factorizations: self.factorizations - start_factorizations,
        }
    }

    fn unscaled(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x = (0..self.n).map(|j| self.d[j] * self.x[j]).collect();
        let y = (0..self.m).map(|i| self.e[i] * self.ye[i] / self.c).collect();
        let z = (0..self.n).map(|j| self.yb[j] / (self.c * self.d[j])).collect();
        (x, y, z)
    }

    fn zb_unscaled(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.d[j] * self.zb[j]).collect()
    }

    /// Normalized residuals. The primal part covers `A x = b` and the gap
    /// between `x` and its box projection `zb`.
    fn residuals(&self, x: &[f64], y: &[f64], z: &[f64], zb: &[f64]) -> Residuals {
        let (n, m) = (self.n, self.m);
        let mut ax = vec![0.0; m];
        let mut ax_mag = vec![0.0f64; m];
        let mut aty = vec![0.0; n];
        let mut aty_mag = vec![0.0f64; n];
        for j in 0..n {
            for p in self.a.colptr[j]..self.a.colptr[j + 1] {
                let (i, v) = (self.a.rowind[p], self.a.values[p]);
                ax[i] += v * x[j];
                ax_mag[i] += (v * x[j]).abs();
                aty[j] += v * y[i];
                aty_mag[j] = aty_mag[j].max((v * y[i]).abs());
            }
        }
        let mut px = vec![0.0; n];
        let mut px_mag = vec![0.0f64; n];
        for (i, j, v) in self.p.entries() {
            px[i] += v * x[j];
            px_mag[i] += (v * x[j]).abs();
            if i != j {
                px[j] += v * x[i];
                px_mag[j] += (v * x[i]).abs();
            }
        }
        let mut prim = 0.0f64;
        for i in 0..m {
            let scale = 1f64.max(self.b[i].abs()).max(ax_mag[i]);
            prim = prim.max((ax[i] - self.b[i]).abs() / scale);
        }
        for j in 0..n {
            prim = prim.max((x[j] - zb[j]).abs() / 1f64.max(x[j].abs()));
        }
        let mut dual = 0.0f64;
        for j in 0..n {
            let r = px[j] + self.q[j] + aty[j] + z[j];
            let scale = 1f64.max(px_mag[j]).max(self.q[j].abs()).max(aty_mag[j]).max(z[j].abs());
            dual = dual.max(r.abs() / scale);
        }
        if !prim.is_finite() || !dual.is_finite() {
            return Residuals {
                prim: f64::INFINITY,
                dual: f64::INFINITY,
            };
        }
        Residuals { prim, dual }
    }

    fn rho_estimate(&self) -> f64 {
        let (n, m) = (self.n, self.m);
        let ax = self.as_.mul_vec(&self.x);
        let mut prim = 0.0f64;
        let mut prim_scale = 0.0f64;
        for i in 0..m {
            prim = prim.max((ax[i] - self.bs[i]).abs());
            prim_scale = prim_scale.max(ax[i].abs()).max(self.bs[i].abs());
        }
        for j in 0..n {
            prim = prim.max((self.x[j] - self.zb[j]).abs());
            prim_scale = prim_scale.max(self.x[j].abs()).max(self.zb[j].abs());
        }
        let px = self.ps.sym_upper_mul_vec(&self.x);
        let aty = self.as_.tr_mul_vec(&self.ye);
        let mut dual = 0.0f64;
        let mut dual_scale = 0.0f64;
        for j in 0..n {
            dual = dual.max((px[j] + self.qs[j] + aty[j] + self.yb[j]).abs());
            dual_scale = dual_scale
                .max(px[j].abs())
                .max(self.qs[j].abs())
                .max(aty[j].abs())
                .max(self.yb[j].abs());
        }
        let num = prim / (prim_scale + 1e-30);
        let den = dual / (dual_scale + 1e-30);
        self.rho * libm::sqrt(num / (den + 1e-30))
    }

    fn primal_infeasible(&self, ye_prev: &[f64], yb_prev: &[f64]) -> bool {
        let (n, m) = (self.n, self.m);
        let eps = self.settings.eps_infeasible;
        let dye: Vec<f64> = (0..m).map(|i| self.e[i] * (self.ye[i] - ye_prev[i]) / self.c).collect();
        let dyb: Vec<f64> = (0..n)
            .map(|j| (self.yb[j] - yb_prev[j]) / (self.c * self.d[j]))
            .collect();
        let norm = dye.iter().chain(&dyb).fold(0.0f64, |a, v| a.max(v.abs()));
        if !(norm > 1e-30) {
            return false;
        }
        let mut t = self.a.tr_mul_vec(&dye);
        for j in 0..n {
            t[j] += dyb[j];
        }
        if t.iter().any(|v| v.abs() > eps * norm) {
            return false;
        }
        let mut support: f64 = self.b.iter().zip(&dye).map(|(b, y)| b * y).sum();
        for j in 0..n {
            let y = dyb[j];
            if y > 0.0 {
                if self.ub[j].is_finite() {
                    support += self.ub[j] * y;
                } else if y > eps * norm {
                    return false;
                }
            } else if y < 0.0 {
                if self.lb[j].is_finite() {
                    support += self.lb[j] * y;
                } else if -y > eps * norm {
                    return false;
                }
            }
        }
        support < -eps * norm
    }

    fn dual_infeasible(&self, x_prev: &[f64]) -> bool {
        let n = self.n;
        let eps = self.settings.eps_infeasible;
        let dx: Vec<f64> = (0..n).map(|j| self.d[j] * (self.x[j] - x_prev[j])).collect();
        let norm = dx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !(norm > 1e-30) {
            return false;
        }
        let pmax = self.p.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let amax = self.a.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let qmax = self.q.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        if self
            .p
            .sym_upper_mul_vec(&dx)
            .iter()
            .any(|v| v.abs() > eps * norm * pmax)
        {
            return false;
        }
        let qdx: f64 = self.q.iter().zip(&dx).map(|(q, d)| q * d).sum();
        if qdx >= -eps * norm * qmax {
            return false;
        }
        if self.a.mul_vec(&dx).iter().any(|v| v.abs() > eps * norm * amax) {
            return false;
        }
        (0..n).all(|j| {
            let (l, u, d) = (self.lb[j].is_finite(), self.ub[j].is_finite(), dx[j]);
            (!u || d <= eps * norm) && (!l || d >= -eps * norm)
        })
    }

    /// Guesses the active set from the current iterate and refines it with
    /// primal-dual active-set steps on the exact (scaled) KKT system.
    fn try_polish(&mut self) -> Option<QpSolution> {
        let n = self.n;
        let mut active: Vec<Active> = (0..n)
            .map(|j| {
                let (l, u) = (self.ls[j], self.us[j]);
                if l == u {
                    return Active::Lower;
                }
                let lower = l.is_finite() && self.zb[j] - l < -self.yb[j];
                let upper = u.is_finite() && u - self.zb[j] < self.yb[j];
                match (lower, upper) {
                    (true, true) if self.x[j] - l <= u - self.x[j] => Active::Lower,
                    (true, true) => Active::Upper,
                    (true, false) => Active::Lower,
                    (false, true) => Active::Upper,
                    (false, false) => Active::Free,
                }
            })
            .collect();

        if self.polish.is_none() {
            self.polish = Some(Factor::new(&self.sym));
        }
        let mut hint = self.yb.clone();
        for _ in 0..self.settings.polish_rounds {
            let (xs, ys, zs, released) = self.polish_solve(&active, &hint)?;
            let ztol = ACTIVE_TOL * zs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            let mut changed = false;
            for j in 0..n {
                let xtol = |b: f64| ACTIVE_TOL * b.abs().max(1.0);
                let next = match active[j] {
                    Active::Lower if self.ls[j] == self.us[j] => Active::Lower,
                    Active::Lower if zs[j] > ztol => Active::Free,
                    Active::Upper if zs[j] < -ztol => Active::Free,
                    Active::Free if xs[j] < self.ls[j] - xtol(self.ls[j]) => Active::Lower,
                    Active::Free if xs[j] > self.us[j] + xtol(self.us[j]) => Active::Upper,
                    a => a,
                };
                if next != active[j] {
                    active[j] = next;
                    changed = true;
                }
            }
            // a released variable pushed past its bound means the rest of
            // its row cannot stay fixed
            for &(j, row) in &released {
                let slack = ACTIVE_TOL * self.ls[j].abs().max(self.us[j].abs()).max(1.0);
                if xs[j] < self.ls[j] - slack || xs[j] > self.us[j] + slack {
                    for p in self.a_rows.colptr[row]..self.a_rows.colptr[row + 1] {
                        let k = self.a_rows.rowind[p];
                        if k != j && active[k] != Active::Free && self.ls[k] != self.us[k] {
                            active[k] = Active::Free;
                            changed = true;
                        }
                    }
                }
            }
            if changed {
                hint = zs;
                continue;
            }
            let x: Vec<f64> = (0..n).map(|j| self.d[j] * xs[j]).collect();
            let y: Vec<f64> = (0..self.m).map(|i| self.e[i] * ys[i] / self.c).collect();
            let z: Vec<f64> = (0..n).map(|j| zs[j] / (self.c * self.d[j])).collect();
            let proj: Vec<f64> = (0..n).map(|j| x[j].clamp(self.lb[j], self.ub[j])).collect();
            let res = self.residuals(&x, &y, &z, &proj);
            if res.prim <= self.settings.tol_prim && res.dual <= self.settings.tol_dual {
                self.x.copy_from_slice(&xs);
                self.ye.copy_from_slice(&ys);
                self.yb.copy_from_slice(&zs);
                for j in 0..n {
                    self.zb[j] = xs[j].clamp(self.ls[j], self.us[j]);
                }
                return Some(QpSolution {
                    x,
                    y,
                    z,
                    status: QpStatus::Optimal,
                    r_prim: res.prim,
                    r_dual: res.dual,
                    iterations: 0,
                    polished: true,
                    factorizations: 0,
                });
            }
            return None;
        }
        None
    }

    /// Solves the equality-constrained KKT system with the variables in
    /// `active` fixed at their bounds. Returns scaled `(x, y, z)`.
    ///
    /// An equality row whose variables are all fixed would leave its
    /// multiplier undetermined, so each row is matched to a distinct
    /// variable that stays free; where none is left, the fixed one with the
    /// smallest multiplier estimate in `hint` is released. A released
    /// variable is weakly active: the row pins it to its bound.
    fn polish_solve(&mut self, active: &[Active], hint: &[f64]) -> Option<PolishPoint> {
        let (n, m) = (self.n, self.m);
        let delta = self.settings.polish_delta;
        let mut released = vec![false; n];
        let mut pairs = Vec::new();
        let mut claimed = vec![false; n];
        for i in 0..m {
            let mut spare = None;
            let mut weakest: Option<usize> = None;
            for p in self.a_rows.colptr[i]..self.a_rows.colptr[i + 1] {
                let j = self.a_rows.rowind[p];
                if claimed[j] || self.a_rows.values[p] == 0.0 {
                    continue;
                }
                if active[j] == Active::Free {
                    spare = Some(j);
                    break;
                }
                if self.ls[j] != self.us[j] && weakest.is_none_or(|w| hint[j].abs() < hint[w].abs()) {
                    weakest = Some(j);
                }
            }
            if let Some(j) = spare.or(weakest) {
                claimed[j] = true;
                if active[j] != Active::Free {
                    released[j] = true;
                    pairs.push((j, i));
                }
            }
        }
        let fixed = |j: usize| active[j] != Active::Free && !released[j];
        let value = |j: usize| match active[j] {
            Active::Lower => self.ls[j],
            Active::Upper => self.us[j],
            Active::Free => 0.0,
        };

        // exact matrix (delta = 0) and regularized copy share the pattern
        let mut exact = vec![0.0; self.vals.len()];
        let mut rhs = vec![0.0; n + m];
        for j in 0..n {
            rhs[j] = if fixed(j) { value(j) } else { -self.qs[j] };
        }
        rhs[n..].copy_from_slice(&self.bs);
        for (k, (i, j, v)) in self.ps.entries().enumerate() {
            match (fixed(i), fixed(j)) {
                (false, false) => exact[self.kkt.p_pos[k]] += v,
                (false, true) => rhs[i] -= v * value(j),
                (true, false) => rhs[j] -= v * value(i),
                (true, true) => {}
            }
        }
        for j in 0..n {
            if fixed(j) {
                exact[self.kkt.diag_pos[j]] = 1.0;
            }
        }
        for (k, (i, j, v)) in self.as_.entries().enumerate() {
            if fixed(j) {
                rhs[n + i] -= v * value(j);
            } else {
                exact[self.kkt.a_pos[k]] += v;
            }
        }
        let mut reg = exact.clone();
        for j in 0..n {
            if !fixed(j) {
                reg[self.kkt.diag_pos[j]] += delta;
            }
        }
        for i in 0..m {
            reg[self.kkt.eq_pos[i]] -= delta;
        }

        let factor = self.polish.as_mut()?;
        self.factorizations += 1;
        factor.factor(&self.sym, &reg).ok()?;
        let mut sol = rhs.clone();
        factor.solve(&self.sym, &mut sol);
        let pattern = &self.kkt.matrix;
        let mut prev = f64::INFINITY;
        for _ in 0..self.settings.refine_steps {
            let ksol = sym_mul(pattern, &exact, &sol);
            let mut r: Vec<f64> = rhs.iter().zip(&ksol).map(|(a, b)| a - b).collect();
            let rnorm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let bnorm = rhs.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if rnorm <= 1e-15 * bnorm || rnorm >= 0.95 * prev {
                break;
            }
            prev = rnorm;
            factor.solve(&self.sym, &mut r);
            sol.iter_mut().zip(&r).for_each(|(s, d)| *s += d);
        }
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }

        let mut xs = sol[..n].to_vec();
        let ys = sol[n..].to_vec();
        for j in 0..n {
            if fixed(j) {
                xs[j] = value(j);
            }
        }
        let px = self.ps.sym_upper_mul_vec(&xs);
        let aty = self.as_.tr_mul_vec(&ys);
        let zs = (0..n)
            .map(|j| if fixed(j) { -(px[j] + self.qs[j] + aty[j]) } else { 0.0 })
            .collect();
        Some((xs, ys, zs, pairs))
    }
}

fn scale_matrix(a: &mut CscMatrix, row: &[f64], col: &[f64]) {
    for j in 0..a.ncols {
        for p in a.colptr[j]..a.colptr[j + 1] {
            a.values[p] *= row[a.rowind[p]] * col[j];
        }
    }
}

/// Product with a symmetric matrix given by its upper-triangle pattern and
/// separate values.
fn sym_mul(pattern: &CscMatrix, vals: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for j in 0..pattern.ncols {
        for p in pattern.colptr[j]..pattern.colptr[j + 1] {
            let i = pattern.rowind[p];
            y[i] += vals[p] * x[j];
            if i != j {
                y[j] += vals[p] * x[i];
            }
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::super::{check_kkt, solve_qp};
    use super::*;

    fn settings() -> QpSettings {
        QpSettings::default()
    }

    #[test]
    fn active_lower_bound() {
        let qp = QuadraticProgram::boxed(CscMatrix::identity(1), vec![0.0], vec![1.0], vec![f64::INFINITY]).unwrap();
        // min x² = ½(2)x²
        let mut qp = qp;
        qp.h = CscMatrix::from_diagonal(&[2.0]);
        let sol = solve_qp(&qp, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!(sol.z[0] < 0.0);
        assert!(check_kkt(&qp, &sol, 1e-6).unwrap().passed());
    }

    #[test]
    fn unconstrained_identity() {
        let inf = f64::INFINITY;
        let qp =
            QuadraticProgram::boxed(CscMatrix::identity(2), vec![-1.0, -2.0], vec![-inf; 2], vec![inf; 2]).unwrap();
        let sol = solve_qp(&qp, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9 && (sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn equality_with_box() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0]]);
        let qp = QuadraticProgram::new(
            CscMatrix::identity(2),
            vec![0.0; 2],
            a,
            vec![1.0],
            vec![0.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        let sol = solve_qp(&qp, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-9 && (sol.x[1] - 0.5).abs() < 1e-9);
        assert!(check_kkt(&qp, &sol, 1e-6).unwrap().passed());
    }

    #[test]
    fn inconsistent_constraints_are_infeasible() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0]]);
        let qp = QuadraticProgram::new(
            CscMatrix::identity(2),
            vec![0.0; 2],
            a,
            vec![5.0],
            vec![0.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        let sol = solve_qp(&qp, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
    }

    #[test]
    fn unbounded_linear_cost() {
        let inf = f64::INFINITY;
        let qp =
            QuadraticProgram::boxed(CscMatrix::zeros(2, 2), vec![1.0, 0.0], vec![-inf, 0.0], vec![inf, 1.0]).unwrap();
        let sol = solve_qp(&qp, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities_tolerated() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0], vec![2.0, 2.0]]);
        let inf = f64::INFINITY;
        let qp = QuadraticProgram::new(
            CscMatrix::identity(2),
            vec![0.0; 2],
            a,
            vec![1.0, 2.0],
            vec![-inf; 2],
            vec![inf; 2],
        )
        .unwrap();
        let sol = solve_qp(&qp, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-6 && (sol.x[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn warm_start_polishes_immediately() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0]]);
        let qp = QuadraticProgram::new(
            CscMatrix::identity(2),
            vec![0.0; 2],
            a,
            vec![1.0],
            vec![0.0; 2],
            vec![1.0; 2],
        )
        .unwrap();
        let mut solver = QpSolver::new(&qp, settings()).unwrap();
        let cold = solver.solve(None);
        let warm = WarmStart {
            x: cold.x.clone(),
            y: cold.y.clone(),
            z: cold.z.clone(),
        };
        let again = solver.solve(Some(&warm));
        assert!(again.polished);
        assert_eq!(again.iterations, 0);
        assert_eq!(again.x, cold.x);
    }

    #[test]
    fn b_update_keeps_factorization() {
        let a = CscMatrix::from_dense(&[vec![1.0, 1.0]]);
        let inf = f64::INFINITY;
        let qp = QuadraticProgram::new(
            CscMatrix::identity(2),
            vec![0.0; 2],
            a,
            vec![1.0],
            vec![-inf; 2],
            vec![inf; 2],
        )
        .unwrap();
        let mut solver = QpSolver::new(&qp, settings()).unwrap();
        solver.solve(None);
        solver.update_b_eq(&[4.0]).unwrap();
        let sol = solver.solve(None);
        assert!((sol.x[0] - 2.0).abs() < 1e-8 && (sol.x[1] - 2.0).abs() < 1e-8);
    }
}
