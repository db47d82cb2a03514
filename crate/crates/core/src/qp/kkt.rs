//! Stand-alone KKT verification. Deliberately shares no arithmetic with the
//! solver: every product is formed here from the raw matrix entries.

use alloc::vec;

use super::{is_finite_bound, QpError, QpSolution, QuadraticProgram};

/// Largest normalized residual of each optimality condition. A residual is
/// divided by the larger of 1 and the magnitudes of the terms that produce
/// it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    pub equality: f64,
    pub bounds: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub tol: f64,
}

impl KktReport {
    pub fn equality_ok(&self) -> bool {
        self.equality <= self.tol
    }
    pub fn bounds_ok(&self) -> bool {
        self.bounds <= self.tol
    }
    pub fn stationarity_ok(&self) -> bool {
        self.stationarity <= self.tol
    }
    pub fn complementarity_ok(&self) -> bool {
        self.complementarity <= self.tol
    }
    pub fn passed(&self) -> bool {
        self.equality_ok() && self.bounds_ok() && self.stationarity_ok() && self.complementarity_ok()
    }
}

pub fn check_kkt(qp: &QuadraticProgram, sol: &QpSolution, tol: f64) -> Result<KktReport, QpError> {
    let (n, m) = (qp.n(), qp.m());
    for (what, expected, found) in [("x", n, sol.x.len()), ("y", m, sol.y.len()), ("z", n, sol.z.len())] {
        if expected != found {
            return Err(QpError::DimensionMismatch { what, expected, found });
        }
    }
    let (x, y, z) = (&sol.x, &sol.y, &sol.z);

    let mut ax = vec![0.0; m];
    let mut ax_mag = vec![0.0f64; m];
    let mut grad = qp.g.clone();
    let mut grad_mag: alloc::vec::Vec<f64> = qp.g.iter().map(|g| g.abs()).collect();
    for col in 0..n {
        for p in qp.a_eq.colptr[col]..qp.a_eq.colptr[col + 1] {
            let (row, a) = (qp.a_eq.rowind[p], qp.a_eq.values[p]);
            ax[row] += a * x[col];
            ax_mag[row] += (a * x[col]).abs();
            grad[col] += a * y[row];
            grad_mag[col] = grad_mag[col].max((a * y[row]).abs());
        }
        let mut hx = 0.0;
        let mut hx_mag = 0.0;
        for p in qp.h.colptr[col]..qp.h.colptr[col + 1] {
            // H is symmetric, so column `col` doubles as row `col`
            let term = qp.h.values[p] * x[qp.h.rowind[p]];
            hx += term;
            hx_mag += term.abs();
        }
        grad[col] += hx + z[col];
        grad_mag[col] = grad_mag[col].max(hx_mag).max(z[col].abs());
    }

    let mut report = KktReport {
        equality: 0.0,
        bounds: 0.0,
        stationarity: 0.0,
        complementarity: 0.0,
        tol,
    };
    for i in 0..m {
        let r = (ax[i] - qp.b_eq[i]).abs() / 1f64.max(qp.b_eq[i].abs()).max(ax_mag[i]);
        report.equality = report.equality.max(r);
    }
    for j in 0..n {
        let sx = 1f64.max(x[j].abs());
        let below = if is_finite_bound(qp.lb[j]) {
            qp.lb[j] - x[j]
        } else {
            0.0
        };
        let above = if is_finite_bound(qp.ub[j]) {
            x[j] - qp.ub[j]
        } else {
            0.0
        };
        report.bounds = report.bounds.max(below.max(above).max(0.0) / sx);

        let sd = 1f64.max(grad_mag[j]);
        report.stationarity = report.stationarity.max(grad[j].abs() / sd);

        let comp = if z[j] < 0.0 {
            let gap = if is_finite_bound(qp.lb[j]) {
                (x[j] - qp.lb[j]).abs() / sx
            } else {
                f64::INFINITY
            };
            (z[j].abs() / sd).min(gap)
        } else if z[j] > 0.0 {
            let gap = if is_finite_bound(qp.ub[j]) {
                (qp.ub[j] - x[j]).abs() / sx
            } else {
                f64::INFINITY
            };
            (z[j] / sd).min(gap)
        } else {
            0.0
        };
        report.complementarity = report.complementarity.max(comp);
    }
    if !(x.iter().chain(y).chain(z).all(|v| v.is_finite())) {
        report.equality = f64::INFINITY;
        report.stationarity = f64::INFINITY;
    }
    Ok(report)
}
