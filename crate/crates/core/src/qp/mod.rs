//! Sparse convex QP: `min ½xᵀHx + gᵀx  s.t.  A_eq x = b_eq,  lb ≤ x ≤ ub`.
//!
//! Solved by an operator-splitting (ADMM) method on a Ruiz-scaled problem,
//! with an active-set polish step that recovers the exact solution once the
//! active bounds are identified.

mod kkt;
pub mod ldl;
pub mod ordering;
mod solver;
pub mod sparse;

use alloc::vec::Vec;

use thiserror::Error;

pub use kkt::{check_kkt, KktReport};
pub use solver::QpSolver;
pub use sparse::{CscMatrix, Triplets};

/// Bounds at or beyond this magnitude are treated as infinite.
pub const INFINITE_BOUND: f64 = 1e20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("H is not symmetric")]
    NotSymmetric,
    #[error("H has a negative diagonal entry at {0}")]
    NegativeDiagonal(usize),
    #[error("lower bound exceeds upper bound at {0}")]
    InvertedBounds(usize),
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("KKT factorization failed at pivot {0}")]
    Factorization(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProgram {
    /// Full symmetric cost matrix.
    pub h: CscMatrix,
    pub g: Vec<f64>,
    pub a_eq: CscMatrix,
    pub b_eq: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl QuadraticProgram {
    pub fn new(
        h: CscMatrix,
        g: Vec<f64>,
        a_eq: CscMatrix,
        b_eq: Vec<f64>,
        lb: Vec<f64>,
        ub: Vec<f64>,
    ) -> Result<Self, QpError> {
        let qp = QuadraticProgram {
            h,
            g,
            a_eq,
            b_eq,
            lb,
            ub,
        };
        qp.validate()?;
        Ok(qp)
    }

    /// Box-constrained problem without equalities.
    pub fn boxed(h: CscMatrix, g: Vec<f64>, lb: Vec<f64>, ub: Vec<f64>) -> Result<Self, QpError> {
        let n = g.len();
        Self::new(h, g, CscMatrix::zeros(0, n), Vec::new(), lb, ub)
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn m(&self) -> usize {
        self.b_eq.len()
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.g.len();
        let m = self.b_eq.len();
        let dims = [
            ("H rows", n, self.h.nrows),
            ("H columns", n, self.h.ncols),
            ("A_eq rows", m, self.a_eq.nrows),
            ("A_eq columns", n, self.a_eq.ncols),
            ("lb", n, self.lb.len()),
            ("ub", n, self.ub.len()),
        ];
        for (what, expected, found) in dims {
            if expected != found {
                return Err(QpError::DimensionMismatch { what, expected, found });
            }
        }
        if !self.h.is_finite() {
            return Err(QpError::NonFinite("H"));
        }
        if !self.a_eq.is_finite() {
            return Err(QpError::NonFinite("A_eq"));
        }
        if !self.g.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite("g"));
        }
        if !self.b_eq.iter().all(|v| v.is_finite()) {
            return Err(QpError::NonFinite("b_eq"));
        }
        if self.lb.iter().chain(&self.ub).any(|v| v.is_nan()) {
            return Err(QpError::NonFinite("bounds"));
        }
        let scale = self.h.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !self.h.is_symmetric(1e-12 * scale.max(1.0)) {
            return Err(QpError::NotSymmetric);
        }
        if let Some(i) = self.h.diagonal().iter().position(|&d| d < 0.0) {
            return Err(QpError::NegativeDiagonal(i));
        }
        if let Some(i) = (0..n).find(|&i| self.lb[i] > self.ub[i]) {
            return Err(QpError::InvertedBounds(i));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let hx = self.h.mul_vec(x);
        x.iter()
            .zip(&hx)
            .zip(&self.g)
            .map(|((xi, hi), gi)| 0.5 * xi * hi + gi * xi)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    /// Primal infeasibility certificate found.
    Infeasible,
    /// Dual infeasibility certificate found (objective unbounded below).
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Equality multipliers.
    pub y: Vec<f64>,
    /// Bound multipliers: negative at active lower bounds, positive at
    /// active upper bounds.
    pub z: Vec<f64>,
    pub status: QpStatus,
    pub r_prim: f64,
    pub r_dual: f64,
    pub iterations: usize,
    /// Whether the returned point came from the active-set polish.
    pub polished: bool,
    /// Number of numeric KKT factorizations performed.
    pub factorizations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QpSettings {
    pub tol_prim: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub scaling_iters: usize,
    pub adaptive_rho: bool,
    /// Iterations between adaptive-rho updates.
    pub adaptive_interval: usize,
    /// Iterations between termination checks.
    pub check_every: usize,
    pub eps_infeasible: f64,
    pub polish: bool,
    pub polish_rounds: usize,
    pub polish_delta: f64,
    /// Upper bound on iterative-refinement sweeps per polish solve.
    pub refine_steps: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol_prim: 1e-6,
            tol_dual: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            scaling_iters: 15,
            adaptive_rho: true,
            adaptive_interval: 25,
            check_every: 5,
            eps_infeasible: 1e-5,
            polish: true,
            polish_rounds: 60,
            polish_delta: 1e-9,
            refine_steps: 40,
        }
    }
}

/// Optional starting point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

/// One-shot solve.
pub fn solve_qp(qp: &QuadraticProgram, settings: &QpSettings) -> Result<QpSolution, QpError> {
    let mut solver = QpSolver::new(qp, *settings)?;
    Ok(solver.solve(None))
}

pub(crate) fn is_finite_bound(v: f64) -> bool {
    v.abs() < INFINITE_BOUND
}
