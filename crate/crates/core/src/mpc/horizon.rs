use alloc::vec::Vec;

use crate::qp::{QpSolution, QpSolver, QpStatus, WarmStart};

use super::prediction::PredictionModel;
use super::{build_mpc_qp, mpc_rhs, ExoWindow, MpcConfig, MpcError, QpLayout};

/// Result of one open-loop optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult {
    /// First input, clamped to the input box.
    pub u0: Vec<f64>,
    /// All planned inputs `u(0..N−1)`.
    pub inputs: Vec<f64>,
    /// Predicted states `x(1..N)`.
    pub states: Vec<f64>,
    pub cost: f64,
    pub status: QpStatus,
    pub softened: bool,
    pub iterations: usize,
    pub factorizations: usize,
    pub polished: bool,
}

struct Problem {
    layout: QpLayout,
    solver: QpSolver,
    warm: Option<WarmStart>,
}

/// One model, its hard and (lazily built) softened QPs and their warm
/// starts. Only the equality right-hand side changes between steps, so the
/// factorizations are reused.
pub(crate) struct HorizonSolver {
    pub model: PredictionModel,
    pub cfg: MpcConfig,
    hard: Option<Problem>,
    soft: Option<Problem>,
}

impl HorizonSolver {
    pub fn new(model: PredictionModel, cfg: MpcConfig) -> Result<Self, MpcError> {
        cfg.validate()?;
        Ok(HorizonSolver {
            model,
            cfg,
            hard: None,
            soft: None,
        })
    }

    fn problem(&mut self, soft: bool, x_k: &[f64], window: &ExoWindow) -> Result<&mut Problem, MpcError> {
        let slot = if soft { &mut self.soft } else { &mut self.hard };
        if slot.is_none() {
            let weight = soft.then_some(self.cfg.slack_weight);
            let qp = build_mpc_qp(&self.model, x_k, window, weight)?;
            let layout = QpLayout {
                horizon: self.cfg.horizon,
                nx: self.model.nx,
                nu: self.model.nu,
                soft,
            };
            *slot = Some(Problem {
                layout,
                solver: QpSolver::new(&qp, self.cfg.qp)?,
                warm: None,
            });
        }
        Ok(slot.as_mut().expect("problem initialized above"))
    }

    fn solve(&mut self, soft: bool, x_k: &[f64], window: &ExoWindow) -> Result<(QpLayout, QpSolution), MpcError> {
        let b = mpc_rhs(&self.model, x_k, window);
        let warm_start = self.cfg.warm_start;
        let p = self.problem(soft, x_k, window)?;
        p.solver.update_b_eq(&b)?;
        let sol = p.solver.solve(if warm_start { p.warm.as_ref() } else { None });
        p.warm = (sol.status == QpStatus::Optimal).then(|| shifted(&p.layout, &sol));
        Ok((p.layout, sol))
    }

    pub fn plan(&mut self, x_k: &[f64], window: &ExoWindow) -> Result<PlanResult, MpcError> {
        if window.horizon() != self.cfg.horizon {
            return Err(MpcError::DimensionMismatch {
                what: "window horizon",
                expected: self.cfg.horizon,
                found: window.horizon(),
            });
        }
        let mut iterations = 0;
        let mut factorizations = 0;
        let mut softened = self.cfg.soft_constraints;
        let (layout, sol) = if softened {
            self.solve(true, x_k, window)?
        } else {
            let (layout, sol) = self.solve(false, x_k, window)?;
            if sol.status == QpStatus::Optimal {
                (layout, sol)
            } else {
                iterations += sol.iterations;
                factorizations += sol.factorizations;
                softened = true;
                self.solve(true, x_k, window)?
            }
        };
        if softened && matches!(sol.status, QpStatus::Infeasible | QpStatus::Unbounded) {
            return Err(MpcError::SoftenedFailed(sol.status));
        }
        let inputs = layout.inputs(&sol.x).to_vec();
        let states = layout.states(&sol.x);
        let mut u0 = inputs[..self.model.nu].to_vec();
        self.model.clamp_input(&mut u0);
        let cost = (0..layout.horizon)
            .map(|j| {
                let x = &states[j * layout.nx..(j + 1) * layout.nx];
                let u = &inputs[j * layout.nu..(j + 1) * layout.nu];
                self.model.stage_cost(x, u)
            })
            .sum();
        Ok(PlanResult {
            u0,
            inputs,
            states,
            cost,
            status: sol.status,
            softened,
            iterations: iterations + sol.iterations,
            factorizations: factorizations + sol.factorizations,
            polished: sol.polished,
        })
    }
}

/// Moves every stage block one step earlier and repeats the last one.
fn shift_blocks(v: &mut [f64], start: usize, block: usize, count: usize) {
    if count < 2 || block == 0 {
        return;
    }
    v.copy_within(start + block..start + count * block, start);
}

fn shifted(l: &QpLayout, sol: &QpSolution) -> WarmStart {
    let mut x = sol.x.clone();
    let mut z = sol.z.clone();
    let mut y = sol.y.clone();
    for v in [&mut x, &mut z] {
        shift_blocks(v, l.x(1), l.nx, l.horizon);
        shift_blocks(v, l.u(0), l.nu, l.horizon);
        if l.soft {
            shift_blocks(v, l.s(1), l.nx, l.horizon);
        }
    }
    shift_blocks(&mut y, 0, l.nx, l.horizon);
    WarmStart { x, y, z }
}
