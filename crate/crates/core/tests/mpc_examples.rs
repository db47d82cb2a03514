use std::f64::consts::PI;

use lfcbench_core::dynamics::{step_linear, ModelVariant, NetworkState, TurbineParams};
use lfcbench_core::model::{default_params, AreaExogenous, AreaId, NetworkInput, NetworkParams};
use lfcbench_core::mpc::{
    build_mpc_qp, evaluate_plan, splice_exogenous, CentralizedMpc, Controller, DecentralizedMpc, ExoWindow, MpcConfig,
    PredictionModel, QpLayout,
};
use lfcbench_core::qp::QpStatus;
use lfcbench_core::signals::StepSignals;
use lfcbench_core::topology::{build_eea_topology, TieLine, Topology};

fn params(n: usize, capacity: f64) -> NetworkParams {
    default_params()
        .truncated(n)
        .with_capacities(&vec![capacity; n])
        .unwrap()
}

fn two_areas() -> Topology {
    let line = TieLine {
        a: AreaId::new(0).unwrap(),
        b: AreaId::new(1).unwrap(),
        d: 500.0,
        k: 100.0,
    };
    Topology::new(2, vec![line]).unwrap()
}

fn linear_model(topo: &Topology, p: &NetworkParams, cfg: &MpcConfig) -> PredictionModel {
    PredictionModel::new(ModelVariant::Linear, topo, p, &TurbineParams::default(), cfg).unwrap()
}

#[test]
fn full_network_qp_dimensions() {
    let topo = build_eea_topology();
    let p = params(26, 40.0);
    let cfg = MpcConfig::default();
    let model = linear_model(&topo, &p, &cfg);
    let qp = build_mpc_qp(&model, &vec![0.0; 78], &ExoWindow::zeros(26, 30), None).unwrap();
    assert_eq!(qp.n(), 4680);
    assert_eq!(qp.m(), 2340);
}

#[test]
fn origin_is_optimal_and_free() {
    let topo = build_eea_topology();
    let p = params(26, 40.0);
    let mut mpc = CentralizedMpc::new(
        ModelVariant::Linear,
        &topo,
        &p,
        &TurbineParams::default(),
        MpcConfig::default(),
    )
    .unwrap();
    let plan = mpc.plan(&vec![0.0; 78], &ExoWindow::zeros(26, 30)).unwrap();
    assert_eq!(plan.status, QpStatus::Optimal);
    assert!(plan.cost.abs() < 1e-12);
    assert!(plan.inputs.iter().all(|u| u.abs() < 1e-9));

    let mut dec = DecentralizedMpc::new(
        ModelVariant::Linear,
        &topo,
        &p,
        &TurbineParams::default(),
        MpcConfig::default(),
    )
    .unwrap();
    let out = dec
        .plan_window(&NetworkState::zeros(26), &ExoWindow::zeros(26, 30))
        .unwrap();
    assert!(out.input.to_vec().iter().all(|u| u.abs() < 1e-9));
}

// One area, one stage, starting at rest. With storage empty, charging only
// costs and discharging is blocked by e ≥ 0, so the optimum moves dispatch
// alone: u = 10c²d / (1 + 10c²), Δf⁺ = −c d / (1 + 10c²).
#[test]
fn single_area_single_stage_closed_form() {
    let p = params(1, 100.0);
    let a = p.areas[0];
    let c = p.tau * a.k_p / a.t_p;
    let d = 0.01;
    let cfg = MpcConfig {
        horizon: 1,
        ..MpcConfig::default()
    };
    let mut mpc = CentralizedMpc::new(
        ModelVariant::Linear,
        &Topology::isolated(1),
        &p,
        &TurbineParams::default(),
        cfg,
    )
    .unwrap();
    let window = ExoWindow {
        stages: vec![vec![AreaExogenous {
            d_p_load: d,
            d_p_ren: 0.0,
        }]],
    };
    let plan = mpc.plan(&[0.0, 0.0, 0.0], &window).unwrap();
    let disp = 10.0 * c * c * d / (1.0 + 10.0 * c * c);
    let f1 = -c * d / (1.0 + 10.0 * c * c);
    assert!((plan.u0[0] - disp).abs() <= 1e-9 * disp, "{} vs {disp}", plan.u0[0]);
    assert!(plan.u0[1].abs() < 1e-12 && plan.u0[2].abs() < 1e-12);
    assert!((plan.states[1] - f1).abs() <= 1e-9 * f1.abs());
    let cost = 10.0 * f1 * f1 + disp * disp;
    assert!((plan.cost - cost).abs() <= 1e-9 * cost);
}

type Dense = Vec<Vec<f64>>;

/// Dense `(A, B, E)` written out from the per-area equations.
fn dense_model(topo: &Topology, p: &NetworkParams) -> (Dense, Dense, Dense) {
    let n = p.n_areas();
    let tau = p.tau;
    let mut a = vec![vec![0.0; 3 * n]; 3 * n];
    let mut b = vec![vec![0.0; 3 * n]; 3 * n];
    let mut e = vec![vec![0.0; 2 * n]; 3 * n];
    for i in 0..n {
        let ar = p.areas[i];
        let c = tau * ar.k_p / ar.t_p;
        let (d, f, s) = (3 * i, 3 * i + 1, 3 * i + 2);
        a[d][d] = 1.0;
        a[d][f] = tau * 2.0 * PI;
        a[f][f] = 1.0 - tau / ar.t_p;
        a[s][s] = 1.0;
        for line in topo.lines() {
            let (x, y) = (line.a.index(), line.b.index());
            let t = line.k / line.d;
            if x == i {
                a[f][d] -= c * t;
                a[f][3 * y] += c * t;
            } else if y == i {
                a[f][d] -= c * t;
                a[f][3 * x] += c * t;
            }
        }
        b[f][3 * i] = c;
        b[f][3 * i + 1] = -c;
        b[f][3 * i + 2] = c;
        b[s][3 * i + 1] = tau * ar.eta_c;
        b[s][3 * i + 2] = -tau / ar.eta_d;
        e[f][2 * i] = -c;
        e[f][2 * i + 1] = c;
    }
    (a, b, e)
}

#[test]
fn two_area_qp_matches_dense_construction() {
    let topo = two_areas();
    let p = params(2, 30.0);
    let cfg = MpcConfig {
        horizon: 4,
        ..MpcConfig::default()
    };
    let model = linear_model(&topo, &p, &cfg);
    let (a, b, e) = dense_model(&topo, &p);
    assert_eq!(model.a.to_dense(), a);
    assert_eq!(model.b.to_dense(), b);
    assert_eq!(model.e.to_dense(), e);

    let x0 = [0.5, 0.01, 2.0, -0.3, -0.02, 1.0];
    let mut window = ExoWindow::zeros(2, 4);
    for (j, st) in window.stages.iter_mut().enumerate() {
        st[0].d_p_load = 0.1 * j as f64;
        st[1].d_p_ren = -0.05 * j as f64;
    }
    let qp = build_mpc_qp(&model, &x0, &window, None).unwrap();
    let l = QpLayout {
        horizon: 4,
        nx: 6,
        nu: 6,
        soft: false,
    };
    let nv = l.n_vars();
    let mut h = vec![vec![0.0; nv]; nv];
    let mut aeq = vec![vec![0.0; nv]; 24];
    let mut beq = vec![0.0; 24];
    for j in 1..=4 {
        for r in 0..6 {
            h[l.x(j) + r][l.x(j) + r] = 2.0 * cfg.r[r % 3];
            h[l.u(j - 1) + r][l.u(j - 1) + r] = 2.0 * cfg.q[r % 3];
            let row = 6 * (j - 1) + r;
            aeq[row][l.x(j) + r] = 1.0;
            for c in 0..6 {
                if j >= 2 {
                    aeq[row][l.x(j - 1) + c] -= a[r][c];
                }
                aeq[row][l.u(j - 1) + c] -= b[r][c];
            }
            let w = window.flat(j - 1);
            beq[row] = (0..4).map(|c| e[r][c] * w[c]).sum::<f64>();
            if j == 1 {
                beq[row] += (0..6).map(|c| a[r][c] * x0[c]).sum::<f64>();
            }
        }
    }
    assert_eq!(qp.h.to_dense(), h);
    assert_eq!(qp.a_eq.to_dense(), aeq);
    for (x, y) in qp.b_eq.iter().zip(&beq) {
        assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
    }
    assert!(qp.g.iter().all(|&v| v == 0.0));
}

#[test]
fn open_loop_cost_matches_evaluated_plan() {
    let topo = two_areas();
    let p = params(2, 30.0);
    let cfg = MpcConfig {
        horizon: 10,
        ..MpcConfig::default()
    };
    let mut mpc = CentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
    let x0 = [0.5, 0.01, 2.0, -0.3, -0.02, 1.0];
    let mut window = ExoWindow::zeros(2, 10);
    window.stages.iter_mut().for_each(|s| s[0].d_p_load = 0.2);
    let plan = mpc.plan(&x0, &window).unwrap();
    assert_eq!(plan.status, QpStatus::Optimal);
    let eval = evaluate_plan(mpc.model(), &x0, &window, &plan.inputs).unwrap();
    assert!((eval.cost - plan.cost).abs() <= 1e-8 * plan.cost);
    for (k, &u) in plan.u0.iter().enumerate() {
        assert!(u >= mpc.model().u_lb[k] && u <= mpc.model().u_ub[k]);
    }
}

#[test]
fn isolated_area_gets_same_input_from_both_controllers() {
    let topo = Topology::isolated(1);
    let p = params(1, 20.0);
    let cfg = MpcConfig {
        horizon: 12,
        ..MpcConfig::default()
    };
    let mut signals = StepSignals::zeros(1, 40, 1440);
    for k in 0..40 {
        signals.areas[0].load_meas[k] = 0.001 * k as f64;
        signals.areas[0].load_for[k] = 0.0012 * k as f64;
    }
    let mut state = NetworkState::zeros(1);
    state.areas[0].e = 3.0;
    state.areas[0].d_f = 0.004;
    let mut c = CentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
    let mut d = DecentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
    let uc = c.observe(5, &state, &signals).unwrap().input.to_vec();
    let ud = d.observe(5, &state, &signals).unwrap().input.to_vec();
    for (a, b) in uc.iter().zip(&ud) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-6), "{uc:?} vs {ud:?}");
    }
}

#[test]
fn splicing_rules() {
    let mut s = StepSignals::zeros(2, 10, 1440);
    for k in 0..10 {
        for a in 0..2 {
            s.areas[a].load_meas[k] = k as f64 + a as f64;
            s.areas[a].load_for[k] = 100.0 + k as f64;
            s.areas[a].ren_meas[k] = -(k as f64);
            s.areas[a].ren_for[k] = -100.0 - k as f64;
        }
    }
    let w1 = splice_exogenous(3, &s, 1).unwrap();
    assert_eq!(w1.horizon(), 1);
    assert_eq!(w1.stages[0], s.measured(3));

    let w = splice_exogenous(7, &s, 5).unwrap();
    assert_eq!(w.stages[0], s.measured(7));
    assert_eq!(w.stages[1], s.forecast(8));
    assert_eq!(w.stages[2], s.forecast(9));
    assert_eq!(w.stages[3], s.forecast(9));
    assert_eq!(w.stages[4], s.forecast(9));

    let mut same = s.clone();
    for a in same.areas.iter_mut() {
        a.load_for = a.load_meas.clone();
        a.ren_for = a.ren_meas.clone();
    }
    let w = splice_exogenous(2, &same, 4).unwrap();
    for j in 0..4 {
        assert_eq!(w.stages[j], same.measured(2 + j));
    }
}

#[test]
fn decentralized_result_independent_of_solve_order() {
    let topo = build_eea_topology();
    let p = params(26, 40.0);
    let cfg = MpcConfig {
        horizon: 8,
        ..MpcConfig::default()
    };
    let mut state = NetworkState::zeros(26);
    for (i, a) in state.areas.iter_mut().enumerate() {
        a.d_delta = 0.1 * (i as f64 - 12.0);
        a.e = 5.0;
    }
    let window = ExoWindow::zeros(26, 8);
    let mut fwd = DecentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
    let mut rev = DecentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
    let expected = fwd.plan_window(&state, &window).unwrap();

    let tasks = rev.prepare_window(&state, &window).unwrap();
    let mut results: Vec<_> = rev
        .locals_mut()
        .iter_mut()
        .rev()
        .zip(tasks.iter().rev())
        .map(|(l, t)| l.solve(t).unwrap())
        .collect();
    results.reverse();
    let got = rev.gather(results);
    assert_eq!(got, expected);
}

#[test]
fn regulation_to_origin() {
    let topo = build_eea_topology();
    let p = params(26, 40.0);
    let cfg = MpcConfig {
        horizon: 30,
        ..MpcConfig::default()
    };
    let mut mpc = CentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
    let mut x = NetworkState::zeros(26);
    x.areas[0].d_f = 0.01;
    x.areas[5].d_delta = 2.0;
    x.areas[17].d_f = -0.008;
    let norm = |s: &NetworkState| {
        s.areas
            .iter()
            .map(|a| a.d_delta * a.d_delta + a.d_f * a.d_f)
            .sum::<f64>()
            .sqrt()
    };
    let zero = vec![AreaExogenous::default(); 26];
    let n0 = norm(&x);
    let window = ExoWindow::zeros(26, 30);
    for _ in 0..150 {
        let plan = mpc.plan(&x.to_vec(), &window).unwrap();
        x = step_linear(&x, &NetworkInput::from_vec(&plan.u0), &zero, &topo, &p).unwrap();
    }
    let n1 = norm(&x);
    assert!(n1 < 0.05 * n0, "norm {n0} -> {n1}");
}
