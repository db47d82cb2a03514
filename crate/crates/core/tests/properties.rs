use lfcbench_core::dynamics::{step_linear, step_network_pwa, step_pwa_ess, ModelVariant, NetworkState, TurbineParams};
use lfcbench_core::model::{
    check_violations, constraint_set, constraint_sets, default_params, AreaExogenous, AreaId, AreaInput, AreaState,
    NetworkInput, NetworkParams,
};
use lfcbench_core::mpc::{evaluate_plan, CentralizedMpc, DecentralizedMpc, ExoWindow, MpcConfig};
use lfcbench_core::signals::{
    interpolate_to_steps, repair_missing, synthetic_scenario, HourlySeries, Profile, SeriesKind, HOURS,
};
use lfcbench_core::topology::{build_eea_topology, tie_power, TieLine, Topology};
use proptest::prelude::*;

const N: usize = 26;

fn vec_of(len: usize, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

fn state_from(v: &[f64]) -> NetworkState {
    NetworkState {
        areas: v
            .chunks(3)
            .map(|c| AreaState {
                d_delta: c[0],
                d_f: c[1],
                e: c[2],
            })
            .collect(),
        ..Default::default()
    }
}

fn exo_from(v: &[f64]) -> Vec<AreaExogenous> {
    v.chunks(2)
        .map(|c| AreaExogenous {
            d_p_load: c[0],
            d_p_ren: c[1],
        })
        .collect()
}

fn params_with(capacity: f64) -> NetworkParams {
    default_params().with_capacities(&[capacity; N]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_step_is_linear(
        s1 in vec_of(3 * N, 10.0), s2 in vec_of(3 * N, 10.0),
        u1 in vec_of(3 * N, 2.0), u2 in vec_of(3 * N, 2.0),
        w1 in vec_of(2 * N, 5.0), w2 in vec_of(2 * N, 5.0),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let topo = build_eea_topology();
        let p = params_with(50.0);
        let mix = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(x, y)| a * x + b * y).collect::<Vec<_>>();
        let f = |s: &[f64], u: &[f64], w: &[f64]| {
            step_linear(&state_from(s), &NetworkInput::from_vec(u), &exo_from(w), &topo, &p).unwrap().to_vec()
        };
        let lhs = f(&mix(&s1, &s2), &mix(&u1, &u2), &mix(&w1, &w2));
        let rhs = mix(&f(&s1, &u1, &w1), &f(&s2, &u2, &w2));
        let scale = lhs.iter().chain(&rhs).fold(1.0f64, |m, v| m.max(v.abs()));
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn lossless_storage_branches_agree(e in 0.0f64..100.0, mag in 0.0f64..5.0, charging in any::<bool>()) {
        let mut area = default_params().areas[0];
        area.eta_c = 1.0;
        area.eta_d = 1.0;
        let (p_c, p_d) = if charging { (mag, 0.0) } else { (0.0, mag) };
        let tau = 2.5;
        let linear = e + tau * (area.eta_c * p_c - p_d / area.eta_d);
        prop_assert_eq!(step_pwa_ess(e, p_c - p_d, &area, tau), linear);
    }

    #[test]
    fn network_pwa_matches_linear_when_lossless(s in vec_of(3 * N, 10.0), mags in vec_of(N, 3.0), w in vec_of(2 * N, 5.0)) {
        let topo = build_eea_topology();
        let mut p = params_with(50.0);
        for a in &mut p.areas {
            a.eta_c = 1.0;
            a.eta_d = 1.0;
        }
        let u = NetworkInput {
            areas: mags
                .iter()
                .map(|&m| AreaInput { d_p_disp: 0.3 * m, p_c: m.max(0.0), p_d: (-m).max(0.0) })
                .collect(),
        };
        let st = state_from(&s);
        let lin = step_linear(&st, &u, &exo_from(&w), &topo, &p).unwrap();
        let pwa = step_network_pwa(&st, &u, &exo_from(&w), &topo, &p).unwrap();
        prop_assert_eq!(lin, pwa);
    }

    #[test]
    fn tie_power_sums_to_zero(angles in vec_of(N, 30.0)) {
        let topo = build_eea_topology();
        let tie = tie_power(&angles, &topo).unwrap();
        let total: f64 = tie.iter().sum();
        let scale: f64 = tie.iter().map(|t| t.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        prop_assert!(total.abs() <= 1e-12 * scale);
    }

    #[test]
    fn larger_capacity_never_shrinks_boxes(p in 0.0f64..1e4, extra in 0.0f64..1e4) {
        let base = default_params().areas[0];
        let small = constraint_set(&base.with_capacity(p)).unwrap();
        let large = constraint_set(&base.with_capacity(p + extra)).unwrap();
        for (s, l) in [
            (small.d_delta, large.d_delta),
            (small.d_f, large.d_f),
            (small.e, large.e),
            (small.d_p_disp, large.d_p_disp),
            (small.p_c, large.p_c),
            (small.p_d, large.p_d),
            (small.p_disp_total, large.p_disp_total),
        ] {
            prop_assert!(l.lo <= s.lo && l.hi >= s.hi);
        }
    }

    #[test]
    fn violations_empty_iff_inside(s in vec_of(3 * N, 45.0), u in vec_of(3 * N, 0.06), tiny in any::<bool>()) {
        // `tiny` squeezes frequencies into the band so both outcomes occur
        let mut s = s;
        if tiny {
            for c in s.chunks_mut(3) {
                c[0] *= 0.5;
                c[1] *= 1e-3;
                c[2] = c[2].abs();
            }
        }
        let p = params_with(50.0);
        let sets = constraint_sets(&p).unwrap();
        let st = state_from(&s);
        let inp = NetworkInput::from_vec(&u);
        let report = check_violations(&st, &inp, &sets).unwrap();
        let inside = sets.iter().enumerate().all(|(i, b)| {
            let (x, v) = (&st.areas[i], &inp.areas[i]);
            b.d_delta.contains(x.d_delta)
                && b.d_f.contains(x.d_f)
                && b.e.contains(x.e)
                && b.d_p_disp.contains(v.d_p_disp)
                && b.p_c.contains(v.p_c)
                && b.p_d.contains(v.p_d)
        });
        prop_assert_eq!(report.is_empty(), inside);
    }

    #[test]
    fn repair_keeps_present_entries(vals in prop::collection::vec(prop::option::weighted(0.7, -50.0f64..50.0), HOURS)) {
        prop_assume!(vals.iter().filter(|v| v.is_some()).count() >= 2);
        let series = HourlySeries {
            area: AreaId::new(3).unwrap(),
            kind: SeriesKind::RenFor,
            values: vals.clone(),
        };
        let fixed = repair_missing(&series).unwrap();
        prop_assert!(fixed.is_complete());
        for (a, b) in vals.iter().zip(&fixed.values) {
            if let Some(a) = a {
                prop_assert_eq!(Some(*a), *b);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn interpolation_hits_hours_and_starts_at_zero(seed in any::<u64>(), volatile in any::<bool>()) {
        let profile = if volatile { Profile::Volatile } else { Profile::Calm };
        let sc = synthetic_scenario(seed, profile);
        let sph = 60;
        let sig = interpolate_to_steps(&sc, sph).unwrap();
        prop_assert_eq!(sig.len(), HOURS * sph);
        for (i, area) in sig.areas.iter().enumerate() {
            for kind in SeriesKind::ALL {
                let hourly = sc.series(i, kind).dense().unwrap();
                let steps = area.get(kind);
                prop_assert_eq!(steps[0], 0.0);
                for h in 0..HOURS {
                    let expected = hourly[h] - hourly[0];
                    prop_assert!((steps[h * sph] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
                }
            }
        }
    }
}

fn three_areas() -> Topology {
    let id = |i| AreaId::new(i).unwrap();
    let lines = vec![
        TieLine {
            a: id(0),
            b: id(1),
            d: 400.0,
            k: 100.0,
        },
        TieLine {
            a: id(1),
            b: id(2),
            d: 700.0,
            k: 100.0,
        },
    ];
    Topology::new(3, lines).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Any plan the decentralized controller produces is feasible for the
    // centralized problem, so it can never beat the centralized optimum.
    #[test]
    fn centralized_dominates_decentralized(
        angles in vec_of(3, 2.0), freqs in vec_of(3, 0.01), charge in prop::collection::vec(0.0f64..10.0, 3),
        loads in vec_of(3, 0.05), drift in vec_of(3, 0.002),
    ) {
        let topo = three_areas();
        let p = default_params().truncated(3).with_capacities(&[20.0, 35.0, 12.0]).unwrap();
        let cfg = MpcConfig { horizon: 10, ..MpcConfig::default() };
        let mut x = NetworkState::zeros(3);
        for i in 0..3 {
            x.areas[i] = AreaState { d_delta: angles[i], d_f: freqs[i], e: charge[i] };
        }
        let mut window = ExoWindow::zeros(3, 10);
        for (j, st) in window.stages.iter_mut().enumerate() {
            for i in 0..3 {
                st[i].d_p_load = loads[i] + drift[i] * j as f64;
            }
        }
        let mut c = CentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
        let mut d = DecentralizedMpc::new(ModelVariant::Linear, &topo, &p, &TurbineParams::default(), cfg).unwrap();
        let xv = x.to_vec();
        let Ok(plan) = c.plan(&xv, &window) else { return Ok(()) };
        prop_assume!(!plan.softened);
        let Ok(dec) = d.plan_window(&x, &window) else { return Ok(()) };
        let eval = evaluate_plan(c.model(), &xv, &window, &dec.diagnostics.plan).unwrap();
        prop_assume!(eval.is_feasible(1e-9));
        prop_assert!(plan.cost <= eval.cost * (1.0 + 1e-12) + 1e-12, "{} > {}", plan.cost, eval.cost);
    }
}
