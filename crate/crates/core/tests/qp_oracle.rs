use lfcbench_core::qp::{check_kkt, solve_qp, CscMatrix, QpSettings, QpStatus, QuadraticProgram};
use proptest::prelude::*;

/// Gaussian elimination with partial pivoting; `None` when singular.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn objective(h: &[Vec<f64>], g: &[f64], x: &[f64]) -> f64 {
    let n = g.len();
    let mut v = 0.0;
    for i in 0..n {
        v += g[i] * x[i];
        for j in 0..n {
            v += 0.5 * x[i] * h[i][j] * x[j];
        }
    }
    v
}

/// Enumerates every free/lower/upper pattern and keeps the best feasible
/// stationary point.
fn enumerate(h: &[Vec<f64>], g: &[f64], lb: &[f64], ub: &[f64]) -> Vec<f64> {
    let n = g.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut pattern = vec![0u8; n];
        let mut c = code;
        for p in pattern.iter_mut() {
            *p = (c % 3) as u8;
            c /= 3;
        }
        if pattern
            .iter()
            .zip(lb.iter().zip(ub))
            .any(|(&p, (l, u))| (p == 1 && !l.is_finite()) || (p == 2 && !u.is_finite()))
        {
            continue;
        }
        let mut x = vec![0.0; n];
        for j in 0..n {
            x[j] = match pattern[j] {
                1 => lb[j],
                2 => ub[j],
                _ => 0.0,
            };
        }
        let free: Vec<usize> = (0..n).filter(|&j| pattern[j] == 0).collect();
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| h[i][j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| -g[i] - (0..n).filter(|&j| pattern[j] != 0).map(|j| h[i][j] * x[j]).sum::<f64>())
                .collect();
            let Some(xf) = dense_solve(a, b) else { continue };
            for (k, &j) in free.iter().enumerate() {
                x[j] = xf[k];
            }
        }
        if (0..n).any(|j| x[j] < lb[j] - 1e-12 || x[j] > ub[j] + 1e-12) {
            continue;
        }
        let f = objective(h, g, &x);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, x));
        }
    }
    best.expect("a box-constrained strictly convex QP has a solution").1
}

prop_compose! {
    fn boxed_qp()(n in 1usize..=6)
        (m in prop::collection::vec(-2.0f64..2.0, n * n),
         g in prop::collection::vec(-5.0f64..5.0, n),
         lo in prop::collection::vec(-3.0f64..1.0, n),
         width in prop::collection::vec(0.0f64..3.0, n),
         open in prop::collection::vec(0u8..6, n),
         n in Just(n))
        -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>)
    {
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                h[i][j] = (0..n).map(|k| m[k * n + i] * m[k * n + j]).sum::<f64>();
            }
            h[i][i] += 0.1;
        }
        let mut lb = lo.clone();
        let mut ub: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
        for j in 0..n {
            match open[j] {
                0 => lb[j] = f64::NEG_INFINITY,
                1 => ub[j] = f64::INFINITY,
                _ => {}
            }
        }
        (h, g, lb, ub)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_enumeration((h, g, lb, ub) in boxed_qp()) {
        let expected = enumerate(&h, &g, &lb, &ub);
        let qp = QuadraticProgram::boxed(CscMatrix::from_dense(&h), g, lb, ub).unwrap();
        let sol = solve_qp(&qp, &QpSettings::default()).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        for (a, b) in sol.x.iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-5, "{:?} vs {:?}", sol.x, expected);
        }
        prop_assert!(check_kkt(&qp, &sol, 1e-6).unwrap().passed());
    }

    #[test]
    fn cost_scaling_keeps_argmin((h, g, lb, ub) in boxed_qp(), s in 0.01f64..100.0) {
        let qp = QuadraticProgram::boxed(CscMatrix::from_dense(&h), g.clone(), lb.clone(), ub.clone()).unwrap();
        let hs: Vec<Vec<f64>> = h.iter().map(|r| r.iter().map(|v| v * s).collect()).collect();
        let gs: Vec<f64> = g.iter().map(|v| v * s).collect();
        let scaled = QuadraticProgram::boxed(CscMatrix::from_dense(&hs), gs, lb, ub).unwrap();
        let a = solve_qp(&qp, &QpSettings::default()).unwrap();
        let b = solve_qp(&scaled, &QpSettings::default()).unwrap();
        for (x, y) in a.x.iter().zip(&b.x) {
            prop_assert!((x - y).abs() <= 1e-5);
        }
    }

    #[test]
    fn deterministic((h, g, lb, ub) in boxed_qp()) {
        let qp = QuadraticProgram::boxed(CscMatrix::from_dense(&h), g, lb, ub).unwrap();
        let a = solve_qp(&qp, &QpSettings::default()).unwrap();
        let b = solve_qp(&qp, &QpSettings::default()).unwrap();
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn kkt_check_catches_perturbation() {
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
    let mut sol = solve_qp(&qp, &QpSettings::default()).unwrap();
    assert!(check_kkt(&qp, &sol, 1e-6).unwrap().passed());
    sol.x[0] += 1e-2;
    let report = check_kkt(&qp, &sol, 1e-6).unwrap();
    assert!(!report.stationarity_ok());
}

#[test]
fn empty_qp_passes() {
    let qp = QuadraticProgram::boxed(
        CscMatrix::zeros(2, 2),
        vec![0.0; 2],
        vec![f64::NEG_INFINITY; 2],
        vec![f64::INFINITY; 2],
    )
    .unwrap();
    let sol = lfcbench_core::qp::QpSolution {
        x: vec![0.0; 2],
        y: vec![],
        z: vec![0.0; 2],
        status: QpStatus::Optimal,
        r_prim: 0.0,
        r_dual: 0.0,
        iterations: 0,
        polished: false,
        factorizations: 0,
    };
    assert!(check_kkt(&qp, &sol, 1e-6).unwrap().passed());
    let solved = solve_qp(&qp, &QpSettings::default()).unwrap();
    assert_eq!(solved.status, QpStatus::Optimal);
    assert_eq!(solved.x, vec![0.0; 2]);
}
