use nalgebra::{DMatrix, DVector};
use pdedisc::optim::{
    minimize_quasi_newton, soft_threshold, solve_l1_linear, FnObjective, L1Config, QuasiNewtonConfig, Termination,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rosenbrock(x: &[f64]) -> pdedisc::Result<(f64, Vec<f64>)> {
    let (a, b) = (x[0], x[1]);
    let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
    let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
    Ok((f, g))
}

fn random_problem(seed: u64, rows: usize, cols: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let truth: Vec<f64> = (0..cols).map(|j| if j % 3 == 0 { rng.gen_range(-2.0..2.0) } else { 0.0 }).collect();
    let b: Vec<f64> = (0..rows)
        .map(|r| (0..cols).map(|j| a[r * cols + j] * truth[j]).sum::<f64>() + 0.1 * rng.gen_range(-1.0..1.0))
        .collect();
    (a, b)
}

fn objective(a: &[f64], b: &[f64], cols: usize, q: &[f64], lambda: f64) -> f64 {
    let n = b.len();
    let mut s = 0.0;
    for r in 0..n {
        let p: f64 = (0..cols).map(|j| a[r * cols + j] * q[j]).sum();
        s += (p - b[r]).powi(2);
    }
    0.5 * s / n as f64 + lambda * q.iter().map(|v| v.abs()).sum::<f64>()
}

/// Cyclic coordinate descent with exact coordinate minimization.
fn coordinate_descent(a: &[f64], b: &[f64], cols: usize, lambda: f64) -> Vec<f64> {
    let n = b.len();
    let col_sq: Vec<f64> = (0..cols).map(|j| (0..n).map(|r| a[r * cols + j].powi(2)).sum::<f64>() / n as f64).collect();
    let mut q = vec![0.0; cols];
    let mut resid: Vec<f64> = b.to_vec();
    for _ in 0..100_000 {
        let mut delta = 0.0f64;
        for j in 0..cols {
            let rho: f64 = (0..n).map(|r| a[r * cols + j] * resid[r]).sum::<f64>() / n as f64 + col_sq[j] * q[j];
            let new = soft_threshold_ref(rho, lambda) / col_sq[j];
            let d = new - q[j];
            if d != 0.0 {
                (0..n).for_each(|r| resid[r] -= a[r * cols + j] * d);
                q[j] = new;
            }
            delta = delta.max(d.abs());
        }
        if delta < 1e-15 {
            break;
        }
    }
    q
}

fn soft_threshold_ref(v: f64, l: f64) -> f64 {
    v.signum() * (v.abs() - l).max(0.0)
}

#[test]
fn rosenbrock_reaches_minimum() {
    for cfg in [QuasiNewtonConfig::default(), QuasiNewtonConfig::lbfgs(10)] {
        let cfg = QuasiNewtonConfig { grad_tol: 1e-10, record_steps: true, ..cfg };
        let rep = minimize_quasi_newton(&FnObjective::new(2, rosenbrock), &[-1.2, 1.0], &cfg).unwrap();
        assert_eq!(rep.termination, Termination::Tolerance);
        assert!((rep.params[0] - 1.0).abs() <= 1e-6 && (rep.params[1] - 1.0).abs() <= 1e-6, "{:?}", rep.params);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn accepted_steps_satisfy_wolfe(x0 in -2.0f64..2.0, y0 in -1.0f64..3.0, memory in prop::sample::select(vec![0usize, 5])) {
        let cfg = QuasiNewtonConfig { memory, record_steps: true, grad_tol: 1e-9, ..QuasiNewtonConfig::default() };
        let rep = minimize_quasi_newton(&FnObjective::new(2, rosenbrock), &[x0, y0], &cfg).unwrap();
        prop_assert!(!rep.steps.is_empty());
        for s in &rep.steps {
            prop_assert!(s.slope_before < 0.0);
            prop_assert!(s.f_after <= s.f_before + cfg.wolfe_c1 * s.alpha * s.slope_before + 1e-12 * s.f_before.abs());
            prop_assert!(s.slope_after.abs() <= cfg.wolfe_c2 * s.slope_before.abs() + 1e-12);
        }
    }

    #[test]
    fn l1_matches_coordinate_descent(seed in any::<u64>(), frac in 0.01f64..0.5) {
        let (a, b) = random_problem(seed, 200, 9);
        let n = b.len() as f64;
        let lmax = (0..9).map(|j| ((0..200).map(|r| a[r * 9 + j] * b[r]).sum::<f64>() / n).abs()).fold(0.0, f64::max);
        let lambda = frac * lmax;
        let sol = solve_l1_linear(&a, 9, &b, lambda, &L1Config::default()).unwrap();
        let oracle = coordinate_descent(&a, &b, 9, lambda);
        let (fs, fo) = (objective(&a, &b, 9, &sol.coefficients, lambda), objective(&a, &b, 9, &oracle, lambda));
        prop_assert!((fs - fo).abs() <= 1e-8, "{} vs {}", fs, fo);
        prop_assert!((sol.objective - fs).abs() <= 1e-10);
        // objective history never increases beyond evaluation rounding
        let scale = 1.0 + sol.history[0].abs();
        for w in sol.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-14 * scale, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn large_penalty_gives_zero_model(seed in any::<u64>()) {
        let (a, b) = random_problem(seed, 200, 9);
        let n = b.len() as f64;
        let lmax = (0..9).map(|j| ((0..200).map(|r| a[r * 9 + j] * b[r]).sum::<f64>() / n).abs()).fold(0.0, f64::max);
        let sol = solve_l1_linear(&a, 9, &b, lmax * 1.0001, &L1Config::default()).unwrap();
        prop_assert!(sol.coefficients.iter().all(|&q| q == 0.0));
    }

    #[test]
    fn zero_penalty_matches_least_squares(seed in any::<u64>()) {
        let (a, b) = random_problem(seed, 120, 6);
        let sol = solve_l1_linear(&a, 6, &b, 0.0, &L1Config { max_iter: 200_000, tol: 1e-14 }).unwrap();
        let am = DMatrix::from_row_slice(120, 6, &a);
        let qr = am.qr();
        let ls = qr.r().solve_upper_triangular(&(qr.q().transpose() * DVector::from_vec(b.clone()))).unwrap();
        for j in 0..6 {
            prop_assert!((sol.coefficients[j] - ls[j]).abs() <= 1e-8, "{} vs {}", sol.coefficients[j], ls[j]);
        }
    }

    #[test]
    fn soft_threshold_identity(v in -10.0f64..10.0, l in 0.0f64..5.0) {
        prop_assert_eq!(soft_threshold(v, l), soft_threshold_ref(v, l));
    }
}
