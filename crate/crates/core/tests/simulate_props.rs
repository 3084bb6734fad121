use pdedisc::net::Mlp;
use pdedisc::simulate::{integrate_rk45, rollout_ode, solve_burgers, BurgersConfig, Rk45Config, Trajectory};

fn burgers(nx: usize, nt: usize) -> Trajectory {
    let cfg = BurgersConfig { epsilon: 0.1, nx, nt, t_end: 0.2, ..BurgersConfig::default() };
    solve_burgers(&cfg).unwrap()
}

/// Max difference at the final time over the coarse grid's nodes.
fn final_error(coarse: &Trajectory, fine: &Trajectory) -> f64 {
    let stride = (fine.x.len() - 1) / (coarse.x.len() - 1);
    let (c, f) = (coarse.field(coarse.times.len() - 1), fine.field(fine.times.len() - 1));
    c.iter().enumerate().map(|(i, v)| (v - f[i * stride]).abs()).fold(0.0, f64::max)
}

fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn backward_euler_is_first_order_in_time() {
    let reference = burgers(64, 2560);
    let errors: Vec<f64> = [20, 40, 80].iter().map(|&nt| final_error(&burgers(64, nt), &reference)).collect();
    for r in rates(&errors) {
        assert!((r - 1.0).abs() <= 0.3, "rates {:?} errors {errors:?}", rates(&errors));
    }
}

#[test]
fn central_differences_are_second_order_in_space() {
    let nt = 400;
    let reference = burgers(512, nt);
    let errors: Vec<f64> = [16, 32, 64].iter().map(|&nx| final_error(&burgers(nx, nt), &reference)).collect();
    for r in rates(&errors) {
        assert!((r - 2.0).abs() <= 0.3, "rates {:?} errors {errors:?}", rates(&errors));
    }
}

#[test]
fn rk45_error_shrinks_with_tolerance() {
    let t = [0.0, 1.0, 2.0, 3.0];
    let err = |rtol: f64| {
        let cfg = Rk45Config { rtol, atol: rtol * 1e-3, ..Rk45Config::default() };
        let y = integrate_rk45(|_, y, dy| { dy[0] = -y[0]; Ok(()) }, &[1.0], &t, &cfg).unwrap();
        t.iter().zip(&y).map(|(ti, yi)| (yi[0] - (-ti).exp()).abs()).fold(0.0, f64::max)
    };
    let (loose, tight) = (err(1e-4), err(1e-9));
    assert!(tight <= 1e-6, "{tight}");
    assert!(tight < loose, "{tight} vs {loose}");
}

#[test]
fn network_rollout_stays_finite() {
    for seed in 0..10 {
        let net = Mlp::new_seeded(&[3, 6, 6, 1], seed).unwrap();
        let rhs = |t: f64, x: &[f64], u: f64| Ok(net.forward(&[u, t, x[0]])?[0]);
        let x: Vec<f64> = (0..=32).map(|i| i as f64 / 32.0).collect();
        let u0: Vec<f64> = x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).collect();
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let traj = rollout_ode(&rhs, &u0, &x, &times, &Rk45Config::default()).unwrap();
        assert!(traj.values.iter().all(|v| v.is_finite()), "seed {seed}");
    }
}
