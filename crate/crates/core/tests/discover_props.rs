use nalgebra::{DMatrix, DVector};
use pdedisc::discover::{fit_linear_pde, fit_operator_net, OperatorFitConfig, ResidualConfig};
use pdedisc::features::{design_from_samples, Column, DerivativeSamples, DesignMatrix, LibrarySpec, TermNaming};
use pdedisc::net::Mlp;
use pdedisc::optim::QuasiNewtonConfig;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_design(seed: u64, rows: usize, cols: usize, bias: bool) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Column> = (1..=cols).map(Column::Coord).collect();
    if bias {
        columns[0] = Column::Bias;
    }
    let names = (0..cols).map(|j| format!("c{j}")).collect();
    let scales: Vec<f64> = (0..cols).map(|j| 10f64.powi(j as i32 % 4 - 1)).collect();
    let values: Vec<f64> = (0..rows * cols)
        .map(|i| if bias && i % cols == 0 { 1.0 } else { scales[i % cols] * rng.gen_range(-1.0..1.0) })
        .collect();
    let target = (0..rows)
        .map(|r| {
            (0..cols).map(|j| values[r * cols + j] * (j as f64 - 1.5) / scales[j]).sum::<f64>() + 0.05 * rng.gen_range(-1.0..1.0)
        })
        .collect();
    DesignMatrix::from_parts(columns, names, values, target, cols).unwrap()
}

/// Dense Householder least squares.
fn qr_solve(a: DMatrix<f64>, b: DVector<f64>) -> DVector<f64> {
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&qtb).unwrap()
}

/// `u = c − a·tanh(w (x − c t))` solves `u_t = −u u_x + ν u_xx` with `ν = a/(2w)`.
fn traveling_wave(a: f64, w: f64, c: f64) -> Mlp {
    Mlp::from_parts(&[2, 1, 1], vec![vec![-w * c, w], vec![-a]], vec![vec![0.0], vec![c]]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn zero_penalty_fit_matches_least_squares(seed in any::<u64>()) {
        let d = random_design(seed, 150, 7, false);
        let model = fit_linear_pde(&d, &ResidualConfig::default()).unwrap();
        let a = DMatrix::from_row_slice(d.rows(), d.cols(), &d.values);
        let ls = qr_solve(a, DVector::from_vec(d.target.clone()));
        for j in 0..d.cols() {
            prop_assert!((model.coefficients[j] - ls[j]).abs() <= 1e-8 * ls[j].abs().max(1.0), "{} vs {}", model.coefficients[j], ls[j]);
        }
    }

    #[test]
    fn superset_library_never_fits_worse(seed in any::<u64>(), keep in prop::collection::btree_set(0usize..7, 1..7)) {
        let d = random_design(seed, 120, 7, false);
        let keep: Vec<usize> = keep.into_iter().collect();
        let full = fit_linear_pde(&d, &ResidualConfig::default()).unwrap();
        let sub = fit_linear_pde(&d.select_columns(&keep), &ResidualConfig::default()).unwrap();
        prop_assert!(full.residual_loss <= sub.residual_loss + 1e-12);
    }

    #[test]
    fn returned_model_predicts_like_scaled_model(seed in any::<u64>(), alpha in prop::sample::select(vec![0.0, 1e-3, 1e-2])) {
        let d = random_design(seed, 100, 5, false);
        let cfg = ResidualConfig { alpha_q: alpha, ..ResidualConfig::default() };
        let model = fit_linear_pde(&d, &cfg).unwrap();
        let pred = model.predict(&d).unwrap();
        // columns divided by their std, coefficients multiplied by it
        for r in 0..d.rows() {
            let scaled: f64 = (0..d.cols()).map(|j| (d.get(r, j) / d.stds[j]) * (model.coefficients[j] * d.stds[j])).sum();
            prop_assert!((scaled - pred[r]).abs() <= 1e-10 * pred[r].abs().max(1.0));
        }
    }

    #[test]
    fn analytic_burgers_wave_is_recovered(a in 0.3f64..1.2, w in 2.0f64..8.0, c in 0.2f64..0.8) {
        let net = traveling_wave(a, w, c);
        let mut rng = ChaCha8Rng::seed_from_u64((a * 1e6) as u64);
        let pts: Vec<f64> = (0..200).flat_map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(-0.5..1.5)]).collect();
        let naming = TermNaming::new(vec!["x".into()], vec!["u".into()]);
        let samples = DerivativeSamples::compute(&net, &pts, 2, naming).unwrap();
        let full = design_from_samples(&samples, &LibrarySpec::new(2, 2, 1, 1), 0).unwrap();
        let d = full.select_columns(&[full.find("u*u_x").unwrap(), full.find("u_xx").unwrap()]);
        let model = fit_linear_pde(&d, &ResidualConfig::default()).unwrap();
        let nu = a / (2.0 * w);
        prop_assert!((model.coefficients[0] + 1.0).abs() <= 1e-6, "{:?}", model.coefficients);
        prop_assert!((model.coefficients[1] - nu).abs() <= 1e-6, "{:?} vs {}", model.coefficients, nu);
    }
}

#[test]
fn operator_net_fits_zero_target() {
    let mut d = random_design(4, 200, 2, false);
    d = DesignMatrix::from_parts(d.columns.clone(), d.names.clone(), d.values.clone(), vec![0.0; d.rows()], d.n_space).unwrap();
    let cfg = OperatorFitConfig { hidden: vec![2, 2], ..OperatorFitConfig::default() };
    let op = fit_operator_net(&d, &cfg).unwrap();
    let worst = op.predict(&d).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-4, "{worst}");
}

#[test]
fn affine_operator_matches_linear_cost() {
    for seed in 0..4 {
        let d = random_design(seed, 300, 4, true);
        let lin = fit_linear_pde(&d, &ResidualConfig::default()).unwrap();
        let cfg = OperatorFitConfig {
            hidden: vec![],
            optimizer: QuasiNewtonConfig { grad_tol: 1e-12, ..QuasiNewtonConfig::default() },
            ..OperatorFitConfig::default()
        };
        let op = fit_operator_net(&d, &cfg).unwrap();
        let rel = (op.residual_loss - lin.residual_loss).abs() / lin.residual_loss;
        assert!(rel <= 1e-6, "seed {seed}: {} vs {}", op.residual_loss, lin.residual_loss);
    }
}
