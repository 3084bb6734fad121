use pdedisc::optim::QuasiNewtonConfig;
use pdedisc::surrogate::{fit_surrogate, SurrogateFitConfig};
use pdedisc::Dataset;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wave_data(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<f64> = (0..n)
        .flat_map(|_| {
            let (t, x): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            [t, x, (3.0 * x - t).sin() + 0.3 * t * x]
        })
        .collect();
    Dataset::with_default_names(1, 1, rows).unwrap()
}

fn cfg(alpha_p: f64) -> SurrogateFitConfig {
    SurrogateFitConfig {
        hidden: vec![4],
        alpha_p,
        optimizer: QuasiNewtonConfig { grad_tol: 1e-10, max_iter: 3000, ..QuasiNewtonConfig::default() },
        seed: 3,
        validation_fraction: 0.0,
        max_train_rows: None,
    }
}

#[test]
fn stronger_penalty_never_grows_the_weights() {
    let data = wave_data(1, 120);
    let norms: Vec<f64> = [1e-5, 1e-3, 1e-1]
        .iter()
        .map(|&a| {
            let (net, _) = fit_surrogate(&data, &cfg(a)).unwrap();
            net.params().iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    for w in norms.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6), "{norms:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn row_order_does_not_change_the_fit(perm_seed in any::<u64>()) {
        let data = wave_data(2, 80);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let shuffled = data.select(&order);
        let c = SurrogateFitConfig { optimizer: QuasiNewtonConfig { max_iter: 40, ..QuasiNewtonConfig::default() }, ..cfg(0.0) };
        let (na, ra) = fit_surrogate(&data, &c).unwrap();
        let (nb, rb) = fit_surrogate(&shuffled, &c).unwrap();
        // the loss is a mean over rows, so only summation rounding differs
        prop_assert_eq!(ra.iterations, rb.iterations);
        prop_assert!((ra.data_loss - rb.data_loss).abs() <= 1e-10 * ra.data_loss.max(1e-300) + 1e-18, "{} vs {}", ra.data_loss, rb.data_loss);
        for (a, b) in na.params().iter().zip(nb.params()) {
            prop_assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0));
        }
    }
}

#[test]
fn linear_target_is_learned_with_its_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<f64> = (0..200)
        .flat_map(|_| {
            let (t, x): (f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
            [t, x, x]
        })
        .collect();
    let data = Dataset::with_default_names(1, 1, rows).unwrap();
    let c = SurrogateFitConfig { hidden: vec![5], seed: 0, ..cfg(0.0) };
    let (net, rep) = fit_surrogate(&data, &c).unwrap();
    assert!(rep.train_mse <= 1e-6, "{}", rep.train_mse);
    for &(t, x) in &[(0.3, 0.4), (0.7, 0.6), (0.5, 0.5)] {
        let j = net.input_jets(&[t, x], 1).unwrap();
        assert!((j.partial(0, &[1]).unwrap() - 1.0).abs() <= 1e-3);
        assert!(j.partial(0, &[0]).unwrap().abs() <= 1e-3);
    }
}
