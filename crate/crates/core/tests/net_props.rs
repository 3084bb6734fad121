use pdedisc::net::{JetTable, Mlp, MultiIndex};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded net with non-zero biases so every layer matters.
fn random_net(dims: &[usize], seed: u64) -> Mlp {
    let mut net = Mlp::new_seeded(dims, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    let p: Vec<f64> = net.params().iter().map(|w| w + rng.gen_range(-0.3..0.3)).collect();
    net.set_params(&p).unwrap();
    net
}

fn arch() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=3, prop::collection::vec(1usize..=6, 1..=3), 1usize..=2).prop_map(|(i, h, o)| {
        let mut d = vec![i];
        d.extend(h);
        d.push(o);
        d
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Central difference of the jet partial `vars[..k-1]` along `vars[k-1]`.
fn fd_partial(net: &Mlp, point: &[f64], output: usize, vars: &[usize], h: f64) -> f64 {
    let (last, rest) = vars.split_last().unwrap();
    let order = rest.len() as u32;
    let eval = |s: f64| {
        let mut p = point.to_vec();
        p[*last] += s;
        let t = net.input_jets(&p, order).unwrap();
        t.partial(output, rest).unwrap()
    };
    (eval(h) - eval(-h)) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn order_zero_equals_forward(dims in arch(), seed in any::<u64>(), x in prop::collection::vec(-1.5f64..1.5, 3)) {
        let net = random_net(&dims, seed);
        let p = &x[..dims[0]];
        let f = net.forward(p).unwrap();
        for order in 0..=3 {
            let t = net.input_jets(p, order).unwrap();
            for (o, v) in f.iter().enumerate() {
                prop_assert_eq!(t.value(o).to_bits(), v.to_bits());
            }
        }
    }

    #[test]
    fn partials_are_order_independent(seed in any::<u64>(), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let net = random_net(&[3, 5, 4, 1], seed);
        let t = net.input_jets(&x, 4).unwrap();
        let a = t.partial(0, &[0, 1, 2, 1]).unwrap();
        let b = t.partial(0, &[2, 1, 1, 0]).unwrap();
        let c = t.get(0, &MultiIndex::new(vec![1, 2, 1])).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert_eq!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn input_partials_match_finite_differences(
        dims in arch(),
        seed in any::<u64>(),
        x in prop::collection::vec(-1.0f64..1.0, 3),
        picks in prop::collection::vec(0usize..3, 4),
    ) {
        let net = random_net(&dims, seed);
        let d = dims[0];
        let p = &x[..d];
        let t = net.input_jets(p, 4).unwrap();
        for k in 1..=4usize {
            let vars: Vec<usize> = picks[..k].iter().map(|v| v % d).collect();
            for o in 0..net.output_dim() {
                let exact = t.partial(o, &vars).unwrap();
                let fd = fd_partial(&net, p, o, &vars, 1e-4);
                let tol = if k <= 2 { 1e-6 } else { 1e-4 };
                prop_assert!(rel_err(exact, fd) <= tol, "order {} vars {:?}: {} vs {}", k, vars, exact, fd);
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences(seed in any::<u64>(), order in 0u32..=2) {
        let net = random_net(&[2, 4, 3, 1], seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // weighted sum of squares of all jet entries
        let loss = |_: usize, t: &JetTable, cot: &mut [f64]| -> pdedisc::Result<f64> {
            let mut l = 0.0;
            for (i, v) in t.values().iter().enumerate() {
                let w = 1.0 / (1.0 + i as f64);
                l += 0.5 * w * v * v;
                cot[i] = w * v;
            }
            Ok(l)
        };
        let (_, g) = net.jet_loss_gradient(&pts, order, loss).unwrap();
        let p0 = net.params();
        let h = 1e-6;
        for i in 0..p0.len() {
            let mut pp = p0.clone();
            pp[i] += h;
            let up = net.with_params(&pp).unwrap().jet_loss_gradient(&pts, order, loss).unwrap().0;
            pp[i] -= 2.0 * h;
            let dn = net.with_params(&pp).unwrap().jet_loss_gradient(&pts, order, loss).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            prop_assert!(rel_err(g[i], fd) <= 1e-5, "param {}: {} vs {}", i, g[i], fd);
        }
    }

    #[test]
    fn jets_are_additive_over_stacked_networks(sa in any::<u64>(), sb in any::<u64>(), x in prop::collection::vec(-1.0f64..1.0, 2)) {
        let a = random_net(&[2, 3, 1], sa);
        let b = random_net(&[2, 4, 1], sb);
        // one hidden layer holding both, output layer adding them
        let mut w0 = a.weights(0).to_vec();
        w0.extend_from_slice(b.weights(0));
        let mut b0 = a.biases(0).to_vec();
        b0.extend_from_slice(b.biases(0));
        let mut w1 = a.weights(1).to_vec();
        w1.extend_from_slice(b.weights(1));
        let b1 = vec![a.biases(1)[0] + b.biases(1)[0]];
        let sum = Mlp::from_parts(&[2, 7, 1], vec![w0, w1], vec![b0, b1]).unwrap();
        let (ta, tb, ts) = (a.input_jets(&x, 3).unwrap(), b.input_jets(&x, 3).unwrap(), sum.input_jets(&x, 3).unwrap());
        for ((va, vb), vs) in ta.values().iter().zip(tb.values()).zip(ts.values()) {
            prop_assert!((va + vb - vs).abs() <= 1e-12 * (1.0 + vs.abs()));
        }
    }
}

#[test]
fn fifty_random_nets_agree_with_finite_differences() {
    for seed in 0..50u64 {
        let net = random_net(&[2, 10, 10, 1], seed);
        let p = [0.3 - 0.01 * seed as f64, -0.2 + 0.013 * seed as f64];
        let t = net.input_jets(&p, 4).unwrap();
        for vars in [&[0][..], &[1], &[1, 1], &[0, 1], &[1, 1, 1], &[0, 1, 1], &[1, 1, 1, 1]] {
            let exact = t.partial(0, vars).unwrap();
            let fd = fd_partial(&net, &p, 0, vars, 1e-4);
            let tol = if vars.len() <= 2 { 1e-6 } else { 1e-4 };
            assert!(rel_err(exact, fd) <= tol, "seed {seed} {vars:?}: {exact} vs {fd}");
        }
    }
}
