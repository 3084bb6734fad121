use pdedisc::discover::{CoordinateFrame, LinearPdeModel};
use pdedisc::features::{enumerate_derivative_terms, enumerate_monomials, TermNaming};
use pdedisc::transforms::{back_transform_model, forward_transform_model, AffineTransform, CoordinateTransform};
use pdedisc::Dataset;
use proptest::prelude::*;

fn naming() -> TermNaming {
    TermNaming::new(vec!["x".into()], vec!["u".into()])
}

fn library_model(coefficients: Vec<f64>, frame: CoordinateFrame) -> LinearPdeModel {
    let d = enumerate_derivative_terms(1, 1, 2).unwrap();
    let terms = enumerate_monomials(&d, 2).unwrap();
    LinearPdeModel::new(terms, &naming(), coefficients, frame, 1)
}

fn transform(st: f64, sx: f64) -> CoordinateTransform {
    CoordinateTransform::ShiftScale(AffineTransform::new(vec!["t".into(), "x".into()], vec![0.3, -0.2], vec![st, sx]).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn back_transform_is_multiplicative(
        q in prop::collection::vec(-3.0f64..3.0, 9),
        c in -5.0f64..5.0,
        st in 0.05f64..5.0,
        sx in 0.05f64..5.0,
    ) {
        let tr = transform(st, sx);
        let base = back_transform_model(&library_model(q.clone(), CoordinateFrame::Transformed), &tr).unwrap();
        let scaled_q: Vec<f64> = q.iter().map(|v| c * v).collect();
        let scaled = back_transform_model(&library_model(scaled_q, CoordinateFrame::Transformed), &tr).unwrap();
        for (a, b) in scaled.coefficients.iter().zip(&base.coefficients) {
            prop_assert!(close(*a, c * b, 1e-14), "{} vs {}", a, c * b);
        }
        prop_assert_eq!(scaled.frame, CoordinateFrame::Physical);
    }

    #[test]
    fn forward_then_back_is_identity(
        q in prop::collection::vec(-3.0f64..3.0, 9),
        st in 0.05f64..5.0,
        sx in 0.05f64..5.0,
    ) {
        let tr = transform(st, sx);
        let phys = library_model(q.clone(), CoordinateFrame::Physical);
        let round = back_transform_model(&forward_transform_model(&phys, &tr).unwrap(), &tr).unwrap();
        for (a, b) in round.coefficients.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn apply_then_invert_is_identity(rows in prop::collection::vec((-10.0f64..10.0, -5.0f64..5.0, -1.0f64..1.0), 3..40)) {
        let flat: Vec<f64> = rows.iter().flat_map(|&(t, x, u)| [t, x, u]).collect();
        let data = Dataset::with_default_names(1, 1, flat.clone()).unwrap();
        let tr = AffineTransform::fit_shift_scale(&data);
        let back = tr.invert(&tr.apply(&data).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(&flat) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

#[test]
fn burgers_forward_factors() {
    let (st, sx) = (0.0833326f64.sqrt(), 0.08268167f64.sqrt());
    let tr = transform(st, sx);
    let phys = library_model(vec![1.0; 9], CoordinateFrame::Physical);
    let fwd = forward_transform_model(&phys, &tr).unwrap();
    let uux = fwd.coefficient("u*u_x").unwrap();
    let uxx = fwd.coefficient("u_xx").unwrap();
    let u = fwd.coefficient("u").unwrap();
    assert!(close(uux, st / sx, 1e-15), "{uux} vs {}", st / sx);
    assert!(close(uxx, st / (sx * sx), 1e-15), "{uxx} vs {}", st / (sx * sx));
    assert!(close(u, st, 1e-15));
}

#[test]
fn published_transformed_coefficients_map_back() {
    let (st, sx) = (0.0833326f64.sqrt(), 0.08268167f64.sqrt());
    let d = enumerate_derivative_terms(1, 1, 2).unwrap();
    let names = naming();
    let terms: Vec<_> = ["u*u_x", "u_xx"].iter().map(|n| names.parse_term(n, &d).unwrap()).collect();
    let model = LinearPdeModel::new(terms, &names, vec![-1.0010, 3.4815e-2], CoordinateFrame::Transformed, 1);
    let phys = back_transform_model(&model, &transform(st, sx)).unwrap();
    assert!((phys.coefficients[0] + 0.99708).abs() <= 1e-4, "{:?}", phys.coefficients);
    assert!((phys.coefficients[1] - 9.9717e-3).abs() <= 1e-4, "{:?}", phys.coefficients);
}
