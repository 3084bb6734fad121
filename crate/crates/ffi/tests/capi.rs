use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use pdedisc::discover::{CoordinateFrame, DiscoveredModel, LinearPdeModel, ModelArtifact};
use pdedisc::features::{enumerate_derivative_terms, TermNaming};
use pdedisc::net::{Mlp, NetworkDoc};
use pdedisc::transforms::{AffineTransform, CoordinateTransform};
use pdedisc_ffi::*;

fn last_error() -> String {
    let p = pd_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn load_network(mlp: &Mlp) -> *mut PdNetwork {
    let json = CString::new(NetworkDoc::from_mlp(mlp, None).to_json().unwrap()).unwrap();
    let mut net = ptr::null_mut();
    assert_eq!(unsafe { pd_network_from_json(json.as_ptr(), &mut net) }, PdStatus::Ok);
    net
}

#[test]
fn forward_and_jets_match_the_library() {
    let mlp = Mlp::new_seeded(&[2, 6, 6, 1], 4).unwrap();
    let net = load_network(&mlp);
    let x = [0.3, -0.2];
    unsafe {
        let (mut n_in, mut n_out) = (0, 0);
        assert_eq!(pd_network_dims(net, &mut n_in, &mut n_out), PdStatus::Ok);
        assert_eq!((n_in, n_out), (2, 1));

        let mut y = [0.0];
        assert_eq!(pd_network_forward(net, x.as_ptr(), 2, y.as_mut_ptr(), 1), PdStatus::Ok);
        assert_eq!(y[0].to_bits(), mlp.forward(&x).unwrap()[0].to_bits());

        let table = mlp.input_jets(&x, 3).unwrap();
        let mut len = 0;
        assert_eq!(pd_network_jets(net, x.as_ptr(), 2, 3, ptr::null_mut(), 0, &mut len), PdStatus::BufferTooSmall);
        assert_eq!(len, table.len());
        let mut buf = vec![0.0; len];
        assert_eq!(pd_network_jets(net, x.as_ptr(), 2, 3, buf.as_mut_ptr(), len, &mut len), PdStatus::Ok);
        assert_eq!(buf, table.values());

        let vars = [1usize, 0, 1];
        let mut d = 0.0;
        assert_eq!(pd_network_partial(net, x.as_ptr(), 2, 0, vars.as_ptr(), 3, &mut d), PdStatus::Ok);
        assert_eq!(d, table.partial(0, &vars).unwrap());

        assert_eq!(pd_network_partial(net, x.as_ptr(), 2, 0, [5usize].as_ptr(), 1, &mut d), PdStatus::Failure);
        assert!(last_error().contains("out of range"));
        pd_network_free(net);
    }
}

#[test]
fn library_counts() {
    let (mut d, mut k) = (0u64, 0u64);
    unsafe {
        assert_eq!(pd_library_counts(3, 5, 2, 2, &mut d, &mut k), PdStatus::Ok);
    }
    assert_eq!((d, k), (50, 1325));
    unsafe {
        assert_eq!(pd_library_counts(3, 3, 40, 40, &mut d, &mut k), PdStatus::InvalidArgument);
    }
    assert!(last_error().contains("overflows"));
}

#[test]
fn errors_are_reported_not_raised() {
    let mut net = ptr::null_mut();
    let bad = CString::new("{ not json").unwrap();
    unsafe {
        assert_eq!(pd_network_from_json(bad.as_ptr(), &mut net), PdStatus::Failure);
        assert!(net.is_null());
        assert_eq!(pd_network_from_json(ptr::null(), &mut net), PdStatus::NullPointer);
        assert_eq!(pd_network_forward(ptr::null(), ptr::null(), 0, ptr::null_mut(), 0), PdStatus::NullPointer);
        pd_network_free(ptr::null_mut());
        pd_string_free(ptr::null_mut());
    }
    assert!(last_error().contains("null"));
}

#[test]
fn model_back_transform_and_text() {
    let naming = TermNaming::new(vec!["x".into()], vec!["u".into()]);
    let d = enumerate_derivative_terms(1, 1, 2).unwrap();
    let terms = ["u*u_x", "u_xx"].iter().map(|n| naming.parse_term(n, &d).unwrap()).collect();
    let mut model = LinearPdeModel::new(terms, &naming, vec![-1.0010, 3.4815e-2], CoordinateFrame::Transformed, 1);
    let scales = vec![0.0833326f64.sqrt(), 0.08268167f64.sqrt()];
    model.transform = Some(CoordinateTransform::ShiftScale(
        AffineTransform::new(vec!["t".into(), "x".into()], vec![0.5, 0.5], scales).unwrap(),
    ));
    let json = ModelArtifact::new(DiscoveredModel::Linear(model), "abc".into()).to_json().unwrap();
    let json = CString::new(json).unwrap();
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(pd_model_from_json(json.as_ptr(), &mut m), PdStatus::Ok);
        let mut phys = ptr::null_mut();
        assert_eq!(pd_model_back_transform(m, &mut phys), PdStatus::Ok);
        let mut q = [0.0; 2];
        let mut len = 0;
        assert_eq!(pd_model_coefficients(phys, q.as_mut_ptr(), 2, &mut len), PdStatus::Ok);
        assert_eq!(len, 2);
        assert!((q[0] + 0.99708).abs() <= 1e-4 && (q[1] - 9.9717e-3).abs() <= 1e-4, "{q:?}");

        // a physical model cannot be pushed back again
        let mut again = ptr::null_mut();
        assert_eq!(pd_model_back_transform(phys, &mut again), PdStatus::Failure);

        let mut text = ptr::null_mut();
        assert_eq!(pd_model_emit_symbolic(phys, &mut text), PdStatus::Ok);
        let s = CStr::from_ptr(text).to_str().unwrap().to_owned();
        assert!(s.starts_with("u_t = -9.97"), "{s}");
        assert!(s.contains("*u*u_x") && s.contains("*u_xx"));
        pd_string_free(text);
        pd_model_free(phys);
        pd_model_free(m);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pdedisc.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in [
        "pd_last_error", "pd_string_free", "pd_network_from_json", "pd_network_free", "pd_network_forward",
        "pd_network_jets", "pd_network_partial", "pd_library_counts", "pd_model_from_json",
        "pd_model_back_transform", "pd_model_emit_symbolic", "pd_model_free",
    ] {
        assert!(text.contains(&format!("{f}(")), "{f} missing from header");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match std::process::Command::new(&cc).args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"]).arg(&header).status() {
        Ok(st) => assert!(st.success(), "header does not compile"),
        Err(e) => eprintln!("skipping C syntax check: {cc} unavailable ({e})"),
    }
}
