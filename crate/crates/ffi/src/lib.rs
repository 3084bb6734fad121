//! C ABI over the pdedisc core: network evaluation and jets, library
//! counting, and discovered-model back-transform and printing.
//!
//! Every function returns a [`PdStatus`]. On failure the message is kept per
//! thread and can be read with [`pd_last_error`]. Panics are caught at the
//! boundary and reported as [`PdStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pdedisc::discover::{emit_symbolic, DiscoveredModel, ModelArtifact};
use pdedisc::features::{count_derivative_terms, count_monomials};
use pdedisc::net::{Mlp, NetworkDoc};
use pdedisc::transforms::back_transform_model;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Failure = 4,
    Panic = 5,
}

/// Opaque network handle.
pub struct PdNetwork {
    mlp: Mlp,
}

/// Opaque discovered-model handle.
pub struct PdModel {
    model: DiscoveredModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(PdStatus, String);

impl From<pdedisc::Error> for Fail {
    fn from(e: pdedisc::Error) -> Self {
        Fail(PdStatus::Failure, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(PdStatus::InvalidArgument, msg.into())
}

/// Runs `f` behind the panic guard and records its error message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            PdStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(PdStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    non_null(p, what)?;
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn pd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a network JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_network_from_json(json: *const c_char, out: *mut *mut PdNetwork) -> PdStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(json, "json")?;
        let mlp = NetworkDoc::from_json(text)?.to_mlp()?;
        *out = Box::into_raw(Box::new(PdNetwork { mlp }));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`pd_network_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pd_network_free(net: *mut PdNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle; `n_in`, `n_out` writable or null.
#[no_mangle]
pub unsafe extern "C" fn pd_network_dims(net: *const PdNetwork, n_in: *mut usize, n_out: *mut usize) -> PdStatus {
    guard(|| {
        non_null(net, "net")?;
        let mlp = &(*net).mlp;
        if !n_in.is_null() {
            *n_in = mlp.input_dim();
        }
        if !n_out.is_null() {
            *n_out = mlp.output_dim();
        }
        Ok(())
    })
}

/// Evaluates the network at one point.
///
/// # Safety
/// `x` holds `n_in` values and `out` has room for `n_out`.
#[no_mangle]
pub unsafe extern "C" fn pd_network_forward(
    net: *const PdNetwork,
    x: *const f64,
    n_in: usize,
    out: *mut f64,
    n_out: usize,
) -> PdStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(out, "out")?;
        let mlp = &(*net).mlp;
        if n_out < mlp.output_dim() {
            return Err(Fail(PdStatus::BufferTooSmall, format!("need {} outputs", mlp.output_dim())));
        }
        let y = mlp.forward(slice(x, n_in, "x")?)?;
        std::ptr::copy_nonoverlapping(y.as_ptr(), out, y.len());
        Ok(())
    })
}

/// All partial derivatives up to `order` at one point, output-major in
/// graded multi-index order. `len` receives the entry count; when `cap` is
/// too small nothing is written and `BufferTooSmall` is returned.
///
/// # Safety
/// `x` holds `n_in` values, `out` has room for `cap`, `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_network_jets(
    net: *const PdNetwork,
    x: *const f64,
    n_in: usize,
    order: u32,
    out: *mut f64,
    cap: usize,
    len: *mut usize,
) -> PdStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(len, "len")?;
        let table = (*net).mlp.input_jets(slice(x, n_in, "x")?, order)?;
        *len = table.len();
        if cap < table.len() {
            return Err(Fail(PdStatus::BufferTooSmall, format!("need {} entries", table.len())));
        }
        non_null(out, "out")?;
        std::ptr::copy_nonoverlapping(table.values().as_ptr(), out, table.len());
        Ok(())
    })
}

/// One partial derivative of `output`, differentiating once per entry of `vars`.
///
/// # Safety
/// `x` holds `n_in` values, `vars` holds `n_vars` indices, `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_network_partial(
    net: *const PdNetwork,
    x: *const f64,
    n_in: usize,
    output: usize,
    vars: *const usize,
    n_vars: usize,
    out: *mut f64,
) -> PdStatus {
    guard(|| {
        non_null(net, "net")?;
        non_null(out, "out")?;
        let vars: &[usize] = if n_vars == 0 {
            &[]
        } else {
            non_null(vars, "vars")?;
            std::slice::from_raw_parts(vars, n_vars)
        };
        let table = (*net).mlp.input_jets(slice(x, n_in, "x")?, n_vars as u32)?;
        *out = table.partial(output, vars)?;
        Ok(())
    })
}

/// Number of derivative terms with total order ≤ `max_order` for `n_space`
/// space axes and `n_out` outputs, and the number of monomials of degree
/// 1..=`max_degree` in them. Either output pointer may be null.
///
/// # Safety
/// Non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_library_counts(
    n_space: usize,
    n_out: usize,
    max_order: u32,
    max_degree: u32,
    derivatives: *mut u64,
    monomials: *mut u64,
) -> PdStatus {
    guard(|| {
        let d = count_derivative_terms(n_space, n_out, max_order);
        let k = count_monomials(d, max_degree);
        let d64 = u64::try_from(d).map_err(|_| invalid("derivative count overflows 64 bits"))?;
        let k64 = u64::try_from(k).map_err(|_| invalid("monomial count overflows 64 bits"))?;
        if !derivatives.is_null() {
            *derivatives = d64;
        }
        if !monomials.is_null() {
            *monomials = k64;
        }
        Ok(())
    })
}

/// Parses a model artifact JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_model_from_json(json: *const c_char, out: *mut *mut PdModel) -> PdStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = read_str(json, "json")?;
        let model = ModelArtifact::from_json(text)?.model;
        *out = Box::into_raw(Box::new(PdModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pd_model_free(model: *mut PdModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Coefficients of a linear model. `len` receives the count.
///
/// # Safety
/// `out` has room for `cap` values; `len` is writable.
#[no_mangle]
pub unsafe extern "C" fn pd_model_coefficients(model: *const PdModel, out: *mut f64, cap: usize, len: *mut usize) -> PdStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(len, "len")?;
        let DiscoveredModel::Linear(m) = &(*model).model else {
            return Err(invalid("operator networks have no coefficient list"));
        };
        *len = m.coefficients.len();
        if cap < m.coefficients.len() {
            return Err(Fail(PdStatus::BufferTooSmall, format!("need {} entries", m.coefficients.len())));
        }
        non_null(out, "out")?;
        std::ptr::copy_nonoverlapping(m.coefficients.as_ptr(), out, m.coefficients.len());
        Ok(())
    })
}

/// Restates a transformed-coordinate linear model in physical coordinates
/// using the transform stored with it. The result is a new handle.
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_model_back_transform(model: *const PdModel, out: *mut *mut PdModel) -> PdStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let DiscoveredModel::Linear(m) = &(*model).model else {
            return Err(invalid("only linear models can be back-transformed"));
        };
        let t = m.transform.as_ref().ok_or_else(|| invalid("model carries no transform"))?;
        let phys = back_transform_model(m, t)?;
        *out = Box::into_raw(Box::new(PdModel { model: DiscoveredModel::Linear(phys) }));
        Ok(())
    })
}

/// Equation text of a model. Free the result with [`pd_string_free`].
///
/// # Safety
/// `model` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pd_model_emit_symbolic(model: *const PdModel, out: *mut *mut c_char) -> PdStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let text = CString::new(emit_symbolic(&(*model).model)).map_err(|_| invalid("equation contains NUL"))?;
        *out = text.into_raw();
        Ok(())
    })
}
