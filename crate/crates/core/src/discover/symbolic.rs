//! Human-readable equations. Coefficients are printed with five significant
//! digits in scientific notation, e.g. `u_t = -1.0000e0*u*u_x + 1.0000e-2*u_xx`.

use super::{LinearPdeModel, OperatorNet};

pub(crate) fn coef(v: f64) -> String {
    format!("{v:.4e}")
}

/// Joins signed `(coefficient, factor)` pairs into `a*x + b*y - c*z`.
/// An empty factor prints the bare coefficient. Zero coefficients are skipped.
fn signed_sum(parts: &[(f64, String)]) -> Option<String> {
    let mut out = String::new();
    for (c, name) in parts.iter().filter(|(c, _)| *c != 0.0) {
        let body = |v: f64| {
            if name.is_empty() {
                coef(v)
            } else {
                format!("{}*{name}", coef(v))
            }
        };
        if out.is_empty() {
            out = body(*c);
        } else if *c < 0.0 {
            out.push_str(" - ");
            out.push_str(&body(-c));
        } else {
            out.push_str(" + ");
            out.push_str(&body(*c));
        }
    }
    (!out.is_empty()).then_some(out)
}

pub fn emit_linear(model: &LinearPdeModel) -> String {
    let parts: Vec<(f64, String)> = model
        .coefficients
        .iter()
        .zip(&model.names)
        .map(|(&c, n)| (c, if n == "1" { String::new() } else { n.clone() }))
        .collect();
    format!(
        "{} = {}",
        model.target_name,
        signed_sum(&parts).unwrap_or_else(|| "0".to_string())
    )
}

pub fn emit_operator(op: &OperatorNet) -> String {
    let net = &op.network;
    let mut exprs: Vec<String> = op.input_names.clone();
    let layers = net.n_layers();
    for l in 0..layers {
        let dims = net.layer_dims();
        let (n_in, n_out) = (dims[l], dims[l + 1]);
        let w = net.weights(l);
        let b = net.biases(l);
        // inner expressions need parentheses only when they are sums
        let factors: Vec<String> = exprs
            .iter()
            .map(|e| if e.contains(' ') && !e.starts_with("tanh(") { format!("({e})") } else { e.clone() })
            .collect();
        exprs = (0..n_out)
            .map(|o| {
                let mut parts: Vec<(f64, String)> = (0..n_in)
                    .map(|j| (w[o * n_in + j], factors[j].clone()))
                    .collect();
                parts.push((b[o], String::new()));
                let sum = signed_sum(&parts).unwrap_or_else(|| "0".to_string());
                if l + 1 < layers {
                    format!("tanh({sum})")
                } else {
                    sum
                }
            })
            .collect();
    }
    format!("{} = {}", op.target_name, exprs[0])
}
