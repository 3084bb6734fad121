//! Truncated multivariate Taylor propagation through an [`Mlp`].
//!
//! Each neuron carries the Taylor coefficients of its value with respect to
//! the network inputs, up to a fixed total order. Affine layers act on the
//! coefficient vectors linearly; tanh is composed through its Taylor series
//! around the constant coefficient, with derivatives taken from the
//! polynomial-in-tanh recurrence `P_{n+1}(y) = P_n'(y)(1 - y^2)`.

use std::sync::Arc;

use rayon::prelude::*;

use super::mlp::{Mlp, CHUNK_ROWS};
use super::multi_index::{JetLayout, MultiIndex};
use crate::error::{Error, Result};

/// Highest derivative order accepted by jet propagation.
pub const MAX_JET_ORDER: u32 = 8;

/// All partial derivatives of every network output at one point.
///
/// Values are derivatives (not Taylor coefficients), stored output-major in
/// the layout's graded order.
#[derive(Debug, Clone)]
pub struct JetTable {
    point: Vec<f64>,
    n_outputs: usize,
    layout: Arc<JetLayout>,
    values: Vec<f64>,
}

impl JetTable {
    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn order(&self) -> u32 {
        self.layout.order()
    }

    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    /// Total entry count: outputs × number of multi-indices.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry by layout position.
    pub fn at(&self, output: usize, pos: usize) -> f64 {
        self.values[output * self.layout.len() + pos]
    }

    /// Plain network value of `output`.
    pub fn value(&self, output: usize) -> f64 {
        self.at(output, 0)
    }

    pub fn get(&self, output: usize, index: &MultiIndex) -> Option<f64> {
        if output >= self.n_outputs {
            return None;
        }
        self.layout.position(index).map(|p| self.at(output, p))
    }

    /// Partial derivative of `output` with respect to the listed input
    /// variables, in any order.
    pub fn partial(&self, output: usize, vars: &[usize]) -> Result<f64> {
        if let Some(&bad) = vars.iter().find(|&&v| v >= self.layout.vars()) {
            return Err(Error::Config(format!(
                "differentiation variable {bad} out of range for {} inputs",
                self.layout.vars()
            )));
        }
        let index = MultiIndex::from_vars(self.layout.vars(), vars);
        self.get(output, &index).ok_or_else(|| {
            Error::Config(format!(
                "partial {index} of output {output} not available (jet order {}, {} outputs)",
                self.order(),
                self.n_outputs
            ))
        })
    }

    /// Iterates over `(output, multi-index, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &MultiIndex, f64)> + '_ {
        let t = self.layout.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i / t, &self.layout.indices()[i % t], v))
    }
}

/// Derivatives of tanh expressed as polynomials in y = tanh(x).
#[derive(Debug, Clone)]
struct TanhSeries {
    polys: Vec<Vec<f64>>,
}

impl TanhSeries {
    fn new(count: usize) -> Self {
        let mut polys: Vec<Vec<f64>> = vec![vec![0.0, 1.0]];
        while polys.len() < count {
            let p = polys.last().expect("seeded");
            // derivative of p in y
            let dp: Vec<f64> = p
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect();
            // times (1 - y^2)
            let mut next = vec![0.0; dp.len() + 2];
            for (k, &c) in dp.iter().enumerate() {
                next[k] += c;
                next[k + 2] -= c;
            }
            polys.push(next);
        }
        TanhSeries { polys }
    }

    /// `d_n = tanh^{(n)}(x)` for n < count, given y = tanh(x).
    fn derivatives(&self, y: f64, out: &mut [f64]) {
        for (slot, p) in out.iter_mut().zip(&self.polys) {
            *slot = p.iter().rev().fold(0.0, |acc, &c| acc * y + c);
        }
    }
}

/// Reusable per-evaluation context: layout, tanh series and factorials.
#[derive(Debug, Clone)]
pub struct JetContext {
    layout: Arc<JetLayout>,
    series: TanhSeries,
    inv_factorials: Vec<f64>,
}

impl JetContext {
    pub fn new(vars: usize, order: u32) -> Result<Self> {
        if order > MAX_JET_ORDER {
            return Err(Error::Config(format!(
                "derivative order {order} exceeds the supported maximum {MAX_JET_ORDER}"
            )));
        }
        let m = order as usize;
        let mut inv_factorials = Vec::with_capacity(m + 2);
        let mut f = 1.0;
        for n in 0..m + 2 {
            if n > 0 {
                f *= n as f64;
            }
            inv_factorials.push(1.0 / f);
        }
        Ok(JetContext {
            layout: Arc::new(JetLayout::new(vars, order)),
            series: TanhSeries::new(m + 2),
            inv_factorials,
        })
    }

    pub fn layout(&self) -> &Arc<JetLayout> {
        &self.layout
    }

    fn order(&self) -> usize {
        self.layout.order() as usize
    }
}

/// Stored intermediates of one tanh neuron for the reverse sweep.
#[derive(Debug, Clone, Default)]
struct NeuronRecord {
    /// Powers h^1..h^m of the non-constant part, flat.
    powers: Vec<f64>,
    /// Series coefficients tanh^{(n)}(z0)/n!, n = 0..=m.
    coeffs: Vec<f64>,
    /// d/dz0 of each coefficient: tanh^{(n+1)}(z0)/n!.
    coeff_slopes: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct JetTape {
    /// Input jets of every affine layer, neuron-major.
    layer_inputs: Vec<Vec<f64>>,
    /// Records for each hidden layer, one per neuron.
    neurons: Vec<Vec<NeuronRecord>>,
}

impl Mlp {
    /// All partial derivatives of every output up to total order `order`.
    pub fn input_jets(&self, point: &[f64], order: u32) -> Result<JetTable> {
        let ctx = JetContext::new(self.input_dim(), order)?;
        self.input_jets_with(point, &ctx)
    }

    /// As [`Mlp::input_jets`] with a prebuilt context, for repeated calls.
    pub fn input_jets_with(&self, point: &[f64], ctx: &JetContext) -> Result<JetTable> {
        self.check_input("jet point", point.len())?;
        self.check_context(ctx)?;
        let coeffs = self.jet_forward(point, ctx, None);
        Ok(self.table_from_coeffs(point, ctx, coeffs))
    }

    /// Jets for a row-major batch of points.
    pub fn jets_batch(&self, inputs: &[f64], order: u32) -> Result<Vec<JetTable>> {
        let ctx = JetContext::new(self.input_dim(), order)?;
        let d = self.input_dim();
        if inputs.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                context: "jet batch (not a multiple of input width)",
                expected: d,
                got: inputs.len() % d,
            });
        }
        inputs
            .par_chunks(d)
            .map(|p| self.input_jets_with(p, &ctx))
            .collect()
    }

    /// Gradient with respect to the parameters of a loss built from jet entries.
    ///
    /// `point_loss(row, table, cotangent)` returns the loss contribution of one
    /// point and writes d(loss)/d(entry) into `cotangent`, laid out like
    /// `table.values()`. Contributions are summed over points.
    pub fn jet_loss_gradient<F>(&self, inputs: &[f64], order: u32, point_loss: F) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(usize, &JetTable, &mut [f64]) -> Result<f64> + Sync,
    {
        let ctx = JetContext::new(self.input_dim(), order)?;
        let d = self.input_dim();
        if inputs.len() % d != 0 {
            return Err(Error::DimensionMismatch {
                context: "jet batch (not a multiple of input width)",
                expected: d,
                got: inputs.len() % d,
            });
        }
        let partials: Vec<Result<(f64, Vec<f64>)>> = inputs
            .par_chunks(CHUNK_ROWS * d)
            .enumerate()
            .map(|(c, chunk)| {
                let mut loss = 0.0;
                let mut grad = vec![0.0; self.n_params()];
                for (r, point) in chunk.chunks(d).enumerate() {
                    let mut tape = JetTape::default();
                    let coeffs = self.jet_forward(point, &ctx, Some(&mut tape));
                    let table = self.table_from_coeffs(point, &ctx, coeffs);
                    let mut cot = vec![0.0; table.len()];
                    loss += point_loss(c * CHUNK_ROWS + r, &table, &mut cot)?;
                    // cotangent w.r.t. Taylor coefficients
                    let t = ctx.layout.len();
                    for (i, v) in cot.iter_mut().enumerate() {
                        *v *= ctx.layout.factorial(i % t);
                    }
                    self.jet_backward(&ctx, &tape, cot, &mut grad);
                }
                Ok((loss, grad))
            })
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.n_params()];
        for part in partials {
            let (l, g) = part?;
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((loss, grad))
    }

    fn check_context(&self, ctx: &JetContext) -> Result<()> {
        if ctx.layout.vars() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "jet context variables",
                expected: self.input_dim(),
                got: ctx.layout.vars(),
            });
        }
        Ok(())
    }

    fn table_from_coeffs(&self, point: &[f64], ctx: &JetContext, mut coeffs: Vec<f64>) -> JetTable {
        let t = ctx.layout.len();
        for (i, v) in coeffs.iter_mut().enumerate() {
            *v *= ctx.layout.factorial(i % t);
        }
        JetTable {
            point: point.to_vec(),
            n_outputs: self.output_dim(),
            layout: Arc::clone(&ctx.layout),
            values: coeffs,
        }
    }

    /// Forward Taylor sweep; returns output Taylor coefficients, neuron-major.
    fn jet_forward(&self, point: &[f64], ctx: &JetContext, mut tape: Option<&mut JetTape>) -> Vec<f64> {
        let layout = &*ctx.layout;
        let t = layout.len();
        let mut act = vec![0.0; point.len() * t];
        for (i, &x) in point.iter().enumerate() {
            act[i * t] = x;
            if let Some(pos) = layout.unit_position(i) {
                act[i * t + pos] = 1.0;
            }
        }
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims()[l], self.layer_dims()[l + 1]);
            let w = self.weights(l);
            let b = self.biases(l);
            let mut z = vec![0.0; n_out * t];
            for o in 0..n_out {
                let zo = &mut z[o * t..(o + 1) * t];
                zo[0] = b[o];
                for i in 0..n_in {
                    let wi = w[o * n_in + i];
                    zo.iter_mut()
                        .zip(&act[i * t..(i + 1) * t])
                        .for_each(|(a, &v)| *a += wi * v);
                }
            }
            if let Some(tape) = tape.as_deref_mut() {
                tape.layer_inputs.push(std::mem::take(&mut act));
            }
            if l < last {
                let mut out = vec![0.0; n_out * t];
                let mut records = Vec::new();
                for o in 0..n_out {
                    let rec = tanh_jet(
                        ctx,
                        &z[o * t..(o + 1) * t],
                        &mut out[o * t..(o + 1) * t],
                        tape.is_some(),
                    );
                    if let Some(rec) = rec {
                        records.push(rec);
                    }
                }
                if let Some(tape) = tape.as_deref_mut() {
                    tape.neurons.push(records);
                }
                act = out;
            } else {
                act = z;
            }
        }
        act
    }

    /// Reverse sweep over a recorded jet evaluation; accumulates into `grad`.
    fn jet_backward(&self, ctx: &JetContext, tape: &JetTape, out_bar: Vec<f64>, grad: &mut [f64]) {
        let layout = &*ctx.layout;
        let t = layout.len();
        let offsets = self.param_offsets();
        let last = self.n_layers() - 1;
        // cotangent of the current layer's output jets
        let mut a_bar = out_bar;
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.layer_dims()[l], self.layer_dims()[l + 1]);
            let z_bar = if l < last {
                let records = &tape.neurons[l];
                let mut z_bar = vec![0.0; n_out * t];
                for o in 0..n_out {
                    tanh_jet_adjoint(
                        ctx,
                        &records[o],
                        &a_bar[o * t..(o + 1) * t],
                        &mut z_bar[o * t..(o + 1) * t],
                    );
                }
                z_bar
            } else {
                a_bar
            };
            let input = &tape.layer_inputs[l];
            let w = self.weights(l);
            let (gw, rest) = grad[offsets[l]..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            let mut in_bar = vec![0.0; n_in * t];
            for o in 0..n_out {
                let zb = &z_bar[o * t..(o + 1) * t];
                gb[o] += zb[0];
                for i in 0..n_in {
                    let a = &input[i * t..(i + 1) * t];
                    gw[o * n_in + i] += zb.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
                    let wi = w[o * n_in + i];
                    in_bar[i * t..(i + 1) * t]
                        .iter_mut()
                        .zip(zb)
                        .for_each(|(ib, &v)| *ib += wi * v);
                }
            }
            a_bar = in_bar;
        }
    }
}

/// Composes tanh with the truncated series `z`, writing the result to `out`.
fn tanh_jet(ctx: &JetContext, z: &[f64], out: &mut [f64], record: bool) -> Option<NeuronRecord> {
    let layout = &*ctx.layout;
    let t = layout.len();
    let m = ctx.order();
    let y = z[0].tanh();
    let mut d = vec![0.0; m + 2];
    ctx.series.derivatives(y, &mut d);
    out.iter_mut().for_each(|v| *v = 0.0);
    out[0] = y;
    if m == 0 {
        return record.then(|| NeuronRecord {
            powers: Vec::new(),
            coeffs: vec![y],
            coeff_slopes: vec![d[1]],
        });
    }
    let coeffs: Vec<f64> = (0..=m).map(|n| d[n] * ctx.inv_factorials[n]).collect();
    let mut powers = vec![0.0; m * t];
    powers[..t].copy_from_slice(z);
    powers[0] = 0.0;
    for n in 2..=m {
        let (done, next) = powers.split_at_mut((n - 1) * t);
        layout.mul(&done[(n - 2) * t..], &done[..t], &mut next[..t]);
    }
    for n in 1..=m {
        let c = coeffs[n];
        out.iter_mut()
            .zip(&powers[(n - 1) * t..n * t])
            .for_each(|(o, &p)| *o += c * p);
    }
    record.then(|| NeuronRecord {
        coeff_slopes: (0..=m).map(|n| d[n + 1] * ctx.inv_factorials[n]).collect(),
        coeffs,
        powers,
    })
}

fn tanh_jet_adjoint(ctx: &JetContext, rec: &NeuronRecord, g_bar: &[f64], z_bar: &mut [f64]) {
    let layout = &*ctx.layout;
    let t = layout.len();
    let m = ctx.order();
    let mut z0_bar = g_bar[0] * rec.coeff_slopes[0];
    if m > 0 {
        let mut p_bar = vec![0.0; m * t];
        for n in 1..=m {
            let p = &rec.powers[(n - 1) * t..n * t];
            let c_bar: f64 = g_bar.iter().zip(p).map(|(a, b)| a * b).sum();
            z0_bar += c_bar * rec.coeff_slopes[n];
            let c = rec.coeffs[n];
            p_bar[(n - 1) * t..n * t]
                .iter_mut()
                .zip(g_bar)
                .for_each(|(pb, &g)| *pb += c * g);
        }
        let h = &rec.powers[..t];
        let mut h_bar = vec![0.0; t];
        for n in (2..=m).rev() {
            let (lower, upper) = p_bar.split_at_mut((n - 1) * t);
            let pn_bar = &upper[..t];
            let prev = &rec.powers[(n - 2) * t..(n - 1) * t];
            let prev_bar = &mut lower[(n - 2) * t..];
            layout.mul_adjoint(prev, h, pn_bar, prev_bar, &mut h_bar);
        }
        h_bar.iter_mut().zip(&p_bar[..t]).for_each(|(a, b)| *a += b);
        z_bar.copy_from_slice(&h_bar);
    }
    z_bar[0] = z0_bar;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neuron(w: f64) -> Mlp {
        Mlp::from_parts(&[1, 1, 1], vec![vec![w], vec![1.0]], vec![vec![0.0], vec![0.0]]).unwrap()
    }

    #[test]
    fn tanh_derivative_polynomials() {
        let s = TanhSeries::new(4);
        let mut d = [0.0; 4];
        let x: f64 = 0.3;
        s.derivatives(x.tanh(), &mut d);
        let y = x.tanh();
        let sech2 = 1.0 - y * y;
        assert!((d[1] - sech2).abs() < 1e-15);
        assert!((d[2] + 2.0 * y * sech2).abs() < 1e-15);
        assert!((d[3] - (-2.0 * sech2 * sech2 + 4.0 * y * y * sech2)).abs() < 1e-14);
    }

    #[test]
    fn neuron_first_and_second_derivative_at_origin() {
        let net = neuron(3.0);
        let jets = net.input_jets(&[0.0], 2).unwrap();
        assert_eq!(jets.partial(0, &[0]).unwrap(), 3.0);
        assert_eq!(jets.partial(0, &[0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn order_zero_equals_forward() {
        let net = Mlp::new_seeded(&[2, 7, 7, 3], 4).unwrap();
        let p = [0.25, -0.6];
        let jets = net.input_jets(&p, 0).unwrap();
        let f = net.forward(&p).unwrap();
        for (o, v) in f.iter().enumerate() {
            assert_eq!(jets.value(o), *v);
        }
    }

    #[test]
    fn order_cap_rejected() {
        let net = neuron(1.0);
        assert!(matches!(net.input_jets(&[0.0], 9), Err(Error::Config(_))));
    }

    #[test]
    fn unavailable_partial_rejected() {
        let net = Mlp::new_seeded(&[2, 3, 1], 0).unwrap();
        let jets = net.input_jets(&[0.0, 0.0], 1).unwrap();
        assert!(jets.partial(0, &[0, 1]).is_err());
        assert!(jets.partial(0, &[2]).is_err());
    }

    #[test]
    fn table_size_matches_binomial_count() {
        let net = Mlp::new_seeded(&[3, 4, 2], 0).unwrap();
        let jets = net.input_jets(&[0.1, 0.2, 0.3], 3).unwrap();
        // M * C(m + D, D) = 2 * C(6, 3)
        assert_eq!(jets.len(), 2 * 20);
    }

    #[test]
    fn squared_slope_loss_gradient() {
        // loss = (df/dx at 0)^2 = w^2 for f = tanh(w x) → dL/dw = 2w
        let net = neuron(1.0);
        let (loss, grad) = net
            .jet_loss_gradient(&[0.0], 1, |_, table, cot| {
                let s = table.partial(0, &[0])?;
                let pos = table.layout().unit_position(0).unwrap();
                cot[pos] = 2.0 * s;
                Ok(s * s)
            })
            .unwrap();
        assert_eq!(loss, 1.0);
        assert!((grad[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_jet_loss_has_zero_gradient() {
        let net = Mlp::new_seeded(&[2, 4, 1], 2).unwrap();
        let (loss, grad) = net
            .jet_loss_gradient(&[0.1, 0.2], 2, |_, _, _| Ok(5.0))
            .unwrap();
        assert_eq!(loss, 5.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}
