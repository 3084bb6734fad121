//! Dense feedforward network with tanh hidden layers and an affine output.
//!
//! Parameters are flattened layer by layer: the weight matrix of layer `l`
//! in row-major order (shape `layer_dims[l+1] × layer_dims[l]`), followed by
//! its bias vector. [`Mlp::params`], [`Mlp::set_params`] and every gradient
//! returned by this module use that order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per work unit in batched evaluation. Partial sums are reduced in
/// chunk order, so results do not depend on the thread count.
pub(crate) const CHUNK_ROWS: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    seed: Option<u64>,
}

impl Mlp {
    /// Seeded Glorot-uniform weights, zero biases.
    pub fn new_seeded(layer_dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..=limit))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            seed: Some(seed),
        })
    }

    /// Builds a network from explicit per-layer row-major weights and biases.
    pub fn from_parts(
        layer_dims: &[usize],
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_dims(layer_dims)?;
        let layers = layer_dims.len() - 1;
        if weights.len() != layers {
            return Err(Error::DimensionMismatch {
                context: "weight layers",
                expected: layers,
                got: weights.len(),
            });
        }
        if biases.len() != layers {
            return Err(Error::DimensionMismatch {
                context: "bias layers",
                expected: layers,
                got: biases.len(),
            });
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] {
                return Err(Error::DimensionMismatch {
                    context: "weight matrix",
                    expected: pair[0] * pair[1],
                    got: weights[l].len(),
                });
            }
            if biases[l].len() != pair[1] {
                return Err(Error::DimensionMismatch {
                    context: "bias vector",
                    expected: pair[1],
                    got: biases[l].len(),
                });
            }
        }
        Ok(Mlp {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            seed: None,
        })
    }

    pub(crate) fn set_seed(&mut self, seed: Option<u64>) {
        self.seed = seed;
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().expect("validated non-empty")
    }

    /// Number of affine layers (hidden layers + output layer).
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn n_params(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            b.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut next = self.clone();
        next.set_params(params)?;
        Ok(next)
    }

    pub(crate) fn check_input(&self, context: &'static str, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.input_dim(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn forward(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_input("network input", point.len())?;
        let mut act = point.to_vec();
        let last = self.n_layers() - 1;
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let mut next = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = affine(self.biases[l][o], row, &act);
                next.push(if l < last { z.tanh() } else { z });
            }
            act = next;
        }
        Ok(act)
    }

    /// Evaluates a row-major batch of inputs; returns row-major outputs.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let rows = self.batch_rows(inputs)?;
        let d_in = self.input_dim();
        let d_out = self.output_dim();
        let mut out = vec![0.0; rows * d_out];
        out.par_chunks_mut(CHUNK_ROWS * d_out)
            .zip(inputs.par_chunks(CHUNK_ROWS * d_in))
            .for_each(|(out_chunk, in_chunk)| {
                let acts = self.chunk_forward(in_chunk);
                out_chunk.copy_from_slice(acts.last().expect("output layer"));
            });
        Ok(out)
    }

    fn batch_rows(&self, inputs: &[f64]) -> Result<usize> {
        let d_in = self.input_dim();
        if inputs.len() % d_in != 0 {
            return Err(Error::DimensionMismatch {
                context: "batch input (not a multiple of input width)",
                expected: d_in,
                got: inputs.len() % d_in,
            });
        }
        Ok(inputs.len() / d_in)
    }

    /// Layer activations for a chunk: index 0 holds the inputs, the last the outputs.
    fn chunk_forward(&self, inputs: &[f64]) -> Vec<Vec<f64>> {
        let rows = inputs.len() / self.input_dim();
        let last = self.n_layers() - 1;
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.n_layers() + 1);
        acts.push(inputs.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let b = &self.biases[l];
            let prev = &acts[l];
            let mut next = vec![0.0; rows * n_out];
            for r in 0..rows {
                let a = &prev[r * n_in..(r + 1) * n_in];
                let z = &mut next[r * n_out..(r + 1) * n_out];
                for o in 0..n_out {
                    z[o] = affine(b[o], &w[o * n_in..(o + 1) * n_in], a);
                }
                if l < last {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
            }
            acts.push(next);
        }
        acts
    }

    /// Loss and parameter gradient for a per-row loss on network outputs.
    ///
    /// `row_loss(row, outputs, adjoint)` returns the row's loss contribution
    /// and writes d(loss)/d(outputs) into `adjoint`. Contributions are summed
    /// over rows; any normalization is up to the caller.
    pub fn value_and_gradient<F>(&self, inputs: &[f64], row_loss: F) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(usize, &[f64], &mut [f64]) -> f64 + Sync,
    {
        self.batch_rows(inputs)?;
        let d_in = self.input_dim();
        let partials: Vec<(f64, Vec<f64>)> = inputs
            .par_chunks(CHUNK_ROWS * d_in)
            .enumerate()
            .map(|(c, chunk)| self.chunk_value_and_gradient(c * CHUNK_ROWS, chunk, &row_loss))
            .collect();
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.n_params()];
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        Ok((loss, grad))
    }

    fn chunk_value_and_gradient<F>(&self, first_row: usize, inputs: &[f64], row_loss: &F) -> (f64, Vec<f64>)
    where
        F: Fn(usize, &[f64], &mut [f64]) -> f64,
    {
        let rows = inputs.len() / self.input_dim();
        let acts = self.chunk_forward(inputs);
        let d_out = self.output_dim();
        let outputs = acts.last().expect("output layer");
        let mut delta = vec![0.0; rows * d_out];
        let mut loss = 0.0;
        for r in 0..rows {
            loss += row_loss(
                first_row + r,
                &outputs[r * d_out..(r + 1) * d_out],
                &mut delta[r * d_out..(r + 1) * d_out],
            );
        }

        let mut grad = vec![0.0; self.n_params()];
        let offsets = self.param_offsets();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let prev = &acts[l];
            let (gw, rest) = grad[offsets[l]..].split_at_mut(n_in * n_out);
            let gb = &mut rest[..n_out];
            for r in 0..rows {
                let a = &prev[r * n_in..(r + 1) * n_in];
                let d = &delta[r * n_out..(r + 1) * n_out];
                for o in 0..n_out {
                    let dv = d[o];
                    gb[o] += dv;
                    let g_row = &mut gw[o * n_in..(o + 1) * n_in];
                    g_row.iter_mut().zip(a).for_each(|(g, &ai)| *g += dv * ai);
                }
            }
            if l > 0 {
                let mut prev_delta = vec![0.0; rows * n_in];
                for r in 0..rows {
                    let a = &prev[r * n_in..(r + 1) * n_in];
                    let d = &delta[r * n_out..(r + 1) * n_out];
                    let pd = &mut prev_delta[r * n_in..(r + 1) * n_in];
                    for o in 0..n_out {
                        let dv = d[o];
                        pd.iter_mut()
                            .zip(&w[o * n_in..(o + 1) * n_in])
                            .for_each(|(p, &wi)| *p += wi * dv);
                    }
                    pd.iter_mut().zip(a).for_each(|(p, &ai)| *p *= 1.0 - ai * ai);
                }
                delta = prev_delta;
            }
        }
        (loss, grad)
    }

    /// Gradient of the scalar loss `Σ_rows adjointᵀ · output(row)` with
    /// respect to every parameter.
    pub fn param_gradient(&self, inputs: &[f64], adjoints: &[f64]) -> Result<Vec<f64>> {
        let rows = self.batch_rows(inputs)?;
        let d_out = self.output_dim();
        if adjoints.len() != rows * d_out {
            return Err(Error::DimensionMismatch {
                context: "output adjoints",
                expected: rows * d_out,
                got: adjoints.len(),
            });
        }
        let (_, grad) = self.value_and_gradient(inputs, |row, _out, adj| {
            adj.copy_from_slice(&adjoints[row * d_out..(row + 1) * d_out]);
            0.0
        })?;
        Ok(grad)
    }

    /// Start of each layer's block in the flat parameter vector.
    pub(crate) fn param_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.n_layers());
        let mut acc = 0;
        for (w, b) in self.weights.iter().zip(&self.biases) {
            offsets.push(acc);
            acc += w.len() + b.len();
        }
        offsets
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::Config(
            "a network needs at least an input and an output width".into(),
        ));
    }
    if layer_dims.iter().any(|&d| d == 0) {
        return Err(Error::Config(format!(
            "layer widths must be positive, got {layer_dims:?}"
        )));
    }
    Ok(())
}

#[inline]
/// `b + w·a`, accumulated from the bias in input order like the jet sweep,
/// so order-0 jets reproduce forward values bit for bit.
fn affine(b: f64, w: &[f64], a: &[f64]) -> f64 {
    w.iter().zip(a).fold(b, |s, (x, y)| s + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Straightforward re-implementation used as an evaluation oracle.
    fn reference_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..net.n_layers() {
            let n_in = net.layer_dims()[l];
            let n_out = net.layer_dims()[l + 1];
            let mut z = vec![0.0; n_out];
            for (o, zo) in z.iter_mut().enumerate() {
                let mut s = net.biases(l)[o];
                for i in 0..n_in {
                    s += net.weights(l)[o * n_in + i] * a[i];
                }
                *zo = if l + 1 < net.n_layers() { s.tanh() } else { s };
            }
            a = z;
        }
        a
    }

    #[test]
    fn single_neuron_at_origin() {
        let net = Mlp::from_parts(&[1, 1, 1], vec![vec![2.0], vec![1.0]], vec![vec![0.0], vec![0.0]]).unwrap();
        assert_eq!(net.forward(&[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let net = Mlp::from_parts(&[2, 2], vec![vec![1.0, 0.0, 0.0, 1.0]], vec![vec![0.0, 0.0]]).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn matches_reference_forward() {
        let net = Mlp::new_seeded(&[2, 16, 16, 1], 7).unwrap();
        let got = net.forward(&[0.3, 0.7]).unwrap();
        let want = reference_forward(&net, &[0.3, 0.7]);
        assert!((got[0] - want[0]).abs() <= 1e-14);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let net = Mlp::new_seeded(&[3, 8, 2], 11).unwrap();
        let a = net.forward(&[0.1, -0.2, 0.3]).unwrap();
        let b = net.forward(&[0.1, -0.2, 0.3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn batch_matches_pointwise() {
        let net = Mlp::new_seeded(&[2, 5, 5, 2], 3).unwrap();
        let inputs: Vec<f64> = (0..2 * 1100).map(|i| (i as f64 * 0.37).sin()).collect();
        let batch = net.forward_batch(&inputs).unwrap();
        for r in [0, 511, 512, 1099] {
            let p = net.forward(&inputs[2 * r..2 * r + 2]).unwrap();
            assert_eq!(&batch[2 * r..2 * r + 2], p.as_slice());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = Mlp::new_seeded(&[2, 3, 1], 0).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_adjoints_give_zero_gradient() {
        let net = Mlp::new_seeded(&[2, 4, 1], 5).unwrap();
        let g = net.param_gradient(&[0.1, 0.2, 0.3, 0.4], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_neuron_half_square_loss() {
        // y = w x with w = 0, loss ½(y − 1)² at x = 1 → dL/dw = −1
        let net = Mlp::from_parts(&[1, 1], vec![vec![0.0]], vec![vec![0.0]]).unwrap();
        let (loss, g) = net
            .value_and_gradient(&[1.0], |_, out, adj| {
                adj[0] = out[0] - 1.0;
                0.5 * (out[0] - 1.0).powi(2)
            })
            .unwrap();
        assert_eq!(loss, 0.5);
        assert_eq!(g[0], -1.0);
    }

    #[test]
    fn params_round_trip() {
        let mut net = Mlp::new_seeded(&[2, 3, 2], 9).unwrap();
        let p = net.params();
        assert_eq!(p.len(), 2 * 3 + 3 + 3 * 2 + 2);
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        net.set_params(&shifted).unwrap();
        assert_eq!(net.params(), shifted);
    }

    #[test]
    fn glorot_bounds_respected() {
        let net = Mlp::new_seeded(&[4, 6], 1).unwrap();
        let limit = (6.0f64 / 10.0).sqrt();
        assert!(net.weights(0).iter().all(|w| w.abs() <= limit));
    }
}
