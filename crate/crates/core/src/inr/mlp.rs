use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hidden layers use ReLU, the scalar output is linear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden_layers: usize,
    pub neurons: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden_layers: 2, neurons: 64 }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.neurons == 0 {
            return Err(Error::argument("MLP needs at least one hidden layer with one neuron"));
        }
        Ok(())
    }

    /// `(inputs, outputs)` of every layer for a given input width.
    pub fn shapes(&self, input_dim: usize) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut prev = input_dim;
        for _ in 0..self.hidden_layers {
            shapes.push((prev, self.neurons));
            prev = self.neurons;
        }
        shapes.push((prev, 1));
        shapes
    }
}

/// Fully connected layer, weights row-major `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<S> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![S::zero(); inputs * outputs], bias: vec![S::zero(); outputs] }
    }

    #[inline]
    fn apply(&self, x: &[S], out: &mut [S], relu: bool) {
        for (o, (row, &b)) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs).zip(&self.bias)) {
            let mut acc = b;
            for (&w, &xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *o = if relu && acc < S::zero() { S::zero() } else { acc };
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<S> {
    pub layers: Vec<Dense<S>>,
}

/// Per-sample activations kept for backpropagation; `acts[0]` is the input.
#[derive(Clone, Debug, Default)]
pub struct Activations<S> {
    pub acts: Vec<Vec<S>>,
}

impl<S: Scalar> Mlp<S> {
    pub fn zeros(input_dim: usize, cfg: &MlpConfig) -> Self {
        Mlp { layers: cfg.shapes(input_dim).into_iter().map(|(i, o)| Dense::zeros(i, o)).collect() }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn activations(&self) -> Activations<S> {
        let mut acts = vec![vec![S::zero(); self.input_dim()]];
        acts.extend(self.layers.iter().map(|l| vec![S::zero(); l.outputs]));
        Activations { acts }
    }

    /// Forward pass of one input already copied into `a.acts[0]`.
    pub fn forward_cached(&self, a: &mut Activations<S>) -> S {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (head, tail) = a.acts.split_at_mut(i + 1);
            layer.apply(&head[i], &mut tail[0], i < last);
        }
        a.acts[last + 1][0]
    }

    pub fn forward(&self, x: &[S]) -> S {
        let mut a = self.activations();
        a.acts[0].copy_from_slice(x);
        self.forward_cached(&mut a)
    }

    /// Accumulates parameter gradients for upstream `dout` into `grads` and
    /// writes the gradient w.r.t. the input into `d_input`.
    pub fn backward_cached(
        &self,
        a: &Activations<S>,
        dout: S,
        grads: &mut [Dense<S>],
        d_input: &mut [S],
        scratch: &mut Vec<S>,
    ) {
        let mut delta = vec![dout];
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &a.acts[i];
            let g = &mut grads[i];
            for (o, &d) in delta.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                g.bias[o] += d;
                for (gw, &x) in g.weights[o * layer.inputs..][..layer.inputs].iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            scratch.clear();
            scratch.resize(layer.inputs, S::zero());
            for (o, &d) in delta.iter().enumerate() {
                if d == S::zero() {
                    continue;
                }
                for (s, &w) in scratch.iter_mut().zip(&layer.weights[o * layer.inputs..][..layer.inputs]) {
                    *s += d * w;
                }
            }
            if i > 0 {
                // input of layer i is a ReLU output; the derivative is 0 where it was clamped
                for (s, &x) in scratch.iter_mut().zip(input) {
                    if x <= S::zero() {
                        *s = S::zero();
                    }
                }
                delta.clone_from(scratch);
            } else {
                d_input.copy_from_slice(scratch);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_chain() {
        let cfg = MlpConfig::default();
        assert_eq!(cfg.shapes(16), vec![(16, 64), (64, 64), (64, 1)]);
        let m = Mlp::<f32>::zeros(16, &cfg);
        assert_eq!(m.param_count(), 16 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::<f64>::zeros(3, &MlpConfig { hidden_layers: 1, neurons: 4 });
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]), 0.0);
    }

    #[test]
    fn hand_evaluated_network() {
        // 2 -> 2 (relu) -> 1
        let m = Mlp {
            layers: vec![
                Dense { inputs: 2, outputs: 2, weights: vec![1.0, -1.0, 0.5, 2.0], bias: vec![0.0, -1.0] },
                Dense { inputs: 2, outputs: 1, weights: vec![3.0, -2.0], bias: vec![0.25] },
            ],
        };
        // h = relu([x0 - x1, 0.5 x0 + 2 x1 - 1]); y = 3 h0 - 2 h1 + 0.25
        let cases: [([f64; 2], f64); 5] = [
            ([0.0, 0.0], 0.25),
            ([1.0, 0.0], 3.25),
            ([0.0, 1.0], -1.75),
            ([2.0, 1.0], 3.0 - 4.0 + 0.25),
            ([-1.0, 0.5], 0.25),
        ];
        for (x, y) in cases {
            assert!((m.forward(&x) - y).abs() < 1e-12, "{x:?}");
        }
    }
}
