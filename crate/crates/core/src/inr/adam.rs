use serde::{Deserialize, Serialize};

use super::{Gradients, InrModel};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam with dense moments for the MLP and sparse (lazy) updates for the
/// embedding tables: an entry's moments and value only change in steps
/// where it received a gradient. Bias correction uses the global step.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub config: AdamConfig,
    step: u64,
    layer_m: Vec<Vec<S>>,
    layer_v: Vec<Vec<S>>,
    table_m: Vec<Vec<S>>,
    table_v: Vec<Vec<S>>,
}

struct Coefficients<S> {
    lr: S,
    b1: S,
    b2: S,
    c1: S,
    c2: S,
    eps: S,
}

impl<S: Scalar> Coefficients<S> {
    #[inline]
    fn update(&self, p: &mut S, m: &mut S, v: &mut S, g: S) {
        *m = self.b1 * *m + (S::one() - self.b1) * g;
        *v = self.b2 * *v + (S::one() - self.b2) * g * g;
        let m_hat = *m / self.c1;
        let v_hat = *v / self.c2;
        *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}

impl<S: Scalar> Adam<S> {
    pub fn new(model: &InrModel<S>, config: AdamConfig) -> Self {
        let layers = |l: &super::Dense<S>| vec![S::zero(); l.weights.len() + l.bias.len()];
        Adam {
            config,
            step: 0,
            layer_m: model.mlp.layers.iter().map(layers).collect(),
            layer_v: model.mlp.layers.iter().map(layers).collect(),
            table_m: model.encoder.tables().iter().map(|t| vec![S::zero(); t.len()]).collect(),
            table_v: model.encoder.tables().iter().map(|t| vec![S::zero(); t.len()]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, model: &mut InrModel<S>, grads: &Gradients<S>) {
        self.step += 1;
        let t = self.step as i32;
        let c = Coefficients {
            lr: S::of(self.config.learning_rate),
            b1: S::of(self.config.beta1),
            b2: S::of(self.config.beta2),
            c1: S::of(1.0 - self.config.beta1.powi(t)),
            c2: S::of(1.0 - self.config.beta2.powi(t)),
            eps: S::of(self.config.epsilon),
        };
        for (li, (layer, g)) in model.mlp.layers.iter_mut().zip(&grads.layers).enumerate() {
            let (m, v) = (&mut self.layer_m[li], &mut self.layer_v[li]);
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(&g.bias);
            for (((p, &g), m), v) in params.zip(gs).zip(m.iter_mut()).zip(v.iter_mut()) {
                c.update(p, m, v, g);
            }
        }
        let f = model.encoder.embedding_size();
        for (ti, (table, g)) in model.encoder.tables_mut().iter_mut().zip(&grads.tables).enumerate() {
            let (m, v) = (&mut self.table_m[ti], &mut self.table_v[ti]);
            for (k, &e) in g.entries.iter().enumerate() {
                let base = e as usize * f;
                for j in 0..f {
                    c.update(&mut table[base + j], &mut m[base + j], &mut v[base + j], g.values[k * f + j]);
                }
            }
        }
    }
}
