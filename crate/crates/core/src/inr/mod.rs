//! The implicit neural representation: an encoder feeding a small MLP,
//! with batched forward/backward passes, a sparse Adam optimizer, the
//! training loop, reconstruction metrics and the binary checkpoint format.

mod adam;
mod checkpoint;
mod metrics;
mod mlp;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{
    dataset_fingerprint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use metrics::{mse, psnr, reconstruct_frame, volume_psnr};
pub use mlp::{Activations, Dense, Mlp, MlpConfig};
pub use train::{train, EpochRecord, TrainConfig, TrainObserver, TrainReport};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::encoding::{Contribution, Encoder, EncoderConfig, GradAccumulator, SparseGrad};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Samples handled by one worker in a batched pass. Chunks are reduced in
/// index order, so results do not depend on the thread count.
pub const CHUNK: usize = 256;

/// Embedding tables are initialized uniformly in `(-EMBED_INIT, EMBED_INIT)`.
pub const EMBED_INIT: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct InrModel<S> {
    pub encoder: Encoder<S>,
    pub mlp: Mlp<S>,
}

/// Gradients of the batch loss: dense for the MLP, sparse for the tables.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<S> {
    pub layers: Vec<Dense<S>>,
    pub tables: Vec<SparseGrad<S>>,
}

/// Builds a model with tiny random embeddings and Kaiming-uniform MLP
/// weights (`bound = sqrt(6 / fan_in)`, zero biases), seeded deterministically.
pub fn init_model<S: Scalar>(encoder: EncoderConfig, mlp: &MlpConfig, seed: u64) -> Result<InrModel<S>> {
    mlp.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = encoder
        .table_sizes()
        .into_iter()
        .map(|n| (0..n).map(|_| S::of(rng.gen_range(-EMBED_INIT..EMBED_INIT))).collect())
        .collect();
    let input_dim = encoder.output_dim();
    let encoder = Encoder::from_tables(encoder, tables)?;
    let mut net = Mlp::zeros(input_dim, mlp);
    for layer in &mut net.layers {
        let bound = (6.0 / layer.inputs as f64).sqrt();
        layer.weights.iter_mut().for_each(|w| *w = S::of(rng.gen_range(-bound..bound)));
    }
    Ok(InrModel { encoder, mlp: net })
}

struct ChunkOut<S> {
    layers: Vec<Dense<S>>,
    /// Footprint of every sample, back to back.
    contributions: Vec<Contribution<S>>,
    /// End of each sample's footprint in `contributions`.
    spans: Vec<usize>,
    d_enc: Vec<S>,
    sq_err: f64,
}

impl<S: Scalar> InrModel<S> {
    pub fn from_parts(encoder: Encoder<S>, mlp: Mlp<S>) -> Result<Self> {
        if mlp.input_dim() != encoder.output_dim() {
            return Err(Error::argument(format!(
                "MLP expects {} inputs, encoder produces {}",
                mlp.input_dim(),
                encoder.output_dim()
            )));
        }
        Ok(InrModel { encoder, mlp })
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.mlp.param_count()
    }

    /// Predicts one query in the encoder's `[-1, 1]^4` domain.
    pub fn predict(&self, q: [S; 4]) -> Result<S> {
        self.forward(&[q]).map(|v| v[0])
    }

    /// Batched prediction, parallel over fixed chunks.
    pub fn forward(&self, batch: &[[S; 4]]) -> Result<Vec<S>> {
        let parts: Vec<Result<Vec<S>>> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut scratch = Vec::new();
                let mut acts = self.mlp.activations();
                chunk
                    .iter()
                    .map(|&q| {
                        self.encoder.encode_into(q, &mut scratch, &mut acts.acts[0])?;
                        Ok(self.mlp.forward_cached(&mut acts))
                    })
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(batch.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    /// Mean squared error of the batch, accumulated in `f64`.
    pub fn loss(&self, batch: &[[S; 4]], targets: &[S]) -> Result<f64> {
        check_batch(batch, targets)?;
        let pred = self.forward(batch)?;
        Ok(pred.iter().zip(targets).map(|(&p, &y)| (p - y).to_f64_lossy().powi(2)).sum::<f64>() / batch.len() as f64)
    }

    /// Gradients of the mean squared error; returns them with the loss.
    pub fn backward(&self, batch: &[[S; 4]], targets: &[S]) -> Result<(Gradients<S>, f64)> {
        let mut acc = GradAccumulator::for_encoder(&self.encoder);
        self.backward_with(batch, targets, &mut acc)
    }

    /// As [`Self::backward`] with a reusable embedding accumulator.
    pub fn backward_with(
        &self,
        batch: &[[S; 4]],
        targets: &[S],
        acc: &mut GradAccumulator<S>,
    ) -> Result<(Gradients<S>, f64)> {
        check_batch(batch, targets)?;
        let scale = S::of(2.0 / batch.len() as f64);
        let enc_dim = self.encoder.output_dim();
        let chunks: Vec<Result<ChunkOut<S>>> = batch
            .par_chunks(CHUNK)
            .zip(targets.par_chunks(CHUNK))
            .map(|(qs, ys)| {
                let mut out = ChunkOut {
                    layers: self.zero_layer_grads(),
                    contributions: Vec::new(),
                    spans: Vec::with_capacity(qs.len()),
                    d_enc: vec![S::zero(); qs.len() * enc_dim],
                    sq_err: 0.0,
                };
                let mut acts = self.mlp.activations();
                let mut scratch = Vec::new();
                for (i, (&q, &y)) in qs.iter().zip(ys).enumerate() {
                    let start = out.contributions.len();
                    self.encoder.footprint(q, &mut out.contributions)?;
                    let input = &mut acts.acts[0];
                    input.iter_mut().for_each(|v| *v = S::zero());
                    crate::encoding::gather(
                        self.encoder.tables(),
                        self.encoder.embedding_size(),
                        &out.contributions[start..],
                        input,
                    );
                    let pred = self.mlp.forward_cached(&mut acts);
                    let r = pred - y;
                    out.sq_err += r.to_f64_lossy().powi(2);
                    let d_in = &mut out.d_enc[i * enc_dim..][..enc_dim];
                    self.mlp.backward_cached(&acts, scale * r, &mut out.layers, d_in, &mut scratch);
                    out.spans.push(out.contributions.len());
                }
                Ok(out)
            })
            .collect();

        let mut layers = self.zero_layer_grads();
        let mut sq_err = 0.0;
        for chunk in chunks {
            let chunk = chunk?;
            sq_err += chunk.sq_err;
            for (g, c) in layers.iter_mut().zip(&chunk.layers) {
                g.weights.iter_mut().zip(&c.weights).for_each(|(a, &b)| *a += b);
                g.bias.iter_mut().zip(&c.bias).for_each(|(a, &b)| *a += b);
            }
            let mut start = 0;
            for (i, &end) in chunk.spans.iter().enumerate() {
                let up = &chunk.d_enc[i * enc_dim..][..enc_dim];
                for c in &chunk.contributions[start..end] {
                    acc.add(c, up);
                }
                start = end;
            }
        }
        Ok((Gradients { layers, tables: acc.finish() }, sq_err / batch.len() as f64))
    }

    fn zero_layer_grads(&self) -> Vec<Dense<S>> {
        self.mlp.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect()
    }
}

fn check_batch<S>(batch: &[[S; 4]], targets: &[S]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::argument("empty batch"));
    }
    if batch.len() != targets.len() {
        return Err(Error::argument(format!("{} queries but {} targets", batch.len(), targets.len())));
    }
    Ok(())
}
