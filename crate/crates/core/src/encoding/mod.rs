//! Parametric input encodings: the multi-resolution Tesseract encoder with
//! its collision-free F-Hash, the three comparison encoders, and exhaustive
//! collision/parameter statistics.
//!
//! Every encoder is reduced to a *footprint*: a list of weighted table
//! entries per query. Encoding gathers the footprint, gradients scatter
//! through it, so the MLP and optimizer never need to know which encoder
//! they are driving.

mod baseline;
mod config;
mod stats;
mod tesseract;

pub use baseline::{mhe_hash, BaselineConfig, BaselineEncoder, BaselineKind, BaselineLevel, BaselineSet, MHE_PRIMES};
pub use config::{configure_levels, corner_of, fhash, level_count, LevelConfig, Linearization};
pub use stats::{encoding_stats, equal_axis_levels, EncodingStats, LevelStats};
pub use tesseract::{locate_time_bracket, TesseractConfig, TesseractEncoder, TimeBracket};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One weighted table entry contributing to output block `slot`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution<S> {
    pub table: u32,
    pub entry: u32,
    pub slot: u32,
    pub weight: S,
}

/// Cell index and fractional offset of normalized coordinate `c` on an axis
/// of `res` vertices. Positions within `1e-6 * res` grid units of a vertex
/// snap onto it so that vertex queries are exact.
#[inline]
pub(crate) fn locate_axis(c: f64, res: usize) -> (usize, f64) {
    let cells = (res - 1) as f64;
    let mut pos = ((c + 1.0) * 0.5 * cells).clamp(0.0, cells);
    let nearest = pos.round();
    if (pos - nearest).abs() <= 1e-6 * res as f64 {
        pos = nearest;
    }
    let i = (pos as usize).min(res - 2);
    (i, pos - i as f64)
}

pub(crate) fn check_query<S: Scalar>(q: [S; 4]) -> Result<[f64; 4]> {
    let q = q.map(|v| v.to_f64_lossy());
    if q.iter().any(|v| !(*v >= -1.0 && *v <= 1.0)) {
        return Err(Error::bounds(format!("query {q:?} outside [-1, 1]^4")));
    }
    Ok(q)
}

/// `out[slot * f + c] += w * table[entry * f + c]` over the footprint.
#[inline]
pub(crate) fn gather<S: Scalar>(tables: &[Vec<S>], f: usize, fp: &[Contribution<S>], out: &mut [S]) {
    for c in fp {
        if c.weight == S::zero() {
            continue;
        }
        let src = &tables[c.table as usize][c.entry as usize * f..][..f];
        let dst = &mut out[c.slot as usize * f..][..f];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += c.weight * s;
        }
    }
}

/// Serializable encoder description stored in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderConfig {
    Tesseract(TesseractConfig),
    Baseline { config: BaselineConfig, key_times: Vec<f64> },
}

impl EncoderConfig {
    pub fn output_dim(&self) -> usize {
        match self {
            EncoderConfig::Tesseract(c) => c.output_dim(),
            EncoderConfig::Baseline { config, .. } => config.output_dim(),
        }
    }

    pub fn table_sizes(&self) -> Vec<usize> {
        match self {
            EncoderConfig::Tesseract(c) => c.levels.iter().map(|l| l.table_size() * c.embedding_size).collect(),
            EncoderConfig::Baseline { config, key_times } => {
                let per: Vec<usize> = config.levels.iter().map(|l| l.buckets * config.embedding_size).collect();
                (0..key_times.len()).flat_map(|_| per.iter().copied()).collect()
            }
        }
    }

    pub fn key_times(&self) -> &[f64] {
        match self {
            EncoderConfig::Tesseract(c) => &c.key_times,
            EncoderConfig::Baseline { key_times, .. } => key_times,
        }
    }
}

/// Any encoder the INR can sit on.
#[derive(Clone, Debug, PartialEq)]
pub enum Encoder<S> {
    Tesseract(TesseractEncoder<S>),
    Baseline(BaselineSet<S>),
}

impl<S: Scalar> Encoder<S> {
    pub fn from_tables(config: EncoderConfig, tables: Vec<Vec<S>>) -> Result<Self> {
        match config {
            EncoderConfig::Tesseract(c) => Ok(Encoder::Tesseract(TesseractEncoder::from_tables(c, tables)?)),
            EncoderConfig::Baseline { config, key_times } => {
                Ok(Encoder::Baseline(BaselineSet::from_tables(config, key_times, tables)?))
            }
        }
    }

    pub fn config(&self) -> EncoderConfig {
        match self {
            Encoder::Tesseract(e) => EncoderConfig::Tesseract(e.config().clone()),
            Encoder::Baseline(b) => {
                EncoderConfig::Baseline { config: b.config().clone(), key_times: b.key_times().to_vec() }
            }
        }
    }

    pub fn embedding_size(&self) -> usize {
        match self {
            Encoder::Tesseract(e) => e.embedding_size(),
            Encoder::Baseline(b) => b.config().embedding_size,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Encoder::Tesseract(e) => e.output_dim(),
            Encoder::Baseline(b) => b.config().output_dim(),
        }
    }

    pub fn key_times(&self) -> &[f64] {
        match self {
            Encoder::Tesseract(e) => &e.config().key_times,
            Encoder::Baseline(b) => b.key_times(),
        }
    }

    pub fn tables(&self) -> &[Vec<S>] {
        match self {
            Encoder::Tesseract(e) => e.tables(),
            Encoder::Baseline(b) => b.tables(),
        }
    }

    pub fn tables_mut(&mut self) -> &mut [Vec<S>] {
        match self {
            Encoder::Tesseract(e) => e.tables_mut(),
            Encoder::Baseline(b) => b.tables_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.tables().iter().map(Vec::len).sum()
    }

    /// Appends the weighted entries that make up the encoding of `q`.
    pub fn footprint(&self, q: [S; 4], out: &mut Vec<Contribution<S>>) -> Result<()> {
        let q = check_query(q)?;
        match self {
            Encoder::Tesseract(e) => e.push_footprint(q, out),
            Encoder::Baseline(b) => b.push_footprint(q, out),
        }
        Ok(())
    }

    /// Encodes `q` into `out` (length [`Self::output_dim`]), reusing `scratch`.
    pub fn encode_into(&self, q: [S; 4], scratch: &mut Vec<Contribution<S>>, out: &mut [S]) -> Result<()> {
        scratch.clear();
        self.footprint(q, scratch)?;
        out.iter_mut().for_each(|v| *v = S::zero());
        gather(self.tables(), self.embedding_size(), scratch, out);
        Ok(())
    }

    pub fn encode(&self, q: [S; 4]) -> Result<Vec<S>> {
        let mut out = vec![S::zero(); self.output_dim()];
        self.encode_into(q, &mut Vec::new(), &mut out)?;
        Ok(out)
    }
}

/// Gradient of one table restricted to the entries that received a non-zero
/// interpolation weight.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseGrad<S> {
    /// Ascending entry indices.
    pub entries: Vec<u32>,
    /// `entries.len() * embedding_size` values.
    pub values: Vec<S>,
}

impl<S: Scalar> SparseGrad<S> {
    pub fn get(&self, entry: u32, f: usize) -> Option<&[S]> {
        let i = self.entries.binary_search(&entry).ok()?;
        Some(&self.values[i * f..(i + 1) * f])
    }
}

/// Scatter target for embedding gradients; reusable across batches.
#[derive(Clone, Debug)]
pub struct GradAccumulator<S> {
    f: usize,
    dense: Vec<Vec<S>>,
    touched: Vec<Vec<u32>>,
    marked: Vec<Vec<bool>>,
}

impl<S: Scalar> GradAccumulator<S> {
    pub fn new(table_lens: &[usize], f: usize) -> Self {
        GradAccumulator {
            f,
            dense: table_lens.iter().map(|&n| vec![S::zero(); n]).collect(),
            touched: vec![Vec::new(); table_lens.len()],
            marked: table_lens.iter().map(|&n| vec![false; n / f]).collect(),
        }
    }

    pub fn for_encoder(enc: &Encoder<S>) -> Self {
        let lens: Vec<usize> = enc.tables().iter().map(Vec::len).collect();
        Self::new(&lens, enc.embedding_size())
    }

    /// Adds `weight * upstream[slot]` to one entry; zero weights are skipped.
    #[inline]
    pub fn add(&mut self, c: &Contribution<S>, upstream: &[S]) {
        if c.weight == S::zero() {
            return;
        }
        let (t, e) = (c.table as usize, c.entry as usize);
        if !self.marked[t][e] {
            self.marked[t][e] = true;
            self.touched[t].push(c.entry);
        }
        let f = self.f;
        let dst = &mut self.dense[t][e * f..][..f];
        let up = &upstream[c.slot as usize * f..][..f];
        for (d, &u) in dst.iter_mut().zip(up) {
            *d += c.weight * u;
        }
    }

    /// Drains the accumulated gradient, leaving the accumulator empty.
    pub fn finish(&mut self) -> Vec<SparseGrad<S>> {
        let f = self.f;
        let mut out = Vec::with_capacity(self.dense.len());
        for t in 0..self.dense.len() {
            let mut entries = std::mem::take(&mut self.touched[t]);
            entries.sort_unstable();
            let mut values = Vec::with_capacity(entries.len() * f);
            for &e in &entries {
                let e = e as usize;
                let src = &mut self.dense[t][e * f..][..f];
                values.extend_from_slice(src);
                src.iter_mut().for_each(|v| *v = S::zero());
                self.marked[t][e] = false;
            }
            out.push(SparseGrad { entries, values });
        }
        out
    }
}

/// Distributes an upstream gradient w.r.t. the encoding of `q` onto the
/// contributing table entries (one [`SparseGrad`] per table).
pub fn encode_gradients<S: Scalar>(enc: &Encoder<S>, q: [S; 4], upstream: &[S]) -> Result<Vec<SparseGrad<S>>> {
    if upstream.len() != enc.output_dim() {
        return Err(Error::argument(format!(
            "upstream gradient has {} components, encoder outputs {}",
            upstream.len(),
            enc.output_dim()
        )));
    }
    let mut fp = Vec::new();
    enc.footprint(q, &mut fp)?;
    let mut acc = GradAccumulator::for_encoder(enc);
    for c in &fp {
        acc.add(c, upstream);
    }
    Ok(acc.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_encoder(rng: &mut ChaCha8Rng) -> Encoder<f64> {
        let sizes = [rng.gen_range(2..9), rng.gen_range(2..9), rng.gen_range(2..9)];
        let n = rng.gen_range(2..5);
        let key_times = (0..n).map(|k| crate::volume::KeyFrameSet::new((0..n).collect(), n).unwrap().time(k)).collect();
        let cfg = TesseractConfig::for_fbb(sizes, key_times, rng.gen_range(2..4), rng.gen_range(1..3)).unwrap();
        let mut enc = TesseractEncoder::new(cfg).unwrap();
        for t in enc.tables_mut() {
            t.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        Encoder::Tesseract(enc)
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = random_encoder(&mut rng);
        let up = vec![0.0; enc.output_dim()];
        let g = encode_gradients(&enc, [0.1, 0.2, -0.3, 0.4], &up).unwrap();
        assert!(g.iter().all(|s| s.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn upstream_length_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let enc = random_encoder(&mut rng);
        assert!(encode_gradients(&enc, [0.0; 4], &[1.0]).is_err());
    }

    /// The encoding is linear in the tables, so d(<up, enc(q)>)/d(table) can
    /// be checked by central differences on every entry.
    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut enc = random_encoder(&mut rng);
            let q: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let up: Vec<f64> = (0..enc.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let grads = encode_gradients(&enc, q, &up).unwrap();
            let f = enc.embedding_size();
            let objective =
                |e: &Encoder<f64>| -> f64 { e.encode(q).unwrap().iter().zip(&up).map(|(a, b)| a * b).sum() };
            let h = 1e-6;
            for t in 0..enc.tables().len() {
                for i in 0..enc.tables()[t].len() {
                    let orig = enc.tables()[t][i];
                    enc.tables_mut()[t][i] = orig + h;
                    let plus = objective(&enc);
                    enc.tables_mut()[t][i] = orig - h;
                    let minus = objective(&enc);
                    enc.tables_mut()[t][i] = orig;
                    let numeric = (plus - minus) / (2.0 * h);
                    let analytic = grads[t].get((i / f) as u32, f).map_or(0.0, |g| g[i % f]);
                    let scale = numeric.abs().max(analytic.abs()).max(1e-8);
                    assert!(
                        (numeric - analytic).abs() / scale < 1e-5 || (numeric - analytic).abs() < 1e-9,
                        "table {t} entry {i}: {numeric} vs {analytic}"
                    );
                }
            }
        }
    }
}
