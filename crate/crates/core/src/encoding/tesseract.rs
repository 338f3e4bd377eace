use serde::{Deserialize, Serialize};

use super::config::{configure_levels, fhash_unchecked, morton_ranks, LevelConfig, Linearization, T, X, Y, Z};
use super::{check_query, locate_axis, Contribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Serializable description of a Tesseract encoder (everything but tables).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesseractConfig {
    pub fold: usize,
    pub embedding_size: usize,
    pub levels: Vec<LevelConfig>,
    /// Normalized times of the key frames, ascending over `[-1, 1]`.
    pub key_times: Vec<f64>,
    #[serde(default)]
    pub linearization: Linearization,
}

impl TesseractConfig {
    /// Configuration for an FBB with `sizes` vertices per spatial axis.
    pub fn for_fbb(sizes: [usize; 3], key_times: Vec<f64>, fold: usize, embedding_size: usize) -> Result<Self> {
        let levels = configure_levels(sizes, key_times.len(), fold)?;
        let cfg = TesseractConfig { fold, embedding_size, levels, key_times, linearization: Linearization::RowMajor };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_linearization(mut self, lin: Linearization) -> Self {
        self.linearization = lin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_size == 0 {
            return Err(Error::argument("embedding size must be >= 1"));
        }
        if self.levels.is_empty() {
            return Err(Error::argument("encoder needs at least one level"));
        }
        if self.key_times.len() < 2 || self.key_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::argument("key times must be >= 2 strictly increasing values"));
        }
        for l in &self.levels {
            LevelConfig::new(l.level, l.res)?;
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.levels.len() * self.embedding_size
    }

    pub fn param_count(&self) -> usize {
        self.levels.iter().map(|l| l.table_size()).sum::<usize>() * self.embedding_size
    }
}

/// Temporal neighbours of a query at one level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBracket {
    /// Temporal vertex indices at this level; equal when the query sits on a
    /// vertex.
    pub prev: usize,
    pub next: usize,
    pub t_prev: f64,
    pub t_next: f64,
    /// Linear weight of `next`.
    pub weight: f64,
}

/// Finds the temporal grid vertices enclosing `t` at `level`. The level's
/// `res[t]` vertices are spread uniformly over the key-time span.
pub fn locate_time_bracket(level: &LevelConfig, key_times: &[f64], t: f64) -> Result<TimeBracket> {
    let (lo, hi) = match (key_times.first(), key_times.last()) {
        (Some(&lo), Some(&hi)) if lo < hi => (lo, hi),
        _ => return Err(Error::argument("key times must span a non-empty interval")),
    };
    if !(t >= lo && t <= hi) {
        return Err(Error::bounds(format!("time {t} outside key range [{lo}, {hi}]")));
    }
    let rt = level.res[T];
    let local = -1.0 + 2.0 * (t - lo) / (hi - lo);
    let (i, w) = locate_axis(local, rt);
    let time_of = |k: usize| lo + (hi - lo) * k as f64 / (rt - 1) as f64;
    let bracket = if w == 0.0 {
        TimeBracket { prev: i, next: i, t_prev: time_of(i), t_next: time_of(i), weight: 0.0 }
    } else if w == 1.0 {
        TimeBracket { prev: i + 1, next: i + 1, t_prev: time_of(i + 1), t_next: time_of(i + 1), weight: 0.0 }
    } else {
        TimeBracket { prev: i, next: i + 1, t_prev: time_of(i), t_next: time_of(i + 1), weight: w }
    };
    Ok(bracket)
}

/// Multi-resolution 4D embedding grid addressed by the collision-free F-Hash.
#[derive(Clone, Debug, PartialEq)]
pub struct TesseractEncoder<S> {
    config: TesseractConfig,
    /// Per level: `table_size * embedding_size` values, entry-major.
    tables: Vec<Vec<S>>,
    ranks: Vec<Option<Vec<u32>>>,
}

impl<S: Scalar> TesseractEncoder<S> {
    /// Encoder with zero-initialized tables.
    pub fn new(config: TesseractConfig) -> Result<Self> {
        config.validate()?;
        let tables = config.levels.iter().map(|l| vec![S::zero(); l.table_size() * config.embedding_size]).collect();
        Ok(Self::assemble(config, tables))
    }

    pub fn from_tables(config: TesseractConfig, tables: Vec<Vec<S>>) -> Result<Self> {
        config.validate()?;
        if tables.len() != config.levels.len()
            || tables.iter().zip(&config.levels).any(|(t, l)| t.len() != l.table_size() * config.embedding_size)
        {
            return Err(Error::argument("table shapes do not match the level configuration"));
        }
        Ok(Self::assemble(config, tables))
    }

    fn assemble(config: TesseractConfig, tables: Vec<Vec<S>>) -> Self {
        let ranks = config
            .levels
            .iter()
            .map(|l| match config.linearization {
                Linearization::RowMajor => None,
                Linearization::Morton => Some(morton_ranks(l)),
            })
            .collect();
        TesseractEncoder { config, tables, ranks }
    }

    pub fn config(&self) -> &TesseractConfig {
        &self.config
    }

    pub fn levels(&self) -> &[LevelConfig] {
        &self.config.levels
    }

    pub fn embedding_size(&self) -> usize {
        self.config.embedding_size
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim()
    }

    pub fn tables(&self) -> &[Vec<S>] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [Vec<S>] {
        &mut self.tables
    }

    /// Bucket of a corner under the configured linearization.
    pub fn bucket(&self, level: usize, corner: [usize; 4]) -> usize {
        let row_major = fhash_unchecked(&self.config.levels[level], corner);
        match &self.ranks[level] {
            None => row_major,
            Some(r) => r[row_major] as usize,
        }
    }

    /// Quadrilinear weights and buckets of the 16 Tesseract corners around
    /// `q` at `level`. Corner bit 0/1/2/3 selects the upper x/y/z/t vertex.
    pub fn level_footprint(&self, level: usize, q: [f64; 4]) -> ([usize; 16], [f64; 16]) {
        let cfg = &self.config.levels[level];
        let [kt0, kt1] = [self.config.key_times[0], *self.config.key_times.last().unwrap()];
        let local_t = -1.0 + 2.0 * (q[T] - kt0) / (kt1 - kt0);
        let mut base = [0usize; 4];
        let mut frac = [0f64; 4];
        for (a, c) in [(T, local_t), (X, q[X]), (Y, q[Y]), (Z, q[Z])] {
            let (i, w) = locate_axis(c, cfg.res[a]);
            base[a] = i;
            frac[a] = w;
        }
        let mut buckets = [0usize; 16];
        let mut weights = [0f64; 16];
        for c in 0..16 {
            let mut corner = base;
            let mut w = 1.0;
            for (bit, a) in [X, Y, Z, T].into_iter().enumerate() {
                if c >> bit & 1 == 1 {
                    corner[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            buckets[c] = self.bucket(level, corner);
            weights[c] = w;
        }
        (buckets, weights)
    }

    pub(crate) fn push_footprint(&self, q: [f64; 4], out: &mut Vec<Contribution<S>>) {
        for level in 0..self.config.levels.len() {
            let (buckets, weights) = self.level_footprint(level, q);
            for c in 0..16 {
                out.push(Contribution {
                    table: level as u32,
                    entry: buckets[c] as u32,
                    slot: level as u32,
                    weight: S::of(weights[c]),
                });
            }
        }
    }

    /// Concatenated per-level quadrilinear embeddings of `q = (t, x, y, z)`.
    pub fn encode(&self, q: [S; 4]) -> Result<Vec<S>> {
        let q = check_query(q)?;
        let f = self.config.embedding_size;
        let mut out = vec![S::zero(); self.output_dim()];
        let mut fp = Vec::with_capacity(16 * self.config.levels.len());
        self.push_footprint(q, &mut fp);
        super::gather(&self.tables, f, &fp, &mut out);
        Ok(out)
    }

    /// Same as [`Self::encode`], but spelled out as trilinear interpolation in
    /// both bracketing time slices followed by a linear blend in time.
    pub fn encode_sliced(&self, q: [S; 4]) -> Result<Vec<S>> {
        let q = check_query(q)?;
        let f = self.config.embedding_size;
        let mut out = Vec::with_capacity(self.output_dim());
        for (li, level) in self.config.levels.iter().enumerate() {
            let bracket = locate_time_bracket(level, &self.config.key_times, q[T])?;
            let mut spatial = [(0usize, 0f64); 3];
            for (k, a) in [X, Y, Z].into_iter().enumerate() {
                spatial[k] = locate_axis(q[a], level.res[a]);
            }
            let slice = |ti: usize| -> Vec<f64> {
                let mut v = vec![0f64; f];
                for i in 0..2 {
                    for j in 0..2 {
                        for k in 0..2 {
                            let corner = [ti, spatial[0].0 + i, spatial[1].0 + j, spatial[2].0 + k];
                            let w = [i, j, k]
                                .iter()
                                .zip(&spatial)
                                .map(|(&bit, &(_, s))| if bit == 1 { s } else { 1.0 - s })
                                .product::<f64>();
                            if w == 0.0 {
                                continue;
                            }
                            let b = self.bucket(li, corner);
                            for (c, acc) in v.iter_mut().enumerate() {
                                *acc += w * self.tables[li][b * f + c].to_f64_lossy();
                            }
                        }
                    }
                }
                v
            };
            let prev = slice(bracket.prev);
            let next = if bracket.next == bracket.prev { prev.clone() } else { slice(bracket.next) };
            let w = bracket.weight;
            out.extend(prev.iter().zip(&next).map(|(&p, &n)| S::of((1.0 - w) * p + w * n)));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_gradients;
    use proptest::prelude::*;

    fn key_times(n: usize) -> Vec<f64> {
        (0..n).map(|k| crate::volume::KeyFrameSet::new((0..n).collect(), n).unwrap().time(k)).collect()
    }

    fn encoder(sizes: [usize; 3], n: usize, fold: usize, f: usize) -> TesseractEncoder<f64> {
        TesseractEncoder::new(TesseractConfig::for_fbb(sizes, key_times(n), fold, f).unwrap()).unwrap()
    }

    fn fill_random(enc: &mut TesseractEncoder<f64>, seed: u64) {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        for t in enc.tables_mut() {
            for v in t.iter_mut() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
            }
        }
    }

    #[test]
    fn bracket_on_vertex_and_midpoints() {
        let kt = key_times(5);
        let two = LevelConfig::new(2, [2, 2, 2, 2]).unwrap();
        let b = locate_time_bracket(&two, &kt, 0.0).unwrap();
        assert_eq!((b.t_prev, b.t_next, b.weight), (-1.0, 1.0, 0.5));
        let three = LevelConfig::new(1, [3, 2, 2, 2]).unwrap();
        let b = locate_time_bracket(&three, &kt, 0.5).unwrap();
        assert_eq!((b.t_prev, b.t_next, b.weight), (0.0, 1.0, 0.5));
        let b = locate_time_bracket(&three, &kt, 0.0).unwrap();
        assert_eq!((b.prev, b.next, b.weight), (1, 1, 0.0));
        let b = locate_time_bracket(&three, &kt, 1.0).unwrap();
        assert_eq!((b.prev, b.next, b.t_prev), (2, 2, 1.0));
        assert!(locate_time_bracket(&three, &kt, 1.5).is_err());
    }

    #[test]
    fn constant_tables_reproduce_constant() {
        let mut enc = encoder([5, 7, 3], 3, 2, 2);
        for t in enc.tables_mut() {
            t.iter_mut().for_each(|v| *v = 0.375);
        }
        for q in [[0.1, -0.3, 0.99, -1.0], [-1.0, 1.0, 0.0, 0.2], [0.77, 0.5, -0.5, 0.01]] {
            let out = enc.encode(q).unwrap();
            assert!(out.iter().all(|&v| (v - 0.375).abs() < 1e-15), "{out:?}");
        }
    }

    #[test]
    fn center_of_unit_tesseract_is_mean_of_indices() {
        let cfg = TesseractConfig {
            fold: 2,
            embedding_size: 1,
            levels: vec![LevelConfig::new(1, [2, 2, 2, 2]).unwrap()],
            key_times: vec![-1.0, 1.0],
            linearization: Linearization::RowMajor,
        };
        let table: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let enc = TesseractEncoder::from_tables(cfg, vec![table]).unwrap();
        assert_eq!(enc.encode([0.0; 4]).unwrap(), vec![7.5]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn corner_exactness_at_level_one() {
        let mut enc = encoder([6, 4, 5], 4, 2, 2);
        fill_random(&mut enc, 3);
        let level = enc.levels()[0].clone();
        let kt = key_times(4);
        for t in 0..4 {
            for x in 0..6 {
                for z in 0..5 {
                    let y = (x + z) % 4;
                    let q = [
                        kt[t],
                        crate::volume::vertex_coord(x, 6),
                        crate::volume::vertex_coord(y, 4),
                        crate::volume::vertex_coord(z, 5),
                    ];
                    let out = enc.encode(q).unwrap();
                    let b = fhash_unchecked(&level, [t, x, y, z]);
                    assert_eq!(&out[..2], &enc.tables()[0][2 * b..2 * b + 2]);
                }
            }
        }
    }

    #[test]
    fn sliced_and_fused_interpolation_agree() {
        let mut enc = encoder([9, 5, 6], 5, 2, 3);
        fill_random(&mut enc, 11);
        for q in [[0.13, -0.31, 0.99, -0.72], [-0.6, 0.25, 0.0, 0.2], [1.0, -1.0, 1.0, 0.5]] {
            let a = enc.encode(q).unwrap();
            let b = enc.encode_sliced(q).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn morton_linearization_changes_layout_not_values() {
        let cfg = TesseractConfig::for_fbb([7, 5, 6], key_times(3), 2, 2).unwrap();
        let mut row = TesseractEncoder::<f64>::new(cfg.clone()).unwrap();
        fill_random(&mut row, 5);
        let morton_cfg = cfg.with_linearization(Linearization::Morton);
        let mut morton = TesseractEncoder::<f64>::new(morton_cfg).unwrap();
        // scatter the row-major tables into morton order
        for (li, level) in row.levels().to_vec().iter().enumerate() {
            for b in 0..level.table_size() {
                let c = super::super::config::corner_of(level, b);
                let mb = morton.bucket(li, c);
                for k in 0..2 {
                    morton.tables_mut()[li][mb * 2 + k] = row.tables()[li][b * 2 + k];
                }
            }
        }
        let q = [0.3, -0.2, 0.7, 0.1];
        assert_eq!(row.encode(q).unwrap(), morton.encode(q).unwrap());
    }

    #[test]
    fn out_of_domain_query() {
        let enc = encoder([4, 4, 4], 2, 2, 1);
        assert!(matches!(enc.encode([0.0, 1.1, 0.0, 0.0]), Err(Error::Bounds(_))));
        assert!(matches!(enc.encode([f64::NAN, 0.0, 0.0, 0.0]), Err(Error::Bounds(_))));
    }

    fn query() -> impl Strategy<Value = [f64; 4]> {
        [-1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0, -1.0f64..=1.0]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn weights_partition_unity(sx in 2usize..20, sy in 2usize..20, sz in 2usize..20, n in 2usize..7, fold in 2usize..5, q in query()) {
            let enc = encoder([sx, sy, sz], n, fold, 1);
            for level in 0..enc.levels().len() {
                let (_, w) = enc.level_footprint(level, q);
                prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn constants_reproduced(sx in 2usize..12, sy in 2usize..12, sz in 2usize..12, n in 2usize..6, c in -2.0f64..2.0, q in query()) {
            let mut enc = encoder([sx, sy, sz], n, 2, 2);
            for t in enc.tables_mut() {
                t.iter_mut().for_each(|v| *v = c);
            }
            let out = enc.encode(q).unwrap();
            prop_assert!(out.iter().all(|&v| (v - c).abs() < 1e-12));
        }

        #[test]
        fn continuous_across_cell_faces(sx in 3usize..12, n in 2usize..6, seed in 0u64..1000, cell in 1usize..10, q in query()) {
            let mut enc = encoder([sx, 5, 4], n, 2, 2);
            fill_random(&mut enc, seed);
            let k = cell % (sx - 1);
            if k == 0 { return Ok(()); }
            let face = crate::volume::vertex_coord(k, sx);
            let mut lo = q;
            let mut hi = q;
            lo[X] = face - 1e-6;
            hi[X] = face + 1e-6;
            let a = enc.encode(lo).unwrap();
            let b = enc.encode(hi).unwrap();
            let at = { let mut m = q; m[X] = face; enc.encode(m).unwrap() };
            for i in 0..a.len() {
                // the tables are bounded by 1, so the jump is bounded by the slope times 2e-6
                prop_assert!((a[i] - b[i]).abs() < 1e-4);
                prop_assert!((a[i] - at[i]).abs() < 1e-4);
            }
        }

        #[test]
        fn corner_gradient_is_one_hot(sx in 2usize..10, n in 2usize..5, x in 0usize..10, t in 0usize..5) {
            let enc = encoder([sx, 3, 3], n, 2, 1);
            let (x, t) = (x % sx, t % n);
            let kt = key_times(n);
            let q = [kt[t], crate::volume::vertex_coord(x, sx), -1.0, 1.0];
            let up = vec![1.0; enc.output_dim()];
            let g = encode_gradients(&super::super::Encoder::Tesseract(enc.clone()), q, &up).unwrap();
            prop_assert_eq!(g[0].entries.len(), 1);
            prop_assert_eq!(g[0].values[0], 1.0);
            for level in &g {
                let s: f64 = level.values.iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
