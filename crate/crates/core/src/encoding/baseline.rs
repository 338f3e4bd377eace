use serde::{Deserialize, Serialize};

use super::{check_query, gather, locate_axis, Contribution};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Primes of the classic spatial hash; x uses 1 for cache coherence.
pub const MHE_PRIMES: [u32; 3] = [1, 2_654_435_761, 805_459_861];

/// `((x * p1) xor (y * p2) xor (z * p3)) mod table_size` in wrapping 32-bit
/// arithmetic.
#[inline]
pub fn mhe_hash(corner: [usize; 3], table_size: usize) -> usize {
    let h = (corner[0] as u32).wrapping_mul(MHE_PRIMES[0])
        ^ (corner[1] as u32).wrapping_mul(MHE_PRIMES[1])
        ^ (corner[2] as u32).wrapping_mul(MHE_PRIMES[2]);
    h as usize % table_size
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    DenseSingle,
    DenseMulti,
    MheSpatialHash,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::DenseSingle => "dense_single",
            BaselineKind::DenseMulti => "dense_multi",
            BaselineKind::MheSpatialHash => "mhe_spatial_hash",
        }
    }
}

/// One 3D grid level. Dense levels have exactly one bucket per vertex; a
/// hashed level falls back to direct indexing whenever its grid fits into the
/// table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineLevel {
    pub res: [usize; 3],
    pub buckets: usize,
}

impl BaselineLevel {
    pub fn vertices(&self) -> usize {
        self.res.iter().product()
    }

    pub fn hashed(&self) -> bool {
        self.vertices() > self.buckets
    }

    #[inline]
    pub fn bucket(&self, c: [usize; 3]) -> usize {
        if self.hashed() {
            mhe_hash(c, self.buckets)
        } else {
            (c[2] * self.res[1] + c[1]) * self.res[0] + c[0]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub levels: Vec<BaselineLevel>,
    pub embedding_size: usize,
}

fn halve(r: usize) -> usize {
    r.div_ceil(2).max(2)
}

impl BaselineConfig {
    pub fn dense_single(res: [usize; 3], embedding_size: usize) -> Self {
        let level = BaselineLevel { res, buckets: res.iter().product() };
        BaselineConfig { kind: BaselineKind::DenseSingle, levels: vec![level], embedding_size }
    }

    /// Dense pyramid whose resolution halves per level (floored at 2).
    pub fn dense_multi(finest: [usize; 3], levels: usize, embedding_size: usize) -> Self {
        let mut res = finest;
        let mut out = Vec::with_capacity(levels);
        for l in 0..levels {
            if l > 0 {
                res = res.map(halve);
            }
            out.push(BaselineLevel { res, buckets: res.iter().product() });
        }
        BaselineConfig { kind: BaselineKind::DenseMulti, levels: out, embedding_size }
    }

    /// Spatial-hash encoding with isotropic resolutions growing geometrically
    /// from `n_min` to `n_max` and the same `table_size` at every level.
    pub fn mhe(levels: usize, n_min: usize, n_max: usize, table_size: usize, embedding_size: usize) -> Self {
        let growth = if levels > 1 { ((n_max as f64).ln() - (n_min as f64).ln()) / (levels - 1) as f64 } else { 0.0 };
        let out = (0..levels)
            .map(|l| {
                let r = if l + 1 == levels && levels > 1 {
                    n_max
                } else {
                    ((n_min as f64) * (growth * l as f64).exp()).floor() as usize
                };
                let r = r.max(2);
                BaselineLevel { res: [r; 3], buckets: table_size }
            })
            .collect();
        BaselineConfig { kind: BaselineKind::MheSpatialHash, levels: out, embedding_size }
    }

    /// Baseline of `kind` whose total parameters over `n_keys` per-frame
    /// encoders land as close as the resolution grid allows to `target`.
    /// Resolutions are isotropic up to one vertex per axis.
    pub fn matched(
        kind: BaselineKind,
        target: usize,
        n_keys: usize,
        levels: usize,
        n_max: usize,
        embedding_size: usize,
    ) -> Self {
        let per_encoder = |c: &BaselineConfig| c.param_count() * n_keys;
        match kind {
            BaselineKind::MheSpatialHash => {
                let t = (target as f64 / (n_keys * levels * embedding_size) as f64).round().max(1.0) as usize;
                Self::mhe(levels, 2, n_max, t, embedding_size)
            }
            BaselineKind::DenseSingle | BaselineKind::DenseMulti => {
                let build = |res: [usize; 3]| {
                    if kind == BaselineKind::DenseSingle {
                        Self::dense_single(res, embedding_size)
                    } else {
                        Self::dense_multi(res, levels, embedding_size)
                    }
                };
                let mut best: Option<(usize, BaselineConfig)> = None;
                for r in 2..4096usize {
                    for extra in 0..3 {
                        let res = [r + usize::from(extra >= 2), r + usize::from(extra >= 1), r];
                        let c = build(res);
                        let err = per_encoder(&c).abs_diff(target);
                        if best.as_ref().is_none_or(|(e, _)| err < *e) {
                            best = Some((err, c));
                        }
                    }
                    if build([r; 3]).param_count() * n_keys > 2 * target {
                        break;
                    }
                }
                best.expect("search visits at least one resolution").1
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embedding_size == 0 || self.levels.is_empty() {
            return Err(Error::argument("baseline needs levels and a positive embedding size"));
        }
        if self.levels.iter().any(|l| l.res.iter().any(|&r| r < 2) || l.buckets == 0) {
            return Err(Error::argument("baseline level resolutions must be >= 2 with buckets > 0"));
        }
        if self.kind == BaselineKind::MheSpatialHash {
            let t = self.levels[0].buckets;
            if self.levels.iter().any(|l| l.buckets != t || l.res[0] != l.res[1] || l.res[1] != l.res[2]) {
                return Err(Error::argument("spatial-hash levels must be isotropic with a shared table size"));
            }
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.levels.len() * self.embedding_size
    }

    /// Parameters of one 3D encoder.
    pub fn param_count(&self) -> usize {
        self.levels.iter().map(|l| l.buckets).sum::<usize>() * self.embedding_size
    }

    /// Trilinear footprint of `q` in `[-1, 1]^3`, with weights scaled by
    /// `scale` and tables numbered from `table_base`.
    pub(crate) fn push_footprint3<S: Scalar>(
        &self,
        q: [f64; 3],
        table_base: usize,
        scale: f64,
        out: &mut Vec<Contribution<S>>,
    ) {
        for (li, level) in self.levels.iter().enumerate() {
            let mut base = [0usize; 3];
            let mut frac = [0f64; 3];
            for a in 0..3 {
                let (i, w) = locate_axis(q[a], level.res[a]);
                base[a] = i;
                frac[a] = w;
            }
            for c in 0..8 {
                let mut corner = base;
                let mut w = scale;
                for a in 0..3 {
                    if c >> a & 1 == 1 {
                        corner[a] += 1;
                        w *= frac[a];
                    } else {
                        w *= 1.0 - frac[a];
                    }
                }
                out.push(Contribution {
                    table: (table_base + li) as u32,
                    entry: level.bucket(corner) as u32,
                    slot: li as u32,
                    weight: S::of(w),
                });
            }
        }
    }
}

/// A single 3D baseline encoder (one per key frame).
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineEncoder<S> {
    config: BaselineConfig,
    tables: Vec<Vec<S>>,
}

impl<S: Scalar> BaselineEncoder<S> {
    pub fn new(config: BaselineConfig) -> Result<Self> {
        config.validate()?;
        let tables = config.levels.iter().map(|l| vec![S::zero(); l.buckets * config.embedding_size]).collect();
        Ok(BaselineEncoder { config, tables })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn tables(&self) -> &[Vec<S>] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [Vec<S>] {
        &mut self.tables
    }

    /// Trilinearly interpolated embeddings of all levels at `q`.
    pub fn baseline_encode(&self, q: [S; 3]) -> Result<Vec<S>> {
        let q4 = check_query([S::zero(), q[0], q[1], q[2]])?;
        let mut fp = Vec::with_capacity(8 * self.config.levels.len());
        self.config.push_footprint3(q4[1..].try_into().unwrap(), 0, 1.0, &mut fp);
        let mut out = vec![S::zero(); self.config.output_dim()];
        gather(&self.tables, self.config.embedding_size, &fp, &mut out);
        Ok(out)
    }
}

/// One baseline encoder per key frame; a query at time `t` blends the two
/// encoders of the bracketing key frames linearly.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineSet<S> {
    config: BaselineConfig,
    key_times: Vec<f64>,
    /// Key-major: table `k * levels + l`.
    tables: Vec<Vec<S>>,
}

impl<S: Scalar> BaselineSet<S> {
    pub fn new(config: BaselineConfig, key_times: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let proto = BaselineEncoder::<S>::new(config.clone())?;
        let tables = (0..key_times.len()).flat_map(|_| proto.tables.iter().cloned()).collect();
        Self::from_tables(config, key_times, tables)
    }

    pub fn from_tables(config: BaselineConfig, key_times: Vec<f64>, tables: Vec<Vec<S>>) -> Result<Self> {
        config.validate()?;
        if key_times.len() < 2 || key_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::argument("key times must be >= 2 strictly increasing values"));
        }
        let expected = key_times.len() * config.levels.len();
        if tables.len() != expected
            || tables
                .iter()
                .enumerate()
                .any(|(i, t)| t.len() != config.levels[i % config.levels.len()].buckets * config.embedding_size)
        {
            return Err(Error::argument("table shapes do not match the baseline configuration"));
        }
        Ok(BaselineSet { config, key_times, tables })
    }

    pub fn config(&self) -> &BaselineConfig {
        &self.config
    }

    pub fn key_times(&self) -> &[f64] {
        &self.key_times
    }

    pub fn tables(&self) -> &[Vec<S>] {
        &self.tables
    }

    pub fn tables_mut(&mut self) -> &mut [Vec<S>] {
        &mut self.tables
    }

    /// The encoder of key frame `k`.
    pub fn encoder(&self, k: usize) -> BaselineEncoder<S> {
        let l = self.config.levels.len();
        BaselineEncoder { config: self.config.clone(), tables: self.tables[k * l..(k + 1) * l].to_vec() }
    }

    pub(crate) fn push_footprint(&self, q: [f64; 4], out: &mut Vec<Contribution<S>>) {
        let kt = &self.key_times;
        let n = kt.len();
        let t = q[0].clamp(kt[0], kt[n - 1]);
        let k = kt.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let w = (t - kt[k]) / (kt[k + 1] - kt[k]);
        let levels = self.config.levels.len();
        let spatial = [q[1], q[2], q[3]];
        self.config.push_footprint3(spatial, k * levels, 1.0 - w, out);
        self.config.push_footprint3(spatial, (k + 1) * levels, w, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn constant_table_constant_output() {
        let mut e = BaselineEncoder::<f64>::new(BaselineConfig::mhe(4, 2, 16, 64, 2)).unwrap();
        for t in e.tables_mut() {
            t.iter_mut().for_each(|v| *v = -0.25);
        }
        let out = e.baseline_encode([0.3, -0.9, 0.51]).unwrap();
        assert!(out.iter().all(|&v| (v + 0.25).abs() < 1e-15));
    }

    #[test]
    fn dense_single_vertex_lookup() {
        let mut e = BaselineEncoder::<f64>::new(BaselineConfig::dense_single([3, 5, 2], 1)).unwrap();
        for (i, v) in e.tables_mut()[0].iter_mut().enumerate() {
            *v = i as f64;
        }
        // vertex (2, 1, 1) -> (1*5 + 1)*3 + 2 = 20
        assert_eq!(e.baseline_encode([1.0, -0.5, 1.0]).unwrap(), vec![20.0]);
    }

    #[test]
    fn hashed_level_collides() {
        let cfg = BaselineConfig::mhe(1, 8, 8, 100, 1);
        let level = &cfg.levels[0];
        assert!(level.hashed());
        let mut owner: HashMap<usize, [usize; 3]> = HashMap::new();
        let mut collision = None;
        'scan: for z in 0..8 {
            for y in 0..8 {
                for x in 0..8 {
                    if let Some(prev) = owner.insert(level.bucket([x, y, z]), [x, y, z]) {
                        collision = Some((prev, [x, y, z]));
                        break 'scan;
                    }
                }
            }
        }
        let (a, b) = collision.expect("512 corners in 100 buckets must collide");
        assert_ne!(a, b);
    }

    #[test]
    fn mhe_levels_share_table_size() {
        let cfg = BaselineConfig::mhe(5, 2, 32, 1 << 10, 2);
        assert!(cfg.levels.iter().all(|l| l.buckets == 1 << 10));
        assert_eq!(cfg.levels.first().unwrap().res, [2; 3]);
        assert_eq!(cfg.levels.last().unwrap().res, [32; 3]);
        assert!(cfg.levels.windows(2).all(|w| w[0].res[0] <= w[1].res[0]));
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn matched_budgets_within_ten_percent() {
        for target in [5_000usize, 40_000, 250_000] {
            for kind in [BaselineKind::DenseSingle, BaselineKind::DenseMulti, BaselineKind::MheSpatialHash] {
                let cfg = BaselineConfig::matched(kind, target, 4, 5, 30, 2);
                let total = cfg.param_count() * 4;
                let rel = total.abs_diff(target) as f64 / target as f64;
                assert!(rel <= 0.1, "{kind:?} {target}: {total}");
            }
        }
    }

    #[test]
    fn set_blends_key_frames() {
        let cfg = BaselineConfig::dense_single([2, 2, 2], 1);
        let mut set = BaselineSet::<f64>::new(cfg, vec![-1.0, 0.0, 1.0]).unwrap();
        for (k, t) in set.tables_mut().iter_mut().enumerate() {
            t.iter_mut().for_each(|v| *v = k as f64);
        }
        let mut fp = Vec::new();
        set.push_footprint([0.5, 0.0, 0.0, 0.0], &mut fp);
        let mut out = vec![0.0];
        gather(set.tables(), 1, &fp, &mut out);
        assert!((out[0] - 1.5).abs() < 1e-15);
        fp.clear();
        set.push_footprint([-1.0, 0.3, 0.3, 0.3], &mut fp);
        let mut out = vec![0.0];
        gather(set.tables(), 1, &fp, &mut out);
        assert_eq!(out[0], 0.0);
        assert_eq!(set.encoder(2).tables()[0], vec![2.0; 8]);
    }
}
