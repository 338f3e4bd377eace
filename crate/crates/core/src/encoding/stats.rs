use serde::{Deserialize, Serialize};

use super::config::{fhash_unchecked, LevelConfig};
use super::{BaselineConfig, EncoderConfig, TesseractConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    /// Grid corners mapped into this table.
    pub vertices: usize,
    pub buckets: usize,
    /// Buckets hit by at least one corner.
    pub occupied: usize,
    /// Corners landing on an already occupied bucket.
    pub collisions: usize,
}

impl LevelStats {
    pub fn utilization(&self) -> f64 {
        self.occupied as f64 / self.buckets as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingStats {
    pub param_count: usize,
    pub collision_count: usize,
    /// Occupied buckets over all buckets.
    pub bucket_utilization: f64,
    pub levels: Vec<LevelStats>,
}

impl EncodingStats {
    fn from_levels(levels: Vec<LevelStats>, embedding_size: usize) -> Self {
        let buckets: usize = levels.iter().map(|l| l.buckets).sum();
        let occupied: usize = levels.iter().map(|l| l.occupied).sum();
        EncodingStats {
            param_count: buckets * embedding_size,
            collision_count: levels.iter().map(|l| l.collisions).sum(),
            bucket_utilization: occupied as f64 / buckets as f64,
            levels,
        }
    }
}

fn tally(buckets: usize, corners: impl Iterator<Item = usize>) -> LevelStats {
    let mut hit = vec![false; buckets];
    let (mut vertices, mut occupied) = (0, 0);
    for b in corners {
        vertices += 1;
        if !hit[b] {
            hit[b] = true;
            occupied += 1;
        }
    }
    LevelStats { vertices, buckets, occupied, collisions: vertices - occupied }
}

fn tesseract_stats(cfg: &TesseractConfig) -> EncodingStats {
    let levels = cfg
        .levels
        .iter()
        .map(|level| {
            let [rt, rx, ry, rz] = level.res;
            let corners = (0..rt).flat_map(move |t| {
                (0..rz).flat_map(move |z| {
                    (0..ry).flat_map(move |y| (0..rx).map(move |x| fhash_unchecked(level, [t, x, y, z])))
                })
            });
            tally(level.table_size(), corners)
        })
        .collect();
    EncodingStats::from_levels(levels, cfg.embedding_size)
}

fn baseline_stats(cfg: &BaselineConfig) -> EncodingStats {
    let levels = cfg
        .levels
        .iter()
        .map(|level| {
            let [rx, ry, rz] = level.res;
            let corners =
                (0..rz).flat_map(move |z| (0..ry).flat_map(move |y| (0..rx).map(move |x| level.bucket([x, y, z]))));
            tally(level.buckets, corners)
        })
        .collect();
    EncodingStats::from_levels(levels, cfg.embedding_size)
}

/// Exhaustive corner-to-bucket statistics. For a baseline set the per-frame
/// encoders are summed.
pub fn encoding_stats(cfg: &EncoderConfig) -> EncodingStats {
    match cfg {
        EncoderConfig::Tesseract(c) => tesseract_stats(c),
        EncoderConfig::Baseline { config, key_times } => {
            let one = baseline_stats(config);
            let n = key_times.len();
            let levels: Vec<LevelStats> = (0..n).flat_map(|_| one.levels.iter().cloned()).collect();
            EncodingStats::from_levels(levels, config.embedding_size)
        }
    }
}

impl TesseractConfig {
    pub fn stats(&self) -> EncodingStats {
        tesseract_stats(self)
    }
}

impl BaselineConfig {
    /// Statistics of one 3D encoder.
    pub fn stats(&self) -> EncodingStats {
        baseline_stats(self)
    }
}

/// The equal-axis counterpart of a level schedule: every spatial axis takes
/// the largest spatial resolution of its level, time is unchanged.
pub fn equal_axis_levels(levels: &[LevelConfig]) -> Vec<LevelConfig> {
    levels
        .iter()
        .map(|l| {
            let r = l.res[1].max(l.res[2]).max(l.res[3]);
            LevelConfig { level: l.level, res: [l.res[0], r, r, r] }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tesseract(sizes: [usize; 3], n: usize, fold: usize) -> TesseractConfig {
        let kt = (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect();
        TesseractConfig::for_fbb(sizes, kt, fold, 2).unwrap()
    }

    #[test]
    fn fhash_has_no_collisions_or_waste() {
        let s = tesseract([13, 7, 22], 5, 2).stats();
        assert_eq!(s.collision_count, 0);
        assert_eq!(s.bucket_utilization, 1.0);
        assert!(s.levels.iter().all(|l| l.vertices == l.buckets));
    }

    #[test]
    fn mhe_wastes_coarse_buckets_and_collides_fine() {
        let s = BaselineConfig::mhe(4, 2, 16, 512, 2).stats();
        let first = &s.levels[0];
        assert!(first.vertices < 512 && first.utilization() < 1.0);
        let last = s.levels.last().unwrap();
        assert!(last.vertices > 512 && last.collisions > 0);
    }

    #[test]
    fn anisotropic_fbb_needs_fewer_parameters() {
        let cfg = tesseract([64, 4, 2], 2, 2);
        let equal = equal_axis_levels(&cfg.levels);
        let fhash: usize = cfg.levels.iter().map(|l| l.table_size()).sum();
        let cube: usize = equal.iter().map(|l| l.table_size()).sum();
        assert!(fhash < cube);
        assert_eq!(cfg.stats().param_count, fhash * 2);
    }

    #[test]
    fn baseline_set_sums_frames() {
        let cfg = BaselineConfig::dense_single([4, 4, 4], 3);
        let s = encoding_stats(&EncoderConfig::Baseline { config: cfg, key_times: vec![-1.0, 0.0, 1.0] });
        assert_eq!(s.param_count, 3 * 64 * 3);
        assert_eq!(s.collision_count, 0);
    }
}
