use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis order used for 4D quantities throughout the encoder.
pub const T: usize = 0;
pub const X: usize = 1;
pub const Y: usize = 2;
pub const Z: usize = 3;

/// One resolution level of the Tesseract grid; resolutions are vertex counts
/// in `(t, x, y, z)` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelConfig {
    /// 1-based, level 1 is the finest.
    pub level: usize,
    pub res: [usize; 4],
}

impl LevelConfig {
    pub fn new(level: usize, res: [usize; 4]) -> Result<Self> {
        if res.iter().any(|&r| r < 2) {
            return Err(Error::argument(format!("level {level} resolution {res:?} below 2")));
        }
        Ok(LevelConfig { level, res })
    }

    /// Number of hash buckets, exactly the number of grid corners.
    pub fn table_size(&self) -> usize {
        self.res.iter().product()
    }

    /// Bucket stride of one step along each axis under row-major F-Hash.
    pub fn strides(&self) -> [usize; 4] {
        let [_, rx, ry, rz] = self.res;
        [rx * ry * rz, 1, rx, rx * ry]
    }
}

/// Smallest `L` with `fold^L >= size`, i.e. `ceil(log_fold(size))`.
pub fn level_count(size: usize, fold: usize) -> usize {
    let mut levels = 0;
    let mut span = 1usize;
    while span < size {
        span = span.saturating_mul(fold);
        levels += 1;
    }
    levels
}

/// Derives the multi-resolution schedule from the FBB vertex counts and the
/// number of key frames. Level 1 is native; every further level divides the
/// previous one by `fold` (rounding up) until it would drop to `fold` or
/// below, after which the axis is held at the minimal resolution 2. The level
/// count is the largest per-axis `ceil(log_fold(size))`.
pub fn configure_levels(sizes: [usize; 3], n_keys: usize, fold: usize) -> Result<Vec<LevelConfig>> {
    if fold < 2 {
        return Err(Error::argument(format!("fold must be >= 2, got {fold}")));
    }
    if n_keys < 2 {
        return Err(Error::argument(format!("need at least 2 key frames, got {n_keys}")));
    }
    if sizes.iter().any(|&s| s < 2) {
        return Err(Error::argument(format!("FBB sizes must be >= 2, got {sizes:?}")));
    }
    let native = [n_keys, sizes[0], sizes[1], sizes[2]];
    let shared = native.iter().map(|&s| level_count(s, fold)).max().unwrap_or(1);
    let mut levels = Vec::with_capacity(shared);
    let mut res = native;
    for level in 1..=shared {
        if level > 1 {
            res = res.map(|r| if r > fold { r.div_ceil(fold) } else { 2 });
        }
        levels.push(LevelConfig::new(level, res)?);
    }
    Ok(levels)
}

/// How grid corners are linearized into bucket indices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linearization {
    /// `t*Rx*Ry*Rz + z*Rx*Ry + y*Rx + x`.
    #[default]
    RowMajor,
    /// Rank of the corner's 4D Z-order code among all corners of the level.
    Morton,
}

/// Row-major F-Hash bucket of a corner `(t, x, y, z)`.
pub fn fhash(level: &LevelConfig, corner: [usize; 4]) -> Result<usize> {
    for a in 0..4 {
        if corner[a] >= level.res[a] {
            return Err(Error::bounds(format!(
                "corner {corner:?} outside level {} resolution {:?}",
                level.level, level.res
            )));
        }
    }
    Ok(fhash_unchecked(level, corner))
}

#[inline]
pub(crate) fn fhash_unchecked(level: &LevelConfig, corner: [usize; 4]) -> usize {
    let s = level.strides();
    corner[T] * s[T] + corner[Z] * s[Z] + corner[Y] * s[Y] + corner[X]
}

fn morton4(c: [usize; 4]) -> u64 {
    let mut code = 0u64;
    for b in 0..16 {
        for (slot, axis) in [X, Y, Z, T].into_iter().enumerate() {
            code |= ((c[axis] as u64 >> b) & 1) << (4 * b + slot);
        }
    }
    code
}

/// Row-major index -> Z-order rank, a bijection on `[0, table_size)`.
pub(crate) fn morton_ranks(level: &LevelConfig) -> Vec<u32> {
    let n = level.table_size();
    let mut order: Vec<(u64, u32)> = (0..n).map(|i| (morton4(corner_of(level, i)), i as u32)).collect();
    order.sort_unstable();
    let mut ranks = vec![0u32; n];
    for (rank, &(_, i)) in order.iter().enumerate() {
        ranks[i as usize] = rank as u32;
    }
    ranks
}

/// Inverse of row-major F-Hash.
pub fn corner_of(level: &LevelConfig, bucket: usize) -> [usize; 4] {
    let [_, rx, ry, rz] = level.res;
    [bucket / (rx * ry * rz), bucket % rx, (bucket / rx) % ry, (bucket / (rx * ry)) % rz]
}
