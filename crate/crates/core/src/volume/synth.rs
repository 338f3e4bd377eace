use serde::{Deserialize, Serialize};

use super::{vertex_coords, ScalarGrid, Volume4D, VolumeMeta};
use crate::error::{Error, Result};

/// Straight-line path of the blob centre in normalized coordinates, with the
/// blob's standard deviation (normalized units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub from: [f64; 3],
    pub to: [f64; 3],
    pub sigma: f64,
}

impl Trajectory {
    /// Centre at parameter `s` in `[0, 1]`.
    pub fn at(&self, s: f64) -> [f64; 3] {
        [0, 1, 2].map(|a| self.from[a] + (self.to[a] - self.from[a]) * s)
    }
}

/// Generates `exp(-|p - c(t)|^2 / 2 sigma^2)` sampled at the grid vertices,
/// with the centre moving linearly from `path.from` (first frame) to
/// `path.to` (last frame).
pub fn synth_moving_gaussian(dims: [usize; 3], frames: usize, path: &Trajectory) -> Result<Volume4D> {
    if dims.iter().any(|&d| d < 8) {
        return Err(Error::argument(format!("synthetic dims must be >= 8 per axis, got {dims:?}")));
    }
    if frames < 2 {
        return Err(Error::argument("synthetic volume needs at least 2 frames"));
    }
    if !(path.sigma > 0.0) {
        return Err(Error::argument("sigma must be positive"));
    }
    let inv = 1.0 / (2.0 * path.sigma * path.sigma);
    let grids = (0..frames)
        .map(|t| {
            let c = path.at(t as f64 / (frames - 1) as f64);
            ScalarGrid::from_fn(dims, |v| {
                let p = vertex_coords(v, dims);
                let d2: f64 = (0..3).map(|a| (p[a] - c[a]).powi(2)).sum();
                (-d2 * inv).exp() as f32
            })
        })
        .collect();
    let meta = VolumeMeta::new(dims, frames, "moving-gaussian")?;
    Volume4D::from_normalized(meta, grids)
}
