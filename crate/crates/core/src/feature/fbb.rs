use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{vertex_coord, VolumeMeta};

/// Inclusive vertex-index box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl VoxelBox {
    pub fn contains(&self, v: [usize; 3]) -> bool {
        (0..3).all(|a| self.min[a] <= v[a] && v[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &VoxelBox) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }
}

/// The feature bounding box: the union of the per-key-frame boxes of the
/// dilated features, and the spatial domain of the encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureBoundingBox {
    pub bounds: VoxelBox,
    /// Vertex counts of the whole volume.
    pub volume_dims: [usize; 3],
}

const INSIDE_TOL: f64 = 1e-9;

impl FeatureBoundingBox {
    /// Vertex counts along each axis (`S_x, S_y, S_z`), each at least 2.
    pub fn size(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.bounds.max[a] - self.bounds.min[a] + 1)
    }

    pub fn min_coords(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| vertex_coord(self.bounds.min[a], self.volume_dims[a]))
    }

    pub fn max_coords(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| vertex_coord(self.bounds.max[a], self.volume_dims[a]))
    }

    /// Edge lengths in normalized volume units.
    pub fn size_normalized(&self) -> [f64; 3] {
        let (lo, hi) = (self.min_coords(), self.max_coords());
        [0, 1, 2].map(|a| hi[a] - lo[a])
    }

    /// Centroid in normalized volume coordinates.
    pub fn origin(&self) -> [f64; 3] {
        let (lo, hi) = (self.min_coords(), self.max_coords());
        [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a]))
    }

    pub fn full(meta: &VolumeMeta) -> Self {
        FeatureBoundingBox { bounds: VoxelBox { min: [0; 3], max: meta.dims.map(|d| d - 1) }, volume_dims: meta.dims }
    }

    pub fn contains_point(&self, p: [f64; 3]) -> bool {
        let (lo, hi) = (self.min_coords(), self.max_coords());
        (0..3).all(|a| p[a] >= lo[a] - INSIDE_TOL && p[a] <= hi[a] + INSIDE_TOL)
    }

    /// FBB-local coordinates of a vertex inside the box; equal to
    /// [`to_fbb_coords`] of its normalized position, with exact endpoints.
    pub fn vertex_to_local(&self, v: [usize; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| vertex_coord(v[a] - self.bounds.min[a], self.size()[a]))
    }

    /// Inverse of [`to_fbb_coords`].
    pub fn from_local(&self, q: [f64; 3]) -> [f64; 3] {
        let (o, s) = (self.origin(), self.size_normalized());
        [0, 1, 2].map(|a| q[a] * s[a] * 0.5 + o[a])
    }
}

/// Axis-wise union of the per-frame boxes; `None` entries are feature-empty
/// frames. Axes collapsing to a single vertex are widened to two.
pub fn fuse_fbb(boxes: &[Option<VoxelBox>], volume_dims: [usize; 3]) -> Result<FeatureBoundingBox> {
    let mut it = boxes.iter().flatten();
    let first = *it.next().ok_or(Error::FeatureNotFound)?;
    let mut fused = it.fold(first, |mut acc, b| {
        for a in 0..3 {
            acc.min[a] = acc.min[a].min(b.min[a]);
            acc.max[a] = acc.max[a].max(b.max[a]);
        }
        acc
    });
    for a in 0..3 {
        if fused.max[a] >= volume_dims[a] {
            return Err(Error::bounds(format!("box {fused:?} exceeds volume dims {volume_dims:?}")));
        }
        if fused.min[a] == fused.max[a] {
            if fused.max[a] + 1 < volume_dims[a] {
                fused.max[a] += 1;
            } else {
                fused.min[a] -= 1;
            }
        }
    }
    Ok(FeatureBoundingBox { bounds: fused, volume_dims })
}

/// Translates a normalized position to the FBB centroid and scales it so the
/// box spans `[-1, 1]` on every axis.
pub fn to_fbb_coords(p: [f64; 3], fbb: &FeatureBoundingBox) -> Result<[f64; 3]> {
    if !fbb.contains_point(p) {
        return Err(Error::bounds(format!("point {p:?} outside the feature bounding box")));
    }
    let (o, s) = (fbb.origin(), fbb.size_normalized());
    Ok([0, 1, 2].map(|a| ((p[a] - o[a]) * (2.0 / s[a])).clamp(-1.0, 1.0)))
}
