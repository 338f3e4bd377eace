//! Time-varying scalar volumes: storage, raw+JSON dataset IO, key-frame
//! selection and a synthetic moving-blob generator.

mod io;
mod keyframes;
mod synth;

pub use io::{load_volume, write_volume, Sidecar};
pub use keyframes::{select_key_frames, KeyFrameSet};
pub use synth::{synth_moving_gaussian, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape and value range of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeMeta {
    /// Vertex counts along x, y, z.
    pub dims: [usize; 3],
    pub num_frames: usize,
    /// Range of the raw field before normalization.
    pub value_min: f32,
    pub value_max: f32,
    pub dataset_name: String,
}

impl VolumeMeta {
    pub fn new(dims: [usize; 3], num_frames: usize, name: impl Into<String>) -> Result<Self> {
        let meta = VolumeMeta { dims, num_frames, value_min: 0.0, value_max: 1.0, dataset_name: name.into() };
        meta.validate()?;
        Ok(meta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d < 2) {
            return Err(Error::argument(format!("every volume dimension must be at least 2, got {:?}", self.dims)));
        }
        if self.num_frames == 0 {
            return Err(Error::argument("volume must have at least one frame"));
        }
        if !(self.value_min <= self.value_max) {
            return Err(Error::argument(format!("value_min {} exceeds value_max {}", self.value_min, self.value_max)));
        }
        Ok(())
    }

    pub fn voxels_per_frame(&self) -> usize {
        self.dims.iter().product()
    }
}

/// One 3D scalar frame, x fastest then y then z.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub dims: [usize; 3],
    pub data: Vec<f32>,
}

impl ScalarGrid {
    pub fn zeros(dims: [usize; 3]) -> Self {
        ScalarGrid { dims, data: vec![0.0; dims.iter().product()] }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut([usize; 3]) -> f32) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f([x, y, z]));
                }
            }
        }
        ScalarGrid { dims, data }
    }

    #[inline]
    pub fn index(&self, v: [usize; 3]) -> usize {
        linear_index(self.dims, v)
    }

    #[inline]
    pub fn get(&self, v: [usize; 3]) -> f32 {
        self.data[self.index(v)]
    }

    #[inline]
    pub fn set(&mut self, v: [usize; 3], value: f32) {
        let i = self.index(v);
        self.data[i] = value;
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Trilinear sample at normalized coordinates in `[-1, 1]^3`.
    pub fn sample(&self, p: [f64; 3]) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let (i, w) = cell_and_weight(p[a], self.dims[a]);
            base[a] = i;
            frac[a] = w;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let mut w = 1.0;
            let mut v = base;
            for a in 0..3 {
                if c >> a & 1 == 1 {
                    v[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w != 0.0 {
                acc += w * self.get(v) as f64;
            }
        }
        acc
    }
}

/// Linear offset of vertex `v`, x fastest.
#[inline]
pub fn linear_index(dims: [usize; 3], v: [usize; 3]) -> usize {
    (v[2] * dims[1] + v[1]) * dims[0] + v[0]
}

#[inline]
pub fn unlinear_index(dims: [usize; 3], i: usize) -> [usize; 3] {
    [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])]
}

/// Locates the cell containing normalized coordinate `c` on an axis with
/// `size` vertices; returns the lower vertex and the fractional offset.
/// Clamps to the domain.
#[inline]
pub(crate) fn cell_and_weight(c: f64, size: usize) -> (usize, f64) {
    let cells = (size - 1) as f64;
    let pos = ((c + 1.0) * 0.5 * cells).clamp(0.0, cells);
    let i = (pos.floor() as usize).min(size - 2);
    (i, pos - i as f64)
}

/// A normalized time-varying volume.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume4D {
    pub meta: VolumeMeta,
    /// Frames with values in `[0, 1]`.
    pub frames: Vec<ScalarGrid>,
    /// The unnormalized source values, one flat array in file order.
    raw: Vec<f32>,
}

impl Volume4D {
    /// Builds a volume from raw values (x fastest, then y, z, t), applying
    /// global min-max normalization.
    pub fn from_raw(mut meta: VolumeMeta, raw: Vec<f32>) -> Result<Self> {
        meta.validate()?;
        let per_frame = meta.voxels_per_frame();
        if raw.len() != per_frame * meta.num_frames {
            return Err(Error::argument(format!("expected {} values, got {}", per_frame * meta.num_frames, raw.len())));
        }
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value {} at index {i}", raw[i])));
        }
        let (lo, hi) = raw.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        meta.value_min = lo;
        meta.value_max = hi;
        let range = hi as f64 - lo as f64;
        let frames = raw
            .chunks_exact(per_frame)
            .map(|chunk| ScalarGrid {
                dims: meta.dims,
                data: chunk
                    .iter()
                    .map(|&v| if range > 0.0 { (((v as f64 - lo as f64) / range) as f32).clamp(0.0, 1.0) } else { 0.0 })
                    .collect(),
            })
            .collect();
        Ok(Volume4D { meta, frames, raw })
    }

    /// Builds a volume from frames already normalized to `[0, 1]`; the raw
    /// values are the frames themselves.
    pub fn from_normalized(meta: VolumeMeta, frames: Vec<ScalarGrid>) -> Result<Self> {
        meta.validate()?;
        if frames.len() != meta.num_frames {
            return Err(Error::argument(format!("meta declares {} frames, got {}", meta.num_frames, frames.len())));
        }
        let mut raw = Vec::with_capacity(meta.voxels_per_frame() * meta.num_frames);
        for f in &frames {
            if f.dims != meta.dims {
                return Err(Error::argument("frame dims do not match meta"));
            }
            if let Some(v) = f.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Data(format!("normalized value {v} outside [0, 1]")));
            }
            raw.extend_from_slice(&f.data);
        }
        let (lo, hi) = raw.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let meta = VolumeMeta { value_min: lo, value_max: hi, ..meta };
        Ok(Volume4D { meta, frames, raw })
    }

    pub fn raw(&self) -> &[f32] {
        &self.raw
    }

    pub fn dims(&self) -> [usize; 3] {
        self.meta.dims
    }

    pub fn num_frames(&self) -> usize {
        self.meta.num_frames
    }

    pub fn frame(&self, t: usize) -> &ScalarGrid {
        &self.frames[t]
    }
}

/// Maps a vertex index to normalized coordinates, `k -> -1 + 2k/(S-1)`.
pub fn normalize_coords(i: [usize; 3], meta: &VolumeMeta) -> Result<[f64; 3]> {
    for a in 0..3 {
        if i[a] >= meta.dims[a] {
            return Err(Error::bounds(format!("index {:?} outside volume dims {:?}", i, meta.dims)));
        }
    }
    Ok(vertex_coords(i, meta.dims))
}

#[inline]
pub(crate) fn vertex_coord(k: usize, size: usize) -> f64 {
    if k + 1 == size {
        1.0
    } else {
        -1.0 + 2.0 * k as f64 / (size - 1) as f64
    }
}

#[inline]
pub(crate) fn vertex_coords(i: [usize; 3], dims: [usize; 3]) -> [f64; 3] {
    [vertex_coord(i[0], dims[0]), vertex_coord(i[1], dims[1]), vertex_coord(i[2], dims[2])]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(dims: [usize; 3]) -> VolumeMeta {
        VolumeMeta::new(dims, 1, "t").unwrap()
    }

    #[test]
    fn coords_at_corners() {
        let m = meta([3, 3, 3]);
        assert_eq!(normalize_coords([0, 0, 0], &m).unwrap(), [-1.0, -1.0, -1.0]);
        assert_eq!(normalize_coords([2, 2, 2], &m).unwrap(), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn coords_mixed_axes() {
        let m = meta([3, 5, 5]);
        assert_eq!(normalize_coords([1, 0, 2], &m).unwrap(), [0.0, -1.0, 0.0]);
    }

    #[test]
    fn coords_out_of_range() {
        let m = meta([3, 5, 5]);
        assert!(matches!(normalize_coords([3, 0, 0], &m), Err(Error::Bounds(_))));
    }

    #[test]
    fn coords_strictly_monotone() {
        for size in 2..40 {
            let m = meta([size, 2, 2]);
            let xs: Vec<f64> = (0..size).map(|k| normalize_coords([k, 0, 0], &m).unwrap()[0]).collect();
            assert_eq!(xs[0], -1.0);
            assert_eq!(xs[size - 1], 1.0);
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn normalization_is_global() {
        let m = VolumeMeta::new([2, 2, 2], 2, "t").unwrap();
        let mut raw = vec![1.0f32; 8];
        raw.extend(vec![3.0f32; 8]);
        let v = Volume4D::from_raw(m, raw).unwrap();
        assert!(v.frames[0].data.iter().all(|&x| x == 0.0));
        assert!(v.frames[1].data.iter().all(|&x| x == 1.0));
        assert_eq!((v.meta.value_min, v.meta.value_max), (1.0, 3.0));
    }

    #[test]
    fn nonfinite_rejected() {
        let m = VolumeMeta::new([2, 2, 2], 1, "t").unwrap();
        let mut raw = vec![0.0f32; 8];
        raw[3] = f32::NAN;
        assert!(matches!(Volume4D::from_raw(m, raw), Err(Error::Data(_))));
    }

    #[test]
    fn trilinear_sample_reproduces_vertices() {
        let g = ScalarGrid::from_fn([3, 4, 2], |[x, y, z]| (x + 10 * y + 100 * z) as f32);
        let m = meta([3, 4, 2]);
        for z in 0..2 {
            for y in 0..4 {
                for x in 0..3 {
                    let p = normalize_coords([x, y, z], &m).unwrap();
                    assert_eq!(g.sample(p), g.get([x, y, z]) as f64);
                }
            }
        }
        // linear field is reproduced exactly between vertices
        let v = g.sample([0.0, 0.0, 0.0]);
        assert!((v - (1.0 + 15.0 + 50.0)).abs() < 1e-9);
    }
}
