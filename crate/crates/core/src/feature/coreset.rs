use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use super::{
    build_occupancy, dilate_feature, extract_feature, fuse_fbb, FeatureBoundingBox, FeatureSpec, OccupancyGrid,
    VertexSet, VoxelBox,
};
use crate::error::{Error, Result};
use crate::volume::{KeyFrameSet, Volume4D};

const MAGIC: &[u8; 4] = b"TVCS";
const VERSION: u32 = 1;

/// One training pair: `[t, x, y, z]` in `[-1, 1]^4` (space is FBB-local) and
/// the normalized field value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub coords: [f32; 4],
    pub value: f32,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Coreset {
    pub samples: Vec<Sample>,
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let io = |e| Error::io("<coreset>", e);
        w.write_all(MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(VERSION).map_err(io)?;
        w.write_u64::<LittleEndian>(self.samples.len() as u64).map_err(io)?;
        for s in &self.samples {
            for c in s.coords {
                w.write_f32::<LittleEndian>(c).map_err(io)?;
            }
            w.write_f32::<LittleEndian>(s.value).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::format(0, "truncated header"))?;
        if &magic != MAGIC {
            return Err(Error::format(0, "not a coreset file"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(|_| Error::format(4, "truncated header"))?;
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported coreset version {version}")));
        }
        let count = r.read_u64::<LittleEndian>().map_err(|_| Error::format(8, "truncated header"))?;
        let mut samples = Vec::with_capacity(count.min(1 << 24) as usize);
        let mut off = 16u64;
        for _ in 0..count {
            let mut rec = [0f32; 5];
            r.read_f32_into::<LittleEndian>(&mut rec).map_err(|_| Error::format(off, "truncated record"))?;
            samples.push(Sample { coords: [rec[0], rec[1], rec[2], rec[3]], value: rec[4] });
            off += 20;
        }
        Ok(Coreset { samples })
    }
}

/// Per-key-frame intermediate results.
#[derive(Clone, Debug)]
pub struct KeyFrameFeature {
    pub feature: VertexSet,
    pub dilated: VertexSet,
    pub bbox: Option<VoxelBox>,
}

/// Output of the coreset selection pipeline.
#[derive(Clone, Debug)]
pub struct CoresetSelection {
    pub coreset: Coreset,
    pub fbb: FeatureBoundingBox,
    /// One grid per key frame, stamped with the key time.
    pub occupancy: Vec<OccupancyGrid>,
    pub key_times: Vec<f64>,
    pub per_key: Vec<KeyFrameFeature>,
}

/// extract -> dilate -> occupancy -> bounding box per key frame, then fuse
/// the boxes and emit the union of the dilated features as training pairs in
/// FBB-local coordinates with the key time prepended.
pub fn build_coreset(vol: &Volume4D, keys: &KeyFrameSet, spec: &FeatureSpec) -> Result<CoresetSelection> {
    spec.validate()?;
    if let Some(&last) = keys.indices().last() {
        if last >= vol.num_frames() {
            return Err(Error::argument(format!("key frame {last} outside volume with {} frames", vol.num_frames())));
        }
    }
    let key_times = keys.times();
    let per_key: Vec<(KeyFrameFeature, OccupancyGrid)> = keys
        .indices()
        .par_iter()
        .zip(key_times.par_iter())
        .map(|(&frame, &t)| {
            let feature = extract_feature(vol.frame(frame), spec);
            let dilated = dilate_feature(&feature);
            let occ = build_occupancy(&dilated, t);
            let bbox = dilated.bounding_box().map(|(min, max)| VoxelBox { min, max });
            (KeyFrameFeature { feature, dilated, bbox }, occ)
        })
        .collect();
    let boxes: Vec<Option<VoxelBox>> = per_key.iter().map(|(k, _)| k.bbox).collect();
    let fbb = fuse_fbb(&boxes, vol.dims())?;

    let mut samples = Vec::new();
    for ((kf, _), (&frame, &t)) in per_key.iter().zip(keys.indices().iter().zip(&key_times)) {
        let grid = vol.frame(frame);
        for v in kf.dilated.sorted() {
            debug_assert!(fbb.bounds.contains(v));
            let l = fbb.vertex_to_local(v);
            samples.push(Sample { coords: [t as f32, l[0] as f32, l[1] as f32, l[2] as f32], value: grid.get(v) });
        }
    }
    let (per_key, occupancy) = per_key.into_iter().unzip();
    Ok(CoresetSelection { coreset: Coreset { samples }, fbb, occupancy, key_times, per_key })
}
