use std::fs;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use super::{Volume4D, VolumeMeta};
use crate::error::{Error, Result};

/// JSON sidecar describing a `.raw` dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub dims: [usize; 3],
    pub frames: usize,
    pub dtype: String,
    /// Informational; loading recomputes the range from the data.
    #[serde(default)]
    pub value_min: f32,
    #[serde(default)]
    pub value_max: f32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// Loads a little-endian `f32` raw file (x fastest, then y, z, t) and its
/// sidecar, normalizing globally to `[0, 1]`.
pub fn load_volume(path: &Path, meta_path: &Path) -> Result<Volume4D> {
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    if sidecar.dtype != "f32" {
        return Err(Error::format(0, format!("unsupported dtype {:?}", sidecar.dtype)));
    }
    let name = sidecar
        .name
        .clone()
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
    let meta = VolumeMeta {
        dims: sidecar.dims,
        num_frames: sidecar.frames,
        value_min: sidecar.value_min,
        value_max: sidecar.value_max,
        dataset_name: name,
    };
    meta.validate()?;

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = meta.voxels_per_frame() * meta.num_frames * 4;
    if bytes.len() != expected {
        return Err(Error::format(
            bytes.len().min(expected) as u64,
            format!(
                "{} holds {} bytes but {:?}x{} f32 values need {expected}",
                path.display(),
                bytes.len(),
                meta.dims,
                meta.num_frames
            ),
        ));
    }
    let mut raw = vec![0f32; expected / 4];
    LittleEndian::read_f32_into(&bytes, &mut raw);
    Volume4D::from_raw(meta, raw)
}

/// Writes the source (unnormalized) values and a sidecar; the inverse of
/// [`load_volume`].
pub fn write_volume(vol: &Volume4D, path: &Path, meta_path: &Path) -> Result<()> {
    let raw = vol.raw();
    let mut bytes = vec![0u8; raw.len() * 4];
    LittleEndian::write_f32_into(raw, &mut bytes);
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        dims: vol.meta.dims,
        frames: vol.meta.num_frames,
        dtype: "f32".into(),
        value_min: vol.meta.value_min,
        value_max: vol.meta.value_max,
        name: Some(vol.meta.dataset_name.clone()),
    };
    fs::write(meta_path, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(meta_path, e))?;
    Ok(())
}
