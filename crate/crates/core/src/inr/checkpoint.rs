//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic "TVINRCKP" | version u32
//! encoder: json_len u32, EncoderConfig JSON, table_count u32, per table: len u64, f32 * len
//! mlp:     layer_count u32, per layer: inputs u32, outputs u32, f32 weights, f32 bias
//! meta:    json_len u32, CheckpointMeta JSON
//! ```

use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Dense, InrModel, Mlp};
use crate::encoding::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::feature::FeatureBoundingBox;
use crate::scalar::Scalar;
use crate::volume::Volume4D;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TVINRCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Training metadata stored next to the parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckpointMeta {
    /// Number of completed epochs.
    pub epoch: usize,
    pub loss_history: Vec<f64>,
    pub psnr_history: Vec<Option<f64>>,
    pub dataset_hash: String,
    pub dims: [usize; 3],
    pub num_frames: usize,
    pub fbb: Option<FeatureBoundingBox>,
    pub key_frames: Vec<usize>,
    pub key_times: Vec<f64>,
    /// Occupancy grid files, relative to the checkpoint's directory.
    pub occupancy_files: Vec<String>,
    pub seed: u64,
    pub mlp: super::MlpConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<S> {
    pub model: InrModel<S>,
    pub meta: CheckpointMeta,
}

/// SHA-256 over the dims, frame count and raw values of a volume.
pub fn dataset_fingerprint(vol: &Volume4D) -> String {
    let mut h = Sha256::new();
    for d in vol.dims() {
        h.update((d as u64).to_le_bytes());
    }
    h.update((vol.num_frames() as u64).to_le_bytes());
    for v in vol.raw() {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn put_f32s<S: Scalar>(out: &mut Vec<u8>, values: &[S]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
}

fn put_json(out: &mut Vec<u8>, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_vec(value)?;
    out.write_u32::<LittleEndian>(json.len() as u32).expect("vec write");
    out.extend_from_slice(&json);
    Ok(())
}

impl<S: Scalar> Checkpoint<S> {
    pub fn new(model: InrModel<S>, meta: CheckpointMeta) -> Self {
        Checkpoint { model, meta }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.write_u32::<LittleEndian>(CHECKPOINT_VERSION).expect("vec write");
        put_json(&mut out, &self.model.encoder.config())?;
        let tables = self.model.encoder.tables();
        out.write_u32::<LittleEndian>(tables.len() as u32).expect("vec write");
        for t in tables {
            out.write_u64::<LittleEndian>(t.len() as u64).expect("vec write");
            put_f32s(&mut out, t);
        }
        out.write_u32::<LittleEndian>(self.model.mlp.layers.len() as u32).expect("vec write");
        for l in &self.model.mlp.layers {
            out.write_u32::<LittleEndian>(l.inputs as u32).expect("vec write");
            out.write_u32::<LittleEndian>(l.outputs as u32).expect("vec write");
            put_f32s(&mut out, &l.weights);
            put_f32s(&mut out, &l.bias);
        }
        put_json(&mut out, &self.meta)?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(8, "magic")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(format_err(0, "not a checkpoint (bad magic)"));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(format_err(8, format!("unsupported checkpoint version {version}")));
        }
        let config: EncoderConfig = r.json("encoder config")?;
        let expected = config.table_sizes();
        let count = r.u32("table count")? as usize;
        if count != expected.len() {
            return Err(format_err(r.pos - 4, format!("{count} tables, config implies {}", expected.len())));
        }
        let mut tables = Vec::with_capacity(count);
        for (i, &want) in expected.iter().enumerate() {
            let len = r.u64("table length")? as usize;
            if len != want {
                return Err(format_err(r.pos - 8, format!("table {i} has {len} values, config implies {want}")));
            }
            tables.push(r.f32s(len, "table values")?);
        }
        let encoder = Encoder::from_tables(config, tables).map_err(|e| format_err(r.pos, e.to_string()))?;
        let layer_count = r.u32("layer count")? as usize;
        if layer_count == 0 || layer_count > 1024 {
            return Err(format_err(r.pos - 4, format!("implausible layer count {layer_count}")));
        }
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            let at = r.pos;
            let inputs = r.u32("layer inputs")? as usize;
            let outputs = r.u32("layer outputs")? as usize;
            let n = inputs.checked_mul(outputs).ok_or_else(|| format_err(at, "layer shape overflows"))?;
            let weights = r.f32s(n, "layer weights")?;
            let bias = r.f32s(outputs, "layer bias")?;
            layers.push(Dense { inputs, outputs, weights, bias });
        }
        let at = r.pos;
        let chained =
            layers.windows(2).all(|w| w[0].outputs == w[1].inputs) && layers.last().map(|l| l.outputs) == Some(1);
        if !chained {
            return Err(format_err(at, "MLP layer shapes do not chain to a scalar output"));
        }
        let model = InrModel::from_parts(encoder, Mlp { layers }).map_err(|e| format_err(at, e.to_string()))?;
        let meta: CheckpointMeta = r.json("metadata")?;
        if r.pos != bytes.len() {
            return Err(format_err(r.pos, format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { model, meta })
    }
}

fn format_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, message: msg.into() }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            format_err(
                self.pos,
                format!("truncated while reading {what} ({n} bytes needed, {} left)", self.bytes.len() - self.pos),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        self.take(4, what).map(LittleEndian::read_u32)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        self.take(8, what).map(LittleEndian::read_u64)
    }

    fn f32s<S: Scalar>(&mut self, n: usize, what: &str) -> Result<Vec<S>> {
        let at = self.pos;
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| format_err(at, "length overflows"))?, what)?;
        let values: Vec<S> =
            bytes.chunks_exact(4).map(|c| <S as Scalar>::from_f32(LittleEndian::read_f32(c))).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(at, format!("non-finite value in {what}")));
        }
        Ok(values)
    }

    fn json<T: serde::de::DeserializeOwned>(&mut self, what: &str) -> Result<T> {
        let len = self.u32(what)? as usize;
        let at = self.pos;
        let raw = self.take(len, what)?;
        serde_json::from_slice(raw).map_err(|e| format_err(at, format!("invalid {what}: {e}")))
    }
}

pub fn save_checkpoint<S: Scalar>(model: &InrModel<S>, meta: &CheckpointMeta, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = Checkpoint { model: model.clone(), meta: meta.clone() }.to_bytes()?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<S: Scalar>(path: impl AsRef<Path>) -> Result<Checkpoint<S>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{random_batch, tiny_model};
    use super::super::{init_model, MlpConfig};
    use super::*;
    use crate::encoding::BaselineConfig;

    fn meta() -> CheckpointMeta {
        CheckpointMeta {
            epoch: 3,
            loss_history: vec![0.1, 0.05, 1.0 / 3.0],
            psnr_history: vec![None, Some(21.5), Some(f64::MAX)],
            dataset_hash: "abc".into(),
            key_times: vec![-1.0, 0.1 + 0.2, 1.0],
            ..Default::default()
        }
    }

    #[test]
    fn save_load_save_is_identical() {
        let m = tiny_model::<f32>(1);
        let bytes = Checkpoint::new(m.clone(), meta()).to_bytes().unwrap();
        let back = Checkpoint::<f32>::from_bytes(&bytes).unwrap();
        assert_eq!(back.model, m);
        assert_eq!(back.meta, meta());
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = tiny_model::<f32>(2);
        save_checkpoint(&m, &meta(), &path).unwrap();
        let back = load_checkpoint::<f32>(&path).unwrap().model;
        let (qs, _) = random_batch(50, 3);
        let qs: Vec<[f32; 4]> = qs.iter().map(|q| q.map(|v| v as f32)).collect();
        let a = m.forward(&qs).unwrap();
        let b = back.forward(&qs).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn baseline_models_round_trip() {
        let cfg = EncoderConfig::Baseline { config: BaselineConfig::mhe(3, 2, 8, 64, 2), key_times: vec![-1.0, 1.0] };
        let m = init_model::<f32>(cfg, &MlpConfig::default(), 4).unwrap();
        let bytes = Checkpoint::new(m.clone(), meta()).to_bytes().unwrap();
        assert_eq!(Checkpoint::<f32>::from_bytes(&bytes).unwrap().model, m);
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let bytes = Checkpoint::new(tiny_model::<f32>(5), meta()).to_bytes().unwrap();
        for cut in (0..bytes.len()).step_by(97).chain([bytes.len() - 1]) {
            match Checkpoint::<f32>::from_bytes(&bytes[..cut]) {
                Err(Error::Format { offset, .. }) => assert!(offset as usize <= cut),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn bad_magic_and_version_rejected() {
        let mut bytes = Checkpoint::new(tiny_model::<f32>(6), meta()).to_bytes().unwrap();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(Checkpoint::<f32>::from_bytes(&wrong), Err(Error::Format { offset: 0, .. })));
        bytes[8] = 99;
        assert!(matches!(Checkpoint::<f32>::from_bytes(&bytes), Err(Error::Format { offset: 8, .. })));
    }
}
