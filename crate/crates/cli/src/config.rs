//! Job configuration, command-line overrides and the extraction manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use tvinr_core::encoding::{BaselineConfig, BaselineKind, EncoderConfig, TesseractConfig};
use tvinr_core::feature::{FeatureBoundingBox, FeatureSpec};
use tvinr_core::inr::{MlpConfig, TrainConfig};
use tvinr_core::volume::{load_volume, select_key_frames, synth_moving_gaussian, KeyFrameSet, Trajectory, Volume4D};

use crate::error::{read_to_string, CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CORESET_FILE: &str = "coreset.tvcs";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const LOSS_FILE: &str = "loss.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Little-endian `f32` raw file plus its JSON sidecar.
    Raw { path: PathBuf, meta: PathBuf },
    /// Generated moving Gaussian blob.
    Synthetic { dims: [usize; 3], frames: usize, trajectory: Trajectory },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyFramePolicy {
    All,
    Indices(Vec<usize>),
    /// Farthest-point selection of this many frames (clamped to the frame count).
    Budget(usize),
}

impl Default for KeyFramePolicy {
    fn default() -> Self {
        KeyFramePolicy::Budget(4)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    Fhash,
    DenseSingle,
    DenseMulti,
    Mhe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub fold: usize,
    pub embedding_size: usize,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        EncoderSpec { kind: EncoderKind::Fhash, fold: 2, embedding_size: 2 }
    }
}

impl EncoderSpec {
    /// Tesseract configuration of the FBB; baselines are matched to its
    /// parameter count with the same level count.
    pub fn build(&self, fbb: &FeatureBoundingBox, key_times: Vec<f64>) -> Result<EncoderConfig> {
        let tesseract = TesseractConfig::for_fbb(fbb.size(), key_times.clone(), self.fold, self.embedding_size)?;
        let kind = match self.kind {
            EncoderKind::Fhash => return Ok(EncoderConfig::Tesseract(tesseract)),
            EncoderKind::DenseSingle => BaselineKind::DenseSingle,
            EncoderKind::DenseMulti => BaselineKind::DenseMulti,
            EncoderKind::Mhe => BaselineKind::MheSpatialHash,
        };
        let n_max = *fbb.size().iter().max().expect("three axes");
        let config = BaselineConfig::matched(
            kind,
            tesseract.param_count(),
            key_times.len(),
            tesseract.levels.len(),
            n_max,
            self.embedding_size,
        );
        Ok(EncoderConfig::Baseline { config, key_times })
    }
}

fn default_feature() -> FeatureSpec {
    FeatureSpec::segmentation(0.5)
}

fn default_output() -> PathBuf {
    PathBuf::from("tvinr-out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub dataset: DatasetSource,
    #[serde(default = "default_feature")]
    pub feature: FeatureSpec,
    #[serde(default)]
    pub key_frames: KeyFramePolicy,
    #[serde(default)]
    pub encoder: EncoderSpec,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Reconstruct the key frames after every epoch and log the volume PSNR.
    #[serde(default)]
    pub evaluate_psnr: bool,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Recorded in the manifest; reductions are fixed-order regardless.
    #[serde(default)]
    pub deterministic: bool,
}

/// Global command-line adjustments applied on top of the JSON file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    /// `dotted.path=value` pairs; values parse as JSON, else as strings.
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

/// Sets `path` (dot separated) inside `root`, creating objects on the way.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override {assignment:?} is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(format!("override path {path:?} has an empty segment")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        node =
            node.as_object_mut().expect("object").entry(key.to_string()).or_insert(Value::Object(Default::default()));
    }
    if !node.is_object() {
        *node = Value::Object(Default::default());
    }
    node.as_object_mut().expect("object").insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Deserializes with the failing field's path in the error.
pub fn from_value_with_path<T: serde::de::DeserializeOwned>(value: Value, what: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let field = e.path().to_string();
        CliError::config(format!("{what}: field `{field}`: {}", e.inner())).with_field(field)
    })
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl JobConfig {
    /// Reads the optional config file, applies overrides and validates.
    /// Relative paths are taken relative to the config file's directory
    /// (the working directory without a file).
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let (mut root, base) = match path {
            Some(p) => {
                let text = read_to_string(p)?;
                let v: Value =
                    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                (v, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (Value::Object(Default::default()), PathBuf::new()),
        };
        for s in &overrides.set {
            apply_override(&mut root, s)?;
        }
        if let Some(seed) = overrides.seed {
            apply_override(&mut root, &format!("train.seed={seed}"))?;
        }
        if overrides.deterministic {
            apply_override(&mut root, "deterministic=true")?;
        }
        let mut cfg: JobConfig = from_value_with_path(root, "job config")?;
        if let DatasetSource::Raw { path, meta } = &mut cfg.dataset {
            resolve(&base, path);
            resolve(&base, meta);
        }
        resolve(&base, &mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DatasetSource::Raw { path, meta } = &self.dataset {
            for p in [path, meta] {
                if !p.exists() {
                    return Err(CliError::missing(p).with_field("dataset"));
                }
            }
        }
        self.feature.validate().map_err(|e| CliError::from(e).with_field("feature"))?;
        if self.encoder.fold < 2 || self.encoder.embedding_size == 0 {
            return Err(
                CliError::config("encoder.fold must be >= 2 and encoder.embedding_size >= 1").with_field("encoder")
            );
        }
        self.mlp.validate().map_err(|e| CliError::from(e).with_field("mlp"))?;
        self.train.validate().map_err(|e| CliError::from(e).with_field("train"))?;
        if let KeyFramePolicy::Budget(b) = self.key_frames {
            if b < 2 {
                return Err(CliError::config("key_frames.budget must be >= 2").with_field("key_frames"));
            }
        }
        Ok(())
    }

    pub fn load_dataset(&self) -> Result<Volume4D> {
        Ok(match &self.dataset {
            DatasetSource::Raw { path, meta } => load_volume(path, meta)?,
            DatasetSource::Synthetic { dims, frames, trajectory } => synth_moving_gaussian(*dims, *frames, trajectory)?,
        })
    }

    pub fn key_frames(&self, vol: &Volume4D) -> Result<KeyFrameSet> {
        let n = vol.num_frames();
        Ok(match &self.key_frames {
            KeyFramePolicy::All => KeyFrameSet::new((0..n).collect(), n)?,
            KeyFramePolicy::Indices(ix) => KeyFrameSet::new(ix.clone(), n)?,
            KeyFramePolicy::Budget(b) => select_key_frames(vol, (*b).min(n))?,
        })
    }
}

/// Everything `extract` produced, with file names relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dataset_hash: String,
    pub dims: [usize; 3],
    pub num_frames: usize,
    pub key_frames: Vec<usize>,
    pub key_times: Vec<f64>,
    pub feature: FeatureSpec,
    pub fbb: FeatureBoundingBox,
    pub coreset_file: String,
    pub coreset_samples: usize,
    pub occupancy_files: Vec<String>,
    pub deterministic: bool,
}

impl Manifest {
    pub const VERSION: u32 = 1;

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = read_to_string(&path)?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let m: Manifest = from_value_with_path(value, "manifest")?;
        if m.version != Self::VERSION {
            return Err(CliError::config(format!("manifest version {} is not supported", m.version)));
        }
        Ok(m)
    }
}
