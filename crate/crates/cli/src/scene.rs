//! A loaded checkpoint ready to render, and the render request schema shared
//! by the `render` command and the HTTP service.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tvinr_core::feature::{FeatureBoundingBox, OccupancyGrid};
use tvinr_core::inr::{load_checkpoint, CheckpointMeta, InrModel};
use tvinr_core::render::{occupancy_at, render, ArmConfig, Camera, InrField, RenderOutput, TransferFunction};

use crate::error::{io_error, CliError, ErrorKind, Result};

/// Default cap on `width * height`.
pub const DEFAULT_MAX_PIXELS: u64 = 1024 * 1024;

/// Built-in transfer function ids, in the order they are listed.
pub const TF_IDS: [&str; 5] = TransferFunction::BUILTIN_NAMES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub eye: [f64; 3],
    #[serde(alias = "look_at")]
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
}

fn default_up() -> [f64; 3] {
    [0.0, 1.0, 0.0]
}

fn default_fov() -> f64 {
    40.0
}

impl Default for CameraSpec {
    fn default() -> Self {
        CameraSpec { eye: [0.0, 0.0, 4.0], target: [0.0; 3], up: default_up(), fov_deg: default_fov() }
    }
}

/// A built-in id or inline control points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TfChoice {
    Id(String),
    Inline(TransferFunction),
}

impl Default for TfChoice {
    fn default() -> Self {
        TfChoice::Id("hot".into())
    }
}

impl TfChoice {
    pub fn resolve(&self) -> Result<TransferFunction> {
        match self {
            TfChoice::Inline(tf) => Ok(tf.clone()),
            TfChoice::Id(id) => TransferFunction::builtin(id).ok_or_else(|| {
                CliError::argument(format!("unknown transfer function {id:?}; available: {}", TF_IDS.join(", ")))
                    .with_field("transfer_function")
            }),
        }
    }
}

fn default_size() -> u32 {
    256
}

fn default_background() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    /// Normalized time; the trained key range is `[first, last]` key time.
    pub t: f64,
    #[serde(default)]
    pub camera: CameraSpec,
    #[serde(default)]
    pub transfer_function: TfChoice,
    #[serde(default = "default_size")]
    pub width: u32,
    #[serde(default = "default_size")]
    pub height: u32,
    #[serde(default = "default_background")]
    pub background: [f64; 4],
    /// Marcher settings; defaults when absent.
    #[serde(default)]
    pub arm: Option<ArmConfig>,
}

impl RenderRequest {
    pub fn at(t: f64) -> Self {
        RenderRequest {
            t,
            camera: CameraSpec::default(),
            transfer_function: TfChoice::default(),
            width: default_size(),
            height: default_size(),
            background: default_background(),
            arm: None,
        }
    }

    pub fn camera(&self) -> Camera {
        let c = &self.camera;
        Camera { eye: c.eye, target: c.target, up: c.up, fov_deg: c.fov_deg, width: self.width, height: self.height }
    }
}

/// Trained model, its FBB and the key-frame occupancy grids.
pub struct Scene {
    pub model: InrModel<f32>,
    pub meta: CheckpointMeta,
    pub fbb: FeatureBoundingBox,
    pub occupancy: Vec<OccupancyGrid>,
}

impl Scene {
    /// Loads a checkpoint and the occupancy grids it references (relative
    /// to the checkpoint's directory).
    pub fn load(checkpoint: &Path) -> Result<Self> {
        if !checkpoint.exists() {
            return Err(CliError::missing(checkpoint));
        }
        let ckpt = load_checkpoint::<f32>(checkpoint)?;
        let fbb = ckpt.meta.fbb.clone().ok_or_else(|| CliError::new(ErrorKind::Format, "checkpoint has no FBB"))?;
        let dir = checkpoint.parent().unwrap_or(Path::new("."));
        let mut occupancy = Vec::with_capacity(ckpt.meta.occupancy_files.len());
        for name in &ckpt.meta.occupancy_files {
            let path = dir.join(name);
            let file = std::fs::File::open(&path).map_err(|e| io_error(&path, e))?;
            occupancy.push(OccupancyGrid::read_from(std::io::BufReader::new(file))?);
        }
        if occupancy.len() != ckpt.meta.key_times.len() {
            return Err(CliError::new(
                ErrorKind::Format,
                format!(
                    "checkpoint lists {} occupancy grids for {} key frames",
                    occupancy.len(),
                    ckpt.meta.key_times.len()
                ),
            ));
        }
        Ok(Scene { model: ckpt.model, meta: ckpt.meta, fbb, occupancy })
    }

    pub fn time_range(&self) -> (f64, f64) {
        let kt = &self.meta.key_times;
        (kt[0], kt[kt.len() - 1])
    }

    /// Validates a request against the size limit and key range.
    pub fn check(&self, req: &RenderRequest, max_pixels: u64, extrapolate: bool) -> Result<()> {
        let pixels = req.width as u64 * req.height as u64;
        if pixels > max_pixels {
            return Err(CliError::new(
                ErrorKind::TooLarge,
                format!("{}x{} = {pixels} pixels exceeds the limit of {max_pixels}", req.width, req.height),
            ));
        }
        if req.width == 0 || req.height == 0 {
            return Err(CliError::argument("width and height must be positive").with_field("width"));
        }
        let (lo, hi) = self.time_range();
        if !req.t.is_finite() || (!extrapolate && !(lo..=hi).contains(&req.t)) {
            return Err(
                CliError::argument(format!("t = {} outside the trained key range [{lo}, {hi}]", req.t)).with_field("t")
            );
        }
        req.transfer_function.resolve()?;
        req.camera().validate().map_err(|e| CliError::from(e).with_field("camera"))?;
        if let Some(arm) = &req.arm {
            arm.validate().map_err(|e| CliError::from(e).with_field("arm"))?;
        }
        Ok(())
    }

    /// Renders a checked request. Out-of-range times (only reachable with
    /// extrapolation) are clamped to the nearest key time.
    pub fn render(&self, req: &RenderRequest) -> Result<RenderOutput> {
        let (lo, hi) = self.time_range();
        let t = req.t.clamp(lo, hi);
        let occ = occupancy_at(&self.occupancy, t)?;
        let field = InrField { model: &self.model, fbb: &self.fbb };
        let tf = req.transfer_function.resolve()?;
        let arm = req.arm.clone().unwrap_or_default();
        let out = render(&field, t, &req.camera(), &tf, &arm, Some(&occ), req.background).map_err(|e| {
            let mut err = CliError::from(e);
            if err.kind == ErrorKind::Argument {
                err.kind = ErrorKind::Render;
            }
            err
        })?;
        Ok(out)
    }
}
