//! Direct volume rendering: perspective rays, transfer functions, sample
//! streaming with adaptive ray marching (ARM), occupancy-grid skipping,
//! temporal super-resolution and image metrics.
//!
//! World space is the normalized volume space, so the volume occupies
//! `[-1, 1]^3` and occupancy cells map onto it directly.

mod camera;
mod image;
mod march;
mod transfer;

pub use camera::{get_rays, intersect_box, Camera, Ray, Vec3};
pub use image::{image_psnr, image_psnr_ssim, image_ssim, ssim_plane, RgbaImage};
pub use march::{
    arm_pace, correct_opacity, next_samples, occupancy_at, render, render_supersampled_time, ArmConfig, RayState,
    RenderOutput, RenderStats, BOX_DIAGONAL, PACE_CAP,
};
pub use transfer::{ControlPoint, TransferFunction};

use crate::error::Result;
use crate::feature::{to_fbb_coords, FeatureBoundingBox};
use crate::inr::InrModel;
use crate::scalar::Scalar;
use crate::volume::ScalarGrid;

/// Anything that yields scalar values at normalized positions and times.
/// Each `eval` call is one batched inference.
pub trait ScalarField: Sync {
    fn eval(&self, t: f64, points: &[Vec3]) -> Result<Vec<f64>>;
}

/// A trained model restricted to its feature bounding box; zero outside.
pub struct InrField<'a, S> {
    pub model: &'a InrModel<S>,
    pub fbb: &'a FeatureBoundingBox,
}

impl<S: Scalar> ScalarField for InrField<'_, S> {
    fn eval(&self, t: f64, points: &[Vec3]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; points.len()];
        let mut inside = Vec::new();
        let mut queries = Vec::new();
        for (i, &p) in points.iter().enumerate() {
            if self.fbb.contains_point(p) {
                let q = to_fbb_coords(p, self.fbb)?;
                inside.push(i);
                queries.push([S::of(t), S::of(q[0]), S::of(q[1]), S::of(q[2])]);
            }
        }
        if !queries.is_empty() {
            for (i, v) in inside.into_iter().zip(self.model.forward(&queries)?) {
                out[i] = v.to_f64_lossy();
            }
        }
        Ok(out)
    }
}

/// Ground-truth field: trilinear in space, linear in time between frames
/// stamped with normalized times (ascending).
pub struct GridField<'a> {
    pub frames: Vec<(f64, &'a ScalarGrid)>,
}

impl GridField<'_> {
    fn at(&self, t: f64, p: Vec3) -> f64 {
        let f = &self.frames;
        if f.len() == 1 || t <= f[0].0 {
            return f[0].1.sample(p);
        }
        if t >= f[f.len() - 1].0 {
            return f[f.len() - 1].1.sample(p);
        }
        let k = f.partition_point(|(ft, _)| *ft <= t) - 1;
        let w = (t - f[k].0) / (f[k + 1].0 - f[k].0);
        let a = f[k].1.sample(p);
        if w == 0.0 {
            a
        } else {
            a + (f[k + 1].1.sample(p) - a) * w
        }
    }
}

impl ScalarField for GridField<'_> {
    fn eval(&self, t: f64, points: &[Vec3]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|&p| self.at(t, p)).collect())
    }
}

/// Closure-backed field, handy for analytic scenes.
pub struct FnField<F>(pub F);

impl<F: Fn(f64, Vec3) -> f64 + Sync> ScalarField for FnField<F> {
    fn eval(&self, t: f64, points: &[Vec3]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|&p| (self.0)(t, p)).collect())
    }
}

#[cfg(test)]
mod tests;
