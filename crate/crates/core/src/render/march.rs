use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::camera::{add_scaled, get_rays, intersect_box, Camera, Vec3};
use super::image::RgbaImage;
use super::transfer::TransferFunction;
use super::ScalarField;
use crate::error::{Error, Result};
use crate::feature::{interp_occupancy, OccupancyGrid};

/// Upper bound on samples fetched per ray and iteration.
pub const PACE_CAP: usize = 64;

/// Diagonal of the `[-1, 1]^3` volume box.
pub const BOX_DIAGONAL: f64 = 3.464_101_615_137_754_6;

/// Samples per ray per iteration: `max(min(n_r / n_a, 64), 1)`.
pub fn arm_pace(n_r: usize, n_a: usize) -> usize {
    pace(n_r, n_a, PACE_CAP)
}

fn pace(n_r: usize, n_a: usize, cap: usize) -> usize {
    (n_r / n_a.max(1)).min(cap).max(1)
}

/// Scheduling and sampling parameters of the ray marcher.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    /// Per-iteration sample budget `N_r`; `None` uses the initial number of
    /// live rays.
    pub sample_budget: Option<usize>,
    pub pace_cap: usize,
    /// Samples per ray (`R_max`); `None` is twice the box diagonal over the step.
    pub max_samples_per_ray: Option<usize>,
    /// Distance between samples; `None` is the box diagonal / 512.
    pub step: Option<f64>,
    /// Step at which TF opacities are taken literally; `None` is the default step.
    pub reference_step: Option<f64>,
    pub termination_opacity: f64,
    /// `false` marches with a fixed pace of one sample per ray and iteration.
    pub adaptive: bool,
    /// Compatibility mode: treat `R_max` as a cap on the total number of
    /// samples over all rays instead of per ray.
    pub global_sample_cap: bool,
}

impl Default for ArmConfig {
    fn default() -> Self {
        ArmConfig {
            sample_budget: None,
            pace_cap: PACE_CAP,
            max_samples_per_ray: None,
            step: None,
            reference_step: None,
            termination_opacity: 0.99,
            adaptive: true,
            global_sample_cap: false,
        }
    }
}

impl ArmConfig {
    pub fn fixed_pace() -> Self {
        ArmConfig { adaptive: false, ..Default::default() }
    }

    pub fn step(&self) -> f64 {
        self.step.unwrap_or(BOX_DIAGONAL / 512.0)
    }

    pub fn reference_step(&self) -> f64 {
        self.reference_step.unwrap_or(BOX_DIAGONAL / 512.0)
    }

    pub fn max_samples(&self) -> usize {
        self.max_samples_per_ray.unwrap_or_else(|| (2.0 * BOX_DIAGONAL / self.step()).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pace_cap == 0 || self.sample_budget == Some(0) || self.max_samples_per_ray == Some(0) {
            return Err(Error::argument("pace cap, sample budget and R_max must be positive"));
        }
        let (s, r) = (self.step(), self.reference_step());
        if !(s > 0.0 && s.is_finite() && r > 0.0 && r.is_finite()) {
            return Err(Error::argument("step sizes must be positive and finite"));
        }
        if !(self.termination_opacity > 0.0 && self.termination_opacity <= 1.0) {
            return Err(Error::argument("termination opacity must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Marching state of one primary ray.
#[derive(Clone, Debug, PartialEq)]
pub struct RayState {
    pub pixel: (u32, u32),
    pub origin: Vec3,
    pub dir: Vec3,
    pub t_enter: f64,
    pub t_exit: f64,
    /// Lattice index of the next candidate position `t_enter + k * step`.
    pub next: u64,
    /// Samples handed out so far.
    pub taken: usize,
    /// Premultiplied accumulated colour and opacity.
    pub rgba: [f64; 4],
    pub alive: bool,
}

impl RayState {
    pub fn new(pixel: (u32, u32), origin: Vec3, dir: Vec3, span: Option<(f64, f64)>) -> Self {
        let (t_enter, t_exit) = span.unwrap_or((0.0, -1.0));
        RayState { pixel, origin, dir, t_enter, t_exit, next: 0, taken: 0, rgba: [0.0; 4], alive: span.is_some() }
    }

    pub fn position(&self, k: u64, step: f64) -> Vec3 {
        add_scaled(self.origin, self.dir, self.t_enter + k as f64 * step)
    }
}

/// Streams up to `count` positions from the ray's uniform lattice, skipping
/// runs of unoccupied cells without consuming budget. The ray dies once it
/// leaves the box or has taken `r_max` samples.
pub fn next_samples(
    ray: &mut RayState,
    count: usize,
    occ: Option<&OccupancyGrid>,
    step: f64,
    r_max: usize,
) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(count.min(4096));
    while ray.alive && out.len() < count {
        if ray.taken >= r_max {
            ray.alive = false;
            break;
        }
        let t = ray.t_enter + ray.next as f64 * step;
        if t > ray.t_exit {
            ray.alive = false;
            break;
        }
        let p = ray.position(ray.next, step);
        if let Some(occ) = occ {
            match occ.cell_of(p) {
                Some(c) if occ.get(c) => {}
                cell => {
                    // jump to the last lattice point still inside this cell;
                    // it is re-checked, so the skip never passes an occupied point
                    let mut next = ray.next + 1;
                    if let Some(c) = cell {
                        let (lo, hi) = occ.cell_bounds(c);
                        if let Some((_, t_out)) = intersect_box(ray.origin, ray.dir, lo, hi) {
                            let k = ((t_out - ray.t_enter) / step).floor();
                            if k.is_finite() && k > next as f64 {
                                next = k as u64;
                            }
                        }
                    }
                    ray.next = next;
                    continue;
                }
            }
        }
        out.push(p);
        ray.next += 1;
        ray.taken += 1;
    }
    if ray.alive && ray.taken >= r_max {
        ray.alive = false;
    }
    out
}

/// Work counters of one render.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenderStats {
    pub iterations: usize,
    /// Batched model evaluations.
    pub inference_calls: usize,
    pub samples_evaluated: usize,
    pub samples_composited: usize,
    /// `(N_a, N_s)` at the start of every iteration.
    pub trace: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderOutput {
    pub image: RgbaImage,
    pub stats: RenderStats,
}

/// `1 - (1 - a)^(step / reference)`.
#[inline]
pub fn correct_opacity(a: f64, step: f64, reference: f64) -> f64 {
    if step == reference {
        a
    } else {
        1.0 - (1.0 - a).powf(step / reference)
    }
}

/// Sample-streaming ray marcher. Every iteration computes the pace from the
/// number of live rays, gathers that many samples from each, evaluates the
/// whole batch in one call and composites front to back.
pub fn render(
    field: &dyn ScalarField,
    t: f64,
    cam: &Camera,
    tf: &TransferFunction,
    arm: &ArmConfig,
    occ: Option<&OccupancyGrid>,
    background: [f64; 4],
) -> Result<RenderOutput> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::bounds(format!("time {t} outside [-1, 1]")));
    }
    arm.validate()?;
    let step = arm.step();
    let reference = arm.reference_step();
    let r_max = arm.max_samples();
    let per_ray_cap = if arm.global_sample_cap { usize::MAX } else { r_max };
    let mut rays: Vec<RayState> = get_rays(cam)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| RayState::new((i as u32 % cam.width, i as u32 / cam.width), r.origin, r.dir, r.span))
        .collect();
    let n_r = arm.sample_budget.unwrap_or_else(|| rays.iter().filter(|r| r.alive).count()).max(1);
    let mut stats = RenderStats::default();
    let mut finished_samples = 0usize;

    loop {
        let n_a = rays.iter().filter(|r| r.alive).count();
        if n_a == 0 {
            break;
        }
        if arm.global_sample_cap && finished_samples >= r_max {
            rays.iter_mut().for_each(|r| r.alive = false);
            break;
        }
        let n_s = if arm.adaptive { pace(n_r, n_a, arm.pace_cap) } else { 1 };
        stats.iterations += 1;
        stats.trace.push((n_a, n_s));

        let fetched: Vec<(usize, Vec<Vec3>)> = rays
            .par_iter_mut()
            .enumerate()
            .filter(|(_, r)| r.alive)
            .map(|(i, r)| (i, next_samples(r, n_s, occ, step, per_ray_cap)))
            .collect();
        let positions: Vec<Vec3> = fetched.iter().flat_map(|(_, p)| p.iter().copied()).collect();
        if positions.is_empty() {
            continue;
        }
        let values = field.eval(t, &positions)?;
        stats.inference_calls += 1;
        stats.samples_evaluated += positions.len();
        finished_samples += positions.len();

        let mut offset = 0;
        for (i, pos) in &fetched {
            let ray = &mut rays[*i];
            for &v in &values[offset..offset + pos.len()] {
                if ray.rgba[3] >= arm.termination_opacity {
                    break;
                }
                if !v.is_finite() {
                    return Err(Error::Render {
                        x: ray.pixel.0,
                        y: ray.pixel.1,
                        message: format!("non-finite sample value {v}"),
                    });
                }
                let c = tf.eval(v);
                let a = correct_opacity(c[3], step, reference);
                let w = (1.0 - ray.rgba[3]) * a;
                for (out, &ch) in ray.rgba.iter_mut().zip(&c[..3]) {
                    *out += w * ch;
                }
                ray.rgba[3] += w;
                stats.samples_composited += 1;
            }
            offset += pos.len();
            if ray.rgba[3] >= arm.termination_opacity {
                ray.alive = false;
            }
        }
    }

    let mut image = RgbaImage::filled(cam.width, cam.height, [0.0; 4]);
    for (px, ray) in image.pixels.iter_mut().zip(&rays) {
        let rest = 1.0 - ray.rgba[3];
        let rgb = [0, 1, 2].map(|c| ray.rgba[c] + rest * background[c] * background[3]);
        *px = [rgb[0] as f32, rgb[1] as f32, rgb[2] as f32, (ray.rgba[3] + rest * background[3]) as f32];
    }
    Ok(RenderOutput { image, stats })
}

/// Renders an arbitrary time between key frames: the occupancy grid is
/// interpolated from the bracketing key grids, then the model is queried at
/// `t` directly.
#[allow(clippy::too_many_arguments)]
pub fn render_supersampled_time(
    field: &dyn ScalarField,
    t: f64,
    key_occupancy: &[OccupancyGrid],
    cam: &Camera,
    tf: &TransferFunction,
    arm: &ArmConfig,
    background: [f64; 4],
) -> Result<RenderOutput> {
    let occ = occupancy_at(key_occupancy, t)?;
    render(field, t, cam, tf, arm, Some(&occ), background)
}

/// The occupancy grid at time `t`: the key grid itself at a key time,
/// otherwise the interpolation of the two bracketing grids.
pub fn occupancy_at(key_occupancy: &[OccupancyGrid], t: f64) -> Result<OccupancyGrid> {
    if key_occupancy.is_empty() {
        return Err(Error::argument("no key occupancy grids"));
    }
    if let Some(g) = key_occupancy.iter().find(|g| g.frame_time() == t) {
        return Ok(g.clone());
    }
    let pair = key_occupancy.windows(2).find(|w| w[0].frame_time() < t && t < w[1].frame_time());
    match pair {
        Some(w) => interp_occupancy(&w[0], &w[1], t),
        None => Err(Error::bounds(format!("time {t} is not bracketed by the key occupancy grids"))),
    }
}
