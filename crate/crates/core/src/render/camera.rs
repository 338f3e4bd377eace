use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add_scaled(a: Vec3, d: Vec3, s: f64) -> Vec3 {
    [a[0] + d[0] * s, a[1] + d[1] * s, a[2] + d[2] * s]
}

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Pinhole camera in normalized volume coordinates (the volume is `[-1, 1]^3`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub eye: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    /// Vertical field of view in degrees.
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Camera {
    /// Looks at the volume centre from `distance` along `+z`.
    pub fn front(distance: f64, width: u32, height: u32) -> Self {
        Camera { eye: [0.0, 0.0, distance], target: [0.0; 3], up: [0.0, 1.0, 0.0], fov_deg: 40.0, width, height }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::argument("image must be at least 1x1"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::argument(format!("field of view {} outside (0, 180)", self.fov_deg)));
        }
        let all = self.eye.iter().chain(&self.target).chain(&self.up);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::argument("camera vectors must be finite"));
        }
        let view = sub(self.target, self.eye);
        if dot(view, view) < 1e-24 {
            return Err(Error::argument("eye and target coincide"));
        }
        let c = cross(normalize(view), self.up);
        if dot(self.up, self.up) < 1e-24 || dot(c, c) < 1e-12 {
            return Err(Error::argument("up vector is parallel to the view direction"));
        }
        Ok(())
    }

    /// Orthonormal `(forward, right, up)` frame.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let f = normalize(sub(self.target, self.eye));
        let r = normalize(cross(f, self.up));
        let u = cross(r, f);
        (f, r, u)
    }

    /// Unit direction of the ray through the centre of pixel `(x, y)`;
    /// `y` grows downwards.
    pub fn ray_direction(&self, x: u32, y: u32) -> Vec3 {
        let (f, r, u) = self.basis();
        let half = (self.fov_deg.to_radians() * 0.5).tan();
        let aspect = self.width as f64 / self.height as f64;
        let px = (2.0 * (x as f64 + 0.5) / self.width as f64 - 1.0) * half * aspect;
        let py = (1.0 - 2.0 * (y as f64 + 0.5) / self.height as f64) * half;
        normalize([0, 1, 2].map(|a| f[a] + px * r[a] + py * u[a]))
    }
}

/// Parametric entry and exit of a ray through the box `[lo, hi]`, clipped to
/// `t >= 0`; `None` when it misses.
pub fn intersect_box(origin: Vec3, dir: Vec3, lo: Vec3, hi: Vec3) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < lo[a] || origin[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / dir[a];
        let (mut near, mut far) = ((lo[a] - origin[a]) * inv, (hi[a] - origin[a]) * inv);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
    }
    (t0 <= t1).then_some((t0, t1))
}

/// One primary ray per pixel, row-major from the top-left.
#[derive(Clone, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
    /// Entry/exit parameters against the volume box, `None` if it misses.
    pub span: Option<(f64, f64)>,
}

pub fn get_rays(cam: &Camera) -> Result<Vec<Ray>> {
    cam.validate()?;
    let mut rays = Vec::with_capacity(cam.width as usize * cam.height as usize);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let dir = cam.ray_direction(x, y);
            let span = intersect_box(cam.eye, dir, [-1.0; 3], [1.0; 3]);
            rays.push(Ray { origin: cam.eye, dir, span });
        }
    }
    Ok(rays)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_cameras_rejected() {
        let ok = Camera::front(4.0, 8, 8);
        assert!(ok.validate().is_ok());
        assert!(Camera { up: [0.0, 0.0, 1.0], ..ok.clone() }.validate().is_err());
        assert!(Camera { fov_deg: 180.0, ..ok.clone() }.validate().is_err());
        assert!(Camera { fov_deg: 0.0, ..ok.clone() }.validate().is_err());
        assert!(Camera { target: ok.eye, ..ok.clone() }.validate().is_err());
        assert!(Camera { width: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn looking_away_kills_every_ray() {
        let cam = Camera { target: [0.0, 0.0, 10.0], ..Camera::front(4.0, 6, 5) };
        assert!(get_rays(&cam).unwrap().iter().all(|r| r.span.is_none()));
    }

    #[test]
    fn centre_ray_follows_the_axis() {
        let cam = Camera::front(4.0, 3, 3);
        let rays = get_rays(&cam).unwrap();
        let c = &rays[4];
        assert!((c.dir[2] + 1.0).abs() < 1e-12 && c.dir[0].abs() < 1e-12 && c.dir[1].abs() < 1e-12);
        let (t0, t1) = c.span.unwrap();
        assert!((t0 - 3.0).abs() < 1e-12 && (t1 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_rays_are_symmetric() {
        // fov 90 and square image: pixel centres sit at (+-0.5, +-0.5) on the
        // image plane at distance 1
        let cam = Camera { fov_deg: 90.0, ..Camera::front(4.0, 2, 2) };
        let rays = get_rays(&cam).unwrap();
        let n = 1.0 / (1.5f64).sqrt();
        let expect = [[-0.5, 0.5], [0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]];
        for (r, e) in rays.iter().zip(expect) {
            assert!((r.dir[0] - e[0] * n).abs() < 1e-12);
            assert!((r.dir[1] - e[1] * n).abs() < 1e-12);
            assert!((r.dir[2] + n).abs() < 1e-12);
        }
    }

    #[test]
    fn inside_camera_enters_at_zero() {
        let (t0, t1) = intersect_box([0.0; 3], [1.0, 0.0, 0.0], [-1.0; 3], [1.0; 3]).unwrap();
        assert_eq!((t0, t1), (0.0, 1.0));
        assert!(intersect_box([0.0, 2.0, 0.0], [1.0, 0.0, 0.0], [-1.0; 3], [1.0; 3]).is_none());
    }
}
