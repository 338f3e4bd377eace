use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub scalar: f64,
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub a: f64,
}

impl ControlPoint {
    pub const fn new(scalar: f64, r: f64, g: f64, b: f64, a: f64) -> Self {
        ControlPoint { scalar, r, g, b, a }
    }
}

/// Piecewise-linear map from `[0, 1]` to RGBA. Serialized as the bare list
/// of control points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ControlPoint>", into = "Vec<ControlPoint>")]
pub struct TransferFunction {
    points: Vec<ControlPoint>,
}

impl TryFrom<Vec<ControlPoint>> for TransferFunction {
    type Error = Error;

    fn try_from(points: Vec<ControlPoint>) -> Result<Self> {
        TransferFunction::new(points)
    }
}

impl From<TransferFunction> for Vec<ControlPoint> {
    fn from(tf: TransferFunction) -> Self {
        tf.points
    }
}

impl TransferFunction {
    pub fn new(points: Vec<ControlPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::argument("a transfer function needs at least two control points"));
        }
        if points[0].scalar != 0.0 || points[points.len() - 1].scalar != 1.0 {
            return Err(Error::argument("control points must start at scalar 0 and end at 1"));
        }
        if points.windows(2).any(|w| !(w[0].scalar <= w[1].scalar)) {
            return Err(Error::argument("control points must be sorted by scalar"));
        }
        for p in &points {
            if [p.r, p.g, p.b, p.a].iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::argument(format!("control point {p:?} has a channel outside [0, 1]")));
            }
        }
        Ok(TransferFunction { points })
    }

    pub fn points(&self) -> &[ControlPoint] {
        &self.points
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// RGBA at `v`, clamped into `[0, 1]`.
    pub fn eval(&self, v: f64) -> [f64; 4] {
        let v = v.clamp(0.0, 1.0);
        let p = &self.points;
        let i = p.partition_point(|c| c.scalar <= v).clamp(1, p.len() - 1);
        let (a, b) = (&p[i - 1], &p[i]);
        let w = if b.scalar > a.scalar { (v - a.scalar) / (b.scalar - a.scalar) } else { 1.0 };
        let lerp = |x: f64, y: f64| x + (y - x) * w;
        [lerp(a.r, b.r), lerp(a.g, b.g), lerp(a.b, b.b), lerp(a.a, b.a)]
    }

    /// Fully transparent everywhere.
    pub fn transparent() -> Self {
        Self::new(vec![ControlPoint::new(0.0, 0.0, 0.0, 0.0, 0.0), ControlPoint::new(1.0, 0.0, 0.0, 0.0, 0.0)]).unwrap()
    }

    /// Opaque white everywhere.
    pub fn opaque_white() -> Self {
        Self::new(vec![ControlPoint::new(0.0, 1.0, 1.0, 1.0, 1.0), ControlPoint::new(1.0, 1.0, 1.0, 1.0, 1.0)]).unwrap()
    }

    /// Grey ramp with opacity proportional to the value.
    pub fn grayscale() -> Self {
        Self::new(vec![ControlPoint::new(0.0, 0.0, 0.0, 0.0, 0.0), ControlPoint::new(1.0, 1.0, 1.0, 1.0, 0.6)]).unwrap()
    }

    /// Black-red-yellow-white ramp, transparent at zero.
    pub fn hot() -> Self {
        Self::new(vec![
            ControlPoint::new(0.0, 0.0, 0.0, 0.0, 0.0),
            ControlPoint::new(0.3, 0.8, 0.1, 0.0, 0.05),
            ControlPoint::new(0.7, 1.0, 0.8, 0.1, 0.3),
            ControlPoint::new(1.0, 1.0, 1.0, 1.0, 0.8),
        ])
        .unwrap()
    }

    /// Cool-to-warm diverging ramp, transparent at zero.
    pub fn cool_warm() -> Self {
        Self::new(vec![
            ControlPoint::new(0.0, 0.23, 0.30, 0.75, 0.0),
            ControlPoint::new(0.5, 0.87, 0.87, 0.87, 0.1),
            ControlPoint::new(1.0, 0.71, 0.02, 0.15, 0.7),
        ])
        .unwrap()
    }

    /// Named presets offered by the CLI and the render service.
    pub fn builtin(name: &str) -> Option<Self> {
        Some(match name {
            "transparent" => Self::transparent(),
            "opaque-white" => Self::opaque_white(),
            "grayscale" => Self::grayscale(),
            "hot" => Self::hot(),
            "cool-warm" => Self::cool_warm(),
            _ => return None,
        })
    }

    pub const BUILTIN_NAMES: [&'static str; 5] = ["grayscale", "hot", "cool-warm", "opaque-white", "transparent"];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_and_clamps() {
        let tf = TransferFunction::hot();
        assert_eq!(tf.eval(-3.0), tf.eval(0.0));
        assert_eq!(tf.eval(7.0), [1.0, 1.0, 1.0, 0.8]);
        let mid = tf.eval(0.5);
        assert!((mid[0] - 0.9).abs() < 1e-12 && (mid[3] - 0.175).abs() < 1e-12);
        assert_eq!(tf.eval(0.3), [0.8, 0.1, 0.0, 0.05]);
    }

    #[test]
    fn step_at_duplicate_scalar() {
        let tf = TransferFunction::new(vec![
            ControlPoint::new(0.0, 0.0, 0.0, 0.0, 0.0),
            ControlPoint::new(0.5, 0.0, 0.0, 0.0, 0.0),
            ControlPoint::new(0.5, 1.0, 1.0, 1.0, 1.0),
            ControlPoint::new(1.0, 1.0, 1.0, 1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(tf.eval(0.49)[3], 0.0);
        assert_eq!(tf.eval(0.5)[3], 1.0);
    }

    #[test]
    fn invalid_points_rejected() {
        let p = |s, a| ControlPoint::new(s, 0.0, 0.0, 0.0, a);
        assert!(TransferFunction::new(vec![p(0.0, 0.0)]).is_err());
        assert!(TransferFunction::new(vec![p(0.1, 0.0), p(1.0, 0.0)]).is_err());
        assert!(TransferFunction::new(vec![p(0.0, 0.0), p(0.9, 0.0)]).is_err());
        assert!(TransferFunction::new(vec![p(0.0, 0.0), p(0.7, 0.0), p(0.3, 0.0), p(1.0, 0.0)]).is_err());
        assert!(TransferFunction::new(vec![p(0.0, f64::NAN), p(1.0, 0.0)]).is_err());
        assert!(TransferFunction::new(vec![p(0.0, 1.5), p(1.0, 0.0)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let tf = TransferFunction::cool_warm();
        let text = serde_json::to_string(&tf).unwrap();
        assert!(text.starts_with("[{\"scalar\":0.0"));
        assert_eq!(TransferFunction::from_json(&text).unwrap(), tf);
        assert!(TransferFunction::from_json("[{\"scalar\":0.5,\"r\":0,\"g\":0,\"b\":0,\"a\":0}]").is_err());
    }

    #[test]
    fn builtins_resolve() {
        for name in TransferFunction::BUILTIN_NAMES {
            assert!(TransferFunction::builtin(name).is_some());
        }
        assert!(TransferFunction::builtin("nope").is_none());
    }
}
