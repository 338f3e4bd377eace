use super::InrModel;
use crate::error::{Error, Result};
use crate::feature::FeatureBoundingBox;
use crate::scalar::Scalar;
use crate::volume::{KeyFrameSet, ScalarGrid, Volume4D};

pub fn mse(a: &ScalarGrid, b: &ScalarGrid) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::argument(format!("grid dims {:?} and {:?} differ", a.dims, b.dims)));
    }
    let sum: f64 = a.data.iter().zip(&b.data).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(sum / a.data.len() as f64)
}

fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

/// Peak signal-to-noise ratio for values in `[0, 1]`; identical grids give
/// `f64::INFINITY`.
pub fn psnr(a: &ScalarGrid, b: &ScalarGrid) -> Result<f64> {
    mse(a, b).map(psnr_from_mse)
}

/// Evaluates the model at every voxel inside the FBB at normalized time `t`;
/// voxels outside the box are 0.
pub fn reconstruct_frame<S: Scalar>(
    model: &InrModel<S>,
    t: f64,
    dims: [usize; 3],
    fbb: &FeatureBoundingBox,
) -> Result<ScalarGrid> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::bounds(format!("time {t} outside [-1, 1]")));
    }
    if dims != fbb.volume_dims {
        return Err(Error::argument(format!("dims {dims:?} do not match the FBB volume {:?}", fbb.volume_dims)));
    }
    let (lo, hi) = (fbb.bounds.min, fbb.bounds.max);
    let mut voxels = Vec::new();
    let mut queries = Vec::new();
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let q = fbb.vertex_to_local([x, y, z]);
                voxels.push([x, y, z]);
                queries.push([S::of(t), S::of(q[0]), S::of(q[1]), S::of(q[2])]);
            }
        }
    }
    let values = model.forward(&queries)?;
    let mut grid = ScalarGrid::zeros(dims);
    for (v, p) in voxels.into_iter().zip(values) {
        grid.set(v, p.to_f32_lossy());
    }
    Ok(grid)
}

/// PSNR of the reconstructions of all key frames against the ground truth,
/// pooled over every voxel of every key frame.
pub fn volume_psnr<S: Scalar>(
    model: &InrModel<S>,
    vol: &Volume4D,
    keys: &KeyFrameSet,
    fbb: &FeatureBoundingBox,
) -> Result<f64> {
    let mut total = 0.0;
    for (k, &frame) in keys.indices().iter().enumerate() {
        let rec = reconstruct_frame(model, keys.time(k), vol.dims(), fbb)?;
        total += mse(&rec, vol.frame(frame))?;
    }
    Ok(psnr_from_mse(total / keys.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::super::tests::tiny_config;
    use super::super::{init_model, MlpConfig};
    use super::*;
    use crate::feature::VoxelBox;

    #[test]
    fn closed_form_psnr() {
        let a = ScalarGrid::zeros([10, 10, 1]);
        let b = ScalarGrid { dims: [10, 10, 1], data: vec![0.1; 100] };
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-6);
        let c = ScalarGrid { dims: [10, 10, 1], data: vec![0.01; 100] };
        assert!((psnr(&a, &c).unwrap() - 40.0).abs() < 1e-5);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &ScalarGrid::zeros([10, 1, 10])).is_err());
    }

    fn fbb() -> FeatureBoundingBox {
        FeatureBoundingBox { bounds: VoxelBox { min: [1, 0, 2], max: [5, 3, 7] }, volume_dims: [8, 6, 9] }
    }

    #[test]
    fn zero_model_reconstructs_zero() {
        let mut m = init_model::<f32>(tiny_config(), &MlpConfig { hidden_layers: 1, neurons: 4 }, 0).unwrap();
        for l in &mut m.mlp.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let g = reconstruct_frame(&m, 0.3, [8, 6, 9], &fbb()).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outside_box_is_zero_and_inside_is_model() {
        let mut m = init_model::<f64>(tiny_config(), &MlpConfig { hidden_layers: 1, neurons: 4 }, 1).unwrap();
        m.mlp.layers[1].bias[0] = 0.75;
        for l in &mut m.mlp.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
        }
        let b = fbb();
        let g = reconstruct_frame(&m, -1.0, [8, 6, 9], &b).unwrap();
        for z in 0..9 {
            for y in 0..6 {
                for x in 0..8 {
                    let expected = if b.bounds.contains([x, y, z]) { 0.75 } else { 0.0 };
                    assert_eq!(g.get([x, y, z]), expected);
                }
            }
        }
        assert!(reconstruct_frame(&m, 1.5, [8, 6, 9], &b).is_err());
    }

    #[test]
    fn reconstruction_is_continuous_in_time() {
        let m = init_model::<f64>(tiny_config(), &MlpConfig { hidden_layers: 2, neurons: 8 }, 2).unwrap();
        let b = fbb();
        let base = reconstruct_frame(&m, 0.0, [8, 6, 9], &b).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let d = mse(&base, &reconstruct_frame(&m, eps, [8, 6, 9], &b).unwrap()).unwrap();
            assert!(d <= prev);
            prev = d;
        }
        assert!(prev < 1e-12);
    }
}
