use super::*;
use crate::feature::OccupancyGrid;

const BLACK: [f64; 4] = [0.0, 0.0, 0.0, 1.0];

fn block_occupancy(n: u32, lo: u32, hi: u32) -> OccupancyGrid {
    let mut g = OccupancyGrid::empty([n; 3], 0.0);
    for z in lo..hi {
        for y in lo..hi {
            for x in lo..hi {
                g.set([x, y, z], true);
            }
        }
    }
    g
}

fn blob(_: f64, p: Vec3) -> f64 {
    (-(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) * 3.0).exp()
}

fn oblique(w: u32, h: u32) -> Camera {
    Camera { eye: [2.5, 1.5, 3.0], target: [0.0; 3], up: [0.0, 1.0, 0.0], fov_deg: 45.0, width: w, height: h }
}

#[test]
fn arm_pace_examples() {
    assert_eq!(arm_pace(1000, 1000), 1);
    assert_eq!(arm_pace(1000, 10), 64);
    assert_eq!(arm_pace(1000, 100), 10);
    assert_eq!(arm_pace(5, 1000), 1);
}

#[test]
fn empty_occupancy_kills_ray_without_samples() {
    let occ = OccupancyGrid::empty([8; 3], 0.0);
    let mut ray = RayState::new((0, 0), [0.0, 0.0, 3.0], [0.0, 0.0, -1.0], Some((2.0, 4.0)));
    assert!(next_samples(&mut ray, 16, Some(&occ), 0.01, 1000).is_empty());
    assert!(!ray.alive);
}

#[test]
fn full_occupancy_yields_uniform_samples() {
    let occ = OccupancyGrid::full([8; 3], 0.0);
    let mut ray = RayState::new((0, 0), [0.1, 0.2, 3.0], [0.0, 0.0, -1.0], Some((2.0, 4.0)));
    let s = next_samples(&mut ray, 16, Some(&occ), 0.05, 1000);
    assert_eq!(s.len(), 16);
    for (k, p) in s.iter().enumerate() {
        assert!((p[2] - (1.0 - 0.05 * k as f64)).abs() < 1e-12);
    }
    assert!(ray.alive);
}

#[test]
fn r_max_limits_samples_per_ray() {
    let mut ray = RayState::new((0, 0), [0.0, 0.0, 3.0], [0.0, 0.0, -1.0], Some((2.0, 4.0)));
    let s = next_samples(&mut ray, 64, None, 0.01, 10);
    assert_eq!(s.len(), 10);
    assert!(!ray.alive);
}

/// Skipped streaming equals a plain march filtered to occupied cells.
#[test]
fn skipping_matches_filtered_plain_march() {
    let mut occ = OccupancyGrid::empty([10; 3], 0.0);
    for (x, y, z) in [(1, 4, 5), (2, 4, 5), (6, 4, 5), (7, 5, 5), (9, 4, 4)] {
        occ.set([x, y, z], true);
    }
    let origin = [-3.0, -0.15, 0.1];
    let dir = super::camera::normalize([1.0, 0.03, -0.02]);
    let span = intersect_box(origin, dir, [-1.0; 3], [1.0; 3]);
    let step = 0.013;
    let mut plain = RayState::new((0, 0), origin, dir, span);
    let expected: Vec<Vec3> = next_samples(&mut plain, usize::MAX, None, step, usize::MAX)
        .into_iter()
        .filter(|&p| occ.occupied_at(p))
        .collect();
    assert!(expected.len() > 10);
    let mut ray = RayState::new((0, 0), origin, dir, span);
    let mut got = Vec::new();
    while ray.alive {
        got.extend(next_samples(&mut ray, 3, Some(&occ), step, usize::MAX));
    }
    assert_eq!(got, expected);
    // spacing inside a run is exactly one step, across a gap it jumps
    let gaps: Vec<f64> = got.windows(2).map(|w| super::camera::dot(super::camera::sub(w[1], w[0]), dir)).collect();
    assert!(gaps.iter().any(|&g| g > 2.0 * step));
    assert!(gaps.iter().filter(|&&g| g < 1.5 * step).all(|&g| (g - step).abs() < 1e-9));
}

#[test]
fn transparent_tf_shows_background() {
    let bg = [0.2, 0.3, 0.4, 1.0];
    let out =
        render(&FnField(blob), 0.0, &oblique(9, 7), &TransferFunction::transparent(), &ArmConfig::default(), None, bg)
            .unwrap();
    assert!(out.image.pixels.iter().all(|p| *p == [0.2, 0.3, 0.4, 1.0]));
}

#[test]
fn camera_facing_away_renders_background() {
    let cam = Camera { target: [0.0, 0.0, 9.0], ..Camera::front(4.0, 5, 5) };
    let out = render(&FnField(blob), 0.0, &cam, &TransferFunction::opaque_white(), &ArmConfig::default(), None, BLACK)
        .unwrap();
    assert!(out.image.pixels.iter().all(|p| *p == [0.0, 0.0, 0.0, 1.0]));
    assert_eq!(out.stats.inference_calls, 0);
}

/// Length of the ray segment inside occupied cells, by exact slab tests.
fn occupied_path_length(occ: &OccupancyGrid, origin: Vec3, dir: Vec3) -> f64 {
    occ.iter_set()
        .map(|c| {
            let (lo, hi) = occ.cell_bounds(c);
            intersect_box(origin, dir, lo, hi).map_or(0.0, |(a, b)| b - a)
        })
        .sum()
}

#[test]
fn opaque_white_draws_the_occupancy_silhouette() {
    let occ = block_occupancy(8, 3, 6);
    let cam = oblique(24, 20);
    let arm = ArmConfig { step: Some(0.01), ..Default::default() };
    let out = render(&FnField(blob), 0.0, &cam, &TransferFunction::opaque_white(), &arm, Some(&occ), BLACK).unwrap();
    let rays = get_rays(&cam).unwrap();
    let mut checked = 0;
    for (ray, px) in rays.iter().zip(&out.image.pixels) {
        let len = occupied_path_length(&occ, ray.origin, ray.dir);
        if len == 0.0 {
            assert_eq!(*px, [0.0, 0.0, 0.0, 1.0]);
            checked += 1;
        } else if len > 2.0 * 0.01 {
            assert_eq!(*px, [1.0, 1.0, 1.0, 1.0]);
            checked += 1;
        }
    }
    assert!(checked > 400);
}

#[test]
fn arm_and_fixed_pace_are_bit_identical() {
    let occ = block_occupancy(8, 1, 7);
    let cam = oblique(20, 16);
    let tf = TransferFunction::hot();
    let arm = ArmConfig::default();
    let a = render(&FnField(blob), 0.0, &cam, &tf, &arm, Some(&occ), BLACK).unwrap();
    let f = render(&FnField(blob), 0.0, &cam, &tf, &ArmConfig::fixed_pace(), Some(&occ), BLACK).unwrap();
    let small = render(
        &FnField(blob),
        0.0,
        &cam,
        &tf,
        &ArmConfig { sample_budget: Some(37), pace_cap: 5, ..arm.clone() },
        Some(&occ),
        BLACK,
    )
    .unwrap();
    assert_eq!(a.image, f.image);
    assert_eq!(a.image, small.image);
    assert!(a.stats.inference_calls <= f.stats.inference_calls);
    assert!(a.stats.inference_calls < f.stats.inference_calls);
}

#[test]
fn arm_trace_is_monotone() {
    let cam = oblique(30, 22);
    let out =
        render(&FnField(blob), 0.0, &cam, &TransferFunction::grayscale(), &ArmConfig::default(), None, BLACK).unwrap();
    let trace = &out.stats.trace;
    assert!(trace.len() > 2);
    for w in trace.windows(2) {
        assert!(w[1].0 <= w[0].0, "alive count rose: {trace:?}");
        assert!(w[1].1 >= w[0].1, "pace fell: {trace:?}");
    }
    assert!(trace.iter().all(|&(_, s)| (1..=PACE_CAP).contains(&s)));
}

#[test]
fn occupancy_skipping_is_conservative() {
    let mut occ = block_occupancy(8, 2, 6);
    occ.set([0, 0, 0], true);
    occ.set([3, 3, 3], false);
    // the field is zero exactly where the grid is empty and the TF is clear at zero
    let field = FnField(|_: f64, p: Vec3| if occ.occupied_at(p) { 0.3 + 0.5 * blob(0.0, p) } else { 0.0 });
    let cam = oblique(26, 21);
    let tf = TransferFunction::hot();
    let on = render(&field, 0.0, &cam, &tf, &ArmConfig::default(), Some(&occ), BLACK).unwrap();
    let off = render(&field, 0.0, &cam, &tf, &ArmConfig::default(), None, BLACK).unwrap();
    for (a, b) in on.image.pixels.iter().zip(&off.image.pixels) {
        for c in 0..4 {
            assert!((a[c] - b[c]).abs() <= 1e-6);
        }
    }
    assert!(on.stats.samples_evaluated < off.stats.samples_evaluated);
}

#[test]
fn accumulated_opacity_stays_bounded() {
    let cam = oblique(12, 12);
    let arm =
        ArmConfig { termination_opacity: 1.0, step: Some(0.05), reference_step: Some(0.001), ..Default::default() };
    let out = render(&FnField(blob), 0.0, &cam, &TransferFunction::opaque_white(), &arm, None, [0.0; 4]).unwrap();
    assert!(out.image.pixels.iter().all(|p| p[3] >= 0.0 && p[3] <= 1.0));
}

#[test]
fn non_finite_values_name_the_pixel() {
    let cam = Camera::front(4.0, 5, 5);
    let field = FnField(|_: f64, p: Vec3| if p[0].abs() < 0.1 && p[1].abs() < 0.1 { f64::NAN } else { 0.0 });
    match render(&field, 0.0, &cam, &TransferFunction::hot(), &ArmConfig::default(), None, BLACK) {
        Err(crate::Error::Render { x: 2, y: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn global_sample_cap_stops_everything() {
    let cam = oblique(10, 10);
    let arm = ArmConfig { global_sample_cap: true, max_samples_per_ray: Some(500), ..ArmConfig::fixed_pace() };
    let out = render(&FnField(blob), 0.0, &cam, &TransferFunction::grayscale(), &arm, None, BLACK).unwrap();
    let evaluated = out.stats.samples_evaluated;
    assert!((500..600).contains(&evaluated), "{evaluated}");
}

#[test]
fn key_time_render_equals_plain_render() {
    let a = block_occupancy(8, 1, 4).with_frame_time(-1.0);
    let b = block_occupancy(8, 4, 7).with_frame_time(1.0);
    let keys = [a.clone(), b];
    let cam = oblique(16, 12);
    let tf = TransferFunction::hot();
    let arm = ArmConfig::default();
    let sup = render_supersampled_time(&FnField(blob), -1.0, &keys, &cam, &tf, &arm, BLACK).unwrap();
    let plain = render(&FnField(blob), -1.0, &cam, &tf, &arm, Some(&a), BLACK).unwrap();
    assert_eq!(sup.image, plain.image);
    assert!(render_supersampled_time(&FnField(blob), 0.0, &keys, &cam, &tf, &arm, BLACK).is_ok());
    assert!(occupancy_at(&keys[..1], 0.5).is_err());
}

#[test]
fn grid_field_interpolates_frames() {
    let g0 = crate::volume::ScalarGrid { dims: [2, 2, 2], data: vec![0.0; 8] };
    let g1 = crate::volume::ScalarGrid { dims: [2, 2, 2], data: vec![1.0; 8] };
    let f = GridField { frames: vec![(-1.0, &g0), (1.0, &g1)] };
    let v = f.eval(0.5, &[[0.0; 3], [1.0, -1.0, 0.3]]).unwrap();
    assert!((v[0] - 0.75).abs() < 1e-12 && (v[1] - 0.75).abs() < 1e-12);
}
