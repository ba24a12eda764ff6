//! Cross-checks against independent reference computations.

use mirrorbench_core::geometry::{Frame, PointCloud, Polyline, RigidPose, Vec3};
use mirrorbench_core::metrics::chamfer_distance;
use mirrorbench_core::mirror::{ray_plane_u, reflect_point, ActuationSchedule, Mirror};
use mirrorbench_core::objective::evaluate_objective;
use mirrorbench_core::optimizer::{optimize_placement, OptimizerConfig, Placement, SearchSpace};
use mirrorbench_core::world::{Aabb, ScanFrame, WorldModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

/// Nearest hit found by intersecting each of the six face planes and keeping
/// those whose hit point lies on the face.
fn face_oracle(b: &Aabb, o: &Vec3, d: &Vec3) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..3 {
        if d[axis] == 0.0 {
            continue;
        }
        for bound in [b.min[axis], b.max[axis]] {
            let t = (bound - o[axis]) / d[axis];
            if t <= 0.0 {
                continue;
            }
            let p = o + d * t;
            let on_face = (0..3)
                .filter(|&k| k != axis)
                .all(|k| p[k] >= b.min[k] - 1e-12 && p[k] <= b.max[k] + 1e-12);
            if on_face && best.is_none_or(|x| t < x) {
                best = Some(t);
            }
        }
    }
    best
}

#[test]
fn slab_test_matches_face_intersection() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = 0;
    for _ in 0..5000 {
        let lo = random_vec(&mut rng, 5.0);
        let size = Vec3::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
        let b = Aabb::new(lo, lo + size).unwrap();
        let o = random_vec(&mut rng, 10.0);
        // Aim most rays at a point near the box so hits are common.
        let target = lo + size.component_mul(&Vec3::new(rng.random(), rng.random(), rng.random())) * 1.4
            - size * 0.2;
        let d = if rng.random_bool(0.7) { (target - o).normalize() } else { random_vec(&mut rng, 1.0).normalize() };
        let inside = b.signed_distance(&o) < 0.0;
        let world = WorldModel { obstacles: vec![b], ground_z: None };
        match (world.cast(&o, &d), face_oracle(&b, &o, &d)) {
            (Some(t), Some(u)) if !inside => {
                assert!((t - u).abs() < 1e-9, "{t} vs {u}");
                assert!(b.signed_distance(&(o + d * t)).abs() < 1e-9);
                hits += 1;
            }
            (None, None) => {}
            (t, _) if inside => assert!(t.is_some()),
            other => panic!("slab {other:?} for origin {o:?} dir {d:?}"),
        }
    }
    assert!(hits > 1000, "{hits} hits");
}

fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let one_way = |x: &[Vec3], y: &[Vec3]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    one_way(a, b) + one_way(b, a)
}

#[test]
fn chamfer_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (na, nb, spread, shift) in [(1, 1, 1.0, 0.0), (50, 300, 2.0, 0.0), (400, 30, 10.0, 25.0), (1000, 1000, 0.3, 1.0)] {
        let a: Vec<Vec3> = (0..na).map(|_| random_vec(&mut rng, spread)).collect();
        let b: Vec<Vec3> = (0..nb).map(|_| random_vec(&mut rng, spread) + Vec3::new(shift, 0.0, 0.0)).collect();
        let got = chamfer_distance(&PointCloud::new(a.clone(), Frame::World), &PointCloud::new(b.clone(), Frame::World))
            .unwrap();
        let want = brute_chamfer(&a, &b);
        assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn plane_hit_agrees_with_mirror_frame() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let yaw = rng.random_range(-3.0..3.0);
        let m = Mirror::new(random_vec(&mut rng, 5.0), yaw, 1.0, 1.0).unwrap();
        let (s, p) = (random_vec(&mut rng, 10.0), random_vec(&mut rng, 10.0));
        // Depth along the normal, computed without the library.
        let n = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        let (ds, dp) = ((s - m.center).dot(&n), (p - m.center).dot(&n));
        if (ds - dp).abs() < 1e-6 {
            continue;
        }
        let u = ray_plane_u(&s, &p, &m).unwrap();
        assert!((u - ds / (ds - dp)).abs() < 1e-9 * u.abs().max(1.0));
        let g = reflect_point(&p, &m);
        assert!(((g - m.center).dot(&n) + dp).abs() < 1e-9);
    }
}

#[test]
fn single_frame_objective_by_hand() {
    // With 4 m voxels a and b share a voxel: b is hidden behind the mirror and
    // a's ghost lands in that same voxel, so both ratios are 1.
    let a = Vec3::new(4.5, 0.2, 0.2);
    let b = Vec3::new(5.5, 0.2, 0.2);
    let frame = ScanFrame {
        index: 0,
        gt_pose: RigidPose::identity(),
        raw: PointCloud::new(vec![a, b], Frame::Sensor),
    };
    let mirror = Mirror::new(Vec3::new(5.0, 0.0, 0.0), std::f64::consts::PI, 2.0, 2.0).unwrap();
    let trace = evaluate_objective(&[frame], &mirror, &ActuationSchedule::fixed(), 0.3, 4.0, 100.0).unwrap();
    let f = &trace.per_frame[0];
    assert_eq!((f.eta_occ, f.eta_refl), (1.0, 1.0));
    assert_eq!((f.n_occ, f.n_refl), (1, 1));
    assert!((trace.score - 0.6).abs() < 1e-12);
}

#[test]
fn optimizer_finds_a_closed_form_peak() {
    let route = Polyline::new(vec![Vec3::new(-5.0, 0.0, 0.0), Vec3::new(15.0, 0.0, 0.0)]).unwrap();
    let space = SearchSpace { x_bounds: (0.0, 10.0), y_bounds: (-4.0, 4.0), theta_bounds: (-3.0, 3.0), min_route_distance: 1.5 };
    let peak = Placement { x: 6.0, y: 2.5, theta: 1.0 };
    let f = |p: &Placement| -((p.x - peak.x).powi(2) + (p.y - peak.y).powi(2) + (p.theta - peak.theta).powi(2));
    for seed in 0..10 {
        let cfg = OptimizerConfig { budget: 300, seed, ..OptimizerConfig::default() };
        let r = optimize_placement(&space, &route, &cfg, f).unwrap();
        let p = r.best_params;
        let err = ((p.x - peak.x).powi(2) + (p.y - peak.y).powi(2) + (p.theta - peak.theta).powi(2)).sqrt();
        assert!(err < 0.1, "seed {seed}: {p:?}");
    }
}
