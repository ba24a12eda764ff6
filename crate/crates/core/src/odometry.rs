//! Reference victim: scan-to-map ICP over a voxel-hash local map with
//! constant-velocity prediction.
//!
//! Two error metrics are available. Point-to-point uses the closed-form SVD
//! solve. Point-to-plane (the default) uses a plane fitted to each map voxel
//! and falls back to point-to-point for an iteration in which no matched
//! voxel has a usable plane. On sparse, noise-free scans point-to-point is
//! dragged back towards the previous pose by the ring pattern moving with the
//! sensor, which is why it is not the default.

use std::collections::HashMap;

use nalgebra::{Matrix3, Matrix6, Rotation3, Vector6};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{voxel_downsample, voxel_index, PointCloud, RigidPose, Vec3, VoxelIndex};
use crate::metrics::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcpMetric {
    PointToPoint,
    PointToPlane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryParams {
    pub metric: IcpMetric,
    /// Correspondence gate M, metres.
    pub max_corr_dist: f64,
    pub voxel_map_resolution: f64,
    pub scan_voxel: f64,
    pub max_iterations: usize,
    pub convergence_eps: f64,
    pub local_map_radius: f64,
    pub max_points_per_voxel: usize,
    /// Huber threshold in metres; `None` is plain least squares.
    pub huber_delta: Option<f64>,
}

impl Default for OdometryParams {
    fn default() -> Self {
        Self {
            metric: IcpMetric::PointToPlane,
            max_corr_dist: 1.0,
            voxel_map_resolution: 0.5,
            scan_voxel: 0.5,
            max_iterations: 50,
            convergence_eps: 1e-4,
            local_map_radius: 60.0,
            max_points_per_voxel: 20,
            huber_delta: None,
        }
    }
}

impl OdometryParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.max_corr_dist,
            self.voxel_map_resolution,
            self.scan_voxel,
            self.convergence_eps,
            self.local_map_radius,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("odometry parameters must be positive".into()));
        }
        if self.max_iterations == 0 || self.max_points_per_voxel == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations and max_points_per_voxel must be at least 1".into(),
            ));
        }
        if self.huber_delta.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidParameter("huber delta must be positive".into()));
        }
        Ok(())
    }
}

/// Minimum spread (m²) along the second principal axis for a voxel plane.
const MIN_PLANE_SPREAD: f64 = 0.02 * 0.02;
/// Maximum ratio of smallest to middle covariance eigenvalue for a plane.
const MAX_PLANE_FLATNESS: f64 = 0.1;
const MIN_PLANE_POINTS: usize = 5;

#[derive(Debug, Clone, Default)]
struct Voxel {
    points: Vec<Vec3>,
    normal: Option<Vec3>,
}

/// Unit normal of the best-fit plane, if the points are planar and spread
/// out enough in two directions.
pub fn fit_plane(points: &[Vec3]) -> Option<Vec3> {
    if points.len() < MIN_PLANE_POINTS {
        return None;
    }
    let mean = points.iter().sum::<Vec3>() / points.len() as f64;
    let cov = points
        .iter()
        .fold(Matrix3::zeros(), |acc, p| acc + (p - mean) * (p - mean).transpose())
        / points.len() as f64;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l0, l1) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    if l1 < MIN_PLANE_SPREAD || l0 > MAX_PLANE_FLATNESS * l1 {
        return None;
    }
    Some(eig.eigenvectors.column(order[0]).normalize())
}

/// Map point matched to a query, with the plane of its voxel when one fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub point: Vec3,
    pub distance: f64,
    pub normal: Option<Vec3>,
}

/// World-frame voxel hash holding up to `max_points` points per voxel. Each
/// voxel caches the plane fitted to its own points.
#[derive(Debug, Clone)]
pub struct LocalMap {
    resolution: f64,
    max_points: usize,
    voxels: HashMap<VoxelIndex, Voxel>,
}

impl LocalMap {
    pub fn new(resolution: f64, max_points: usize) -> Self {
        Self { resolution, max_points, voxels: HashMap::new() }
    }

    pub fn from_params(params: &OdometryParams) -> Self {
        Self::new(params.voxel_map_resolution, params.max_points_per_voxel)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn max_points_per_voxel(&self) -> usize {
        self.max_points
    }

    pub fn len(&self) -> usize {
        self.voxels.values().map(|v| v.points.len()).sum()
    }

    pub fn voxel_count(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Vec3> {
        self.voxels.values().flat_map(|v| v.points.iter())
    }

    /// Largest per-voxel point count.
    pub fn max_voxel_occupancy(&self) -> usize {
        self.voxels.values().map(|v| v.points.len()).max().unwrap_or(0)
    }

    /// Adds points; a voxel that is already full ignores further points.
    pub fn insert(&mut self, points: &[Vec3]) {
        let mut touched = Vec::new();
        for p in points.iter().filter(|p| p.iter().all(|v| v.is_finite())) {
            let key = voxel_index(p, self.resolution);
            let voxel = self.voxels.entry(key).or_default();
            if voxel.points.len() < self.max_points {
                voxel.points.push(*p);
                touched.push(key);
            }
        }
        self.refit(touched);
    }

    /// Drops every point farther than `radius` from `center`.
    pub fn prune(&mut self, center: &Vec3, radius: f64) {
        let r2 = radius * radius;
        let mut touched = Vec::new();
        self.voxels.retain(|key, v| {
            let before = v.points.len();
            v.points.retain(|p| (p - center).norm_squared() <= r2);
            if v.points.len() != before {
                touched.push(*key);
            }
            !v.points.is_empty()
        });
        self.refit(touched);
    }

    fn refit(&mut self, mut changed: Vec<VoxelIndex>) {
        changed.sort_unstable();
        changed.dedup();
        for key in changed {
            if let Some(v) = self.voxels.get_mut(&key) {
                v.normal = fit_plane(&v.points);
            }
        }
    }

    /// Exact nearest stored point within `max_dist`, searching cube shells of
    /// voxels outward from the query voxel. Ties break on coordinates so the
    /// answer does not depend on hash iteration order.
    pub fn nearest(&self, q: &Vec3, max_dist: f64) -> Option<Neighbor> {
        let (cx, cy, cz) = voxel_index(q, self.resolution);
        let max_ring = (max_dist / self.resolution).ceil() as i64 + 1;
        let mut best: Option<(Vec3, f64, Option<Vec3>)> = None;
        for ring in 0..=max_ring {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    let edge = dx.abs() == ring || dy.abs() == ring;
                    let step = if edge { 1 } else { (2 * ring).max(1) as usize };
                    for dz in (-ring..=ring).step_by(step) {
                        let Some(voxel) = self.voxels.get(&(cx + dx, cy + dy, cz + dz)) else {
                            continue;
                        };
                        for p in &voxel.points {
                            let d = (p - q).norm_squared();
                            let better = match &best {
                                None => true,
                                Some((bp, bd, _)) => {
                                    d < *bd
                                        || (d == *bd
                                            && (p.x, p.y, p.z).partial_cmp(&(bp.x, bp.y, bp.z))
                                                == Some(std::cmp::Ordering::Less))
                                }
                            };
                            if better {
                                best = Some((*p, d, voxel.normal));
                            }
                        }
                    }
                }
            }
            // Unvisited voxels are at least `ring * resolution` away.
            let cleared = ring as f64 * self.resolution;
            if best.is_some_and(|(_, d, _)| d <= cleared * cleared) || cleared > max_dist {
                break;
            }
        }
        best.filter(|(_, d, _)| *d <= max_dist * max_dist)
            .map(|(point, d, normal)| Neighbor { point, distance: d.sqrt(), normal })
    }
}

/// A gated source/target pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: Vec3,
    pub target: Vec3,
    pub distance: f64,
    pub normal: Option<Vec3>,
}

/// Nearest-neighbour pairs that pass the correspondence gate, in source order.
pub fn correspondences(map: &LocalMap, points: &[Vec3], max_corr_dist: f64) -> Vec<Correspondence> {
    points
        .par_iter()
        .map(|p| {
            map.nearest(p, max_corr_dist).map(|n| Correspondence {
                source: *p,
                target: n.point,
                distance: n.distance,
                normal: n.normal,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Weighted least-squares rigid transform mapping `src` onto `dst`
/// (SVD of the cross-covariance, reflection-corrected).
pub fn solve_rigid(src: &[Vec3], dst: &[Vec3], weights: Option<&[f64]>) -> RigidPose {
    assert_eq!(src.len(), dst.len());
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..src.len()).map(w).sum();
    let mu_s = src.iter().enumerate().fold(Vec3::zeros(), |a, (i, p)| a + p * w(i)) / total;
    let mu_d = dst.iter().enumerate().fold(Vec3::zeros(), |a, (i, p)| a + p * w(i)) / total;
    let mut h = Matrix3::zeros();
    for i in 0..src.len() {
        h += (src[i] - mu_s) * (dst[i] - mu_d).transpose() * w(i);
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let d = (v_t.transpose() * u.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, if d < 0.0 { -1.0 } else { 1.0 }));
    let r = v_t.transpose() * fix * u.transpose();
    let rotation = Rotation3::from_matrix_unchecked(r);
    RigidPose::new(rotation, mu_d - rotation * mu_s, 0.0)
}

/// One Gauss–Newton step of point-to-plane alignment, linearised about the
/// weighted centroid of the sources. Unconstrained directions are damped and
/// stay put. The step is shrunk so no source point moves further than
/// `max_step`, the same bound a point-to-point step obeys when every pair
/// lies within the correspondence gate.
pub fn solve_point_to_plane(pairs: &[(Vec3, Vec3, Vec3)], weights: Option<&[f64]>, max_step: f64) -> RigidPose {
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let total: f64 = (0..pairs.len()).map(w).sum();
    let centroid = pairs.iter().enumerate().fold(Vec3::zeros(), |a, (i, p)| a + p.0 * w(i)) / total;
    let mut h = Matrix6::zeros();
    let mut g = Vector6::zeros();
    for (i, (src, dst, n)) in pairs.iter().enumerate() {
        let q = src - centroid;
        let jac = Vector6::new(
            q.y * n.z - q.z * n.y,
            q.z * n.x - q.x * n.z,
            q.x * n.y - q.y * n.x,
            n.x,
            n.y,
            n.z,
        );
        let r = n.dot(&(src - dst));
        h += jac * jac.transpose() * w(i);
        g += jac * (r * w(i));
    }
    let damping = 1e-9 * h.trace().max(1e-12);
    let lhs = h + Matrix6::identity() * damping;
    let mut delta = match lhs.cholesky() {
        Some(ch) => -ch.solve(&g),
        None => return RigidPose::identity(),
    };
    let reach = pairs.iter().map(|p| (p.0 - centroid).norm()).fold(0.0, f64::max);
    let bound = delta.fixed_rows::<3>(0).norm() * reach + delta.fixed_rows::<3>(3).norm();
    if bound > max_step {
        delta *= max_step / bound;
    }
    let omega = Vec3::new(delta[0], delta[1], delta[2]);
    let rotation = Rotation3::new(omega);
    let t = Vec3::new(delta[3], delta[4], delta[5]);
    // x -> R (x - c) + c + t
    RigidPose::new(rotation, centroid + t - rotation * centroid, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Registration {
    pub pose: RigidPose,
    pub inliers: usize,
    pub mean_residual: f64,
    pub iterations: usize,
}

/// Refines `init_guess` so the sensor-frame `scan` aligns with `map`.
pub fn register_scan(
    map: &LocalMap,
    scan: &PointCloud,
    init_guess: &RigidPose,
    params: &OdometryParams,
) -> Result<Registration> {
    if map.is_empty() {
        return Err(Error::EmptyInput("local map"));
    }
    if scan.is_empty() {
        return Err(Error::EmptyInput("scan"));
    }
    let mut pose = *init_guess;
    let mut outcome = Registration { pose, inliers: 0, mean_residual: 0.0, iterations: 0 };
    for it in 0..params.max_iterations {
        let world: Vec<Vec3> = scan.iter().map(|p| pose.transform_point(p)).collect();
        let pairs = correspondences(map, &world, params.max_corr_dist);
        if pairs.is_empty() {
            if it == 0 {
                return Err(Error::RegistrationDegenerate { max_corr_dist: params.max_corr_dist });
            }
            break;
        }
        let weights: Option<Vec<f64>> = params.huber_delta.map(|delta| {
            pairs.iter().map(|c| if c.distance <= delta { 1.0 } else { delta / c.distance }).collect()
        });
        let planar: Vec<(Vec3, Vec3, Vec3, f64)> = match params.metric {
            IcpMetric::PointToPoint => Vec::new(),
            IcpMetric::PointToPlane => pairs
                .iter()
                .enumerate()
                .filter_map(|(i, c)| {
                    let w = weights.as_ref().map_or(1.0, |w| w[i]);
                    c.normal.map(|n| (c.source, c.target, n, w))
                })
                .collect(),
        };
        let update = if planar.is_empty() {
            let src: Vec<Vec3> = pairs.iter().map(|c| c.source).collect();
            let dst: Vec<Vec3> = pairs.iter().map(|c| c.target).collect();
            solve_rigid(&src, &dst, weights.as_deref())
        } else {
            let triples: Vec<_> = planar.iter().map(|&(s, d, n, _)| (s, d, n)).collect();
            let w: Vec<f64> = planar.iter().map(|p| p.3).collect();
            solve_point_to_plane(&triples, Some(&w), params.max_corr_dist)
        };
        if !update.translation.iter().all(|v| v.is_finite())
            || !update.rotation.matrix().iter().all(|v| v.is_finite())
        {
            return Err(Error::RegistrationDegenerate { max_corr_dist: params.max_corr_dist });
        }
        pose = update.compose(&pose).with_timestamp(init_guess.timestamp);
        outcome = Registration {
            pose,
            inliers: pairs.len(),
            mean_residual: pairs.iter().map(|c| c.distance).sum::<f64>() / pairs.len() as f64,
            iterations: it + 1,
        };
        if update.translation.norm() < params.convergence_eps {
            break;
        }
    }
    outcome.pose = pose;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedScan {
    pub timestamp: f64,
    /// Sensor-frame points.
    pub cloud: PointCloud,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFitness {
    pub inliers: usize,
    pub mean_residual: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryResult {
    pub trajectory: Trajectory,
    pub per_frame_fitness: Vec<FrameFitness>,
}

impl OdometryResult {
    pub fn degenerate_frames(&self) -> usize {
        self.per_frame_fitness.iter().filter(|f| f.degenerate).count()
    }
}

/// Sequential scan-to-map odometry. The first pose is the identity; a frame
/// whose registration fails keeps its predicted pose and is flagged.
pub fn run_odometry(scans: &[TimedScan], params: &OdometryParams) -> Result<OdometryResult> {
    params.validate()?;
    if scans.len() < 2 {
        return Err(Error::InvalidParameter("odometry needs at least 2 frames".into()));
    }
    let mut map = LocalMap::from_params(params);
    let mut poses: Vec<RigidPose> = Vec::with_capacity(scans.len());
    let mut fitness = Vec::with_capacity(scans.len());

    for scan in scans {
        let ds = voxel_downsample(&scan.cloud, params.scan_voxel)?;
        let predicted = match poses.as_slice() {
            [] => RigidPose::identity(),
            [only] => *only,
            [.., prev, last] => last.compose(&prev.inverse().compose(last)),
        }
        .with_timestamp(scan.timestamp);

        let (pose, fit) = if poses.is_empty() {
            (predicted, FrameFitness { inliers: 0, mean_residual: 0.0, degenerate: false })
        } else {
            match register_scan(&map, &ds, &predicted, params) {
                Ok(reg) => (
                    reg.pose,
                    FrameFitness { inliers: reg.inliers, mean_residual: reg.mean_residual, degenerate: false },
                ),
                Err(Error::RegistrationDegenerate { .. }) | Err(Error::EmptyInput(_)) => {
                    (predicted, FrameFitness { inliers: 0, mean_residual: 0.0, degenerate: true })
                }
                Err(e) => return Err(e),
            }
        };

        // The full-resolution scan goes into the map; only registration
        // uses the downsampled one.
        let world: Vec<Vec3> = scan.cloud.iter().map(|p| pose.transform_point(p)).collect();
        map.insert(&world);
        map.prune(&pose.translation, params.local_map_radius);
        poses.push(pose);
        fitness.push(fit);
    }
    Ok(OdometryResult { trajectory: Trajectory::new(poses)?, per_frame_fitness: fitness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;

    #[test]
    fn map_caps_voxels() {
        let mut map = LocalMap::new(1.0, 3);
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.05 * i as f64, 0.5, 0.5)).collect();
        map.insert(&pts);
        assert_eq!(map.len(), 3);
        assert_eq!(map.voxel_count(), 1);
    }

    #[test]
    fn prune_by_radius() {
        let mut map = LocalMap::new(1.0, 5);
        map.insert(&[Vec3::new(1.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 0.0)]);
        map.prune(&Vec3::zeros(), 5.0);
        assert_eq!(map.points().copied().collect::<Vec<_>>(), vec![Vec3::new(1.0, 0.0, 0.0)]);
    }

    #[test]
    fn nearest_crosses_voxels() {
        let mut map = LocalMap::new(0.5, 20);
        map.insert(&[Vec3::new(0.9, 0.0, 0.0), Vec3::new(-0.3, 0.0, 0.0)]);
        let n = map.nearest(&Vec3::new(0.45, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(n.point, Vec3::new(0.9, 0.0, 0.0));
        assert!((n.distance - 0.45).abs() < 1e-12);
        assert!(map.nearest(&Vec3::new(5.0, 0.0, 0.0), 1.0).is_none());
    }

    #[test]
    fn degenerate_when_map_far_away() {
        let mut map = LocalMap::new(0.5, 20);
        map.insert(&[Vec3::new(100.0, 0.0, 0.0)]);
        let scan = PointCloud::new(vec![Vec3::zeros()], Frame::Sensor);
        let err = register_scan(&map, &scan, &RigidPose::identity(), &OdometryParams::default());
        assert!(matches!(err, Err(Error::RegistrationDegenerate { .. })));
    }

    #[test]
    fn needs_two_frames() {
        let one = vec![TimedScan { timestamp: 0.0, cloud: PointCloud::empty(Frame::Sensor) }];
        assert!(run_odometry(&one, &OdometryParams::default()).is_err());
    }

    #[test]
    fn params_validation() {
        let bad = OdometryParams { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OdometryParams { max_corr_dist: -1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    /// Two walls and a floor meeting at the origin, sampled every 0.1 m.
    fn corner() -> Vec<Vec3> {
        let mut pts = Vec::new();
        for i in 0..30 {
            for j in 0..30 {
                let (a, b) = (0.05 + 0.1 * i as f64, 0.05 + 0.1 * j as f64);
                pts.push(Vec3::new(a, b, 0.0));
                pts.push(Vec3::new(0.0, a, b));
                pts.push(Vec3::new(a, 0.0, b));
            }
        }
        pts
    }

    #[test]
    fn scan_matching_its_map_stays_put() {
        let truth = RigidPose::from_yaw(Vec3::new(0.3, -0.2, 0.1), 0.2, 0.0);
        let pts = corner();
        let mut map = LocalMap::new(0.5, 20);
        map.insert(&pts);
        let scan: Vec<Vec3> = map.points().map(|p| truth.inverse().transform_point(p)).collect();
        let reg = register_scan(&map, &PointCloud::new(scan, Frame::Sensor), &truth, &OdometryParams::default()).unwrap();
        assert!((reg.pose.translation - truth.translation).norm() < 1e-9);
        assert!((reg.pose.rotation.matrix() - truth.rotation.matrix()).norm() < 1e-9);
    }

    #[test]
    fn corner_offset_recovered() {
        let offset = Vec3::new(0.1, 0.05, 0.0);
        let pts = corner();
        let mut map = LocalMap::new(0.5, 100);
        map.insert(&pts);
        let scan: Vec<Vec3> = pts.iter().step_by(7).map(|p| p + offset).collect();
        let params = OdometryParams { max_iterations: 200, convergence_eps: 1e-7, ..Default::default() };
        let reg = register_scan(&map, &PointCloud::new(scan, Frame::Sensor), &RigidPose::identity(), &params).unwrap();
        assert!((reg.pose.translation + offset).norm() < 1e-3, "{:?}", reg.pose.translation);
    }

    #[test]
    fn zero_motion_stays_at_identity() {
        // One return per scan voxel, so downsampling leaves the scan intact.
        let pts: Vec<Vec3> = corner().iter().step_by(5).map(|p| (p / 0.5).map(|c| c.floor() * 0.5 + 0.25)).collect();
        let mut pts = voxel_downsample(&PointCloud::new(pts, Frame::Sensor), 0.5).unwrap().points;
        pts.sort_by(|a, b| a.as_slice().partial_cmp(b.as_slice()).unwrap());
        let cloud = PointCloud::new(pts, Frame::Sensor);
        let scans: Vec<TimedScan> =
            (0..5).map(|i| TimedScan { timestamp: 0.1 * i as f64, cloud: cloud.clone() }).collect();
        let out = run_odometry(&scans, &OdometryParams::default()).unwrap();
        assert_eq!(out.trajectory.len(), 5);
        for p in out.trajectory.poses() {
            assert!(p.translation.norm() < 1e-6);
            assert!((p.rotation.matrix() - Matrix3::identity()).norm() < 1e-6);
        }
        assert_eq!(run_odometry(&scans, &OdometryParams::default()).unwrap(), out);
    }

    #[test]
    fn plane_fit_needs_spread() {
        let flat: Vec<Vec3> = (0..25).map(|i| Vec3::new(0.1 * (i % 5) as f64, 0.1 * (i / 5) as f64, 0.0)).collect();
        let n = fit_plane(&flat).unwrap();
        assert!((n.z.abs() - 1.0).abs() < 1e-12);
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::new(0.1 * i as f64, 0.0, 0.0)).collect();
        assert!(fit_plane(&line).is_none());
        assert!(fit_plane(&flat[..4]).is_none());
    }

    #[test]
    fn plane_step_is_bounded() {
        // Residuals of 10 m along the normal would ask for a 10 m step.
        let pairs: Vec<(Vec3, Vec3, Vec3)> = (0..20)
            .map(|i| {
                let s = Vec3::new(0.1 * i as f64, 0.05 * i as f64, 0.0);
                (s, s + Vec3::new(0.0, 0.0, 10.0), Vec3::z())
            })
            .collect();
        let step = solve_point_to_plane(&pairs, None, 1.0);
        for (s, _, _) in &pairs {
            assert!((step.transform_point(s) - s).norm() <= 1.0 + 1e-9);
        }
        let free = solve_point_to_plane(&pairs, None, 100.0);
        assert!((free.translation.z - 10.0).abs() < 1e-6);
    }
}
