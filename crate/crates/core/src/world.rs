//! Synthetic box world and a grid raycasting LiDAR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Frame, PointCloud, Polyline, RigidPose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(min[i] < max[i])) {
            return Err(Error::InvalidParameter(format!(
                "box min {min:?} must be below max {max:?} on every axis"
            )));
        }
        Ok(Self { min, max })
    }

    /// Slab test. Returns the first positive ray parameter, or the exit
    /// parameter when the origin is inside the box.
    #[inline]
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut t0 = (self.min[i] - origin[i]) * inv;
            let mut t1 = (self.max[i] - origin[i]) * inv;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_near = t_near.max(t0);
            t_far = t_far.min(t1);
            if t_near > t_far {
                return None;
            }
        }
        if t_near > 0.0 {
            Some(t_near)
        } else if t_far > 0.0 {
            Some(t_far)
        } else {
            None
        }
    }

    /// Signed distance to the box surface (negative inside).
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        let center = (self.min + self.max) * 0.5;
        let half = (self.max - self.min) * 0.5;
        let q = (p - center).abs() - half;
        let outside = q.sup(&Vec3::zeros()).norm();
        let inside = q.x.max(q.y).max(q.z).min(0.0);
        outside + inside
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldModel {
    pub obstacles: Vec<Aabb>,
    /// Height of an infinite horizontal ground plane, if any.
    pub ground_z: Option<f64>,
}

impl WorldModel {
    /// Nearest surface hit along a unit ray.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut best = f64::INFINITY;
        for b in &self.obstacles {
            if let Some(t) = b.intersect(origin, dir) {
                best = best.min(t);
            }
        }
        if let Some(g) = self.ground_z {
            if dir.z != 0.0 {
                let t = (g - origin.z) / dir.z;
                if t > 0.0 {
                    best = best.min(t);
                }
            }
        }
        best.is_finite().then_some(best)
    }

    /// Distance from `p` to the nearest surface in the world.
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        let boxes = self
            .obstacles
            .iter()
            .map(|b| b.signed_distance(p).abs())
            .fold(f64::INFINITY, f64::min);
        match self.ground_z {
            Some(g) => boxes.min((p.z - g).abs()),
            None => boxes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarModel {
    pub horizontal_fov: f64,
    pub vertical_fov: f64,
    pub azimuth_steps: usize,
    pub elevation_channels: usize,
    pub max_range: f64,
    pub scan_period: f64,
    /// Standard deviation of additive Gaussian range noise; 0 disables it.
    pub range_noise_std: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            horizontal_fov: 180f64.to_radians(),
            vertical_fov: 40f64.to_radians(),
            azimuth_steps: 360,
            elevation_channels: 32,
            max_range: 50.0,
            scan_period: 0.1,
            range_noise_std: 0.0,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        let tau = std::f64::consts::TAU;
        let fov_ok = |f: f64| f > 0.0 && f <= tau;
        if !fov_ok(self.horizontal_fov) || !fov_ok(self.vertical_fov) {
            return Err(Error::InvalidParameter("field of view must lie in (0, 2π]".into()));
        }
        if self.azimuth_steps == 0 || self.elevation_channels == 0 {
            return Err(Error::InvalidParameter("lidar needs at least one ray".into()));
        }
        if !(self.max_range > 0.0) || !(self.scan_period > 0.0) || !(self.range_noise_std >= 0.0) {
            return Err(Error::InvalidParameter(
                "max_range and scan_period must be positive, noise non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Ray azimuths in the sensor frame; the grid includes both FoV edges
    /// except for a full revolution, where the duplicate edge is dropped.
    pub fn azimuths(&self) -> Vec<f64> {
        let full = self.horizontal_fov >= std::f64::consts::TAU - 1e-12;
        grid(self.horizontal_fov, self.azimuth_steps, full)
    }

    pub fn elevations(&self) -> Vec<f64> {
        grid(self.vertical_fov, self.elevation_channels, false)
    }
}

fn grid(fov: f64, n: usize, wrap: bool) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    let step = if wrap { fov / n as f64 } else { fov / (n - 1) as f64 };
    (0..n).map(|i| -fov / 2.0 + i as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanFrame {
    pub index: usize,
    pub gt_pose: RigidPose,
    /// Sensor-frame returns.
    pub raw: PointCloud,
}

/// Casts the lidar's full ray grid from `sensor_pose` and returns the nearest
/// hit of each ray, in the sensor frame. `noise_seed` only matters when the
/// model has non-zero range noise.
pub fn raycast_scan(
    world: &WorldModel,
    sensor_pose: &RigidPose,
    lidar: &LidarModel,
    noise_seed: u64,
) -> PointCloud {
    let elevations = lidar.elevations();
    let origin = sensor_pose.translation;
    let per_azimuth: Vec<Vec<(Vec3, f64)>> = lidar
        .azimuths()
        .into_par_iter()
        .map(|az| {
            let (sa, ca) = az.sin_cos();
            elevations
                .iter()
                .filter_map(|el| {
                    let (se, ce) = el.sin_cos();
                    let local = Vec3::new(ce * ca, ce * sa, se);
                    let dir = sensor_pose.rotation * local;
                    world
                        .cast(&origin, &dir)
                        .filter(|t| *t <= lidar.max_range)
                        .map(|t| (local, t))
                })
                .collect()
        })
        .collect();

    let mut points = Vec::with_capacity(per_azimuth.iter().map(Vec::len).sum());
    if lidar.range_noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let normal = Normal::new(0.0, lidar.range_noise_std).expect("validated noise std");
        for (dir, t) in per_azimuth.into_iter().flatten() {
            let r = (t + normal.sample(&mut rng)).clamp(0.0, lidar.max_range);
            points.push(dir * r);
        }
    } else {
        points.extend(per_azimuth.into_iter().flatten().map(|(dir, t)| dir * t));
    }
    PointCloud::new(points, Frame::Sensor)
}

/// Ground-truth poses every `speed · scan_period` metres of arc length along
/// `route`, heading along the local tangent.
pub fn route_poses(route: &Polyline, speed: f64, scan_period: f64) -> Result<Vec<RigidPose>> {
    if !(speed > 0.0) || !(scan_period > 0.0) {
        return Err(Error::InvalidParameter("speed and scan period must be positive".into()));
    }
    let step = speed * scan_period;
    let n_steps = (route.length() / step + 1e-9).floor() as usize;
    if n_steps == 0 {
        return Err(Error::RouteTooShort { step });
    }
    Ok((0..=n_steps)
        .map(|i| {
            let (p, tangent) = route.sample(i as f64 * step);
            RigidPose::from_yaw(p, tangent.y.atan2(tangent.x), i as f64 * scan_period)
        })
        .collect())
}

pub fn generate_route_frames(
    world: &WorldModel,
    route: &Polyline,
    speed: f64,
    lidar: &LidarModel,
    noise_seed: u64,
) -> Result<Vec<ScanFrame>> {
    lidar.validate()?;
    let poses = route_poses(route, speed, lidar.scan_period)?;
    Ok(poses
        .into_iter()
        .enumerate()
        .map(|(index, gt_pose)| ScanFrame {
            index,
            gt_pose,
            raw: raycast_scan(
                world,
                &gt_pose,
                lidar,
                noise_seed.wrapping_add(index as u64),
            ),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_ray() -> LidarModel {
        LidarModel {
            azimuth_steps: 1,
            elevation_channels: 1,
            ..LidarModel::default()
        }
    }

    #[test]
    fn thin_wall_hit_on_axis() {
        let wall = Aabb::new(Vec3::new(5.0, -10.0, -10.0), Vec3::new(5.1, 10.0, 10.0)).unwrap();
        let world = WorldModel { obstacles: vec![wall], ground_z: None };
        let scan = raycast_scan(&world, &RigidPose::identity(), &single_ray(), 0);
        assert_eq!(scan.len(), 1);
        assert!((scan.points[0] - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn empty_world_no_returns() {
        let scan = raycast_scan(&WorldModel::default(), &RigidPose::identity(), &LidarModel::default(), 0);
        assert!(scan.is_empty());
    }

    #[test]
    fn range_gate() {
        let wall = Aabb::new(Vec3::new(60.0, -1.0, -1.0), Vec3::new(61.0, 1.0, 1.0)).unwrap();
        let world = WorldModel { obstacles: vec![wall], ground_z: None };
        assert!(raycast_scan(&world, &RigidPose::identity(), &single_ray(), 0).is_empty());
    }

    #[test]
    fn degenerate_box_rejected() {
        assert!(Aabb::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn grid_includes_edges() {
        let lidar = LidarModel { azimuth_steps: 3, ..LidarModel::default() };
        let az = lidar.azimuths();
        assert!((az[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(az[1], 0.0);
        let full = LidarModel { horizontal_fov: std::f64::consts::TAU, azimuth_steps: 4, ..lidar };
        assert_eq!(full.azimuths().len(), 4);
    }

    #[test]
    fn straight_route_frame_count() {
        let route = Polyline::new(vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)]).unwrap();
        let poses = route_poses(&route, 1.0, 0.1).unwrap();
        assert_eq!(poses.len(), 101);
        for (i, w) in poses.windows(2).enumerate() {
            assert!(((w[1].translation - w[0].translation).norm() - 0.1).abs() < 1e-9);
            assert!((w[1].timestamp - (i + 1) as f64 * 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn short_route_rejected() {
        let route = Polyline::new(vec![Vec3::zeros(), Vec3::new(0.05, 0.0, 0.0)]).unwrap();
        assert!(matches!(route_poses(&route, 1.0, 0.1), Err(Error::RouteTooShort { .. })));
        assert!(route_poses(&route, 0.0, 0.1).is_err());
    }

    #[test]
    fn l_route_turns_at_corner() {
        let route = Polyline::new(vec![
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, -1.0, 0.0),
        ])
        .unwrap();
        let poses = route_poses(&route, 1.0, 0.25).unwrap();
        let yaws: Vec<f64> = poses.iter().map(|p| p.yaw().unwrap()).collect();
        // Frame 4 sits on the corner vertex and still faces along the first leg.
        assert!(yaws[..5].iter().all(|y| y.abs() < 1e-12));
        assert!(yaws[5..].iter().all(|y| (y + std::f64::consts::FRAC_PI_2).abs() < 1e-12));
        for w in poses.windows(2) {
            assert!(((w[1].translation - w[0].translation).norm() - 0.25).abs() < 1e-9);
        }
    }
}
