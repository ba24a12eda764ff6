//! Planar mirror physics: line-of-sight occlusion, ghost synthesis through a
//! virtual sensor, and the yaw actuation schedule with its per-frame bound.
//!
//! A mirror is a vertical rectangle. Its reflective side faces along
//! `n = (cos yaw, sin yaw, 0)`; the in-plane axes are the horizontal
//! `lateral = (-sin yaw, cos yaw, 0)` and world `z`.

use crate::error::{Error, Result};
use crate::geometry::{Frame, PointCloud, Vec3};

const PARALLEL_EPS: f64 = 1e-12;
const ON_PLANE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mirror {
    pub center: Vec3,
    pub yaw: f64,
    pub width: f64,
    pub height: f64,
}

impl Mirror {
    pub fn new(center: Vec3, yaw: f64, width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0) || !(height > 0.0) {
            return Err(Error::InvalidParameter("mirror width and height must be positive".into()));
        }
        if !center.iter().all(|v| v.is_finite()) || !yaw.is_finite() {
            return Err(Error::InvalidParameter("non-finite mirror pose".into()));
        }
        Ok(Self { center, yaw, width, height })
    }

    #[inline]
    pub fn normal(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c, s, 0.0)
    }

    #[inline]
    pub fn lateral(&self) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(-s, c, 0.0)
    }

    pub fn with_yaw(&self, yaw: f64) -> Self {
        Self { yaw, ..*self }
    }

    /// Signed distance of `p` from the mirror plane, positive on the
    /// reflective side.
    #[inline]
    pub fn side(&self, p: &Vec3) -> f64 {
        (p - self.center).dot(&self.normal())
    }

    /// Expresses a world point in the mirror frame: (normal, lateral, vertical).
    pub fn to_mirror_frame(&self, p: &Vec3) -> Vec3 {
        let d = p - self.center;
        Vec3::new(d.dot(&self.normal()), d.dot(&self.lateral()), d.z)
    }

    #[inline]
    fn contains_on_plane(&self, i_world: &Vec3) -> bool {
        let d = i_world - self.center;
        d.dot(&self.lateral()).abs() <= self.width / 2.0 && d.z.abs() <= self.height / 2.0
    }
}

/// Ray–plane parameter for the ray `s + u (p - s)`; `None` when the ray is
/// parallel to the mirror plane.
pub fn ray_plane_u(s: &Vec3, p: &Vec3, mirror: &Mirror) -> Option<f64> {
    let n = mirror.normal();
    let denom = (p - s).dot(&n);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    Some((mirror.center - s).dot(&n) / denom)
}

/// Whether a point on the mirror plane lies inside the rectangle
/// (boundary inclusive).
pub fn in_extent(i_world: &Vec3, mirror: &Mirror) -> Result<bool> {
    let off = mirror.side(i_world).abs();
    if off > ON_PLANE_TOL {
        return Err(Error::OffPlane { distance: off });
    }
    Ok(mirror.contains_on_plane(i_world))
}

#[inline]
fn segment_hits_mirror(origin: &Vec3, p: &Vec3, mirror: &Mirror, inclusive_end: bool) -> bool {
    match ray_plane_u(origin, p, mirror) {
        Some(u) if u > 0.0 && (u < 1.0 || (inclusive_end && u == 1.0)) => {
            mirror.contains_on_plane(&(origin + (p - origin) * u))
        }
        _ => false,
    }
}

/// Per-point flag: the line of sight from `s` to the point passes through the
/// mirror (`0 < u <= 1`, inside the extent).
pub fn occlusion_mask(points: &[Vec3], s: &Vec3, mirror: &Mirror) -> Vec<bool> {
    points
        .iter()
        .map(|p| segment_hits_mirror(s, p, mirror, true))
        .collect()
}

pub fn occluded_set(cloud: &PointCloud, s: &Vec3, mirror: &Mirror) -> PointCloud {
    let mask = occlusion_mask(&cloud.points, s, mirror);
    PointCloud::new(
        cloud
            .points
            .iter()
            .zip(mask)
            .filter_map(|(p, m)| m.then_some(*p))
            .collect(),
        cloud.frame,
    )
}

/// Reflection of the sensor origin across the mirror plane.
pub fn virtual_sensor(s: &Vec3, mirror: &Mirror) -> Vec3 {
    reflect_point(s, mirror)
}

pub fn reflect_point(p: &Vec3, mirror: &Mirror) -> Vec3 {
    let n = mirror.normal();
    p - n * (2.0 * (p - mirror.center).dot(&n))
}

/// Ghost points: mirror images of every reflective-side point whose path from
/// the virtual sensor passes through the mirror rectangle, dropped when the
/// folded path is longer than the sensor range. Empty when the sensor sees
/// the back of the mirror.
pub fn reflected_set(cloud: &PointCloud, s: &Vec3, mirror: &Mirror, sensor_max_range: f64) -> PointCloud {
    let mut out = PointCloud::empty(cloud.frame);
    if mirror.side(s) <= 0.0 {
        return out;
    }
    let s_v = virtual_sensor(s, mirror);
    let max_sq = sensor_max_range * sensor_max_range;
    out.points.extend(cloud.points.iter().filter_map(|p| {
        if mirror.side(p) <= 0.0 || !segment_hits_mirror(&s_v, p, mirror, false) {
            return None;
        }
        let g = reflect_point(p, mirror);
        ((g - s).norm_squared() <= max_sq).then_some(g)
    }));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    Full,
    OcclusionOnly,
    ReflectionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorSimOutput {
    pub p_sim: PointCloud,
    pub p_occ: PointCloud,
    pub p_refl: PointCloud,
}

/// Corrupts a world-frame scan taken from `s`. `p_occ` and `p_refl` are
/// always filled; `mode` only decides which of them shape `p_sim`. Surviving
/// raw points keep their order and ghosts are appended.
pub fn simulate_mirror(
    cloud: &PointCloud,
    s: &Vec3,
    mirror: &Mirror,
    mode: SimMode,
    sensor_max_range: f64,
) -> MirrorSimOutput {
    let mask = occlusion_mask(&cloud.points, s, mirror);
    let p_refl = reflected_set(cloud, s, mirror, sensor_max_range);

    let mut kept = Vec::with_capacity(cloud.len() + p_refl.len());
    let mut occ = Vec::new();
    for (p, &hidden) in cloud.points.iter().zip(&mask) {
        if hidden {
            occ.push(*p);
        }
        if !hidden || mode == SimMode::ReflectionOnly {
            kept.push(*p);
        }
    }
    if mode != SimMode::OcclusionOnly {
        kept.extend_from_slice(&p_refl.points);
    }
    MirrorSimOutput {
        p_sim: PointCloud::new(kept, cloud.frame),
        p_occ: PointCloud::new(occ, cloud.frame),
        p_refl,
    }
}

/// Periodic yaw swing with constant angular speed (triangle wave).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationSchedule {
    /// |dθ/dt| in rad/s.
    pub angular_speed: f64,
    /// Peak deviation from the nominal yaw, radians.
    pub amplitude: f64,
    /// Offset into the cycle; 2π is one full period.
    pub phase: f64,
}

impl ActuationSchedule {
    pub fn fixed() -> Self {
        Self { angular_speed: 0.0, amplitude: 0.0, phase: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angular_speed >= 0.0) || !(self.amplitude >= 0.0) || !self.phase.is_finite() {
            return Err(Error::InvalidParameter(
                "actuation speed and amplitude must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Duration of one swing cycle; infinite for a static mirror.
    pub fn period(&self) -> f64 {
        if self.amplitude == 0.0 || self.angular_speed == 0.0 {
            f64::INFINITY
        } else {
            4.0 * self.amplitude / self.angular_speed
        }
    }
}

/// Unit triangle wave with period 4: rises with slope 1 through 0 at s = 0
/// and turns at ±1.
pub fn triangle_wave(s: f64) -> f64 {
    let m = (s + 1.0).rem_euclid(4.0);
    if m <= 2.0 {
        m - 1.0
    } else {
        3.0 - m
    }
}

pub fn mirror_yaw_at(schedule: &ActuationSchedule, nominal_yaw: f64, t: f64) -> f64 {
    if schedule.amplitude == 0.0 {
        return nominal_yaw;
    }
    let s = schedule.angular_speed * t / schedule.amplitude
        + schedule.phase * std::f64::consts::FRAC_2_PI;
    nominal_yaw + schedule.amplitude * triangle_wave(s)
}

/// Inter-frame ghost displacement for a yaw step `delta_theta` at range `r`.
pub fn ghost_displacement(r: f64, delta_theta: f64) -> f64 {
    2.0 * r * delta_theta.sin()
}

/// Largest yaw step per frame that keeps ghosts out to `r_max` within the
/// correspondence gate `m`. Saturates at π/2 once `m >= 2 r_max`.
pub fn max_delta_theta(m: f64, r_max: f64) -> f64 {
    debug_assert!(m > 0.0 && r_max > 0.0);
    (m / (2.0 * r_max)).min(1.0).asin()
}

/// Outcome of checking an actuation schedule against the correspondence gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleCheck {
    pub r_max: f64,
    pub max_step: f64,
    pub step: f64,
    pub within_bound: bool,
}

pub fn check_schedule(schedule: &ActuationSchedule, m: f64, r_max: f64, scan_period: f64) -> ScheduleCheck {
    let max_step = if r_max > 0.0 { max_delta_theta(m, r_max) } else { std::f64::consts::FRAC_PI_2 };
    let step = schedule.angular_speed * scan_period;
    ScheduleCheck { r_max, max_step, step, within_bound: step <= max_step }
}

/// Mirror-frame copy of a world cloud, for diagnostics.
pub fn cloud_in_mirror_frame(cloud: &PointCloud, mirror: &Mirror) -> PointCloud {
    PointCloud::new(cloud.iter().map(|p| mirror.to_mirror_frame(p)).collect(), Frame::Mirror)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn mirror(cx: f64, yaw: f64) -> Mirror {
        Mirror::new(Vec3::new(cx, 0.0, 0.0), yaw, 1.8, 0.9).unwrap()
    }

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn ray_plane_examples() {
        let m = mirror(1.0, 0.0);
        assert_eq!(ray_plane_u(&Vec3::zeros(), &v(2.0, 0.0, 0.0), &m), Some(0.5));
        assert_eq!(ray_plane_u(&Vec3::zeros(), &v(0.0, 2.0, 0.0), &m), None);

        let m2 = Mirror::new(v(2.0, 0.0, 0.0), 0.0, 10.0, 1.0).unwrap();
        let u = ray_plane_u(&Vec3::zeros(), &v(4.0, 4.0, 0.0), &m2).unwrap();
        assert_eq!(u, 0.5);
        assert_eq!(v(4.0, 4.0, 0.0) * u, v(2.0, 2.0, 0.0));
    }

    #[test]
    fn extent_boundaries() {
        let m = mirror(1.0, 0.0);
        assert!(in_extent(&m.center, &m).unwrap());
        assert!(in_extent(&(m.center + m.lateral() * 0.9), &m).unwrap());
        assert!(!in_extent(&(m.center + m.lateral() * (0.9 + 1e-6)), &m).unwrap());
        assert!(in_extent(&(m.center + v(0.0, 0.0, -0.45)), &m).unwrap());
        assert!(matches!(
            in_extent(&(m.center + v(0.01, 0.0, 0.0)), &m),
            Err(Error::OffPlane { .. })
        ));
    }

    #[test]
    fn occlusion_front_and_back() {
        let m = mirror(2.0, PI);
        let s = Vec3::zeros();
        let behind = v(5.0, 0.0, 0.0);
        let front = v(1.0, 0.0, 0.0);
        let beside = v(5.0, 5.0, 0.0);
        let cloud = PointCloud::new(vec![front, behind, beside], Frame::World);
        let occ = occluded_set(&cloud, &s, &m);
        assert_eq!(occ.points, vec![behind]);
    }

    #[test]
    fn occlusion_includes_point_on_mirror() {
        // u == 1 exactly: the measured point sits on the glass.
        let m = mirror(2.0, PI);
        assert_eq!(occlusion_mask(&[v(2.0, 0.0, 0.0)], &Vec3::zeros(), &m), vec![true]);
    }

    #[test]
    fn virtual_sensor_examples() {
        assert!((virtual_sensor(&Vec3::zeros(), &mirror(2.0, PI)) - v(4.0, 0.0, 0.0)).norm() < 1e-12);
        let m = mirror(2.0, 0.3);
        assert!((virtual_sensor(&m.center, &m) - m.center).norm() < 1e-15);
        let origin = Mirror::new(Vec3::zeros(), 0.0, 1.0, 1.0).unwrap();
        assert_eq!(virtual_sensor(&v(1.0, 1.0, 0.0), &origin), v(-1.0, 1.0, 0.0));
    }

    #[test]
    fn reflect_examples() {
        let g = reflect_point(&v(1.0, 3.0, 0.5), &mirror(2.0, PI));
        assert!((g - v(3.0, 3.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn sensor_behind_mirror_sees_no_ghosts() {
        let m = mirror(2.0, 0.0); // faces +x, sensor at origin is behind it
        let cloud = PointCloud::new(vec![v(3.0, 0.0, 0.0), v(0.5, 0.1, 0.0)], Frame::World);
        assert!(reflected_set(&cloud, &Vec3::zeros(), &m, 100.0).is_empty());
    }

    #[test]
    fn single_ghost() {
        let m = Mirror::new(v(4.0, 0.0, 0.0), PI, 4.0, 4.0).unwrap();
        let p = v(1.0, 0.5, 0.0);
        let cloud = PointCloud::new(vec![p], Frame::World);
        let ghosts = reflected_set(&cloud, &Vec3::zeros(), &m, 100.0);
        assert_eq!(ghosts.points, vec![reflect_point(&p, &m)]);
        assert!((ghosts.points[0] - v(7.0, 0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ghost_range_gate() {
        let m = Mirror::new(v(4.0, 0.0, 0.0), PI, 4.0, 4.0).unwrap();
        let p = v(1.0, 0.5, 0.0);
        let s = Vec3::zeros();
        // Folded path length |S_v - p| equals the ghost's range from S.
        let path = (virtual_sensor(&s, &m) - p).norm();
        let ghost_range = (reflect_point(&p, &m) - s).norm();
        assert!((path - ghost_range).abs() < 1e-12);
        let cloud = PointCloud::new(vec![p], Frame::World);
        assert_eq!(reflected_set(&cloud, &s, &m, path + 1e-9).len(), 1);
        assert!(reflected_set(&cloud, &s, &m, path - 1e-9).is_empty());
    }

    #[test]
    fn modes() {
        let m = Mirror::new(v(4.0, 0.0, 0.0), PI, 4.0, 4.0).unwrap();
        let cloud = PointCloud::new(
            vec![v(1.0, 0.5, 0.0), v(6.0, 0.0, 0.0), v(3.0, 8.0, 0.0)],
            Frame::World,
        );
        let s = Vec3::zeros();
        let full = simulate_mirror(&cloud, &s, &m, SimMode::Full, 100.0);
        let occ = simulate_mirror(&cloud, &s, &m, SimMode::OcclusionOnly, 100.0);
        let refl = simulate_mirror(&cloud, &s, &m, SimMode::ReflectionOnly, 100.0);
        assert_eq!(full.p_occ.points, vec![v(6.0, 0.0, 0.0)]);
        assert_eq!(full.p_refl.len(), 1);
        assert_eq!(full.p_sim.len(), cloud.len() - full.p_occ.len() + full.p_refl.len());
        let mut appended = occ.p_sim.points.clone();
        appended.extend_from_slice(&occ.p_refl.points);
        assert_eq!(appended, full.p_sim.points);
        assert_eq!(refl.p_sim.len(), cloud.len() + refl.p_refl.len());
    }

    #[test]
    fn distant_mirror_is_inert() {
        let m = mirror(500.0, PI);
        let cloud = PointCloud::new(vec![v(1.0, 0.5, 0.0), v(6.0, 0.0, 0.0)], Frame::World);
        let out = simulate_mirror(&cloud, &Vec3::zeros(), &m, SimMode::Full, 50.0);
        assert_eq!(out.p_sim, cloud);
        assert!(out.p_occ.is_empty() && out.p_refl.is_empty());
    }

    #[test]
    fn yaw_schedule() {
        let still = ActuationSchedule { angular_speed: 1.0, amplitude: 0.0, phase: 0.3 };
        assert_eq!(mirror_yaw_at(&still, 0.7, 12.3), 0.7);

        let w = 7f64.to_radians();
        let sched = ActuationSchedule { angular_speed: w, amplitude: 10f64.to_radians(), phase: 0.0 };
        for t in [0.0, 0.1, 0.5, 1.0] {
            assert!((mirror_yaw_at(&sched, 0.2, t) - (0.2 + w * t)).abs() < 1e-12);
        }
        let period = sched.period();
        for t in [0.0, 0.37, 2.0] {
            assert!((mirror_yaw_at(&sched, 0.2, t + period) - mirror_yaw_at(&sched, 0.2, t)).abs() < 1e-12);
        }
        // A quarter-period phase starts the swing at its peak.
        let peaked = ActuationSchedule { phase: FRAC_PI_2, ..sched };
        assert!((mirror_yaw_at(&peaked, 0.0, 0.0) - sched.amplitude).abs() < 1e-12);
    }

    #[test]
    fn triangle_shape() {
        assert_eq!(triangle_wave(0.0), 0.0);
        assert_eq!(triangle_wave(1.0), 1.0);
        assert_eq!(triangle_wave(2.0), 0.0);
        assert_eq!(triangle_wave(3.0), -1.0);
        assert_eq!(triangle_wave(-1.0), -1.0);
        assert!((triangle_wave(4.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn displacement_and_bound() {
        assert_eq!(ghost_displacement(10.0, 0.0), 0.0);
        assert!((max_delta_theta(1.0, 0.5) - FRAC_PI_2).abs() < 1e-15);
        assert!((max_delta_theta(4.0, 1.0) - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn schedule_check() {
        let sched = ActuationSchedule { angular_speed: 7f64.to_radians(), amplitude: 0.17, phase: 0.0 };
        let ok = check_schedule(&sched, 1.0, 20.0, 0.1);
        assert!(ok.within_bound);
        let bad = check_schedule(&sched, 0.1, 20.0, 0.1);
        assert!(!bad.within_bound);
    }
}
