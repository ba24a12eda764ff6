//! Trajectory error metrics and the Chamfer distance between clouds.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, PointCloud, RigidPose, Vec3};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    poses: Vec<RigidPose>,
}

impl Trajectory {
    pub fn new(poses: Vec<RigidPose>) -> Result<Self> {
        if poses.windows(2).any(|w| !(w[1].timestamp > w[0].timestamp)) {
            return Err(Error::TrajectoryMismatch(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[RigidPose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Left-multiplies every pose by `t`.
    pub fn transformed(&self, t: &RigidPose) -> Self {
        Self {
            poses: self.poses.iter().map(|p| t.compose(p)).collect(),
        }
    }

    /// Re-expresses the trajectory relative to its first pose, so it starts
    /// at the identity.
    pub fn relative_to_start(&self) -> Self {
        match self.poses.first() {
            Some(first) => self.transformed(&first.inverse()),
            None => self.clone(),
        }
    }

    fn min_spacing(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pairs every estimated pose with the reference pose nearest in time. Fails
/// unless the pairing is one-to-one within `max_dt`.
pub fn associate<'a>(
    est: &'a Trajectory,
    reference: &'a Trajectory,
    max_dt: f64,
) -> Result<Vec<(&'a RigidPose, &'a RigidPose)>> {
    if est.len() != reference.len() {
        return Err(Error::TrajectoryMismatch(format!(
            "{} estimated vs {} reference poses",
            est.len(),
            reference.len()
        )));
    }
    if est.is_empty() {
        return Err(Error::EmptyInput("trajectory"));
    }
    let refs = reference.poses();
    let mut pairs = Vec::with_capacity(est.len());
    let mut last: Option<usize> = None;
    for e in est.poses() {
        let idx = refs.partition_point(|r| r.timestamp < e.timestamp);
        let best = [idx.checked_sub(1), (idx < refs.len()).then_some(idx)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| {
                let da = (refs[a].timestamp - e.timestamp).abs();
                let db = (refs[b].timestamp - e.timestamp).abs();
                da.total_cmp(&db)
            })
            .expect("reference is non-empty");
        if (refs[best].timestamp - e.timestamp).abs() > max_dt || last.is_some_and(|l| l >= best) {
            return Err(Error::TrajectoryMismatch(format!(
                "no unique reference pose near t = {}",
                e.timestamp
            )));
        }
        last = Some(best);
        pairs.push((e, &refs[best]));
    }
    Ok(pairs)
}

fn default_tolerance(reference: &Trajectory) -> f64 {
    let spacing = reference.min_spacing();
    if spacing.is_finite() {
        spacing / 2.0
    } else {
        1e-9
    }
}

/// Per-frame translational error in the shared start frame, no alignment.
pub fn translation_errors(est: &Trajectory, reference: &Trajectory) -> Result<Vec<f64>> {
    Ok(associate(est, reference, default_tolerance(reference))?
        .into_iter()
        .map(|(e, r)| (e.translation - r.translation).norm())
        .collect())
}

pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

pub fn ape_rmse(est: &Trajectory, reference: &Trajectory) -> Result<f64> {
    Ok(rmse(&translation_errors(est, reference)?))
}

/// Maximum absolute yaw difference in degrees, wrapped to ±180°.
pub fn max_heading_error(est: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (e, r) in associate(est, reference, default_tolerance(reference))? {
        worst = worst.max(wrap_angle(e.yaw()? - r.yaw()?).abs());
    }
    Ok(worst.to_degrees())
}

/// Largest ground-plane error perpendicular to the reference heading.
pub fn max_lateral_error(est: &Trajectory, reference: &Trajectory) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (e, r) in associate(est, reference, default_tolerance(reference))? {
        let left = r.rotation * Vec3::y();
        let left = Vec3::new(left.x, left.y, 0.0);
        let n = left.norm();
        if n > 0.0 {
            worst = worst.max((e.translation - r.translation).dot(&(left / n)).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub ape_rmse: f64,
    /// Degrees.
    pub max_heading_error: f64,
    pub per_frame_errors: Vec<f64>,
}

impl MetricReport {
    pub fn compute(est: &Trajectory, reference: &Trajectory) -> Result<Self> {
        let per_frame_errors = translation_errors(est, reference)?;
        Ok(Self {
            ape_rmse: rmse(&per_frame_errors),
            max_heading_error: max_heading_error(est, reference)?,
            per_frame_errors,
        })
    }
}

/// Uniform hash grid answering exact nearest-neighbour queries by expanding
/// cube shells around the query cell.
struct NearestGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    key_lo: (i64, i64, i64),
    key_hi: (i64, i64, i64),
}

impl<'a> NearestGrid<'a> {
    const MAX_RINGS: i64 = 48;

    fn new(points: &'a [Vec3]) -> Self {
        let (lo, hi) = points.iter().fold(
            (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
            |(lo, hi), p| (lo.inf(p), hi.sup(p)),
        );
        let extent = (hi - lo).max().max(1e-9);
        let cell = extent / (points.len() as f64).sqrt().max(1.0);
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            cells,
            key_lo: Self::key(&lo, cell),
            key_hi: Self::key(&hi, cell),
        }
    }

    fn key(p: &Vec3, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    fn nearest_sq(&self, q: &Vec3) -> f64 {
        let (cx, cy, cz) = Self::key(q, self.cell);
        // Ring at which the searched cube covers every occupied cell.
        let reach = [
            (cx - self.key_lo.0).abs(),
            (self.key_hi.0 - cx).abs(),
            (cy - self.key_lo.1).abs(),
            (self.key_hi.1 - cy).abs(),
            (cz - self.key_lo.2).abs(),
            (self.key_hi.2 - cz).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        if reach > Self::MAX_RINGS {
            return self
                .points
                .iter()
                .map(|p| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min);
        }
        let mut best = f64::INFINITY;
        for ring in 0..=reach {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    let edge = dx.abs() == ring || dy.abs() == ring;
                    let dz_step = if edge { 1 } else { (2 * ring).max(1) as usize };
                    for dz in (-ring..=ring).step_by(dz_step) {
                        if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            for &i in ids {
                                best = best.min((self.points[i] - q).norm_squared());
                            }
                        }
                    }
                }
            }
            // Anything outside the searched cube is at least `ring * cell` away.
            let cleared = ring as f64 * self.cell;
            if best <= cleared * cleared {
                break;
            }
        }
        best
    }
}

fn mean_nearest_sq(from: &[Vec3], to: &[Vec3]) -> f64 {
    let grid = NearestGrid::new(to);
    from.iter().map(|q| grid.nearest_sq(q)).sum::<f64>() / from.len() as f64
}

/// Symmetric Chamfer distance: mean squared nearest-neighbour distance from
/// `a` to `b` plus the same from `b` to `a`. Units are square metres.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("chamfer distance needs two non-empty clouds"));
    }
    Ok(mean_nearest_sq(&a.points, &b.points) + mean_nearest_sq(&b.points, &a.points))
}

/// Square root of [`chamfer_distance`], in metres.
pub fn chamfer_distance_root(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    chamfer_distance(a, b).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;

    fn straight(offsets: &[[f64; 3]]) -> Trajectory {
        Trajectory::new(
            offsets
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    RigidPose::from_yaw(Vec3::new(i as f64 + o[0], o[1], o[2]), 0.0, i as f64 * 0.1)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ape_examples() {
        let r = straight(&[[0.0; 3]; 4]);
        assert_eq!(ape_rmse(&r, &r).unwrap(), 0.0);
        let shifted = straight(&[[1.0, 0.0, 0.0]; 4]);
        assert!((ape_rmse(&shifted, &r).unwrap() - 1.0).abs() < 1e-12);
        let r2 = straight(&[[0.0; 3]; 2]);
        let e2 = straight(&[[1.0, 0.0, 0.0], [0.0; 3]]);
        assert!((ape_rmse(&e2, &r2).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn length_mismatch() {
        let a = straight(&[[0.0; 3]; 3]);
        let b = straight(&[[0.0; 3]; 4]);
        assert!(matches!(ape_rmse(&a, &b), Err(Error::TrajectoryMismatch(_))));
    }

    #[test]
    fn timestamp_gap_rejected() {
        let a = straight(&[[0.0; 3]; 2]);
        let late = Trajectory::new(
            a.poses().iter().map(|p| p.with_timestamp(p.timestamp + 0.07)).collect(),
        )
        .unwrap();
        assert!(ape_rmse(&late, &a).is_err());
        let slightly = Trajectory::new(
            a.poses().iter().map(|p| p.with_timestamp(p.timestamp + 0.01)).collect(),
        )
        .unwrap();
        assert!(ape_rmse(&slightly, &a).is_ok());
    }

    #[test]
    fn non_increasing_timestamps_rejected() {
        let p = RigidPose::identity();
        assert!(Trajectory::new(vec![p, p]).is_err());
    }

    #[test]
    fn heading_examples() {
        let r = straight(&[[0.0; 3]; 3]);
        assert_eq!(max_heading_error(&r, &r).unwrap(), 0.0);

        let mut poses = r.poses().to_vec();
        poses[1].rotation = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), 5f64.to_radians());
        let rotated = Trajectory::new(poses).unwrap();
        assert!((max_heading_error(&rotated, &r).unwrap() - 5.0).abs() < 1e-9);

        let a = Trajectory::new(vec![RigidPose::from_yaw(Vec3::zeros(), 359f64.to_radians(), 0.0)]).unwrap();
        let b = Trajectory::new(vec![RigidPose::from_yaw(Vec3::zeros(), 1f64.to_radians(), 0.0)]).unwrap();
        assert!((max_heading_error(&a, &b).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn lateral_error_uses_reference_heading() {
        let r = straight(&[[0.0; 3]; 2]);
        let e = straight(&[[0.5, 0.3, 0.0], [0.0, -0.8, 0.0]]);
        assert!((max_lateral_error(&e, &r).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn chamfer_examples() {
        let a = PointCloud::new(vec![Vec3::zeros()], Frame::World);
        let b = PointCloud::new(vec![Vec3::new(1.0, 0.0, 0.0)], Frame::World);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
        assert_eq!(chamfer_distance_root(&a, &b).unwrap(), 2f64.sqrt());
        assert!(chamfer_distance(&a, &PointCloud::empty(Frame::World)).is_err());
    }

    #[test]
    fn chamfer_far_query() {
        let a = PointCloud::new(vec![Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0)], Frame::World);
        let b = PointCloud::new(vec![Vec3::new(1000.0, 0.0, 0.0)], Frame::World);
        let expected = (1000f64.powi(2) + 999.9f64.powi(2)) / 2.0 + 999.9f64.powi(2);
        assert!((chamfer_distance(&a, &b).unwrap() - expected).abs() < 1e-6);
    }
}
