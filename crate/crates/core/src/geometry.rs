//! 3-D primitives shared by every other module: rigid poses, tagged point
//! clouds, voxel-grid downsampling and route polylines.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Integer voxel coordinate, `floor(p / voxel_size)` per axis.
pub type VoxelIndex = (i64, i64, i64);

#[inline]
pub fn voxel_index(p: &Vec3, voxel_size: f64) -> VoxelIndex {
    (
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
    pub timestamp: f64,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
            timestamp: 0.0,
        }
    }

    pub fn new(rotation: Rotation3<f64>, translation: Vec3, timestamp: f64) -> Self {
        Self {
            rotation,
            translation,
            timestamp,
        }
    }

    /// Planar pose: rotation about +z by `yaw` radians.
    pub fn from_yaw(translation: Vec3, yaw: f64, timestamp: f64) -> Self {
        Self::new(
            Rotation3::from_axis_angle(&Vector3::z_axis(), yaw),
            translation,
            timestamp,
        )
    }

    /// Builds a pose from a raw matrix, rejecting anything that is not a
    /// proper rotation within 1e-9.
    pub fn from_matrix(m: Matrix3<f64>, translation: Vec3, timestamp: f64) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "rotation not orthonormal (err {ortho:.2e}, det {det})"
            )));
        }
        if !timestamp.is_finite() || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite pose".into()));
        }
        Ok(Self::new(
            Rotation3::from_matrix_unchecked(m),
            translation,
            timestamp,
        ))
    }

    #[inline]
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rot = self.rotation.inverse();
        Self::new(rot, -(rot * self.translation), self.timestamp)
    }

    /// `self ∘ other`; the timestamp is taken from `other`. The product is
    /// re-orthonormalised so long chains do not drift off SO(3).
    pub fn compose(&self, other: &RigidPose) -> Self {
        let mut rotation = self.rotation * other.rotation;
        rotation.renormalize();
        Self::new(rotation, self.rotation * other.translation + self.translation, other.timestamp)
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Heading of the body x-axis projected onto the ground plane.
    pub fn yaw(&self) -> Result<f64> {
        let x_axis = self.rotation * Vec3::x();
        let planar = x_axis.x.hypot(x_axis.y);
        if planar < 1e-6 {
            return Err(Error::InvalidParameter(
                "heading undefined for pitch near ±90°".into(),
            ));
        }
        Ok(x_axis.y.atan2(x_axis.x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Sensor,
    World,
    Mirror,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn empty(frame: Frame) -> Self {
        Self::new(Vec::new(), frame)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vec3> {
        self.points.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// Applies `pose` to every point. The caller owns the meaning of the result,
/// so the output is tagged with `frame`.
pub fn transform_cloud(cloud: &PointCloud, pose: &RigidPose, frame: Frame) -> PointCloud {
    PointCloud::new(
        cloud.points.iter().map(|p| pose.transform_point(p)).collect(),
        frame,
    )
}

/// Voxel-grid downsampling: one centroid per occupied voxel, emitted in
/// lexicographic voxel-index order.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "voxel size must be positive, got {voxel_size}"
        )));
    }
    struct Acc {
        sum: Vec3,
        lo: Vec3,
        hi: Vec3,
        n: usize,
    }
    let mut voxels: BTreeMap<VoxelIndex, Acc> = BTreeMap::new();
    for p in &cloud.points {
        voxels
            .entry(voxel_index(p, voxel_size))
            .and_modify(|a| {
                a.sum += p;
                a.lo = a.lo.inf(p);
                a.hi = a.hi.sup(p);
                a.n += 1;
            })
            .or_insert(Acc {
                sum: *p,
                lo: *p,
                hi: *p,
                n: 1,
            });
    }
    // The centroid is clamped to the member bounding box so floating-point
    // rounding can never push it into a neighbouring voxel.
    let points = voxels
        .into_values()
        .map(|a| (a.sum / a.n as f64).sup(&a.lo).inf(&a.hi))
        .collect();
    Ok(PointCloud::new(points, cloud.frame))
}

/// Number of distinct voxels occupied by `cloud`; equals the length of
/// [`voxel_downsample`]'s output without building it.
pub fn occupied_voxels(points: &[Vec3], voxel_size: f64) -> Result<usize> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "voxel size must be positive, got {voxel_size}"
        )));
    }
    let mut keys: Vec<VoxelIndex> = points.iter().map(|p| voxel_index(p, voxel_size)).collect();
    keys.sort_unstable();
    keys.dedup();
    Ok(keys.len())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Vec3>,
}

/// Closest point on a polyline together with the local route geometry.
#[derive(Debug, Clone, Copy)]
pub struct RouteProjection {
    pub point: Vec3,
    pub distance: f64,
    pub segment: usize,
    /// Unit tangent of the segment the projection falls on.
    pub tangent: Vec3,
}

impl Polyline {
    pub fn new(vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidParameter(
                "polyline needs at least 2 vertices".into(),
            ));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidParameter("non-finite polyline vertex".into()));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "consecutive polyline vertices must differ".into(),
            ));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn segments(&self) -> impl Iterator<Item = (&Vec3, &Vec3)> {
        self.vertices.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| (b - a).norm()).sum()
    }

    /// Point and unit tangent at arc length `s` (clamped to the route).
    pub fn sample(&self, s: f64) -> (Vec3, Vec3) {
        let mut remaining = s.max(0.0);
        let n = self.vertices.len() - 1;
        for (i, (a, b)) in self.segments().enumerate() {
            let seg = b - a;
            let len = seg.norm();
            let dir = seg / len;
            if remaining <= len || i + 1 == n {
                return (a + dir * remaining.min(len), dir);
            }
            remaining -= len;
        }
        unreachable!("polyline has at least one segment")
    }

    pub fn project(&self, q: &Vec3) -> RouteProjection {
        let mut best: Option<RouteProjection> = None;
        for (i, (a, b)) in self.segments().enumerate() {
            let (point, distance) = closest_on_segment(q, a, b);
            if best.is_none_or(|bp| distance < bp.distance) {
                best = Some(RouteProjection {
                    point,
                    distance,
                    segment: i,
                    tangent: (b - a).normalize(),
                });
            }
        }
        best.expect("polyline has at least one segment")
    }
}

fn closest_on_segment(q: &Vec3, a: &Vec3, b: &Vec3) -> (Vec3, f64) {
    let ab = b - a;
    let t = ((q - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    let foot = a + ab * t;
    (foot, (q - foot).norm())
}

/// Minimum Euclidean distance from `q` to any segment of `route`.
pub fn distance_to_polyline(q: &Vec3, route: &Polyline) -> f64 {
    route
        .segments()
        .map(|(a, b)| closest_on_segment(q, a, b).1)
        .fold(f64::INFINITY, f64::min)
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(
            pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            Frame::World,
        )
    }

    #[test]
    fn identity_transform_is_noop() {
        let c = cloud(&[[1.0, -2.0, 3.5], [0.0, 0.0, 0.0]]);
        assert_eq!(transform_cloud(&c, &RigidPose::identity(), Frame::World), c);
    }

    #[test]
    fn pure_translation() {
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        let pose = RigidPose::new(Rotation3::identity(), Vec3::new(1.0, 2.0, 3.0), 0.0);
        let out = transform_cloud(&c, &pose, Frame::World);
        assert_eq!(out.points[0], Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn quarter_turn_yaw() {
        let c = cloud(&[[1.0, 0.0, 0.0]]);
        let pose = RigidPose::from_yaw(Vec3::zeros(), FRAC_PI_2, 0.0);
        let p = transform_cloud(&c, &pose, Frame::World).points[0];
        assert!((p - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn from_matrix_rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(RigidPose::from_matrix(m, Vec3::zeros(), 0.0).is_err());
        assert!(RigidPose::from_matrix(Matrix3::identity(), Vec3::zeros(), 0.0).is_ok());
    }

    #[test]
    fn downsample_examples() {
        let empty = PointCloud::empty(Frame::World);
        assert!(voxel_downsample(&empty, 1.0).unwrap().is_empty());

        let one = voxel_downsample(&cloud(&[[0.1, 0.1, 0.1], [0.2, 0.2, 0.2]]), 1.0).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one.points[0] - Vec3::new(0.15, 0.15, 0.15)).norm() < 1e-12);

        let two = voxel_downsample(&cloud(&[[0.5, 0.0, 0.0], [1.5, 0.0, 0.0]]), 1.0).unwrap();
        assert_eq!(two.len(), 2);
    }

    #[test]
    fn downsample_rejects_bad_voxel() {
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        assert!(voxel_downsample(&c, 0.0).is_err());
        assert!(voxel_downsample(&c, -1.0).is_err());
        assert!(voxel_downsample(&c, f64::NAN).is_err());
    }

    #[test]
    fn downsample_order_is_lexicographic() {
        let c = cloud(&[[2.5, 0.0, 0.0], [-0.5, 0.0, 0.0], [0.5, 3.0, 0.0], [0.5, -3.0, 0.0]]);
        let d = voxel_downsample(&c, 1.0).unwrap();
        let keys: Vec<_> = d.iter().map(|p| voxel_index(p, 1.0)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn polyline_distances() {
        let route = Polyline::new(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)]).unwrap();
        assert_eq!(distance_to_polyline(&Vec3::new(0.0, 1.0, 0.0), &route), 1.0);
        assert_eq!(distance_to_polyline(&Vec3::new(2.0, 0.0, 0.0), &route), 0.0);
        // Beyond the end the nearest feature is the endpoint (2,0,0): sqrt(1² + 1²).
        let d = distance_to_polyline(&Vec3::new(3.0, 1.0, 0.0), &route);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn polyline_validation() {
        assert!(Polyline::new(vec![Vec3::zeros()]).is_err());
        assert!(Polyline::new(vec![Vec3::zeros(), Vec3::zeros()]).is_err());
    }

    #[test]
    fn polyline_sampling() {
        let route = Polyline::new(vec![
            Vec3::zeros(),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(2.0, -3.0, 0.0),
        ])
        .unwrap();
        assert_eq!(route.length(), 5.0);
        let (p, t) = route.sample(3.0);
        assert!((p - Vec3::new(2.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((t - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        let (end, _) = route.sample(99.0);
        assert_eq!(end, Vec3::new(2.0, -3.0, 0.0));
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(359f64.to_radians() - 1f64.to_radians()) + 2f64.to_radians()).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * FRAC_PI_2) - FRAC_PI_2).abs() < 1e-12);
    }
}
