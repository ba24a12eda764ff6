//! Attacker-side placement score.
//!
//! Each frame contributes the voxel-occupancy ratios of occluded and ghost
//! points against the downsampled raw scan. Both ratios are smoothed with a
//! causal EMA starting from zero, and the score sums the two smoothed
//! channels over all frames. No odometry runs here; the score only needs the
//! route and the scene.

use crate::error::{Error, Result};
use crate::geometry::{occupied_voxels, transform_cloud, Frame, PointCloud, Vec3};
use crate::mirror::{mirror_yaw_at, occlusion_mask, reflected_set, ActuationSchedule, Mirror};
use crate::world::ScanFrame;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveState {
    pub alpha: f64,
    pub ema_occ: f64,
    pub ema_refl: f64,
}

impl ObjectiveState {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("EMA alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(Self { alpha, ema_occ: 0.0, ema_refl: 0.0 })
    }
}

pub fn ema_step(state: ObjectiveState, eta_occ: f64, eta_refl: f64) -> ObjectiveState {
    let a = state.alpha;
    ObjectiveState {
        alpha: a,
        ema_occ: a * eta_occ + (1.0 - a) * state.ema_occ,
        ema_refl: a * eta_refl + (1.0 - a) * state.ema_refl,
    }
}

/// `|D(part)| / |D(raw)|` with `D` the voxel-grid downsampler.
pub fn point_ratio(corrupted_part: &PointCloud, raw: &PointCloud, d_voxel: f64) -> Result<f64> {
    let denom = occupied_voxels(&raw.points, d_voxel)?;
    if denom == 0 {
        return Err(Error::EmptyInput("raw scan is empty after downsampling"));
    }
    Ok(occupied_voxels(&corrupted_part.points, d_voxel)? as f64 / denom as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub eta_occ: f64,
    pub eta_refl: f64,
    pub ema_occ: f64,
    pub ema_refl: f64,
    /// Raw (not downsampled) point counts, for diagnostics.
    pub n_occ: usize,
    pub n_refl: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveTrace {
    pub per_frame: Vec<FrameScore>,
    pub score: f64,
}

impl ObjectiveTrace {
    pub fn total_ghosts(&self) -> usize {
        self.per_frame.iter().map(|f| f.n_refl).sum()
    }
}

/// Frames pre-transformed into the world with their downsampled raw sizes,
/// so many mirror candidates can be scored against the same route.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    frames: Vec<ContextFrame>,
    pub alpha: f64,
    pub d_voxel: f64,
    pub sensor_max_range: f64,
}

#[derive(Debug, Clone)]
struct ContextFrame {
    time: f64,
    sensor: Vec3,
    world: PointCloud,
    raw_voxels: usize,
}

impl ObjectiveContext {
    pub fn new(frames: &[ScanFrame], alpha: f64, d_voxel: f64, sensor_max_range: f64) -> Result<Self> {
        ObjectiveState::new(alpha)?;
        if frames.is_empty() {
            return Err(Error::EmptyInput("objective needs at least one frame"));
        }
        let frames = frames
            .iter()
            .map(|f| {
                let world = transform_cloud(&f.raw, &f.gt_pose, Frame::World);
                let raw_voxels = occupied_voxels(&world.points, d_voxel)?;
                if raw_voxels == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "frame {} has an empty raw scan",
                        f.index
                    )));
                }
                Ok(ContextFrame { time: f.gt_pose.timestamp, sensor: f.gt_pose.translation, world, raw_voxels })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { frames, alpha, d_voxel, sensor_max_range })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn evaluate(&self, mirror: &Mirror, schedule: &ActuationSchedule) -> ObjectiveTrace {
        let mut state = ObjectiveState { alpha: self.alpha, ema_occ: 0.0, ema_refl: 0.0 };
        let mut per_frame = Vec::with_capacity(self.frames.len());
        let mut score = 0.0;
        for f in &self.frames {
            let m = mirror.with_yaw(mirror_yaw_at(schedule, mirror.yaw, f.time));
            let mask = occlusion_mask(&f.world.points, &f.sensor, &m);
            let occ: Vec<Vec3> = f.world.iter().zip(&mask).filter_map(|(p, h)| h.then_some(*p)).collect();
            let refl = reflected_set(&f.world, &f.sensor, &m, self.sensor_max_range);
            let denom = f.raw_voxels as f64;
            let eta_occ = occupied_voxels(&occ, self.d_voxel).expect("validated voxel") as f64 / denom;
            let eta_refl = occupied_voxels(&refl.points, self.d_voxel).expect("validated voxel") as f64 / denom;
            state = ema_step(state, eta_occ, eta_refl);
            score += state.ema_occ + state.ema_refl;
            per_frame.push(FrameScore {
                eta_occ,
                eta_refl,
                ema_occ: state.ema_occ,
                ema_refl: state.ema_refl,
                n_occ: occ.len(),
                n_refl: refl.len(),
            });
        }
        ObjectiveTrace { per_frame, score }
    }
}

pub fn evaluate_objective(
    frames: &[ScanFrame],
    mirror: &Mirror,
    schedule: &ActuationSchedule,
    alpha: f64,
    d_voxel: f64,
    sensor_max_range: f64,
) -> Result<ObjectiveTrace> {
    Ok(ObjectiveContext::new(frames, alpha, d_voxel, sensor_max_range)?.evaluate(mirror, schedule))
}
