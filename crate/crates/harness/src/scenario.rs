//! A configured scene with its ground-truth scans, plus the primitives every
//! experiment is built from: optimise, sample a baseline, run an attack.

use std::sync::OnceLock;

use mirrorbench_core::geometry::{distance_to_polyline, transform_cloud, Frame};
use mirrorbench_core::metrics::{max_lateral_error, MetricReport, Trajectory};
use mirrorbench_core::mirror::{mirror_yaw_at, simulate_mirror, ActuationSchedule, Mirror, SimMode};
use mirrorbench_core::objective::ObjectiveContext;
use mirrorbench_core::odometry::{run_odometry, OdometryParams, TimedScan};
use mirrorbench_core::optimizer::{
    optimize_placement, sample_random_placement, OptimizationResult, Placement, SearchSpace,
};
use mirrorbench_core::world::{generate_route_frames, LidarModel, ScanFrame};
use mirrorbench_core::{Polyline, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;
use crate::error::Result;

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Noise = 1,
    Phase = 2,
    Optimizer = 3,
    Baseline = 4,
    Perturb = 5,
}

pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(2 * index as u128);
    rng.random()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub trajectory: Trajectory,
    pub report: MetricReport,
    pub degenerate_frames: usize,
    pub ghost_points: usize,
    pub occluded_points: usize,
    pub max_lateral_error: f64,
}

/// What the sensor sees in one run.
#[derive(Debug, Clone, Copy)]
pub struct Attack<'a> {
    pub mirror: &'a Mirror,
    pub schedule: &'a ActuationSchedule,
    pub mode: SimMode,
}

pub struct Scenario {
    pub config: ScenarioConfig,
    pub route: Polyline,
    pub lidar: LidarModel,
    pub params: OdometryParams,
    pub space: SearchSpace,
    pub frames: Vec<ScanFrame>,
    /// Ground truth re-expressed relative to the first pose, which is the
    /// frame the odometry estimate lives in.
    pub ground_truth: Trajectory,
    objective: OnceLock<ObjectiveContext>,
    clean: OnceLock<AttackOutcome>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let route = config.route()?;
        let lidar = config.lidar_model();
        let world = config.world_model()?;
        let noise_seed = derive_seed(config.seed, Stream::Noise, 0);
        let frames = generate_route_frames(&world, &route, config.route.speed, &lidar, noise_seed)?;
        let ground_truth = Trajectory::new(frames.iter().map(|f| f.gt_pose).collect())?.relative_to_start();
        Ok(Self {
            params: config.odometry_params(),
            space: config.search_space(),
            config,
            route,
            lidar,
            frames,
            ground_truth,
            objective: OnceLock::new(),
            clean: OnceLock::new(),
        })
    }

    /// Run seed of batch member `index`; member 0 is the configured seed.
    pub fn batch_seed(&self, index: usize) -> u64 {
        self.config.seed.wrapping_add(index as u64)
    }

    pub fn phase(&self, seed: u64) -> f64 {
        if self.config.actuation.randomize_phase {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Phase, 0));
            rng.random_range(0.0..std::f64::consts::TAU)
        } else {
            self.config.actuation.phase_deg.to_radians()
        }
    }

    pub fn schedule(&self, seed: u64) -> ActuationSchedule {
        self.config.schedule(self.phase(seed))
    }

    pub fn objective(&self) -> &ObjectiveContext {
        self.objective.get_or_init(|| {
            ObjectiveContext::new(&self.frames, self.config.alpha, self.config.d_voxel, self.lidar.max_range)
                .expect("validated scenario")
        })
    }

    pub fn mirror(&self, p: &Placement) -> Mirror {
        self.config.mirror_at(p).expect("validated mirror size")
    }

    /// Ground-plane distance from a placement to the route.
    pub fn route_distance(&self, p: &Placement) -> f64 {
        distance_to_polyline(&Vec3::new(p.x, p.y, self.route.vertices()[0].z), &self.route)
    }

    pub fn score(&self, p: &Placement, schedule: &ActuationSchedule) -> f64 {
        self.objective().evaluate(&self.mirror(p), schedule).score
    }

    pub fn optimize(&self, seed: u64) -> Result<OptimizationResult> {
        let schedule = self.schedule(seed);
        let cfg = self.config.optimizer_config(derive_seed(seed, Stream::Optimizer, 0));
        Ok(optimize_placement(&self.space, &self.route, &cfg, |p| self.score(p, &schedule))?)
    }

    pub fn random_placement(&self, seed: u64, distance: f64) -> Result<Placement> {
        Ok(sample_random_placement(&self.space, &self.route, distance, derive_seed(seed, Stream::Baseline, 0))?)
    }

    /// Sensor-frame scans as the victim receives them.
    pub fn scans(&self, attack: Option<Attack<'_>>) -> (Vec<TimedScan>, usize, usize) {
        let (mut ghosts, mut occluded) = (0, 0);
        let scans = self
            .frames
            .iter()
            .map(|f| {
                let t = f.gt_pose.timestamp;
                let cloud = match attack {
                    None => f.raw.clone(),
                    Some(a) => {
                        let m = a.mirror.with_yaw(mirror_yaw_at(a.schedule, a.mirror.yaw, t));
                        let world = transform_cloud(&f.raw, &f.gt_pose, Frame::World);
                        let out = simulate_mirror(&world, &f.gt_pose.translation, &m, a.mode, self.lidar.max_range);
                        if a.mode != SimMode::OcclusionOnly {
                            ghosts += out.p_refl.len();
                        }
                        if a.mode != SimMode::ReflectionOnly {
                            occluded += out.p_occ.len();
                        }
                        transform_cloud(&out.p_sim, &f.gt_pose.inverse(), Frame::Sensor)
                    }
                };
                TimedScan { timestamp: t, cloud }
            })
            .collect();
        (scans, ghosts, occluded)
    }

    pub fn run(&self, attack: Option<Attack<'_>>) -> Result<AttackOutcome> {
        let (scans, ghost_points, occluded_points) = self.scans(attack);
        let result = run_odometry(&scans, &self.params)?;
        let report = MetricReport::compute(&result.trajectory, &self.ground_truth)?;
        let max_lateral_error = max_lateral_error(&result.trajectory, &self.ground_truth)?;
        Ok(AttackOutcome {
            degenerate_frames: result.degenerate_frames(),
            trajectory: result.trajectory,
            report,
            ghost_points,
            occluded_points,
            max_lateral_error,
        })
    }

    /// Mirror-free run, computed once.
    pub fn clean(&self) -> Result<&AttackOutcome> {
        if let Some(c) = self.clean.get() {
            return Ok(c);
        }
        let outcome = self.run(None)?;
        Ok(self.clean.get_or_init(|| outcome))
    }

    /// Runs the victim against a mirror at `p` swinging with the phase of
    /// `seed`. Falls back to the clean run when the config has no mirror.
    pub fn attack(&self, p: &Placement, seed: u64, mode: SimMode) -> Result<AttackOutcome> {
        if !self.config.mirror.present {
            return self.clean().cloned();
        }
        let mirror = self.mirror(p);
        let schedule = self.schedule(seed);
        self.run(Some(Attack { mirror: &mirror, schedule: &schedule, mode }))
    }
}
