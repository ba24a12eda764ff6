//! Scenario configuration: a versioned TOML document. Angles are degrees in
//! the file and radians everywhere else.

use std::path::{Path, PathBuf};

use mirrorbench_core::mirror::{ActuationSchedule, Mirror};
use mirrorbench_core::odometry::{IcpMetric, OdometryParams};
use mirrorbench_core::optimizer::{OptimizerConfig, SearchSpace, Strategy};
use mirrorbench_core::world::{Aabb, LidarModel, WorldModel};
use mirrorbench_core::{Polyline, Vec3};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub config_version: u32,
    /// Root of every derived random stream.
    pub seed: u64,
    /// Number of seeds in batch experiments.
    pub seeds: usize,
    pub output_dir: PathBuf,
    /// EMA smoothing factor of the placement objective.
    pub alpha: f64,
    /// Voxel size of the objective's downsampler, metres.
    pub d_voxel: f64,
    pub world: WorldConfig,
    pub route: RouteConfig,
    pub lidar: LidarConfig,
    pub mirror: MirrorConfig,
    pub actuation: ActuationConfig,
    pub odometry: OdometryConfig,
    pub search: SearchConfig,
    pub optimizer: OptimizerSection,
    pub experiments: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub ground_z: Option<f64>,
    pub obstacles: Vec<BoxConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteConfig {
    pub vertices: Vec<[f64; 3]>,
    /// Platform speed, m/s.
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarConfig {
    pub horizontal_fov_deg: f64,
    pub vertical_fov_deg: f64,
    pub azimuth_steps: usize,
    pub elevation_channels: usize,
    pub max_range: f64,
    pub scan_period: f64,
    pub range_noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MirrorConfig {
    /// When false every pipeline runs mirror-free.
    pub present: bool,
    /// Nominal placement; its z is also used for optimizer candidates.
    pub center: [f64; 3],
    pub yaw_deg: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActuationConfig {
    pub angular_speed_deg_s: f64,
    pub amplitude_deg: f64,
    pub phase_deg: f64,
    /// Draw the phase uniformly per seed instead of using `phase_deg`.
    pub randomize_phase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricName {
    PointToPoint,
    PointToPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryConfig {
    pub metric: MetricName,
    pub max_corr_dist: f64,
    pub voxel_map_resolution: f64,
    pub scan_voxel: f64,
    pub max_iterations: usize,
    pub convergence_eps: f64,
    pub local_map_radius: f64,
    pub max_points_per_voxel: usize,
    pub huber_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub x_bounds: [f64; 2],
    pub y_bounds: [f64; 2],
    pub theta_bounds_deg: [f64; 2],
    pub min_route_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyName {
    RandomThenRefine,
    PureRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub budget: usize,
    pub strategy: StrategyName,
    pub refine_fraction: f64,
    /// Refinement step deviations: metres, metres, degrees.
    pub perturbation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep_from: f64,
    pub sweep_to: f64,
    pub sweep_step: f64,
    pub sweep_trials: usize,
    pub perturb_samples: usize,
    /// Half-width of the uniform position error, metres.
    pub perturb_xy: f64,
    pub perturb_theta_deg: f64,
}

fn aabb(min: [f64; 3], max: [f64; 3]) -> BoxConfig {
    BoxConfig { min, max }
}

/// Straight 40 m corridor: two long walls, an end wall, alternating pillars
/// and two parked-car blocks. The sensor rides 1.5 m above the floor.
fn default_obstacles() -> Vec<BoxConfig> {
    let g = -1.5;
    let mut v = vec![
        aabb([-20.0, 5.0, g], [60.0, 5.4, 3.0]),
        aabb([-20.0, -5.4, g], [60.0, -5.0, 3.0]),
        aabb([58.0, -5.0, g], [58.5, 5.0, 3.0]),
    ];
    for i in 0..8 {
        let x = -4.0 + 8.0 * i as f64;
        v.push(aabb([x, 4.4, g], [x + 0.6, 5.0, 3.0]));
        v.push(aabb([x + 4.0, -5.0, g], [x + 4.6, -4.4, 3.0]));
    }
    v.push(aabb([12.0, 2.8, g], [16.5, 4.6, 0.0]));
    v.push(aabb([27.0, -4.6, g], [31.5, -2.8, 0.0]));
    v
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { ground_z: Some(-1.5), obstacles: default_obstacles() }
    }
}

impl Default for RouteConfig {
    fn default() -> Self {
        Self { vertices: vec![[0.0, 0.0, 0.0], [40.0, 0.0, 0.0]], speed: 2.0 }
    }
}

impl Default for LidarConfig {
    fn default() -> Self {
        let l = LidarModel::default();
        Self {
            horizontal_fov_deg: l.horizontal_fov.to_degrees(),
            vertical_fov_deg: l.vertical_fov.to_degrees(),
            azimuth_steps: l.azimuth_steps,
            elevation_channels: l.elevation_channels,
            max_range: l.max_range,
            scan_period: l.scan_period,
            range_noise_std: l.range_noise_std,
        }
    }
}

impl Default for MirrorConfig {
    fn default() -> Self {
        Self { present: true, center: [20.0, -1.5, 0.0], yaw_deg: 45.0, width: 1.8, height: 0.9 }
    }
}

impl Default for ActuationConfig {
    fn default() -> Self {
        Self { angular_speed_deg_s: 7.0, amplitude_deg: 10.0, phase_deg: 0.0, randomize_phase: true }
    }
}

impl Default for OdometryConfig {
    fn default() -> Self {
        let p = OdometryParams::default();
        Self {
            metric: match p.metric {
                IcpMetric::PointToPoint => MetricName::PointToPoint,
                IcpMetric::PointToPlane => MetricName::PointToPlane,
            },
            max_corr_dist: p.max_corr_dist,
            voxel_map_resolution: p.voxel_map_resolution,
            scan_voxel: p.scan_voxel,
            max_iterations: p.max_iterations,
            convergence_eps: p.convergence_eps,
            local_map_radius: p.local_map_radius,
            max_points_per_voxel: p.max_points_per_voxel,
            huber_delta: p.huber_delta,
        }
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            x_bounds: [0.0, 40.0],
            y_bounds: [-4.4, 4.4],
            theta_bounds_deg: [-180.0, 180.0],
            min_route_distance: 1.5,
        }
    }
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerConfig::default();
        Self {
            budget: o.budget,
            strategy: StrategyName::RandomThenRefine,
            refine_fraction: o.refine_fraction,
            perturbation: [o.perturbation_scale.0, o.perturbation_scale.1, o.perturbation_scale.2.to_degrees()],
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sweep_from: 1.5,
            sweep_to: 4.0,
            sweep_step: 0.5,
            sweep_trials: 10,
            perturb_samples: 100,
            perturb_xy: 0.5,
            perturb_theta_deg: 5.0,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            seed: 0,
            seeds: 10,
            output_dir: PathBuf::from("out"),
            alpha: 0.3,
            d_voxel: 1.0,
            world: WorldConfig::default(),
            route: RouteConfig::default(),
            lidar: LidarConfig::default(),
            mirror: MirrorConfig::default(),
            actuation: ActuationConfig::default(),
            odometry: OdometryConfig::default(),
            search: SearchConfig::default(),
            optimizer: OptimizerSection::default(),
            experiments: ExperimentConfig::default(),
        }
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn config_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(e.to_string())
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 over the canonical serialisation, ignoring where outputs go.
    pub fn scenario_hash(&self) -> String {
        let canonical = Self { output_dir: PathBuf::new(), ..self.clone() };
        hex::encode(Sha256::digest(canonical.to_toml_string().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.config_version != CONFIG_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported config_version {} (expected {CONFIG_VERSION})",
                self.config_version
            )));
        }
        if self.seeds == 0 {
            return Err(HarnessError::Config("seeds must be at least 1".into()));
        }
        if !(self.d_voxel > 0.0) {
            return Err(HarnessError::Config("d_voxel must be positive".into()));
        }
        if !(self.route.speed > 0.0) {
            return Err(HarnessError::Config("route speed must be positive".into()));
        }
        let e = &self.experiments;
        if !(e.sweep_step > 0.0) || !(e.sweep_from <= e.sweep_to) || e.sweep_trials == 0 {
            return Err(HarnessError::Config("sweep needs from <= to, step > 0 and trials >= 1".into()));
        }
        if !(e.perturb_xy >= 0.0) || !(e.perturb_theta_deg >= 0.0) {
            return Err(HarnessError::Config("perturbation half-widths must be non-negative".into()));
        }
        mirrorbench_core::objective::ObjectiveState::new(self.alpha).map_err(config_err)?;
        self.world_model()?;
        self.route()?;
        self.lidar_model().validate().map_err(config_err)?;
        self.nominal_mirror()?;
        self.schedule(0.0).validate().map_err(config_err)?;
        self.odometry_params().validate().map_err(config_err)?;
        self.search_space().validate().map_err(config_err)?;
        self.optimizer_config(0).validate().map_err(config_err)?;
        Ok(())
    }

    pub fn world_model(&self) -> Result<WorldModel> {
        let obstacles = self
            .world
            .obstacles
            .iter()
            .map(|b| Aabb::new(v3(b.min), v3(b.max)))
            .collect::<mirrorbench_core::Result<Vec<_>>>()
            .map_err(config_err)?;
        Ok(WorldModel { obstacles, ground_z: self.world.ground_z })
    }

    pub fn route(&self) -> Result<Polyline> {
        Polyline::new(self.route.vertices.iter().copied().map(v3).collect()).map_err(config_err)
    }

    pub fn lidar_model(&self) -> LidarModel {
        let l = &self.lidar;
        LidarModel {
            horizontal_fov: l.horizontal_fov_deg.to_radians(),
            vertical_fov: l.vertical_fov_deg.to_radians(),
            azimuth_steps: l.azimuth_steps,
            elevation_channels: l.elevation_channels,
            max_range: l.max_range,
            scan_period: l.scan_period,
            range_noise_std: l.range_noise_std,
        }
    }

    pub fn nominal_mirror(&self) -> Result<Mirror> {
        let m = &self.mirror;
        Mirror::new(v3(m.center), m.yaw_deg.to_radians(), m.width, m.height).map_err(config_err)
    }

    /// Mirror at an optimizer placement, keeping the nominal height and size.
    pub fn mirror_at(&self, p: &mirrorbench_core::optimizer::Placement) -> Result<Mirror> {
        let m = &self.mirror;
        Mirror::new(p.position(m.center[2]), p.theta, m.width, m.height).map_err(config_err)
    }

    pub fn schedule(&self, phase: f64) -> ActuationSchedule {
        let a = &self.actuation;
        ActuationSchedule {
            angular_speed: a.angular_speed_deg_s.to_radians(),
            amplitude: a.amplitude_deg.to_radians(),
            phase,
        }
    }

    pub fn odometry_params(&self) -> OdometryParams {
        let o = &self.odometry;
        OdometryParams {
            metric: match o.metric {
                MetricName::PointToPoint => IcpMetric::PointToPoint,
                MetricName::PointToPlane => IcpMetric::PointToPlane,
            },
            max_corr_dist: o.max_corr_dist,
            voxel_map_resolution: o.voxel_map_resolution,
            scan_voxel: o.scan_voxel,
            max_iterations: o.max_iterations,
            convergence_eps: o.convergence_eps,
            local_map_radius: o.local_map_radius,
            max_points_per_voxel: o.max_points_per_voxel,
            huber_delta: o.huber_delta,
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        let s = &self.search;
        SearchSpace {
            x_bounds: (s.x_bounds[0], s.x_bounds[1]),
            y_bounds: (s.y_bounds[0], s.y_bounds[1]),
            theta_bounds: (s.theta_bounds_deg[0].to_radians(), s.theta_bounds_deg[1].to_radians()),
            min_route_distance: s.min_route_distance,
        }
    }

    pub fn optimizer_config(&self, seed: u64) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            budget: o.budget,
            seed,
            strategy: match o.strategy {
                StrategyName::RandomThenRefine => Strategy::RandomThenRefine,
                StrategyName::PureRandom => Strategy::PureRandom,
            },
            refine_fraction: o.refine_fraction,
            perturbation_scale: (o.perturbation[0], o.perturbation[1], o.perturbation[2].to_radians()),
        }
    }
}
