//! The experiment pipelines behind each CLI subcommand. Every command
//! writes below `<out>/<command>/`, one subdirectory per run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use mirrorbench_core::geometry::{transform_cloud, Frame};
use mirrorbench_core::io::{ply, tum};
use mirrorbench_core::metrics::{MetricReport, Trajectory};
use mirrorbench_core::mirror::{mirror_yaw_at, simulate_mirror, SimMode};
use mirrorbench_core::optimizer::{optimize_placement, OptimizationResult, Placement};
use mirrorbench_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};
use crate::report::{
    self, history_csv, metrics_csv, objective_trace_csv, perturb_csv, summary_csv, sweep_csv, write_text,
    BestPlacement, PerturbRow, PlacementRecord, RunMode, RunRecord, SweepRow,
};
use crate::scenario::{derive_seed, AttackOutcome, Scenario, Stream};

/// Where `attack-eval` gets its mirror from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlacementSource {
    None,
    Random,
    Optimized,
    Explicit(Placement),
    /// No mirror, random and optimized side by side.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateSummary {
    pub frames: usize,
    pub written: usize,
    pub ghost_points: usize,
    pub occluded_points: usize,
    pub frames_with_ghosts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSummary {
    pub base: Placement,
    pub perturbed: Vec<PerturbRow>,
    pub random: Vec<PerturbRow>,
}

pub struct Harness {
    pub scenario: Scenario,
    pub out: PathBuf,
    pub hash: String,
    /// Optimised placement for a run seed, or one loaded from a file.
    placement_file: Option<PathBuf>,
    optimized: Mutex<BTreeMap<u64, OptimizationResult>>,
}

impl Harness {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        let out = config.output_dir.clone();
        let hash = config.scenario_hash();
        Ok(Self {
            scenario: Scenario::new(config)?,
            out,
            hash,
            placement_file: None,
            optimized: Mutex::new(BTreeMap::new()),
        })
    }

    /// Use a `best_placement.toml` instead of optimising per seed.
    pub fn with_placement_file(mut self, path: Option<PathBuf>) -> Self {
        self.placement_file = path;
        self
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.scenario.config
    }

    fn dir(&self, command: &str) -> PathBuf {
        self.out.join(command)
    }

    fn seeds(&self, count: usize) -> Vec<u64> {
        (0..count).map(|i| self.scenario.batch_seed(i)).collect()
    }

    pub fn optimization(&self, seed: u64) -> Result<OptimizationResult> {
        if let Some(r) = self.optimized.lock().expect("cache lock").get(&seed) {
            return Ok(r.clone());
        }
        let r = self.scenario.optimize(seed)?;
        self.optimized.lock().expect("cache lock").insert(seed, r.clone());
        Ok(r)
    }

    pub fn optimized_placement(&self, seed: u64) -> Result<Placement> {
        match &self.placement_file {
            Some(path) => Ok(BestPlacement::load(path)?.placement()),
            None => Ok(self.optimization(seed)?.best_params),
        }
    }

    fn placement_record(&self, p: &Placement) -> PlacementRecord {
        PlacementRecord { x: p.x, y: p.y, theta_deg: p.theta.to_degrees(), route_distance: self.scenario.route_distance(p) }
    }

    fn ground_truth_file(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("ground_truth.tum");
        write_text(&path, &tum::to_string(&self.scenario.ground_truth))?;
        Ok(path)
    }

    fn relative(&self, path: &Path) -> PathBuf {
        path.strip_prefix(&self.out).unwrap_or(path).to_path_buf()
    }

    /// Persists one run (trajectory and record) under `dir/<run_id>/`.
    fn record(
        &self,
        dir: &Path,
        run_id: String,
        mode: RunMode,
        seed: u64,
        placement: Option<&Placement>,
        outcome: &AttackOutcome,
    ) -> Result<RunRecord> {
        let run_dir = dir.join(&run_id);
        let traj = run_dir.join("trajectory.tum");
        write_text(&traj, &tum::to_string(&outcome.trajectory))?;
        let rec = RunRecord::new(
            run_id,
            self.hash.clone(),
            mode,
            seed,
            placement.map(|p| self.placement_record(p)),
            outcome,
            self.scenario.clean()?.report.ape_rmse,
            self.relative(&traj),
            self.relative(&dir.join("ground_truth.tum")),
        );
        write_text(&run_dir.join("run.toml"), &rec.to_toml())?;
        Ok(rec)
    }

    /// Raw and corrupted clouds of every `stride`-th frame, in the sensor frame.
    pub fn simulate(&self, stride: usize) -> Result<SimulateSummary> {
        let dir = self.dir("simulate");
        self.ground_truth_file(&dir)?;
        let sc = &self.scenario;
        let mirror = sc.config.nominal_mirror()?;
        let schedule = sc.schedule(sc.config.seed);
        let stride = stride.max(1);
        let selected: Vec<_> = sc.frames.iter().step_by(stride).collect();
        let stats = selected
            .par_iter()
            .map(|f| -> Result<(usize, usize)> {
                let name = format!("frame_{:06}.ply", f.index);
                write_text(&dir.join("raw").join(&name), &ply::to_string(&f.raw))?;
                let (corrupted, occ, refl) = if sc.config.mirror.present {
                    let m = mirror.with_yaw(mirror_yaw_at(&schedule, mirror.yaw, f.gt_pose.timestamp));
                    let world = transform_cloud(&f.raw, &f.gt_pose, Frame::World);
                    let out = simulate_mirror(&world, &f.gt_pose.translation, &m, SimMode::Full, sc.lidar.max_range);
                    let to_sensor = |c| transform_cloud(c, &f.gt_pose.inverse(), Frame::Sensor);
                    (to_sensor(&out.p_sim), to_sensor(&out.p_occ), to_sensor(&out.p_refl))
                } else {
                    let empty = mirrorbench_core::PointCloud::empty(Frame::Sensor);
                    (f.raw.clone(), empty.clone(), empty)
                };
                write_text(&dir.join("corrupted").join(&name), &ply::to_string(&corrupted))?;
                let idx = format!("{:06}.ply", f.index);
                write_text(&dir.join("p_occ").join(format!("p_occ_{idx}")), &ply::to_string(&occ))?;
                write_text(&dir.join("p_refl").join(format!("p_refl_{idx}")), &ply::to_string(&refl))?;
                Ok((occ.len(), refl.len()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SimulateSummary {
            frames: sc.frames.len(),
            written: stats.len(),
            occluded_points: stats.iter().map(|s| s.0).sum(),
            ghost_points: stats.iter().map(|s| s.1).sum(),
            frames_with_ghosts: stats.iter().filter(|s| s.1 > 0).count(),
        })
    }

    /// Runs the placement search for the configured seed. With
    /// `test_optimum`, the attack objective is replaced by the negated
    /// squared distance to that point.
    pub fn optimize(&self, test_optimum: Option<Placement>) -> Result<OptimizationResult> {
        let dir = self.dir("optimize");
        let seed = self.config().seed;
        let result = match test_optimum {
            Some(o) => {
                let cfg = self.config().optimizer_config(derive_seed(seed, Stream::Optimizer, 0));
                optimize_placement(&self.scenario.space, &self.scenario.route, &cfg, |p| {
                    -((p.x - o.x).powi(2) + (p.y - o.y).powi(2) + (p.theta - o.theta).powi(2))
                })?
            }
            None => {
                let r = self.optimization(seed)?;
                let trace =
                    self.scenario.objective().evaluate(&self.scenario.mirror(&r.best_params), &self.scenario.schedule(seed));
                write_text(&dir.join("objective_trace.csv"), &objective_trace_csv(&trace))?;
                r
            }
        };
        write_text(&dir.join("history.csv"), &history_csv(&result))?;
        write_text(&dir.join("best_placement.toml"), &BestPlacement::from_result(&result).to_toml())?;
        Ok(result)
    }

    fn attack_one(&self, dir: &Path, source: PlacementSource, seed: u64) -> Result<RunRecord> {
        let sc = &self.scenario;
        let (mode, placement) = match source {
            PlacementSource::None => (RunMode::None, None),
            PlacementSource::Optimized => (RunMode::Optimized, Some(self.optimized_placement(seed)?)),
            PlacementSource::Random => {
                let d = sc.route_distance(&self.optimized_placement(seed)?);
                (RunMode::Random, Some(sc.random_placement(seed, d)?))
            }
            PlacementSource::Explicit(p) => (RunMode::Explicit, Some(p)),
            PlacementSource::All => unreachable!("expanded by attack_eval"),
        };
        let outcome = match &placement {
            None => sc.clean()?.clone(),
            Some(p) => sc.attack(p, seed, SimMode::Full)?,
        };
        let name = toml::Value::try_from(mode).expect("mode serialises");
        let run_id = format!("{}-s{seed}", name.as_str().unwrap_or("run"));
        self.record(dir, run_id, mode, seed, placement.as_ref(), &outcome)
    }

    /// One run per seed and source; returns records ordered by source, then seed.
    pub fn attack_eval(&self, source: PlacementSource, seeds: usize) -> Result<Vec<RunRecord>> {
        let dir = self.dir("attack-eval");
        self.ground_truth_file(&dir)?;
        let sources = match source {
            PlacementSource::All => vec![PlacementSource::None, PlacementSource::Random, PlacementSource::Optimized],
            s => vec![s],
        };
        let jobs: Vec<(PlacementSource, u64)> =
            sources.iter().flat_map(|s| self.seeds(seeds).into_iter().map(move |seed| (*s, seed))).collect();
        // Optimise up front so random baselines and optimised runs share one search per seed.
        if self.placement_file.is_none() && sources.iter().any(|s| matches!(s, PlacementSource::Random | PlacementSource::Optimized)) {
            self.seeds(seeds).par_iter().try_for_each(|&s| self.optimization(s).map(|_| ()))?;
        }
        let records = jobs
            .par_iter()
            .map(|&(src, seed)| self.attack_one(&dir, src, seed))
            .collect::<Result<Vec<_>>>()?;
        write_text(&dir.join("metrics.csv"), &metrics_csv(&records))?;
        let groups: Vec<(&str, Vec<&RunRecord>)> = [
            ("none", RunMode::None),
            ("random", RunMode::Random),
            ("optimized", RunMode::Optimized),
            ("explicit", RunMode::Explicit),
        ]
        .into_iter()
        .map(|(name, m)| (name, records.iter().filter(|r| r.mode == m).collect::<Vec<_>>()))
        .filter(|(_, v)| !v.is_empty())
        .collect();
        write_text(&dir.join("summary.csv"), &summary_csv(&groups))?;
        Ok(records)
    }

    /// Full, occlusion-only and reflection-only corruption at the optimised
    /// placement of each seed.
    pub fn ablation(&self, seeds: usize) -> Result<Vec<RunRecord>> {
        let dir = self.dir("ablation");
        self.ground_truth_file(&dir)?;
        let modes = [
            (RunMode::AblationFull, SimMode::Full, "full"),
            (RunMode::AblationOcc, SimMode::OcclusionOnly, "occlusion-only"),
            (RunMode::AblationRefl, SimMode::ReflectionOnly, "reflection-only"),
        ];
        let seed_list = self.seeds(seeds);
        let placements = seed_list
            .par_iter()
            .map(|&s| self.optimized_placement(s))
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<_> = modes.iter().flat_map(|m| seed_list.iter().zip(&placements).map(move |(s, p)| (*m, *s, *p))).collect();
        let records = jobs
            .par_iter()
            .map(|&((mode, sim, name), seed, p)| {
                let outcome = self.scenario.attack(&p, seed, sim)?;
                self.record(&dir, format!("{name}-s{seed}"), mode, seed, Some(&p), &outcome)
            })
            .collect::<Result<Vec<_>>>()?;
        write_text(&dir.join("metrics.csv"), &metrics_csv(&records))?;
        let groups: Vec<(&str, Vec<&RunRecord>)> =
            modes.iter().map(|(m, _, name)| (*name, records.iter().filter(|r| r.mode == *m).collect())).collect();
        write_text(&dir.join("summary.csv"), &summary_csv(&groups))?;
        Ok(records)
    }

    /// The optimised mirror slid along the route normal to `distance`,
    /// keeping its side of the route and its yaw.
    pub fn translate_to_distance(&self, p: &Placement, distance: f64) -> Placement {
        let route = &self.scenario.route;
        let q = Vec3::new(p.x, p.y, route.vertices()[0].z);
        let proj = route.project(&q);
        let mut normal = Vec3::new(-proj.tangent.y, proj.tangent.x, 0.0);
        if (q - proj.point).dot(&normal) < 0.0 {
            normal = -normal;
        }
        let target = proj.point + normal * distance;
        Placement { x: target.x, y: target.y, theta: p.theta }
    }

    /// Trial `k` takes batch seed `k`'s optimised placement and actuation
    /// phase and slides the mirror to each target distance.
    pub fn sweep_distance(&self) -> Result<Vec<SweepRow>> {
        let dir = self.dir("sweep-distance");
        self.ground_truth_file(&dir)?;
        let e = self.config().experiments.clone();
        let n = ((e.sweep_to - e.sweep_from) / e.sweep_step + 1e-9).floor() as usize + 1;
        let targets: Vec<f64> = (0..n).map(|i| e.sweep_from + i as f64 * e.sweep_step).collect();
        let trial_seeds = self.seeds(e.sweep_trials);
        if self.placement_file.is_none() {
            trial_seeds.par_iter().try_for_each(|&s| self.optimization(s).map(|_| ()))?;
        }
        let bases = trial_seeds.iter().map(|&s| self.optimized_placement(s)).collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, usize)> = (0..targets.len()).flat_map(|i| (0..trial_seeds.len()).map(move |k| (i, k))).collect();
        let placement = |i: usize, k: usize| self.translate_to_distance(&bases[k], targets[i]);
        // A distance is skipped when any trial's mirror would leave the bounds.
        let inside: Vec<bool> =
            (0..targets.len()).map(|i| (0..bases.len()).all(|k| self.scenario.space.contains(&placement(i, k)))).collect();
        let outcomes = jobs
            .par_iter()
            .map(|&(i, k)| -> Result<Option<RunRecord>> {
                if !inside[i] {
                    return Ok(None);
                }
                let (p, s) = (placement(i, k), trial_seeds[k]);
                let outcome = self.scenario.attack(&p, s, SimMode::Full)?;
                let run_id = format!("d{:.2}-s{s}", targets[i]);
                self.record(&dir, run_id, RunMode::Sweep, s, Some(&p), &outcome).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<SweepRow> = targets
            .iter()
            .enumerate()
            .map(|(i, &target)| {
                let recs: Vec<&RunRecord> =
                    jobs.iter().zip(&outcomes).filter(|((j, _), _)| *j == i).filter_map(|(_, r)| r.as_ref()).collect();
                if !inside[i] {
                    return SweepRow {
                        target_distance: target,
                        realized_distance: self.scenario.route_distance(&placement(i, 0)),
                        skipped: true,
                        trials: 0,
                        ghost_points: 0,
                        ape_mean: f64::NAN,
                        ape_std: f64::NAN,
                    };
                }
                let apes: Vec<f64> = recs.iter().map(|r| r.ape_rmse_m).collect();
                let (ape_mean, ape_std) = report::mean_std(&apes);
                SweepRow {
                    target_distance: target,
                    realized_distance: self.scenario.route_distance(&placement(i, 0)),
                    skipped: false,
                    trials: recs.len(),
                    ghost_points: recs.iter().map(|r| r.ghost_points).sum(),
                    ape_mean,
                    ape_std,
                }
            })
            .collect();
        let records: Vec<RunRecord> = outcomes.into_iter().flatten().collect();
        write_text(&dir.join("metrics.csv"), &metrics_csv(&records))?;
        write_text(&dir.join("sweep.csv"), &sweep_csv(&rows))?;
        Ok(rows)
    }

    /// `n` uniformly perturbed copies of the optimised placement, plus `n`
    /// random placements at its route distance, all with the base seed's
    /// actuation phase.
    pub fn perturb_placement(&self, n: usize) -> Result<PerturbSummary> {
        let dir = self.dir("perturb-placement");
        self.ground_truth_file(&dir)?;
        let e = self.config().experiments.clone();
        let seed = self.config().seed;
        let base = self.optimized_placement(seed)?;
        let distance = self.scenario.route_distance(&base);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stream::Perturb, 0));
        let sym = |rng: &mut ChaCha8Rng, h: f64| if h > 0.0 { rng.random_range(-h..=h) } else { 0.0 };
        let mut jobs: Vec<PerturbRow> = Vec::with_capacity(2 * n);
        for index in 0..n {
            let (dx, dy) = (sym(&mut rng, e.perturb_xy), sym(&mut rng, e.perturb_xy));
            let dtheta_deg = sym(&mut rng, e.perturb_theta_deg);
            let placement = Placement { x: base.x + dx, y: base.y + dy, theta: base.theta + dtheta_deg.to_radians() };
            jobs.push(PerturbRow { kind: "perturbed", index, dx, dy, dtheta_deg, placement, ape: f64::NAN });
        }
        for index in 0..n {
            let placement = self.scenario.random_placement(derive_seed(seed, Stream::Perturb, 1 + index as u64), distance)?;
            jobs.push(PerturbRow { kind: "random", index, dx: 0.0, dy: 0.0, dtheta_deg: 0.0, placement, ape: f64::NAN });
        }
        let done = jobs
            .into_par_iter()
            .map(|mut row| -> Result<PerturbRow> {
                let outcome = self.scenario.attack(&row.placement, seed, SimMode::Full)?;
                let run_id = format!("{}-{:04}", row.kind, row.index);
                self.record(&dir, run_id, RunMode::Perturb, seed, Some(&row.placement), &outcome)?;
                row.ape = outcome.report.ape_rmse;
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        write_text(&dir.join("perturb.csv"), &perturb_csv(&done))?;
        let (perturbed, random) = done.into_iter().partition(|r| r.kind == "perturbed");
        Ok(PerturbSummary { base, perturbed, random })
    }
}

/// APE and heading error of an estimated TUM trajectory against a reference.
pub fn cmd_metrics(est: &Path, gt: &Path) -> Result<MetricReport> {
    let load = |p: &Path| -> Result<Trajectory> {
        tum::read_file(p).map_err(|e| match e {
            mirrorbench_core::Error::Io(source) => HarnessError::io(p, source),
            other => other.into(),
        })
    };
    Ok(MetricReport::compute(&load(est)?, &load(gt)?)?)
}
