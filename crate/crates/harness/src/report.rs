//! On-disk artifacts: CSV tables, run records and the best-placement file.
//!
//! Floats go through Rust's shortest round-trip formatting, so every table
//! parses back to the exact values that produced it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mirrorbench_core::objective::ObjectiveTrace;
use mirrorbench_core::optimizer::{OptimizationResult, Placement};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::scenario::AttackOutcome;

/// Lateral-error thresholds for leaving an urban / highway lane, metres.
pub const URBAN_LANE_MARGIN: f64 = 0.29;
pub const HIGHWAY_LANE_MARGIN: f64 = 0.74;

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    None,
    Random,
    Optimized,
    Explicit,
    AblationFull,
    AblationOcc,
    AblationRefl,
    Sweep,
    Perturb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub x: f64,
    pub y: f64,
    pub theta_deg: f64,
    pub route_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub scenario_hash: String,
    pub mode: RunMode,
    pub seed: u64,
    pub placement: Option<PlacementRecord>,
    /// APE RMSE against ground truth, metres.
    pub ape_rmse_m: f64,
    pub max_heading_err_deg: f64,
    /// The mirror-free run's APE against the same ground truth.
    pub clean_ape_rmse_m: f64,
    pub n_frames: usize,
    pub degenerate_frames: usize,
    pub ghost_points: usize,
    pub occluded_points: usize,
    pub max_lateral_err_m: f64,
    pub exceeds_urban_lane: bool,
    pub exceeds_highway_lane: bool,
    /// Paths relative to the output directory.
    pub trajectory: PathBuf,
    pub ground_truth: PathBuf,
}

impl RunRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        run_id: String,
        scenario_hash: String,
        mode: RunMode,
        seed: u64,
        placement: Option<PlacementRecord>,
        outcome: &AttackOutcome,
        clean_ape: f64,
        trajectory: PathBuf,
        ground_truth: PathBuf,
    ) -> Self {
        Self {
            run_id,
            scenario_hash,
            mode,
            seed,
            placement,
            ape_rmse_m: outcome.report.ape_rmse,
            max_heading_err_deg: outcome.report.max_heading_error,
            clean_ape_rmse_m: clean_ape,
            n_frames: outcome.trajectory.len(),
            degenerate_frames: outcome.degenerate_frames,
            ghost_points: outcome.ghost_points,
            occluded_points: outcome.occluded_points,
            max_lateral_err_m: outcome.max_lateral_error,
            exceeds_urban_lane: outcome.max_lateral_error > URBAN_LANE_MARGIN,
            exceeds_highway_lane: outcome.max_lateral_error > HIGHWAY_LANE_MARGIN,
            trajectory,
            ground_truth,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("record serialises")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

pub const METRICS_HEADER: &str = "run_id,mode,seed,ape_rmse_m,max_heading_err_deg,n_frames,degenerate_frames,ghost_points";

pub fn metrics_csv(records: &[RunRecord]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in records {
        let mode = toml::Value::try_from(r.mode).expect("mode serialises");
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.run_id,
            mode.as_str().unwrap_or_default(),
            r.seed,
            r.ape_rmse_m,
            r.max_heading_err_deg,
            r.n_frames,
            r.degenerate_frames,
            r.ghost_points
        );
    }
    s
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn format_mean_std(values: &[f64]) -> String {
    let (m, s) = mean_std(values);
    format!("{m:.3}±{s:.3}")
}

/// One `mean±std` row per group, in the order given.
pub fn summary_csv(groups: &[(&str, Vec<&RunRecord>)]) -> String {
    let mut s = String::from("mode,runs,ape_rmse_m,max_heading_err_deg\n");
    for (name, runs) in groups {
        let ape: Vec<f64> = runs.iter().map(|r| r.ape_rmse_m).collect();
        let head: Vec<f64> = runs.iter().map(|r| r.max_heading_err_deg).collect();
        let _ = writeln!(s, "{name},{},{},{}", runs.len(), format_mean_std(&ape), format_mean_std(&head));
    }
    s
}

pub fn objective_trace_csv(trace: &ObjectiveTrace) -> String {
    let mut s = String::from("frame,eta_occ,eta_refl,ema_occ,ema_refl,n_occ,n_refl\n");
    for (i, f) in trace.per_frame.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{}",
            f.eta_occ, f.eta_refl, f.ema_occ, f.ema_refl, f.n_occ, f.n_refl
        );
    }
    let _ = writeln!(s, "# J={}", trace.score);
    s
}

/// Theta is written in radians, the unit the optimizer works in.
pub fn history_csv(result: &OptimizationResult) -> String {
    let mut s = String::from("trial,x,y,theta,feasible,score\n");
    for (i, t) in result.history.iter().enumerate() {
        let p = t.params;
        let _ = writeln!(s, "{i},{},{},{},{},{}", p.x, p.y, p.theta, t.feasible, t.score);
    }
    let b = result.best_params;
    let _ = writeln!(s, "# best x={} y={} theta={} score={}", b.x, b.y, b.theta, result.best_score);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestPlacement {
    pub x: f64,
    pub y: f64,
    pub theta_deg: f64,
    pub score: f64,
    pub evaluations: usize,
}

impl BestPlacement {
    pub fn from_result(r: &OptimizationResult) -> Self {
        Self {
            x: r.best_params.x,
            y: r.best_params.y,
            theta_deg: r.best_params.theta.to_degrees(),
            score: r.best_score,
            evaluations: r.evaluations(),
        }
    }

    pub fn placement(&self) -> Placement {
        Placement { x: self.x, y: self.y, theta: self.theta_deg.to_radians() }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("placement serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        toml::from_str(&read_text(path)?).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub target_distance: f64,
    pub realized_distance: f64,
    pub skipped: bool,
    pub trials: usize,
    pub ghost_points: usize,
    pub ape_mean: f64,
    pub ape_std: f64,
}

pub const SWEEP_HEADER: &str =
    "target_distance_m,realized_distance_m,skipped,trials,ghost_points,ape_mean_m,ape_std_m";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.target_distance, r.realized_distance, r.skipped, r.trials, r.ghost_points, r.ape_mean, r.ape_std
        );
    }
    s
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let bad = |line: usize, msg: &str| HarnessError::Config(format!("sweep csv line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == SWEEP_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(bad(i + 1, "expected 7 fields"));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|e| bad(i + 1, &e.to_string()));
            let int = |k: usize| f[k].parse::<usize>().map_err(|e| bad(i + 1, &e.to_string()));
            Ok(SweepRow {
                target_distance: num(0)?,
                realized_distance: num(1)?,
                skipped: f[2].parse().map_err(|_| bad(i + 1, "skipped must be true/false"))?,
                trials: int(3)?,
                ghost_points: int(4)?,
                ape_mean: num(5)?,
                ape_std: num(6)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbRow {
    pub kind: &'static str,
    pub index: usize,
    pub dx: f64,
    pub dy: f64,
    pub dtheta_deg: f64,
    pub placement: Placement,
    pub ape: f64,
}

pub fn perturb_csv(rows: &[PerturbRow]) -> String {
    let mut s = String::from("kind,index,dx_m,dy_m,dtheta_deg,x,y,theta_deg,ape_rmse_m\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.kind,
            r.index,
            r.dx,
            r.dy,
            r.dtheta_deg,
            r.placement.x,
            r.placement.y,
            r.placement.theta.to_degrees(),
            r.ape
        );
    }
    s
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}
