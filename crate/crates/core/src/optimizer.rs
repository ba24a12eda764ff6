//! Derivative-free search over mirror placement `(x, y, θ)` subject to a
//! minimum distance from the route.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{distance_to_polyline, Polyline, Vec3};

/// Candidates evaluated together during refinement. Fixed so results do not
/// depend on the thread count.
const REFINE_BATCH: usize = 8;
/// Refinement step multipliers after a batch that does or does not improve
/// the incumbent.
const STEP_GROW: f64 = 1.5;
const STEP_SHRINK: f64 = 0.7;
const MIN_STEP: f64 = 0.05;
const MAX_STEP: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub x: f64,
    pub y: f64,
    /// Nominal mirror yaw, radians.
    pub theta: f64,
}

impl Placement {
    pub fn position(&self, z: f64) -> Vec3 {
        Vec3::new(self.x, self.y, z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub x_bounds: (f64, f64),
    pub y_bounds: (f64, f64),
    pub theta_bounds: (f64, f64),
    pub min_route_distance: f64,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("x", self.x_bounds), ("y", self.y_bounds), ("theta", self.theta_bounds)] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("empty {name} interval [{lo}, {hi}]")));
            }
        }
        if !(self.min_route_distance >= 0.0) {
            return Err(Error::InvalidParameter("min_route_distance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Placement) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        inside(p.x, self.x_bounds) && inside(p.y, self.y_bounds) && inside(p.theta, self.theta_bounds)
    }

    pub fn is_feasible(&self, p: &Placement, route: &Polyline) -> bool {
        self.contains(p) && distance_to_polyline(&Vec3::new(p.x, p.y, route.vertices()[0].z), route) >= self.min_route_distance
    }

    fn uniform(&self, rng: &mut impl Rng) -> Placement {
        let draw = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        Placement {
            x: draw(rng, self.x_bounds),
            y: draw(rng, self.y_bounds),
            theta: draw(rng, self.theta_bounds),
        }
    }

    fn clip(&self, p: Placement) -> Placement {
        Placement {
            x: p.x.clamp(self.x_bounds.0, self.x_bounds.1),
            y: p.y.clamp(self.y_bounds.0, self.y_bounds.1),
            theta: p.theta.clamp(self.theta_bounds.0, self.theta_bounds.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Uniform exploration, then Gaussian hill-climbing around the incumbent.
    RandomThenRefine,
    PureRandom,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub budget: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub refine_fraction: f64,
    /// Standard deviations (σx, σy, σθ) of refinement steps.
    pub perturbation_scale: (f64, f64, f64),
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            budget: 300,
            seed: 0,
            strategy: Strategy::RandomThenRefine,
            refine_fraction: 0.5,
            perturbation_scale: (0.5, 0.5, 5f64.to_radians()),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidParameter("optimizer budget must be at least 1".into()));
        }
        if !(self.refine_fraction > 0.0 && self.refine_fraction < 1.0) {
            return Err(Error::InvalidParameter("refine_fraction must lie in (0, 1)".into()));
        }
        let (a, b, c) = self.perturbation_scale;
        if [a, b, c].iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidParameter("perturbation scales must be non-negative".into()));
        }
        Ok(())
    }

    /// Number of uniform exploration trials.
    pub fn explore_count(&self) -> usize {
        match self.strategy {
            Strategy::PureRandom => self.budget,
            Strategy::RandomThenRefine => {
                (((1.0 - self.refine_fraction) * self.budget as f64).ceil() as usize).clamp(1, self.budget)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub params: Placement,
    /// `-inf` for infeasible trials, which are never evaluated.
    pub score: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best_params: Placement,
    pub best_score: f64,
    pub history: Vec<Trial>,
}

impl OptimizationResult {
    pub fn evaluations(&self) -> usize {
        self.history.iter().filter(|t| t.feasible).count()
    }
}

fn evaluate_batch<F>(candidates: &[Placement], objective: &F) -> Vec<f64>
where
    F: Fn(&Placement) -> f64 + Sync,
{
    candidates.par_iter().map(objective).collect()
}

/// Maximises `objective` over feasible placements. The result is a pure
/// function of the inputs and `config.seed`.
pub fn optimize_placement<F>(
    space: &SearchSpace,
    route: &Polyline,
    config: &OptimizerConfig,
    objective: F,
) -> Result<OptimizationResult>
where
    F: Fn(&Placement) -> f64 + Sync,
{
    space.validate()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let n_explore = config.explore_count();
    let max_attempts = 10 * config.budget;
    let mut attempts = 0;
    let mut explore = Vec::with_capacity(n_explore);
    while explore.len() < n_explore {
        if attempts >= max_attempts {
            if explore.is_empty() {
                return Err(Error::InfeasibleSpace(format!(
                    "no placement at least {} m from the route in {max_attempts} draws",
                    space.min_route_distance
                )));
            }
            break;
        }
        attempts += 1;
        let p = space.uniform(&mut rng);
        if space.is_feasible(&p, route) {
            explore.push(p);
        }
    }

    let mut history: Vec<Trial> = Vec::with_capacity(config.budget);
    let mut best: Option<(Placement, f64)> = None;
    let commit = |history: &mut Vec<Trial>, best: &mut Option<(Placement, f64)>, t: Trial| {
        if t.feasible && best.is_none_or(|(_, s)| t.score > s) {
            *best = Some((t.params, t.score));
        }
        history.push(t);
    };

    for (p, score) in explore.iter().zip(evaluate_batch(&explore, &objective)) {
        commit(&mut history, &mut best, Trial { params: *p, score, feasible: true });
    }

    let (sx, sy, st) = config.perturbation_scale;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    // Each batch perturbs one coordinate, cycling x, y, θ, with its own
    // multiplicative step size.
    let mut steps = [1.0f64; 3];
    let mut axis = 0;
    while history.len() < config.budget {
        let (centre, before) = best.expect("exploration produced a feasible incumbent");
        let n = REFINE_BATCH.min(config.budget - history.len());
        let candidates: Vec<Placement> = (0..n)
            .map(|_| {
                space.clip(Placement {
                    x: centre.x + if axis == 0 { steps[0] * sx * std_normal.sample(&mut rng) } else { 0.0 },
                    y: centre.y + if axis == 1 { steps[1] * sy * std_normal.sample(&mut rng) } else { 0.0 },
                    theta: centre.theta + if axis == 2 { steps[2] * st * std_normal.sample(&mut rng) } else { 0.0 },
                })
            })
            .collect();
        let feasible: Vec<Placement> =
            candidates.iter().copied().filter(|p| space.is_feasible(p, route)).collect();
        let mut scores = evaluate_batch(&feasible, &objective).into_iter();
        for p in candidates {
            let trial = if space.is_feasible(&p, route) {
                Trial { params: p, score: scores.next().expect("one score per feasible"), feasible: true }
            } else {
                Trial { params: p, score: f64::NEG_INFINITY, feasible: false }
            };
            commit(&mut history, &mut best, trial);
        }
        steps[axis] = if best.is_some_and(|(_, s)| s > before) {
            (steps[axis] * STEP_GROW).min(MAX_STEP)
        } else {
            (steps[axis] * STEP_SHRINK).max(MIN_STEP)
        };
        axis = (axis + 1) % 3;
    }

    let (best_params, best_score) = best.expect("at least one feasible trial");
    Ok(OptimizationResult { best_params, best_score, history })
}

/// Uniform placement exactly `fixed_distance` from the route (either side),
/// with uniform yaw. Used for the matched-distance random baseline.
pub fn sample_random_placement(
    space: &SearchSpace,
    route: &Polyline,
    fixed_distance: f64,
    seed: u64,
) -> Result<Placement> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length = route.length();
    for _ in 0..10_000 {
        let (foot, tangent) = route.sample(rng.random_range(0.0..=length));
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let normal = Vec3::new(-tangent.y, tangent.x, 0.0).normalize() * side;
        let pos = foot + normal * fixed_distance;
        let theta = if space.theta_bounds.0 == space.theta_bounds.1 {
            space.theta_bounds.0
        } else {
            rng.random_range(space.theta_bounds.0..=space.theta_bounds.1)
        };
        let p = Placement { x: pos.x, y: pos.y, theta };
        if space.contains(&p) && (distance_to_polyline(&pos, route) - fixed_distance).abs() <= 1e-6 {
            return Ok(p);
        }
    }
    Err(Error::InfeasibleSpace(format!(
        "no placement {fixed_distance} m from the route inside the bounds"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route() -> Polyline {
        Polyline::new(vec![Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)]).unwrap()
    }

    fn space() -> SearchSpace {
        SearchSpace {
            x_bounds: (0.0, 10.0),
            y_bounds: (-4.0, 4.0),
            theta_bounds: (-3.0, 3.0),
            min_route_distance: 1.5,
        }
    }

    #[test]
    fn budget_one() {
        let cfg = OptimizerConfig { budget: 1, ..Default::default() };
        let r = optimize_placement(&space(), &route(), &cfg, |p| p.x).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.best_params, r.history[0].params);
        assert_eq!(r.best_score, r.history[0].score);
    }

    #[test]
    fn infeasible_space() {
        let s = SearchSpace { y_bounds: (-1.0, 1.0), ..space() };
        let err = optimize_placement(&s, &route(), &OptimizerConfig::default(), |_| 0.0);
        assert!(matches!(err, Err(Error::InfeasibleSpace(_))));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig { budget: 0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { refine_fraction: 1.0, ..Default::default() }.validate().is_err());
        assert_eq!(OptimizerConfig { budget: 300, ..Default::default() }.explore_count(), 150);
        assert_eq!(OptimizerConfig { budget: 3, ..Default::default() }.explore_count(), 2);
    }

    #[test]
    fn random_placement_on_offset_line() {
        let p = sample_random_placement(&space(), &route(), 1.5, 3).unwrap();
        assert!((p.y.abs() - 1.5).abs() < 1e-6);
        let too_far = sample_random_placement(&space(), &route(), 9.0, 3);
        assert!(too_far.is_err());
    }
}
