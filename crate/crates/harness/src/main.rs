use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mirrorbench::report::{format_mean_std, median};
use mirrorbench::{cmd_metrics, Harness, HarnessError, PlacementSource, Result, ScenarioConfig};
use mirrorbench_core::optimizer::Placement;

#[derive(Parser)]
#[command(name = "mirrorbench", version, about = "Mirror attacks on LiDAR scan-matching odometry")]
struct Cli {
    /// Scenario file (TOML). Built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    None,
    Random,
    Optimized,
    Explicit,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Write raw and corrupted clouds plus the ground-truth trajectory.
    Simulate {
        /// Keep every n-th frame.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Search for the placement maximising the attack objective.
    Optimize {
        /// Replace the objective with a quadratic peaked at X,Y,THETA_DEG.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "X,Y,THETA_DEG")]
        test_function: Option<Vec<f64>>,
    },
    /// Run the victim against a mirror and score the drift.
    AttackEval {
        #[arg(long, value_enum, default_value_t = Source::All)]
        placement: Source,
        /// X,Y,THETA_DEG for `--placement explicit`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, value_name = "X,Y,THETA_DEG")]
        at: Option<Vec<f64>>,
        /// A best_placement.toml to use instead of optimising per seed.
        #[arg(long)]
        placement_file: Option<PathBuf>,
        /// Batch size; defaults to `seeds` in the scenario.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Full, occlusion-only and reflection-only corruption.
    Ablation {
        #[arg(long)]
        placement_file: Option<PathBuf>,
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// APE as the optimised mirror is moved away from the route.
    SweepDistance {
        #[arg(long)]
        placement_file: Option<PathBuf>,
    },
    /// APE under placement errors against a matched-distance random baseline.
    PerturbPlacement {
        #[arg(long)]
        placement_file: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// APE and heading error between two TUM trajectories.
    Metrics {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
}

fn placement_from(v: &[f64]) -> Result<Placement> {
    match v {
        [x, y, theta_deg] => Ok(Placement { x: *x, y: *y, theta: theta_deg.to_radians() }),
        _ => Err(HarnessError::Config(format!("expected X,Y,THETA_DEG, got {} values", v.len()))),
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    if let Command::Metrics { est, gt } = &cli.command {
        let r = cmd_metrics(est, gt)?;
        println!("ape_rmse_m,max_heading_err_deg,n_frames");
        println!("{},{},{}", r.ape_rmse, r.max_heading_error, r.per_frame_errors.len());
        return Ok(());
    }
    let cfg = load_config(&cli)?;
    let default_seeds = cfg.seeds;
    let default_n = cfg.experiments.perturb_samples;
    let harness = |file: &Option<PathBuf>| Harness::new(cfg.clone()).map(|h| h.with_placement_file(file.clone()));
    match &cli.command {
        Command::Simulate { stride } => {
            let s = harness(&None)?.simulate(*stride)?;
            println!(
                "{} of {} frames written, {} ghost points in {} frames, {} occluded",
                s.written, s.frames, s.ghost_points, s.frames_with_ghosts, s.occluded_points
            );
        }
        Command::Optimize { test_function } => {
            let r = harness(&None)?.optimize(test_function.as_deref().map(placement_from).transpose()?)?;
            let b = r.best_params;
            println!(
                "best x={} y={} theta_deg={} J={} ({} evaluations)",
                b.x,
                b.y,
                b.theta.to_degrees(),
                r.best_score,
                r.evaluations()
            );
        }
        Command::AttackEval { placement, at, placement_file, seeds } => {
            let source = match placement {
                Source::None => PlacementSource::None,
                Source::Random => PlacementSource::Random,
                Source::Optimized => PlacementSource::Optimized,
                Source::All => PlacementSource::All,
                Source::Explicit => PlacementSource::Explicit(placement_from(at.as_deref().ok_or_else(|| {
                    HarnessError::Config("--placement explicit needs --at X,Y,THETA_DEG".into())
                })?)?),
            };
            let records = harness(placement_file)?.attack_eval(source, seeds.unwrap_or(default_seeds))?;
            for mode in ["none", "random", "optimized", "explicit"] {
                let apes: Vec<f64> = records
                    .iter()
                    .filter(|r| toml::Value::try_from(r.mode).ok().and_then(|v| v.as_str().map(|s| s == mode)) == Some(true))
                    .map(|r| r.ape_rmse_m)
                    .collect();
                if !apes.is_empty() {
                    println!("{mode:>10}  APE {} m  ({} runs)", format_mean_std(&apes), apes.len());
                }
            }
        }
        Command::Ablation { placement_file, seeds } => {
            let records = harness(placement_file)?.ablation(seeds.unwrap_or(default_seeds))?;
            let n = records.len() / 3;
            for (chunk, name) in records.chunks(n.max(1)).zip(["full", "occlusion-only", "reflection-only"]) {
                let apes: Vec<f64> = chunk.iter().map(|r| r.ape_rmse_m).collect();
                println!("{name:>16}  APE {} m", format_mean_std(&apes));
            }
        }
        Command::SweepDistance { placement_file } => {
            for row in harness(placement_file)?.sweep_distance()? {
                if row.skipped {
                    println!("{:.2} m  skipped (outside search bounds)", row.target_distance);
                } else {
                    println!(
                        "{:.2} m  APE {:.3}±{:.3} m  ghosts {}",
                        row.target_distance, row.ape_mean, row.ape_std, row.ghost_points
                    );
                }
            }
        }
        Command::PerturbPlacement { placement_file, n } => {
            let s = harness(placement_file)?.perturb_placement(n.unwrap_or(default_n))?;
            let ape = |rows: &[mirrorbench::report::PerturbRow]| rows.iter().map(|r| r.ape).collect::<Vec<_>>();
            println!("perturbed  median APE {:.3} m", median(&ape(&s.perturbed)));
            println!("   random  median APE {:.3} m", median(&ape(&s.random)));
        }
        Command::Metrics { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
