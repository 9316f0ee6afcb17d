//! Command-line driver: seeded simulations, regret sweeps, Nash enumeration,
//! and offline analysis of emitted run records.
//!
//! Exit codes: 0 success, 2 validation/parse failure, 3 enumeration budget
//! exceeded, 4 I/O failure, 5 internal invariant violation.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use congestexp::analysis::{
    best_in_hindsight_regret, find_pure_nash, verify_smoothness, welfare_report,
    DEFAULT_ENUMERATION_BUDGET,
};
use congestexp::game::{GameFile, RewardKernel};
use congestexp::harness::{run, sweep_regret_scaling, ExperimentConfig, RegretSweepGrid};
use congestexp::record::RunRecord;
use congestexp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "congestexp",
    version,
    about = "Online congestion game simulator: facility-level exponential weights with regret, welfare, and Nash-convergence analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded simulations described by a config file and emit
    /// record.json / trace.csv / snapshots.csv per seed.
    Simulate {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's out_dir, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regret-scaling sweep across horizons and game sizes.
    Sweep {
        /// Base experiment config; supplies player count and reward kernel
        /// defaults for generated games.
        #[arg(long)]
        config: PathBuf,
        /// Grid file (JSON): horizons, facility_counts, subset_sizes, seeds,
        /// game_seed, optional n/kernel overrides.
        #[arg(long)]
        grid: PathBuf,
        /// Output directory for sweep_summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Enumerate all pure Nash equilibria of a game file.
    FindNash {
        /// Game definition file (JSON).
        #[arg(long)]
        game: PathBuf,
        /// Profile-enumeration budget (default 10^7).
        #[arg(long)]
        budget: Option<u128>,
    },
    /// Re-derive regret and welfare from an emitted record and check
    /// consistency; optionally evaluate the smoothness welfare bound.
    Analyze {
        /// Path to a record.json emitted by `simulate`.
        #[arg(long)]
        trace: PathBuf,
        /// Smoothness λ (requires --mu).
        #[arg(long)]
        lambda: Option<f64>,
        /// Smoothness μ (requires --lambda).
        #[arg(long)]
        mu: Option<f64>,
        /// Where to write analysis.json (defaults to the record's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = dispatch(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } | Error::Parse { .. } => 2,
        Error::BudgetExceeded { .. } => 3,
        Error::Io { .. } => 4,
        Error::Invariant(_) => 5,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, out),
        Command::Sweep { config, grid, out } => sweep(&config, &grid, out),
        Command::FindNash { game, budget } => find_nash(&game, budget),
        Command::Analyze {
            trace,
            lambda,
            mu,
            out,
        } => analyze(&trace, lambda, mu, out),
    }
}

fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn simulate(config_path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let spec = config.resolve(&base_dir(config_path))?;
    let seeds: Vec<u64> = match seed {
        Some(s) => vec![s],
        None => config.seeds.clone(),
    };
    let out_dir = out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));

    for &s in &seeds {
        let record = run(&spec, s)?;
        let dir = out_dir.join(format!("seed_{s}"));
        record.emit(&dir)?;
        let regrets: Vec<String> = record
            .regrets
            .iter()
            .map(|r| format!("{:.6}", r.expected.regret))
            .collect();
        println!(
            "seed {s}: T={}, regret per player [{}], average welfare {:.6} -> {}",
            record.horizon,
            regrets.join(", "),
            record.average_welfare,
            dir.display()
        );
    }
    Ok(())
}

/// Grid file for `sweep`; `n` and `kernel` fall back to the base config's game.
#[derive(Debug, Deserialize)]
struct GridFile {
    horizons: Vec<usize>,
    facility_counts: Vec<usize>,
    subset_sizes: Vec<usize>,
    seeds: Vec<u64>,
    game_seed: u64,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    kernel: Option<RewardKernel>,
}

fn sweep(config_path: &Path, grid_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let config = ExperimentConfig::load(config_path)?;
    let spec = config.resolve(&base_dir(config_path))?;
    let text = std::fs::read_to_string(grid_path)
        .map_err(|e| Error::io(grid_path.display().to_string(), e))?;
    let grid_file: GridFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(grid_path.display().to_string(), e.to_string()))?;

    let grid = RegretSweepGrid {
        n: grid_file.n.unwrap_or_else(|| spec.game.player_count()),
        horizons: grid_file.horizons,
        facility_counts: grid_file.facility_counts,
        subset_sizes: grid_file.subset_sizes,
        seeds: grid_file.seeds,
        game_seed: grid_file.game_seed,
        kernel: grid_file.kernel.unwrap_or_else(|| spec.game.kernel()),
    };
    let summary = sweep_regret_scaling(&grid)?;

    for p in &summary.points {
        println!(
            "F={} k={} T={}: max-player regret {:.4} ± {:.4} (constant {:.4})",
            p.facility_count,
            p.subset_size,
            p.horizon,
            p.mean_max_regret,
            p.stderr,
            p.empirical_constant
        );
    }
    for fit in &summary.exponent_fits {
        println!(
            "F={} k={}: fitted horizon exponent {:.4}",
            fit.facility_count, fit.subset_size, fit.exponent
        );
    }

    let out_dir = out
        .or_else(|| config.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let path = out_dir.join("sweep_summary.json");
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::parse("sweep summary", e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn find_nash(game_path: &Path, budget: Option<u128>) -> Result<()> {
    let text = std::fs::read_to_string(game_path)
        .map_err(|e| Error::io(game_path.display().to_string(), e))?;
    let file: GameFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(game_path.display().to_string(), e.to_string()))?;
    let game = file.into_game()?;
    let certs = find_pure_nash(&game, budget.unwrap_or(DEFAULT_ENUMERATION_BUDGET))?;
    for cert in &certs {
        let line =
            serde_json::to_string(cert).map_err(|e| Error::parse("certificate", e.to_string()))?;
        println!("{line}");
    }
    println!(
        "{} pure Nash equilibria ({} strict)",
        certs.len(),
        certs.iter().filter(|c| c.strict).count()
    );
    Ok(())
}

/// Consistency report produced by `analyze`.
#[derive(Debug, Serialize)]
struct Analysis {
    seed: u64,
    horizon: usize,
    trace_every: usize,
    average_welfare: f64,
    /// Stored final regret per player.
    stored_regret: Vec<f64>,
    /// Regret recomputed from the stored policy snapshots.
    recomputed_regret: Vec<f64>,
    /// max |stored − recomputed| over players (exact only for trace_every=1).
    regret_consistency: f64,
    /// max over rows of |stored welfare − welfare recomputed from marginals|.
    welfare_consistency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    welfare_bound: Option<congestexp::analysis::WelfareReport>,
}

fn analyze(
    trace_path: &Path,
    lambda: Option<f64>,
    mu: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let record = RunRecord::load(trace_path)?;
    let game = record.game.clone().into_game()?;

    let snapshots: Vec<Vec<Vec<f64>>> = record.rows.iter().map(|r| r.marginals.clone()).collect();
    let recomputed: Vec<f64> = (0..game.player_count())
        .map(|i| best_in_hindsight_regret(&game, i, &snapshots).regret)
        .collect();
    let stored: Vec<f64> = record.regrets.iter().map(|r| r.expected.regret).collect();
    let regret_consistency = stored
        .iter()
        .zip(&recomputed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if record.trace_every != 1 {
        println!(
            "note: trace_every = {} — snapshot-based recomputation covers only traced rounds",
            record.trace_every
        );
    }

    let welfare_consistency = record
        .rows
        .iter()
        .map(|row| (row.welfare - game.expected_welfare(&row.marginals)).abs())
        .fold(0.0, f64::max);

    let welfare_bound = match (lambda, mu) {
        (Some(lambda), Some(mu)) => {
            let witness = verify_smoothness(&game, lambda, mu, DEFAULT_ENUMERATION_BUDGET)?;
            if witness.is_none() {
                return Err(Error::validation(
                    "lambda/mu",
                    format!(
                        "the game is not ({lambda}, {mu})-smooth; enumeration found no witness"
                    ),
                ));
            }
            let welfare_trace: Vec<f64> = record.rows.iter().map(|r| r.welfare).collect();
            Some(welfare_report(
                &game,
                &welfare_trace,
                lambda,
                mu,
                &stored,
                DEFAULT_ENUMERATION_BUDGET,
            )?)
        }
        (None, None) => None,
        _ => {
            return Err(Error::validation(
                "lambda/mu",
                "--lambda and --mu must be given together",
            ));
        }
    };

    let analysis = Analysis {
        seed: record.seed,
        horizon: record.horizon,
        trace_every: record.trace_every,
        average_welfare: record.average_welfare,
        stored_regret: stored,
        recomputed_regret: recomputed,
        regret_consistency,
        welfare_consistency,
        welfare_bound,
    };

    println!(
        "seed {}: regret consistency {:.3e}, welfare consistency {:.3e}",
        analysis.seed, analysis.regret_consistency, analysis.welfare_consistency
    );
    if let Some(report) = &analysis.welfare_bound {
        println!(
            "welfare bound: average {:.6} vs λ/(1+μ)·OPT − ΣR/(T(1+μ)) = {:.6} (slack {:.6})",
            report.average_welfare, report.bound, report.slack
        );
    }

    let out_path = out.unwrap_or_else(|| {
        trace_path
            .parent()
            .map(|d| d.join("analysis.json"))
            .unwrap_or_else(|| PathBuf::from("analysis.json"))
    });
    let json = serde_json::to_string_pretty(&analysis)
        .map_err(|e| Error::parse("analysis", e.to_string()))?;
    std::fs::write(&out_path, json).map_err(|e| Error::io(out_path.display().to_string(), e))?;
    println!("wrote {}", out_path.display());
    Ok(())
}
