//! Seeded, reproducible experiment driver.
//!
//! A run executes the per-round barrier — sample all actions, realize
//! rewards, build estimates, update all players — for `T` rounds, recording
//! a [`RunRecord`]. Every random draw comes from one ChaCha stream derived
//! from the run's seed, consumed in a fixed order (players ascending, then
//! facilities ascending), so identical `(config, seed)` pairs produce
//! byte-identical artifacts regardless of thread count.
//!
//! On top of `run` sit two studies:
//!
//! - [`sweep_regret_scaling`] measures best-in-hindsight regret across a
//!   grid of horizons and game sizes and fits the horizon exponent.
//! - [`run_convergence_study`] tracks the distance to a strict equilibrium
//!   and the score-gap envelope round by round, against the closed-form
//!   decay `2kF·exp(−M − ε·Σ_j η_j)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::analysis::{
    best_fixed_action, best_strict_nash, RegretTrace, DEFAULT_ENUMERATION_BUDGET,
};
use crate::error::{Error, Result};
use crate::game::{CongestionGame, GameFile, RewardKernel};
use crate::learner::{
    beta_for_stochastic_convergence, estimate_fullinfo_expected, estimate_fullinfo_stochastic,
    estimate_semibandit, EstimateVector, FeedbackMode, Learner, LearningRateSchedule,
    NashConvergenceMonitor,
};
use crate::record::{RegretSummary, RunRecord, TraceRow};
use crate::rng::{derive_seed, run_rng};

// ---------------------------------------------------------------------------
// Configuration schema
// ---------------------------------------------------------------------------

/// Game reference in an experiment config: inline or a file path (relative
/// paths resolve against the config file's directory).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSource {
    File { file: String },
    Inline(GameFile),
}

/// Learning-rate schedule configuration.
///
/// `constant` without an explicit `eta` defaults to `1/√T`. `auto_beta`
/// resolves to the power-decay schedule whose squared sum satisfies the
/// stochastic-convergence condition for the given failure probability and
/// margin.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleConfig {
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
    PowerDecay {
        beta: f64,
        alpha: f64,
    },
    AutoBeta {
        delta: f64,
        margin: f64,
        alpha: f64,
    },
}

/// Initial scores: zero everywhere, or `margin` on the facilities of a
/// reference equilibrium action.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    Uniform,
    NearNe { margin: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub mode: FeedbackMode,
    pub schedule: ScheduleConfig,
    #[serde(default = "default_init")]
    pub init: InitConfig,
}

fn default_init() -> InitConfig {
    InitConfig::Uniform
}

/// One learner config shared by all players, or one per player.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearnerSetup {
    Shared(Box<LearnerConfig>),
    PerPlayer(Vec<LearnerConfig>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub learner: LearnerSetup,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    /// Optional explicit reference equilibrium (per-player facility lists)
    /// for distance/absorption tracing. Near-NE initialization computes one
    /// automatically when this is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_nash: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

fn default_trace_every() -> usize {
    1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    /// Validate and resolve into an executable [`RunSpec`]. `base_dir` is
    /// the directory game file paths resolve against.
    pub fn resolve(&self, base_dir: &Path) -> Result<RunSpec> {
        if self.horizon == 0 {
            return Err(Error::validation("horizon", "must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("seeds", "need at least one seed"));
        }
        if self.trace_every == 0 {
            return Err(Error::validation("trace_every", "must be >= 1"));
        }
        let game = match &self.game {
            GameSource::Inline(file) => file.clone().into_game()?,
            GameSource::File { file } => {
                let path = base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                let parsed: GameFile = serde_json::from_str(&text)
                    .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
                parsed.into_game()?
            }
        };
        let n = game.player_count();
        let configs: Vec<LearnerConfig> = match &self.learner {
            LearnerSetup::Shared(c) => vec![(**c).clone(); n],
            LearnerSetup::PerPlayer(list) => {
                if list.len() != n {
                    return Err(Error::validation(
                        "learner",
                        format!("expected {n} per-player configs, got {}", list.len()),
                    ));
                }
                list.clone()
            }
        };

        // Near-NE initialization must be all-or-nothing with one margin.
        let margins: Vec<f64> = configs
            .iter()
            .filter_map(|c| match c.init {
                InitConfig::NearNe { margin } => Some(margin),
                InitConfig::Uniform => None,
            })
            .collect();
        let init_margin = if margins.is_empty() {
            None
        } else {
            if margins.len() != n {
                return Err(Error::validation(
                    "learner.init",
                    "near_ne initialization must be set for every player or none",
                ));
            }
            if margins.iter().any(|m| (m - margins[0]).abs() > 0.0) {
                return Err(Error::validation(
                    "learner.init.margin",
                    "near_ne margins must match across players",
                ));
            }
            Some(margins[0])
        };

        // Reference equilibrium: explicit, or computed when near-NE init
        // needs one.
        let reference = match (&self.reference_nash, init_margin) {
            (Some(lists), margin) => {
                if lists.len() != n {
                    return Err(Error::validation(
                        "reference_nash",
                        format!("expected {n} actions, got {}", lists.len()),
                    ));
                }
                let profile: Vec<Action> =
                    lists.iter().map(|l| Action::from_facilities(l)).collect();
                game.validate_joint_action(&profile)?;
                Some(ReferenceTracking {
                    profile,
                    margin: margin.unwrap_or(0.0),
                })
            }
            (None, Some(margin)) => {
                let cert =
                    best_strict_nash(&game, DEFAULT_ENUMERATION_BUDGET)?.ok_or_else(|| {
                        Error::validation(
                            "learner.init",
                            "near_ne initialization requires a strict pure Nash equilibrium, \
                         and this game has none",
                        )
                    })?;
                Some(ReferenceTracking {
                    profile: cert.profile,
                    margin,
                })
            }
            (None, None) => None,
        };

        let schedules = configs
            .iter()
            .map(|c| resolve_schedule(&c.schedule, &game, self.horizon))
            .collect::<Result<Vec<_>>>()?;

        Ok(RunSpec {
            game,
            modes: configs.iter().map(|c| c.mode).collect(),
            schedules,
            inits: configs.iter().map(|c| c.init.clone()).collect(),
            horizon: self.horizon,
            trace_every: self.trace_every,
            reference,
        })
    }
}

fn resolve_schedule(
    config: &ScheduleConfig,
    game: &CongestionGame,
    horizon: usize,
) -> Result<LearningRateSchedule> {
    match config {
        ScheduleConfig::Constant { eta: Some(eta) } => {
            Ok(LearningRateSchedule::Constant { eta: *eta })
        }
        ScheduleConfig::Constant { eta: None } => Ok(LearningRateSchedule::for_horizon(horizon)),
        ScheduleConfig::PowerDecay { beta, alpha } => Ok(LearningRateSchedule::PowerDecay {
            beta: *beta,
            alpha: *alpha,
        }),
        ScheduleConfig::AutoBeta {
            delta,
            margin,
            alpha,
        } => {
            let beta = beta_for_stochastic_convergence(
                *delta,
                *margin,
                game.subset_size(),
                game.player_count(),
                game.facility_count(),
                *alpha,
            )?;
            Ok(LearningRateSchedule::PowerDecay {
                beta,
                alpha: *alpha,
            })
        }
    }
}

/// Reference equilibrium tracked in the trace (distance and absorption flag).
#[derive(Clone, Debug)]
pub struct ReferenceTracking {
    pub profile: Vec<Action>,
    pub margin: f64,
}

/// Fully resolved, validated run parameters.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub game: CongestionGame,
    pub modes: Vec<FeedbackMode>,
    pub schedules: Vec<LearningRateSchedule>,
    pub inits: Vec<InitConfig>,
    pub horizon: usize,
    pub trace_every: usize,
    pub reference: Option<ReferenceTracking>,
}

impl RunSpec {
    /// Plain spec: one shared mode/schedule, uniform init, full tracing.
    pub fn simple(
        game: CongestionGame,
        mode: FeedbackMode,
        schedule: LearningRateSchedule,
        horizon: usize,
    ) -> Self {
        let n = game.player_count();
        RunSpec {
            game,
            modes: vec![mode; n],
            schedules: vec![schedule; n],
            inits: vec![InitConfig::Uniform; n],
            horizon,
            trace_every: 1,
            reference: None,
        }
    }

    fn build_learners(&self) -> Result<Vec<Learner>> {
        (0..self.game.player_count())
            .map(|i| match &self.inits[i] {
                InitConfig::Uniform => {
                    Learner::uniform(&self.game, i, self.schedules[i], self.modes[i])
                }
                InitConfig::NearNe { margin } => {
                    let reference = self.reference.as_ref().ok_or_else(|| {
                        Error::validation("init", "near_ne init without a reference equilibrium")
                    })?;
                    Learner::near_reference(
                        &self.game,
                        i,
                        reference.profile[i],
                        *margin,
                        self.schedules[i],
                        self.modes[i],
                    )
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// The run loop
// ---------------------------------------------------------------------------

/// Execute one seeded run.
///
/// Round structure (one barrier): snapshot policies → sample actions →
/// realize rewards → account regret/welfare → trace → estimate → update.
/// Trace rows record the policies the round was *played* from.
pub fn run(spec: &RunSpec, seed: u64) -> Result<RunRecord> {
    let game = &spec.game;
    let n = game.player_count();
    let f_count = game.facility_count();
    let mut rng = run_rng(seed);
    let mut learners = spec.build_learners()?;
    let monitor = spec
        .reference
        .as_ref()
        .map(|r| NashConvergenceMonitor::new(r.profile.clone(), r.margin));

    let mut facility_values = vec![vec![0.0; f_count]; n];
    let mut cum_expected = vec![0.0; n];
    let mut cum_realized = vec![0.0; n];
    let mut welfare_sum = 0.0;
    let mut rows = Vec::new();

    for t in 1..=spec.horizon {
        let marginals: Vec<Vec<f64>> = learners.iter().map(|l| l.policy().marginals()).collect();

        let actions: Vec<Action> = learners
            .iter()
            .map(|l| l.policy().sample(&mut rng))
            .collect();
        let realized = game.sample_facility_rewards(&actions, &mut rng);

        let mut regret_now = vec![0.0; n];
        for i in 0..n {
            for f in 0..f_count {
                let e = game.expected_facility_reward(i, f, &marginals);
                facility_values[i][f] += e;
                cum_expected[i] += marginals[i][f] * e;
            }
            let (_, best_value) = best_fixed_action(game, i, &facility_values[i]);
            regret_now[i] = best_value - cum_expected[i];
            cum_realized[i] += actions[i].facilities().map(|f| realized[f]).sum::<f64>();
        }
        let welfare_t = game.expected_welfare(&marginals);
        welfare_sum += welfare_t;

        if t % spec.trace_every == 0 {
            let (nash_distance, in_absorption) = match (&monitor, &spec.reference) {
                (Some(mon), Some(reference)) => {
                    let distances = (0..n)
                        .map(|i| {
                            learners[i]
                                .policy()
                                .l1_distance_to_pure(reference.profile[i])
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    let policies: Vec<&crate::policy::FactoredPolicy> =
                        learners.iter().map(|l| l.policy()).collect();
                    (Some(distances), Some(mon.in_absorption_set(&policies)))
                }
                _ => (None, None),
            };
            rows.push(TraceRow {
                t,
                actions: actions.clone(),
                realized_rewards: realized.clone(),
                scores: learners
                    .iter()
                    .map(|l| l.policy().scores().to_vec())
                    .collect(),
                marginals: marginals.clone(),
                regret_so_far: regret_now.clone(),
                welfare: welfare_t,
                nash_distance,
                in_absorption,
            });
        }

        let estimates: Vec<EstimateVector> = (0..n)
            .map(|i| match learners[i].mode() {
                FeedbackMode::SemiBandit => {
                    estimate_semibandit(actions[i], &realized, &marginals[i])
                }
                FeedbackMode::FullInfoExpected => estimate_fullinfo_expected(game, i, &marginals),
                FeedbackMode::FullInfoStochastic => {
                    estimate_fullinfo_stochastic(game, i, &actions, &mut rng)
                }
            })
            .collect();
        for (learner, est) in learners.iter_mut().zip(&estimates) {
            learner.update(est);
        }
    }

    let regrets = (0..n)
        .map(|i| {
            let (best_action, best_value) = best_fixed_action(game, i, &facility_values[i]);
            RegretSummary {
                expected: RegretTrace {
                    cumulative: cum_expected[i],
                    facility_values: facility_values[i].clone(),
                    best_value,
                    best_action,
                    regret: best_value - cum_expected[i],
                },
                realized_cumulative: cum_realized[i],
                realized_regret: best_value - cum_realized[i],
            }
        })
        .collect();

    Ok(RunRecord {
        game: crate::game::GameFile::from_game(game),
        seed,
        horizon: spec.horizon,
        trace_every: spec.trace_every,
        reference_nash: spec.reference.as_ref().map(|r| r.profile.clone()),
        margin: spec.reference.as_ref().map(|r| r.margin),
        rows,
        regrets,
        average_welfare: welfare_sum / spec.horizon as f64,
    })
}

/// Run every seed of a resolved config, in parallel, in seed-list order.
pub fn run_all_seeds(spec: &RunSpec, seeds: &[u64]) -> Result<Vec<RunRecord>> {
    seeds.par_iter().map(|&s| run(spec, s)).collect()
}

// ---------------------------------------------------------------------------
// Regret-scaling sweep
// ---------------------------------------------------------------------------

/// Grid for the regret-scaling study. Per (F, k) pair a random game is drawn
/// from `derive_seed(game_seed, pair_index)`; every horizon shares that game,
/// and every run uses the semi-bandit learner with `η = 1/√T` from a uniform
/// start.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegretSweepGrid {
    pub n: usize,
    pub horizons: Vec<usize>,
    pub facility_counts: Vec<usize>,
    pub subset_sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub game_seed: u64,
    #[serde(default = "default_kernel")]
    pub kernel: RewardKernel,
}

fn default_kernel() -> RewardKernel {
    RewardKernel::Bernoulli
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPointSummary {
    pub facility_count: usize,
    pub subset_size: usize,
    pub horizon: usize,
    /// Max-over-players regret, one entry per seed.
    pub per_seed_max_regret: Vec<f64>,
    pub mean_max_regret: f64,
    pub stderr: f64,
    /// max over seeds and players of Regret_i(T) / (kF√T).
    pub empirical_constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentFit {
    pub facility_count: usize,
    pub subset_size: usize,
    /// Least-squares slope of log mean regret against log horizon.
    pub exponent: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegretSweepSummary {
    pub grid: RegretSweepGrid,
    pub points: Vec<SweepPointSummary>,
    pub exponent_fits: Vec<ExponentFit>,
}

pub fn sweep_regret_scaling(grid: &RegretSweepGrid) -> Result<RegretSweepSummary> {
    if grid.horizons.is_empty() || grid.seeds.is_empty() {
        return Err(Error::validation(
            "grid",
            "horizons and seeds must be non-empty",
        ));
    }
    let mut points = Vec::new();
    let mut exponent_fits = Vec::new();
    let mut pair_index = 0u64;
    for &f_count in &grid.facility_counts {
        for &k in &grid.subset_sizes {
            if k == 0 || k > f_count {
                return Err(Error::validation(
                    "grid.subset_sizes",
                    format!("k = {k} incompatible with F = {f_count}"),
                ));
            }
            let mut game_rng = run_rng(derive_seed(grid.game_seed, pair_index));
            pair_index += 1;
            let game = CongestionGame::random(grid.n, f_count, k, grid.kernel, &mut game_rng);

            let mut means = Vec::new();
            for &horizon in &grid.horizons {
                let spec = RunSpec::simple(
                    game.clone(),
                    FeedbackMode::SemiBandit,
                    LearningRateSchedule::for_horizon(horizon),
                    horizon,
                );
                // regret accumulators stay exact with thinned tracing
                let spec = RunSpec {
                    trace_every: horizon,
                    ..spec
                };
                let records = run_all_seeds(&spec, &grid.seeds)?;
                let per_seed_max: Vec<f64> = records
                    .iter()
                    .map(|r| {
                        r.regrets
                            .iter()
                            .map(|s| s.expected.regret)
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                let mean = per_seed_max.iter().sum::<f64>() / per_seed_max.len() as f64;
                let var = per_seed_max
                    .iter()
                    .map(|x| (x - mean) * (x - mean))
                    .sum::<f64>()
                    / (per_seed_max.len().saturating_sub(1).max(1)) as f64;
                let stderr = (var / per_seed_max.len() as f64).sqrt();
                let scale = (k * f_count) as f64 * (horizon as f64).sqrt();
                let empirical_constant = records
                    .iter()
                    .flat_map(|r| r.regrets.iter().map(|s| s.expected.regret))
                    .fold(f64::NEG_INFINITY, f64::max)
                    / scale;
                means.push((horizon, mean));
                points.push(SweepPointSummary {
                    facility_count: f_count,
                    subset_size: k,
                    horizon,
                    per_seed_max_regret: per_seed_max,
                    mean_max_regret: mean,
                    stderr,
                    empirical_constant,
                });
            }
            if means.len() >= 2 && means.iter().all(|(_, m)| *m > 0.0) {
                exponent_fits.push(ExponentFit {
                    facility_count: f_count,
                    subset_size: k,
                    exponent: log_log_slope(&means),
                });
            }
        }
    }
    Ok(RegretSweepSummary {
        grid: grid.clone(),
        points,
        exponent_fits,
    })
}

fn log_log_slope(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, y) in points {
        let x = (t as f64).ln();
        let y = y.ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

// ---------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// Full information with exact expected rewards; constant rate.
    Expected,
    /// Full information with stochastic rewards; square-summable rate.
    Stochastic,
}

/// One measured round (row 0 is the initial state).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub t: usize,
    /// max over players of ‖ω_i^t − ω_i^*‖₁, measured after t updates.
    pub max_distance: f64,
    /// 2kF·exp(−M − ε·Σ_{j≤t} η_j).
    pub distance_bound: f64,
    /// max over players and deviating actions of the score gap z̃.
    pub max_gap: f64,
    /// −M − ε·Σ_{j≤t} η_j.
    pub gap_bound: f64,
    pub in_absorption: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceOutcome {
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
    /// Rounds where max_distance exceeded the distance bound.
    pub distance_violations: usize,
    /// Rounds where max_gap exceeded the gap bound.
    pub gap_violations: usize,
    /// Rounds outside the absorption set.
    pub absorption_breaks: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mode: ConvergenceMode,
    pub margin: f64,
    pub epsilon: f64,
    pub reference: Vec<Action>,
    pub gap: f64,
    pub outcomes: Vec<ConvergenceOutcome>,
    /// Fraction of seeds with zero distance violations.
    pub fraction_clean: f64,
}

/// Track convergence toward the game's best strict equilibrium.
///
/// `margin` is the bound's M; it must satisfy `M ≥ |ln(ε/(2kF))|` with
/// ε the certified deviation gap halved. Expected mode initializes in U_M;
/// stochastic mode initializes in U_{2M} as its analysis requires.
///
/// The distance envelope's derivation uses single-facility swaps, which
/// needs every k-subset to be an action. Explicit action lists still run
/// (the gap monitor enumerates the list), but the envelope is reported
/// best-effort there, outside the guarantee.
pub fn run_convergence_study(
    game: &CongestionGame,
    mode: ConvergenceMode,
    margin: f64,
    schedule: LearningRateSchedule,
    horizon: usize,
    seeds: &[u64],
    budget: u128,
) -> Result<ConvergenceReport> {
    let cert = best_strict_nash(game, budget)?.ok_or_else(|| {
        Error::validation(
            "game",
            "convergence study requires a strict pure Nash equilibrium; none was found",
        )
    })?;
    let epsilon = cert.epsilon;
    let k = game.subset_size() as f64;
    let f_count = game.facility_count() as f64;
    // A gap of f64::MAX marks a game with no unilateral deviations at all
    // (single-action spaces); the margin requirement is vacuous there.
    if cert.gap < f64::MAX {
        let required = (epsilon / (2.0 * k * f_count)).ln().abs();
        if margin < required - 1e-9 {
            return Err(Error::validation(
                "margin",
                format!("margin {margin} below the required |ln(ε/2kF)| = {required}"),
            ));
        }
    }
    let init_margin = match mode {
        ConvergenceMode::Expected => margin,
        ConvergenceMode::Stochastic => 2.0 * margin,
    };
    let feedback = match mode {
        ConvergenceMode::Expected => FeedbackMode::FullInfoExpected,
        ConvergenceMode::Stochastic => FeedbackMode::FullInfoStochastic,
    };

    let outcomes: Vec<ConvergenceOutcome> = seeds
        .par_iter()
        .map(|&seed| {
            convergence_run(
                game,
                &cert.profile,
                epsilon,
                margin,
                init_margin,
                schedule,
                feedback,
                horizon,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let clean = outcomes
        .iter()
        .filter(|o| o.distance_violations == 0)
        .count();
    Ok(ConvergenceReport {
        mode,
        margin,
        epsilon,
        reference: cert.profile.clone(),
        gap: cert.gap,
        outcomes,
        fraction_clean: clean as f64 / seeds.len().max(1) as f64,
    })
}

#[allow(clippy::too_many_arguments)]
fn convergence_run(
    game: &CongestionGame,
    reference: &[Action],
    epsilon: f64,
    margin: f64,
    init_margin: f64,
    schedule: LearningRateSchedule,
    feedback: FeedbackMode,
    horizon: usize,
    seed: u64,
) -> Result<ConvergenceOutcome> {
    use crate::learner::init_near_equilibrium;

    let n = game.player_count();
    let k = game.subset_size() as f64;
    let f_count = game.facility_count() as f64;
    let mut rng = run_rng(seed);
    let mut learners = init_near_equilibrium(game, reference, init_margin, schedule, feedback)?;
    let monitor = NashConvergenceMonitor::new(reference.to_vec(), margin);

    let mut rows = Vec::with_capacity(horizon + 1);
    let measure = |learners: &[Learner], t: usize, rate_sum: f64| -> Result<ConvergenceRow> {
        let mut max_distance = f64::NEG_INFINITY;
        let mut max_gap = f64::NEG_INFINITY;
        for (i, l) in learners.iter().enumerate() {
            max_distance = max_distance.max(l.policy().l1_distance_to_pure(reference[i])?);
            if let Some(g) = monitor.max_score_gap(i, l.policy()) {
                max_gap = max_gap.max(g);
            }
        }
        let policies: Vec<&crate::policy::FactoredPolicy> =
            learners.iter().map(|l| l.policy()).collect();
        Ok(ConvergenceRow {
            t,
            max_distance,
            distance_bound: 2.0 * k * f_count * (-margin - epsilon * rate_sum).exp(),
            max_gap,
            gap_bound: -margin - epsilon * rate_sum,
            in_absorption: monitor.in_absorption_set(&policies),
        })
    };

    rows.push(measure(&learners, 0, 0.0)?);
    for t in 1..=horizon {
        let marginals: Vec<Vec<f64>> = learners.iter().map(|l| l.policy().marginals()).collect();
        let actions: Vec<Action> = learners
            .iter()
            .map(|l| l.policy().sample(&mut rng))
            .collect();
        let estimates: Vec<EstimateVector> = (0..n)
            .map(|i| match feedback {
                FeedbackMode::FullInfoExpected => estimate_fullinfo_expected(game, i, &marginals),
                FeedbackMode::FullInfoStochastic => {
                    estimate_fullinfo_stochastic(game, i, &actions, &mut rng)
                }
                FeedbackMode::SemiBandit => {
                    unreachable!("convergence studies are full-information")
                }
            })
            .collect();
        for (learner, est) in learners.iter_mut().zip(&estimates) {
            learner.update(est);
        }
        let rate_sum = learners[0].rate_sum();
        rows.push(measure(&learners, t, rate_sum)?);
    }

    let distance_violations = rows
        .iter()
        .filter(|r| r.max_distance > r.distance_bound)
        .count();
    let gap_violations = rows.iter().filter(|r| r.max_gap > r.gap_bound).count();
    let absorption_breaks = rows.iter().filter(|r| !r.in_absorption).count();
    Ok(ConvergenceOutcome {
        seed,
        rows,
        distance_violations,
        gap_violations,
        absorption_breaks,
    })
}
