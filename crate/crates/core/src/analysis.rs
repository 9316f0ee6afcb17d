//! Ground-truth oracles for the game layer: pure Nash enumeration, the
//! reward-form potential and best-response dynamics, best-in-hindsight
//! regret, welfare optimum, and smoothness verification.
//!
//! Everything here is exhaustive or exact — these are the references the
//! learning dynamics are checked against, so none of them share code with
//! the learner's own computations.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::error::{Error, Result};
use crate::game::{ActionSpace, CongestionGame};

/// Default cap on the number of pure joint profiles an oracle will visit.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// A pure joint action certified as a Nash equilibrium.
///
/// `gap` is the minimum reward loss over all players and all unilateral pure
/// deviations; `epsilon` is `gap / 2`, the constant that drives the
/// convergence-rate bounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NashCertificate {
    pub profile: Vec<Action>,
    pub strict: bool,
    pub gap: f64,
    pub epsilon: f64,
}

/// Min over players of (current reward − best unilateral deviation reward).
/// Nonnegative iff the profile is a pure NE; positive iff strict. Returns
/// +inf when no player has an alternative action.
pub fn deviation_gap(game: &CongestionGame, profile: &[Action]) -> f64 {
    let loads = game.facility_loads(profile);
    let mut gap = f64::INFINITY;
    for (i, own) in profile.iter().enumerate() {
        let current: f64 = own
            .facilities()
            .map(|f| game.reward_table(f).at_load(loads[f]))
            .sum();
        let mut best_dev = f64::NEG_INFINITY;
        for alt in game.enumerate_actions(i) {
            if alt == *own {
                continue;
            }
            // load seen by i on f after deviating: others' load + 1
            let value: f64 = alt
                .facilities()
                .map(|f| {
                    let others = loads[f] - usize::from(own.contains(f));
                    game.reward_table(f).at_load(others + 1)
                })
                .sum();
            best_dev = best_dev.max(value);
        }
        if best_dev.is_finite() {
            gap = gap.min(current - best_dev);
        }
    }
    gap
}

pub fn is_pure_nash(game: &CongestionGame, profile: &[Action]) -> bool {
    deviation_gap(game, profile) >= 0.0
}

pub fn is_strict_pure_nash(game: &CongestionGame, profile: &[Action]) -> bool {
    deviation_gap(game, profile) > 0.0
}

pub fn certificate_for(game: &CongestionGame, profile: &[Action]) -> NashCertificate {
    let gap = deviation_gap(game, profile);
    let gap = if gap.is_finite() { gap } else { f64::MAX };
    NashCertificate {
        profile: profile.to_vec(),
        strict: gap > 0.0,
        gap,
        epsilon: gap / 2.0,
    }
}

/// Visit every pure joint profile in mixed-radix order (player 0 slowest).
/// Errors out before visiting anything if the profile count exceeds `budget`.
fn for_each_profile<F>(game: &CongestionGame, budget: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&[Action]),
{
    let action_lists: Vec<Vec<Action>> = (0..game.player_count())
        .map(|i| game.enumerate_actions(i))
        .collect();
    let mut total: u128 = 1;
    for list in &action_lists {
        total = total.saturating_mul(list.len() as u128);
    }
    if total > budget {
        return Err(Error::BudgetExceeded {
            required: total,
            budget,
        });
    }
    let n = game.player_count();
    let mut idx = vec![0usize; n];
    let mut profile: Vec<Action> = idx
        .iter()
        .enumerate()
        .map(|(i, &j)| action_lists[i][j])
        .collect();
    loop {
        visit(&profile);
        // increment (last player fastest)
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(());
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < action_lists[pos].len() {
                profile[pos] = action_lists[pos][idx[pos]];
                break;
            }
            idx[pos] = 0;
            profile[pos] = action_lists[pos][0];
        }
    }
}

/// Exhaustively enumerate all pure Nash equilibria.
///
/// Every congestion game has at least one (the potential argmax), so an empty
/// result is an internal error, not a finding.
pub fn find_pure_nash(game: &CongestionGame, budget: u128) -> Result<Vec<NashCertificate>> {
    let mut out = Vec::new();
    for_each_profile(game, budget, |profile| {
        let gap = deviation_gap(game, profile);
        if gap >= 0.0 {
            let gap = if gap.is_finite() { gap } else { f64::MAX };
            out.push(NashCertificate {
                profile: profile.to_vec(),
                strict: gap > 0.0,
                gap,
                epsilon: gap / 2.0,
            });
        }
    })?;
    if out.is_empty() {
        return Err(Error::Invariant(
            "no pure Nash equilibrium found; congestion games always have one".into(),
        ));
    }
    Ok(out)
}

/// The strict equilibrium with the largest deviation gap, if any.
pub fn best_strict_nash(game: &CongestionGame, budget: u128) -> Result<Option<NashCertificate>> {
    let mut certs = find_pure_nash(game, budget)?;
    certs.retain(|c| c.strict);
    Ok(certs.into_iter().max_by(|a, b| a.gap.total_cmp(&b.gap)))
}

/// Reward-form potential `Φ(a) = Σ_f Σ_{m=1}^{n_f(a)} r^f(m)`.
///
/// Its unilateral differences equal reward differences exactly, which is what
/// makes best-response dynamics terminate; that identity is a tested
/// property, not an assumption.
pub fn rosenthal_potential(game: &CongestionGame, profile: &[Action]) -> f64 {
    let loads = game.facility_loads(profile);
    loads
        .iter()
        .enumerate()
        .map(|(f, &m)| {
            (1..=m)
                .map(|load| game.reward_table(f).at_load(load))
                .sum::<f64>()
        })
        .sum()
}

/// Steepest-ascent best-response dynamics from `start`. Returns a profile
/// where no player can strictly improve.
pub fn best_response_dynamics(
    game: &CongestionGame,
    start: &[Action],
    max_iters: usize,
) -> Result<Vec<Action>> {
    game.validate_joint_action(start)?;
    let mut profile = start.to_vec();
    for _ in 0..max_iters {
        let loads = game.facility_loads(&profile);
        let mut best: Option<(usize, Action, f64)> = None;
        for (i, own) in profile.iter().enumerate() {
            let current: f64 = own
                .facilities()
                .map(|f| game.reward_table(f).at_load(loads[f]))
                .sum();
            for alt in game.enumerate_actions(i) {
                if alt == *own {
                    continue;
                }
                let value: f64 = alt
                    .facilities()
                    .map(|f| {
                        let others = loads[f] - usize::from(own.contains(f));
                        game.reward_table(f).at_load(others + 1)
                    })
                    .sum();
                let improvement = value - current;
                if improvement > 0.0 && best.as_ref().is_none_or(|(_, _, b)| improvement > *b) {
                    best = Some((i, alt, improvement));
                }
            }
        }
        match best {
            None => return Ok(profile),
            Some((i, alt, _)) => profile[i] = alt,
        }
    }
    Err(Error::Invariant(format!(
        "best-response dynamics did not converge within {max_iters} iterations"
    )))
}

// ---------------------------------------------------------------------------
// Regret
// ---------------------------------------------------------------------------

/// Best-in-hindsight regret of one player against a recorded trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegretTrace {
    /// Σ_t r_i(ω_i^t, ω_{−i}^t), exact per-round policy values.
    pub cumulative: f64,
    /// V_T(f): cumulative counterfactual value of always including f.
    pub facility_values: Vec<f64>,
    /// Value of the best fixed action against the realized opponent sequence.
    pub best_value: f64,
    pub best_action: Action,
    /// best_value − cumulative.
    pub regret: f64,
}

/// Compute best-in-hindsight regret from per-round marginal snapshots
/// (`snapshots[t][i][f]` = player i's inclusion probability of f at round t).
///
/// The best fixed mixed policy is attained at a pure action. Per-facility
/// counterfactual values are additive and independent of the rest of the
/// player's own action, so in AllKSubsets mode the best fixed action is the
/// top-k facilities by V_T(f); explicit action lists are maximized directly.
pub fn best_in_hindsight_regret(
    game: &CongestionGame,
    player: usize,
    snapshots: &[Vec<Vec<f64>>],
) -> RegretTrace {
    let f_count = game.facility_count();
    let mut facility_values = vec![0.0; f_count];
    let mut cumulative = 0.0;
    for snap in snapshots {
        for f in 0..f_count {
            let v = game.expected_facility_reward(player, f, snap);
            facility_values[f] += v;
            cumulative += snap[player][f] * v;
        }
    }
    let (best_action, best_value) = best_fixed_action(game, player, &facility_values);
    RegretTrace {
        cumulative,
        facility_values,
        best_value,
        best_action,
        regret: best_value - cumulative,
    }
}

/// Best fixed action for additive per-facility values; ties break toward
/// lower facility indices. The value is summed in ascending facility order so
/// it is bit-identical to an enumeration that does the same.
pub fn best_fixed_action(
    game: &CongestionGame,
    player: usize,
    facility_values: &[f64],
) -> (Action, f64) {
    match game.action_space() {
        ActionSpace::AllKSubsets => {
            let mut order: Vec<usize> = (0..facility_values.len()).collect();
            order.sort_by(|&a, &b| {
                facility_values[b]
                    .partial_cmp(&facility_values[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let chosen: Vec<usize> = order.into_iter().take(game.subset_size()).collect();
            let action = Action::from_facilities(&chosen);
            let value = action.facilities().map(|f| facility_values[f]).sum();
            (action, value)
        }
        ActionSpace::Explicit(_) => {
            let mut best: Option<(Action, f64)> = None;
            for a in game.enumerate_actions(player) {
                let value: f64 = a.facilities().map(|f| facility_values[f]).sum();
                if best.as_ref().is_none_or(|(_, b)| value > *b) {
                    best = Some((a, value));
                }
            }
            best.expect("action space is never empty")
        }
    }
}

// ---------------------------------------------------------------------------
// Welfare and smoothness
// ---------------------------------------------------------------------------

/// Optimal social welfare and its argmax profile, by enumeration.
pub fn optimal_welfare(game: &CongestionGame, budget: u128) -> Result<(f64, Vec<Action>)> {
    let mut best = f64::NEG_INFINITY;
    let mut argmax: Vec<Action> = Vec::new();
    for_each_profile(game, budget, |profile| {
        let w = game.welfare(profile);
        if w > best {
            best = w;
            argmax = profile.to_vec();
        }
    })?;
    Ok((best, argmax))
}

/// Check (λ, μ)-smoothness by enumeration: does some `a*` satisfy
/// `Σ_i r_i(a*_i, a_{−i}) ≥ λ·OPT − μ·W(a)` for every joint `a`?
/// Returns the witnessing profile when the game is smooth.
///
/// The check costs up to (profile count)² evaluations, so the budget applies
/// to the squared count. A tolerance of 1e-12 absorbs float roundoff.
pub fn verify_smoothness(
    game: &CongestionGame,
    lambda: f64,
    mu: f64,
    budget: u128,
) -> Result<Option<Vec<Action>>> {
    let (opt, opt_profile) = optimal_welfare(game, budget)?;

    let mut profiles: Vec<Vec<Action>> = Vec::new();
    for_each_profile(game, budget, |p| profiles.push(p.to_vec()))?;
    let count = profiles.len() as u128;
    if count.saturating_mul(count) > budget {
        return Err(Error::BudgetExceeded {
            required: count * count,
            budget,
        });
    }

    let satisfies = |candidate: &[Action]| -> bool {
        profiles.iter().all(|a| {
            let mut deviated_sum = 0.0;
            for i in 0..game.player_count() {
                let mut joint = a.clone();
                joint[i] = candidate[i];
                deviated_sum += game.player_reward(i, &joint);
            }
            deviated_sum >= lambda * opt - mu * game.welfare(a) - 1e-12
        })
    };

    // The welfare argmax is the natural witness; fall back to scanning.
    if satisfies(&opt_profile) {
        return Ok(Some(opt_profile));
    }
    for candidate in &profiles {
        if satisfies(candidate) {
            return Ok(Some(candidate.clone()));
        }
    }
    Ok(None)
}

/// Realized welfare of a trajectory against the smoothness bound
/// `λ/(1+μ)·OPT − Σ_i Regret_i(T) / (T(1+μ))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WelfareReport {
    pub opt: f64,
    pub lambda: f64,
    pub mu: f64,
    pub average_welfare: f64,
    pub regret_sum: f64,
    pub bound: f64,
    /// average_welfare − bound; nonnegative when the guarantee holds.
    pub slack: f64,
}

pub fn welfare_report(
    game: &CongestionGame,
    welfare_trace: &[f64],
    lambda: f64,
    mu: f64,
    regrets: &[f64],
    budget: u128,
) -> Result<WelfareReport> {
    let (opt, _) = optimal_welfare(game, budget)?;
    let t = welfare_trace.len().max(1) as f64;
    let average_welfare = welfare_trace.iter().sum::<f64>() / t;
    let regret_sum: f64 = regrets.iter().sum();
    let bound = lambda / (1.0 + mu) * opt - regret_sum / (t * (1.0 + mu));
    Ok(WelfareReport {
        opt,
        lambda,
        mu,
        average_welfare,
        regret_sum,
        bound,
        slack: average_welfare - bound,
    })
}
