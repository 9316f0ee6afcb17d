//! The facility-level exponential-weights learner and its feedback variants.
//!
//! Each player keeps one cumulative score per facility. A round produces an
//! [`EstimateVector`] — per-facility reward estimates built from whatever the
//! feedback mode reveals — and the update adds `η_t · ỹ(f)` to every score.
//! Scores therefore live in η-scaled units: the policy weight of facility `f`
//! is `exp(G(f))` with `G(f) = G⁰(f) + Σ_j η_j ỹ^j(f)`.
//!
//! Three feedback modes:
//!
//! - **Semi-bandit**: only played facilities are observed. The estimator
//!   `ỹ(f) = 1 − 𝟙{f ∈ a}(1 − R^f)/q(f)` is unbiased for the facility's
//!   expected reward and equals 1 on unplayed facilities.
//! - **Full information, expected**: every facility's exact expected reward
//!   under the opponents' current policies (no noise).
//! - **Full information, stochastic**: one realized reward draw per facility
//!   per player per round, at the load the player would cause by including
//!   the facility (its own counterfactual observation).
//!
//! [`NashConvergenceMonitor`] tracks the score gaps `z̃(a)` between every
//! action and a reference pure profile. All gaps staying below `−M` is the
//! absorption condition that drives the convergence guarantees; in
//! all-k-subsets mode the maximum gap reduces to single-swap comparisons.

use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::analysis::is_strict_pure_nash;
use crate::error::{Error, Result};
use crate::game::{ActionSpace, CongestionGame};
use crate::policy::{FactoredPolicy, PolicySupport};
use crate::rng::SimRng;

/// What each player observes after a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    SemiBandit,
    FullInfoExpected,
    FullInfoStochastic,
}

/// One round's per-facility reward estimates.
///
/// Semi-bandit estimates can be arbitrarily negative on played facilities
/// (importance weighting) and are exactly 1 on unplayed ones; full-information
/// estimates stay in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateVector {
    pub values: Vec<f64>,
}

/// Learning-rate schedule, indexed by the number of updates already applied:
/// the `(t+1)`-th update uses `rate(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRateSchedule {
    Constant {
        eta: f64,
    },
    /// `η_t = β · (t + 1)^{−α}` with `α ∈ (1/2, 1)`: square-summable but not
    /// summable, as the stochastic convergence analysis requires.
    PowerDecay {
        beta: f64,
        alpha: f64,
    },
}

impl LearningRateSchedule {
    pub fn rate(&self, updates_applied: usize) -> f64 {
        match self {
            LearningRateSchedule::Constant { eta } => *eta,
            LearningRateSchedule::PowerDecay { beta, alpha } => {
                *beta * ((updates_applied + 1) as f64).powf(-*alpha)
            }
        }
    }

    /// The default constant rate for a horizon-T run: `η = 1/√T`.
    pub fn for_horizon(horizon: usize) -> Self {
        LearningRateSchedule::Constant {
            eta: 1.0 / (horizon.max(1) as f64).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LearningRateSchedule::Constant { eta } => {
                if !(eta.is_finite() && *eta > 0.0) {
                    return Err(Error::validation("schedule.eta", "must be finite and > 0"));
                }
            }
            LearningRateSchedule::PowerDecay { beta, alpha } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::validation("schedule.beta", "must be finite and > 0"));
                }
                if !(*alpha > 0.5 && *alpha < 1.0) {
                    return Err(Error::validation("schedule.alpha", "must lie in (1/2, 1)"));
                }
            }
        }
        Ok(())
    }
}

/// Largest power-decay coefficient β for which the schedule's squared sum
/// satisfies the stochastic-convergence condition
/// `Σ_t η_t² ≤ δ·M²/(8nk²(F−1))` with failure probability δ and margin M,
/// using `Σ_{t≥0} (t+1)^{−2α} ≤ 1 + 1/(2α−1)`.
pub fn beta_for_stochastic_convergence(
    delta: f64,
    margin: f64,
    k: usize,
    n: usize,
    facility_count: usize,
    alpha: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::validation("delta", "must lie in (0, 1)"));
    }
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::validation("alpha", "must lie in (1/2, 1)"));
    }
    if margin.is_nan() || margin <= 0.0 {
        return Err(Error::validation("margin", "must be > 0"));
    }
    if facility_count < 2 {
        return Err(Error::validation(
            "F",
            "need at least two facilities (a one-facility game offers no choice)",
        ));
    }
    let tail_bound = 1.0 + 1.0 / (2.0 * alpha - 1.0);
    let denom = 8.0 * n as f64 * (k * k) as f64 * (facility_count - 1) as f64 * tail_bound;
    Ok((delta * margin * margin / denom).sqrt())
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// Semi-bandit estimator: `ỹ(f) = 1 − 𝟙{f ∈ a}(1 − R^f)/q(f)`.
///
/// `observed` holds the realized per-facility rewards (only entries for
/// played facilities are read). A zero marginal on a played facility cannot
/// happen under the sampling policy that produced the action, so it aborts.
pub fn estimate_semibandit(played: Action, observed: &[f64], marginals: &[f64]) -> EstimateVector {
    let values = (0..marginals.len())
        .map(|f| {
            if played.contains(f) {
                let q = marginals[f];
                assert!(
                    q > 0.0,
                    "facility {f} was played but has zero inclusion probability"
                );
                1.0 - (1.0 - observed[f]) / q
            } else {
                1.0
            }
        })
        .collect();
    EstimateVector { values }
}

/// Expected-reward full-information estimator: `ỹ(f)` is the exact expected
/// payout of `f` under the opponents' current marginals, for every facility.
/// (The value does not depend on which action contains `f` — facility rewards
/// depend only on loads.)
pub fn estimate_fullinfo_expected(
    game: &CongestionGame,
    player: usize,
    marginals: &[Vec<f64>],
) -> EstimateVector {
    let values = (0..game.facility_count())
        .map(|f| game.expected_facility_reward(player, f, marginals))
        .collect();
    EstimateVector { values }
}

/// Stochastic full-information estimator: one realized draw per facility at
/// the load the player would cause by including it (`n_f(a_{−i}) + 1`).
/// Draws are independent across players and ascend facility indices.
pub fn estimate_fullinfo_stochastic(
    game: &CongestionGame,
    player: usize,
    joint: &[Action],
    rng: &mut SimRng,
) -> EstimateVector {
    let loads = game.facility_loads(joint);
    let values = (0..game.facility_count())
        .map(|f| {
            let others = loads[f] - usize::from(joint[player].contains(f));
            game.sample_reward_at_load(f, others + 1, rng)
        })
        .collect();
    EstimateVector { values }
}

// ---------------------------------------------------------------------------
// Learner state
// ---------------------------------------------------------------------------

/// One player's learning state: the factored policy plus schedule bookkeeping.
#[derive(Clone, Debug)]
pub struct Learner {
    player: usize,
    policy: FactoredPolicy,
    init_scores: Vec<f64>,
    round: usize,
    rate_sum: f64,
    schedule: LearningRateSchedule,
    mode: FeedbackMode,
}

impl Learner {
    /// Fresh learner with all scores zero (uniform policy).
    pub fn uniform(
        game: &CongestionGame,
        player: usize,
        schedule: LearningRateSchedule,
        mode: FeedbackMode,
    ) -> Result<Self> {
        Self::with_init_scores(
            game,
            player,
            vec![0.0; game.facility_count()],
            schedule,
            mode,
        )
    }

    fn with_init_scores(
        game: &CongestionGame,
        player: usize,
        init_scores: Vec<f64>,
        schedule: LearningRateSchedule,
        mode: FeedbackMode,
    ) -> Result<Self> {
        schedule.validate()?;
        // The constant-rate regret analysis needs η ≤ 1/k in semi-bandit mode.
        if mode == FeedbackMode::SemiBandit {
            if let LearningRateSchedule::Constant { eta } = schedule {
                let cap = 1.0 / game.subset_size() as f64;
                if eta > cap + 1e-12 {
                    return Err(Error::validation(
                        "schedule.eta",
                        format!("semi-bandit learning rate must satisfy eta <= 1/k = {cap}"),
                    ));
                }
            }
        }
        let policy = match game.action_space() {
            ActionSpace::AllKSubsets => {
                FactoredPolicy::all_subsets(init_scores.clone(), game.subset_size())
            }
            ActionSpace::Explicit(_) => FactoredPolicy::explicit(
                init_scores.clone(),
                game.subset_size(),
                game.enumerate_actions(player).into(),
            ),
        };
        Ok(Learner {
            player,
            policy,
            init_scores,
            round: 0,
            rate_sum: 0.0,
            schedule,
            mode,
        })
    }

    pub fn player(&self) -> usize {
        self.player
    }

    pub fn policy(&self) -> &FactoredPolicy {
        &self.policy
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn schedule(&self) -> LearningRateSchedule {
        self.schedule
    }

    /// Initialization offsets G⁰ (round 0 of the score bookkeeping).
    pub fn init_scores(&self) -> &[f64] {
        &self.init_scores
    }

    /// Number of updates applied so far.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Σ of the learning rates applied so far (`Σ_{j≤t} η_j`).
    pub fn rate_sum(&self) -> f64 {
        self.rate_sum
    }

    /// Apply one round's estimates: `G(f) += η_t · ỹ(f)`, advance the round.
    pub fn update(&mut self, estimates: &EstimateVector) {
        let eta = self.schedule.rate(self.round);
        self.policy = self.policy.updated(eta, &estimates.values);
        self.round += 1;
        self.rate_sum += eta;
    }

    /// Learner whose initial scores are `margin` on the facilities of
    /// `reference_action` and 0 elsewhere, with the guaranteed starting mass
    /// `ω⁰(a*) ≥ 1 − kF·e^{−margin}` checked at construction.
    pub fn near_reference(
        game: &CongestionGame,
        player: usize,
        reference_action: Action,
        margin: f64,
        schedule: LearningRateSchedule,
        mode: FeedbackMode,
    ) -> Result<Self> {
        if margin.is_nan() || margin < 0.0 {
            return Err(Error::validation("margin", "must be >= 0"));
        }
        let scores: Vec<f64> = (0..game.facility_count())
            .map(|f| {
                if reference_action.contains(f) {
                    margin
                } else {
                    0.0
                }
            })
            .collect();
        let learner = Learner::with_init_scores(game, player, scores, schedule, mode)?;
        let k = game.subset_size() as f64;
        let f_count = game.facility_count() as f64;
        let floor = 1.0 - k * f_count * (-margin).exp();
        let mass = learner.policy.action_probability(reference_action)?;
        if mass < floor - 1e-12 {
            return Err(Error::Invariant(format!(
                "near-equilibrium init gave ω⁰(a*) = {mass}, below the guaranteed {floor}"
            )));
        }
        Ok(learner)
    }
}

/// Build one learner per player with scores `G⁰(f) = margin` on the
/// facilities of the player's reference action and 0 elsewhere.
///
/// Any deviating action swaps at least one margin-scored facility for a
/// zero-scored one, so every score gap starts at `−margin` and the policies
/// begin inside the corresponding absorption set; the construction guarantees
/// `ω⁰(a*_i) ≥ 1 − kF·e^{−margin}` (asserted here).
///
/// If the reference profile is not a strict Nash equilibrium the convergence
/// guarantees do not apply; this logs a warning but still constructs.
pub fn init_near_equilibrium(
    game: &CongestionGame,
    reference: &[Action],
    margin: f64,
    schedule: LearningRateSchedule,
    mode: FeedbackMode,
) -> Result<Vec<Learner>> {
    game.validate_joint_action(reference)?;
    if !is_strict_pure_nash(game, reference) {
        log::warn!(
            "near-equilibrium initialization on a profile that is not a strict pure NE; \
             convergence guarantees do not apply"
        );
    }
    (0..game.player_count())
        .map(|i| Learner::near_reference(game, i, reference[i], margin, schedule, mode))
        .collect()
}

// ---------------------------------------------------------------------------
// Score-gap monitor
// ---------------------------------------------------------------------------

/// Tracks cumulative score gaps `z̃(a) = Σ_{f∈a} G(f) − Σ_{f∈a*} G(f)`
/// against a reference pure profile.
///
/// Membership in the absorption set U_M means `z̃(a) ≤ −M` for every player
/// and every `a ≠ a*`. With all k-subsets available, the maximum gap is
/// determined by single-facility swaps, so no action enumeration is needed.
#[derive(Clone, Debug)]
pub struct NashConvergenceMonitor {
    reference: Vec<Action>,
    margin: f64,
}

impl NashConvergenceMonitor {
    pub fn new(reference: Vec<Action>, margin: f64) -> Self {
        NashConvergenceMonitor { reference, margin }
    }

    pub fn reference(&self) -> &[Action] {
        &self.reference
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// `max_{a ≠ a*_i} z̃(a)` for one player, or `None` when the player has
    /// no alternative action.
    pub fn max_score_gap(&self, player: usize, policy: &FactoredPolicy) -> Option<f64> {
        let reference = self.reference[player];
        let scores = policy.scores();
        match policy.support() {
            PolicySupport::AllKSubsets => {
                let k = policy.subset_size();
                let f_count = policy.facility_count();
                if k == f_count {
                    return None;
                }
                let mut order: Vec<usize> = (0..f_count).collect();
                order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
                let top = Action::from_facilities(&order[..k]);
                if top != reference {
                    let sum_top: f64 = top.facilities().map(|f| scores[f]).sum();
                    let sum_ref: f64 = reference.facilities().map(|f| scores[f]).sum();
                    Some(sum_top - sum_ref)
                } else {
                    // best deviation is the single most favorable swap
                    let min_in = reference
                        .facilities()
                        .map(|f| scores[f])
                        .fold(f64::INFINITY, f64::min);
                    let max_out = (0..f_count)
                        .filter(|&f| !reference.contains(f))
                        .map(|f| scores[f])
                        .fold(f64::NEG_INFINITY, f64::max);
                    Some(max_out - min_in)
                }
            }
            PolicySupport::Explicit(actions) => {
                let sum_ref: f64 = reference.facilities().map(|f| scores[f]).sum();
                actions
                    .iter()
                    .filter(|a| **a != reference)
                    .map(|a| a.facilities().map(|f| scores[f]).sum::<f64>() - sum_ref)
                    .fold(None, |acc: Option<f64>, g| {
                        Some(acc.map_or(g, |m| m.max(g)))
                    })
            }
        }
    }

    /// Absorption flag: every player's every deviating action has score gap
    /// at most `−M`. Vacuously true for players without alternatives.
    pub fn in_absorption_set(&self, policies: &[&FactoredPolicy]) -> bool {
        policies
            .iter()
            .enumerate()
            .all(|(i, p)| self.max_score_gap(i, p).is_none_or(|g| g <= -self.margin))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ActionSpace, CongestionGame, FacilityRewardTable, RewardKernel};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand_chacha::rand_core::SeedableRng;

    fn g1() -> CongestionGame {
        crate::testutil::g1(RewardKernel::Deterministic)
    }

    #[test]
    fn semibandit_estimator_cases() {
        let played = Action::from_facilities(&[0]);
        let q = vec![0.5, 0.5];
        // zero loss on a played facility
        let est = estimate_semibandit(played, &[1.0, 0.0], &q);
        assert_eq!(est.values, vec![1.0, 1.0]);
        // full loss at q = 0.5 → −1
        let est = estimate_semibandit(played, &[0.0, 0.0], &q);
        assert_eq!(est.values, vec![-1.0, 1.0]);
    }

    #[test]
    #[should_panic(expected = "zero inclusion probability")]
    fn semibandit_estimator_panics_on_zero_marginal() {
        let played = Action::from_facilities(&[0]);
        estimate_semibandit(played, &[0.0, 0.0], &[0.0, 1.0]);
    }

    proptest::proptest! {
        /// ỹ(f) ≤ 1 always, with equality on unplayed facilities; full-info
        /// estimates stay in [0, 1].
        #[test]
        fn estimate_ranges(
            rewards in proptest::collection::vec(0.0f64..=1.0, 4),
            qs in proptest::collection::vec(0.01f64..=1.0, 4),
            mask in 1u64..16,
        ) {
            let played = Action(mask);
            let est = estimate_semibandit(played, &rewards, &qs);
            for (f, v) in est.values.iter().enumerate() {
                proptest::prop_assert!(*v <= 1.0 + 1e-12);
                if !played.contains(f) {
                    proptest::prop_assert_eq!(*v, 1.0);
                }
            }

            let g = CongestionGame::new(
                2,
                4,
                2,
                ActionSpace::AllKSubsets,
                (0..4)
                    .map(|f| FacilityRewardTable::new(vec![rewards[f], rewards[f] / 2.0]).unwrap())
                    .collect(),
                RewardKernel::Deterministic,
            )
            .unwrap();
            let est = estimate_fullinfo_expected(&g, 0, &[vec![0.0; 4], qs]);
            for v in est.values {
                proptest::prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn fullinfo_expected_cases() {
        // opponents pure and avoiding f, r^f(1) = 0.9
        let g = CongestionGame::new(
            2,
            2,
            1,
            ActionSpace::AllKSubsets,
            vec![
                FacilityRewardTable::new(vec![0.9, 0.1]).unwrap(),
                FacilityRewardTable::new(vec![0.5, 0.5]).unwrap(),
            ],
            RewardKernel::Deterministic,
        )
        .unwrap();
        let est = estimate_fullinfo_expected(&g, 0, &[vec![0.0, 0.0], vec![0.0, 1.0]]);
        assert_abs_diff_eq!(est.values[0], 0.9);

        // three players, opponents q = (0.5, 0.5), r^f = (1.0, 0.6, 0.2) → 0.6
        let g = CongestionGame::new(
            3,
            1,
            1,
            ActionSpace::AllKSubsets,
            vec![FacilityRewardTable::new(vec![1.0, 0.6, 0.2]).unwrap()],
            RewardKernel::Deterministic,
        )
        .unwrap();
        let est = estimate_fullinfo_expected(&g, 0, &[vec![0.0], vec![0.5], vec![0.5]]);
        assert_abs_diff_eq!(est.values[0], 0.6, epsilon = 1e-15);

        // constant tables give constant estimates
        let g = CongestionGame::new(
            2,
            3,
            1,
            ActionSpace::AllKSubsets,
            (0..3)
                .map(|_| FacilityRewardTable::new(vec![0.4, 0.4]).unwrap())
                .collect(),
            RewardKernel::Deterministic,
        )
        .unwrap();
        let est = estimate_fullinfo_expected(&g, 1, &[vec![0.2, 0.3, 0.5], vec![0.0; 3]]);
        for v in est.values {
            assert_abs_diff_eq!(v, 0.4, epsilon = 1e-15);
        }
    }

    #[test]
    fn fullinfo_stochastic_degenerate_kernels() {
        let mut rng = crate::rng::run_rng(3);
        let ones = CongestionGame::new(
            2,
            2,
            1,
            ActionSpace::AllKSubsets,
            vec![
                FacilityRewardTable::new(vec![1.0, 1.0]).unwrap(),
                FacilityRewardTable::new(vec![1.0, 1.0]).unwrap(),
            ],
            RewardKernel::Bernoulli,
        )
        .unwrap();
        let joint = vec![Action(1), Action(2)];
        let est = estimate_fullinfo_stochastic(&ones, 0, &joint, &mut rng);
        assert_eq!(est.values, vec![1.0, 1.0]);

        let zeros = CongestionGame::new(
            2,
            2,
            1,
            ActionSpace::AllKSubsets,
            vec![
                FacilityRewardTable::new(vec![0.0, 0.0]).unwrap(),
                FacilityRewardTable::new(vec![0.0, 0.0]).unwrap(),
            ],
            RewardKernel::Bernoulli,
        )
        .unwrap();
        let est = estimate_fullinfo_stochastic(&zeros, 0, &joint, &mut rng);
        assert_eq!(est.values, vec![0.0, 0.0]);
    }

    #[test]
    fn fullinfo_stochastic_mean_matches_expected() {
        // fixed joint policy: player 1 mixes, player 0's observations of each
        // facility should average to the Poisson-binomial expectation
        let g = crate::testutil::g1(RewardKernel::Bernoulli);
        let mut rng = crate::rng::run_rng(20);
        let p1 = crate::policy::FactoredPolicy::all_subsets([0.4, 0.0].to_vec(), 1);
        let marginals = vec![vec![0.0, 0.0], p1.marginals()];

        let rounds = 100_000;
        let mut sums = [0.0; 2];
        for _ in 0..rounds {
            let a1 = p1.sample(&mut rng);
            // player 0 nominally plays f1; its own inclusion is removed in the
            // counterfactual load, so the played action only matters as data
            let joint = vec![Action(1), a1];
            let est = estimate_fullinfo_stochastic(&g, 0, &joint, &mut rng);
            for (sum, v) in sums.iter_mut().zip(&est.values) {
                *sum += v;
            }
        }
        for (f, sum) in sums.iter().enumerate() {
            let mean = sum / rounds as f64;
            let expect = g.expected_facility_reward(0, f, &marginals);
            let sigma = (expect * (1.0 - expect) / rounds as f64).sqrt();
            assert!(
                (mean - expect).abs() <= 3.0 * sigma + 1e-9,
                "facility {f}: mean {mean} vs expected {expect}"
            );
        }
    }

    #[test]
    fn update_shift_invariance_and_softmax() {
        let g = CongestionGame::new(
            1,
            3,
            1,
            ActionSpace::AllKSubsets,
            (0..3)
                .map(|_| FacilityRewardTable::new(vec![0.5]).unwrap())
                .collect(),
            RewardKernel::Deterministic,
        )
        .unwrap();
        let schedule = LearningRateSchedule::Constant { eta: 1.0 };

        // constant estimates leave probabilities unchanged
        let mut learner =
            Learner::uniform(&g, 0, schedule, FeedbackMode::FullInfoExpected).unwrap();
        let before = learner.policy().marginals();
        learner.update(&EstimateVector {
            values: vec![0.7; 3],
        });
        let after = learner.policy().marginals();
        for f in 0..3 {
            assert_abs_diff_eq!(before[f], after[f], epsilon = 1e-12);
        }

        // single round, G ≡ 0, η = 1, ỹ = (1,0,0): softmax(1,0,0)
        let mut learner =
            Learner::uniform(&g, 0, schedule, FeedbackMode::FullInfoExpected).unwrap();
        learner.update(&EstimateVector {
            values: vec![1.0, 0.0, 0.0],
        });
        let q = learner.policy().marginals();
        let e = 1.0f64.exp();
        assert_relative_eq!(q[0], e / (e + 2.0), max_relative = 1e-12);
        assert_relative_eq!(q[1], 1.0 / (e + 2.0), max_relative = 1e-12);
        assert_relative_eq!(q[2], 1.0 / (e + 2.0), max_relative = 1e-12);
    }

    #[test]
    fn update_additivity() {
        let g = g1();
        let schedule = LearningRateSchedule::Constant { eta: 0.5 };
        let ya = EstimateVector {
            values: vec![0.3, -0.2],
        };
        let yb = EstimateVector {
            values: vec![-0.1, 0.9],
        };
        let sum = EstimateVector {
            values: vec![0.2, 0.7],
        };

        let mut two_rounds = Learner::uniform(&g, 0, schedule, FeedbackMode::SemiBandit).unwrap();
        two_rounds.update(&ya);
        two_rounds.update(&yb);

        let mut one_round = Learner::uniform(&g, 0, schedule, FeedbackMode::SemiBandit).unwrap();
        one_round.update(&sum);

        for f in 0..2 {
            assert_abs_diff_eq!(
                two_rounds.policy().scores()[f],
                one_round.policy().scores()[f] + 0.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn semibandit_eta_cap_enforced() {
        let g = CongestionGame::random(
            2,
            4,
            2,
            RewardKernel::Bernoulli,
            &mut crate::rng::run_rng(0),
        );
        let too_big = LearningRateSchedule::Constant { eta: 0.6 }; // 1/k = 0.5
        assert!(Learner::uniform(&g, 0, too_big, FeedbackMode::SemiBandit).is_err());
        // same rate is fine outside semi-bandit mode
        assert!(Learner::uniform(&g, 0, too_big, FeedbackMode::FullInfoExpected).is_ok());
    }

    #[test]
    fn init_near_equilibrium_cases() {
        let g = g1();
        let reference = vec![Action(1), Action(2)];
        let schedule = LearningRateSchedule::Constant { eta: 0.5 };

        // M = 0 is the uniform policy
        let learners = init_near_equilibrium(
            &g,
            &reference,
            0.0,
            schedule,
            FeedbackMode::FullInfoExpected,
        )
        .unwrap();
        for l in &learners {
            for f in 0..2 {
                assert_abs_diff_eq!(l.policy().marginal(f), 0.5, epsilon = 1e-12);
            }
        }

        // F=2, k=1, M=5: two-action softmax mass e⁵/(e⁵+1)
        let learners = init_near_equilibrium(
            &g,
            &reference,
            5.0,
            schedule,
            FeedbackMode::FullInfoExpected,
        )
        .unwrap();
        let expect = 5.0f64.exp() / (5.0f64.exp() + 1.0);
        assert_relative_eq!(
            learners[0].policy().action_probability(Action(1)).unwrap(),
            expect,
            max_relative = 1e-12
        );

        // single-action space: the reference action has probability 1
        let single = CongestionGame::new(
            1,
            2,
            2,
            ActionSpace::AllKSubsets,
            vec![
                FacilityRewardTable::new(vec![0.5]).unwrap(),
                FacilityRewardTable::new(vec![0.5]).unwrap(),
            ],
            RewardKernel::Deterministic,
        )
        .unwrap();
        let learners = init_near_equilibrium(
            &single,
            &[Action(3)],
            7.0,
            schedule,
            FeedbackMode::FullInfoExpected,
        )
        .unwrap();
        assert_abs_diff_eq!(
            learners[0].policy().action_probability(Action(3)).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn beta_for_stochastic_convergence_values() {
        // plug-in: δ=0.1, M=5, k=1, n=2, F=2, α=0.75 → sqrt(2.5/48)
        let beta = beta_for_stochastic_convergence(0.1, 5.0, 1, 2, 2, 0.75).unwrap();
        assert_abs_diff_eq!(beta, (2.5f64 / 48.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(beta, 0.22821773229381923, epsilon = 1e-12);

        // β scales linearly in M
        let b1 = beta_for_stochastic_convergence(0.2, 3.0, 2, 3, 5, 0.8).unwrap();
        let b2 = beta_for_stochastic_convergence(0.2, 6.0, 2, 3, 5, 0.8).unwrap();
        assert_relative_eq!(b2, 2.0 * b1, max_relative = 1e-12);

        // α → 1/2⁺ forces β → 0
        let near_half = beta_for_stochastic_convergence(0.2, 3.0, 2, 3, 5, 0.5 + 1e-9).unwrap();
        assert!(near_half < 1e-4 * b1);

        // F = 1 rejected
        assert!(beta_for_stochastic_convergence(0.2, 3.0, 1, 2, 1, 0.75).is_err());
    }

    #[test]
    fn powerdecay_square_sum_within_noise_budget() {
        let (delta, margin, k, n, f_count, alpha) = (0.2, 4.0, 2, 3, 5, 0.75);
        let beta = beta_for_stochastic_convergence(delta, margin, k, n, f_count, alpha).unwrap();
        let schedule = LearningRateSchedule::PowerDecay { beta, alpha };
        let mut square_sum = 0.0;
        for t in 0..2_000_000 {
            let r = schedule.rate(t);
            square_sum += r * r;
        }
        let budget =
            delta * margin * margin / (8.0 * n as f64 * (k * k) as f64 * (f_count - 1) as f64);
        assert!(
            square_sum <= budget,
            "Σ η² = {square_sum} exceeds the noise budget {budget}"
        );
    }

    #[test]
    fn monitor_gaps_at_init_and_absorption_shape() {
        let g = g1();
        let reference = vec![Action(1), Action(2)];
        let margin = 4.0;
        let learners = init_near_equilibrium(
            &g,
            &reference,
            margin,
            LearningRateSchedule::Constant { eta: 0.5 },
            FeedbackMode::FullInfoExpected,
        )
        .unwrap();
        let monitor = NashConvergenceMonitor::new(reference, margin);
        for (i, l) in learners.iter().enumerate() {
            let gap = monitor.max_score_gap(i, l.policy()).unwrap();
            assert_eq!(gap, -margin, "init gap must be exactly −M");
        }
        let policies: Vec<&FactoredPolicy> = learners.iter().map(|l| l.policy()).collect();
        assert!(monitor.in_absorption_set(&policies));
    }

    #[test]
    fn monitor_max_gap_matches_enumeration() {
        use rand::Rng;
        let mut rng = SimRng::seed_from_u64(31);
        for _ in 0..200 {
            let f_count = 2 + rng.random_range(0..5usize);
            let k = 1 + rng.random_range(0..f_count);
            let scores: Vec<f64> = (0..f_count).map(|_| rng.random_range(-3.0..3.0)).collect();
            let policy = FactoredPolicy::all_subsets(scores.clone(), k);
            let actions = crate::action::enumerate_k_subsets(f_count, k);
            let reference = actions[rng.random_range(0..actions.len())];
            let monitor = NashConvergenceMonitor::new(vec![reference], 0.0);

            let direct = actions
                .iter()
                .filter(|a| **a != reference)
                .map(|a| {
                    a.facilities().map(|f| scores[f]).sum::<f64>()
                        - reference.facilities().map(|f| scores[f]).sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);

            match monitor.max_score_gap(0, &policy) {
                Some(gap) => assert!(
                    (gap - direct).abs() <= 1e-9,
                    "gap {gap} vs enumeration {direct}"
                ),
                None => assert_eq!(actions.len(), 1),
            }
        }
    }
}
