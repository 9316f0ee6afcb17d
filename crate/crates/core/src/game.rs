//! Congestion game model: facilities, k-subset actions, count-dependent
//! facility rewards, and exact expectations under product-form policies.
//!
//! A game has `n` players sharing `F` facilities. Each action is a set of `k`
//! facilities, and facility `f` pays `r^f(m) ∈ [0, 1]` where `m` is the number
//! of players whose action contains `f`. A player's reward is the sum of its
//! facilities' payouts.
//!
//! The load on a single facility under a product joint policy is a sum of
//! independent per-player inclusion indicators, so its exact law is
//! Poisson-binomial in the per-player marginals. Within one player the
//! inclusion indicators across facilities are correlated, but that never
//! enters any single-facility expectation; `expected_facility_reward` and
//! `expected_welfare` are exact, not approximations (verified against joint
//! enumeration in the tests).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{binomial, enumerate_k_subsets, Action, MAX_FACILITIES};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Per-facility reward table: `values[m - 1] = r^f(m)` for `m = 1..=n` players
/// on the facility. Every entry lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FacilityRewardTable {
    pub values: Vec<f64>,
}

impl FacilityRewardTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(v) {
                return Err(Error::validation(
                    format!("reward table entry [{i}]"),
                    format!("value {v} outside [0, 1]"),
                ));
            }
        }
        Ok(FacilityRewardTable { values })
    }

    /// Reward when `load` players use the facility; `load` must be in `1..=n`.
    pub fn at_load(&self, load: usize) -> f64 {
        self.values[load - 1]
    }
}

/// Affine generator for reward tables: `r^f(m) = clamp(c - d·(m - 1), 0, 1)`
/// with `c ∈ [0, 1]` and `d ≥ 0`, so congestion never raises the payout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineRewardSpec {
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl AffineRewardSpec {
    pub fn tables(&self, n: usize) -> Result<Vec<FacilityRewardTable>> {
        if self.c.len() != self.d.len() {
            return Err(Error::validation(
                "affine",
                format!("c has {} entries, d has {}", self.c.len(), self.d.len()),
            ));
        }
        self.c
            .iter()
            .zip(&self.d)
            .enumerate()
            .map(|(f, (&c, &d))| {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::validation(
                        format!("affine.c[{f}]"),
                        "must lie in [0, 1]",
                    ));
                }
                if d.is_nan() || d < 0.0 {
                    return Err(Error::validation(format!("affine.d[{f}]"), "must be >= 0"));
                }
                let values = (1..=n)
                    .map(|m| (c - d * (m as f64 - 1.0)).clamp(0.0, 1.0))
                    .collect();
                FacilityRewardTable::new(values)
            })
            .collect()
    }
}

/// How the action space is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    /// Every k-subset of the facilities is an action, for every player.
    AllKSubsets,
    /// One explicit list of k-subsets per player.
    Explicit(Vec<Vec<Action>>),
}

/// Law of the realized per-facility reward around its mean `r^f(load)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKernel {
    /// Realized reward equals the table value exactly.
    Deterministic,
    /// Realized reward is Bernoulli(r^f(load)); support {0, 1}, mean exact.
    Bernoulli,
}

/// A congestion game instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CongestionGame {
    n: usize,
    facility_count: usize,
    k: usize,
    action_space: ActionSpace,
    rewards: Vec<FacilityRewardTable>,
    kernel: RewardKernel,
    /// Retained when the game was built from an affine spec, so files
    /// round-trip in the same form they were written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    affine: Option<AffineRewardSpec>,
}

impl CongestionGame {
    pub fn new(
        n: usize,
        facility_count: usize,
        k: usize,
        action_space: ActionSpace,
        rewards: Vec<FacilityRewardTable>,
        kernel: RewardKernel,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("game.n", "need at least one player"));
        }
        if facility_count == 0 || facility_count > MAX_FACILITIES {
            return Err(Error::validation(
                "game.F",
                format!("facility count must be in [1, {MAX_FACILITIES}]"),
            ));
        }
        if k == 0 || k > facility_count {
            return Err(Error::validation("game.k", "need 1 <= k <= F"));
        }
        if rewards.len() != facility_count {
            return Err(Error::validation(
                "game.rewards",
                format!("expected {facility_count} tables, got {}", rewards.len()),
            ));
        }
        for (f, table) in rewards.iter().enumerate() {
            if table.values.len() != n {
                return Err(Error::validation(
                    format!("game.rewards[{f}]"),
                    format!(
                        "expected {n} entries (one per load), got {}",
                        table.values.len()
                    ),
                ));
            }
        }
        if let ActionSpace::Explicit(lists) = &action_space {
            if lists.len() != n {
                return Err(Error::validation(
                    "game.action_space",
                    format!("expected {n} per-player action lists, got {}", lists.len()),
                ));
            }
            for (i, list) in lists.iter().enumerate() {
                if list.is_empty() {
                    return Err(Error::validation(
                        format!("game.action_space[{i}]"),
                        "player has no actions",
                    ));
                }
                for (j, a) in list.iter().enumerate() {
                    a.validate(facility_count, k, &format!("game.action_space[{i}][{j}]"))?;
                }
            }
        }
        Ok(CongestionGame {
            n,
            facility_count,
            k,
            action_space,
            rewards,
            kernel,
            affine: None,
        })
    }

    /// Build a game whose tables come from an affine spec; the spec is kept
    /// for serialization.
    pub fn from_affine(
        n: usize,
        facility_count: usize,
        k: usize,
        action_space: ActionSpace,
        affine: AffineRewardSpec,
        kernel: RewardKernel,
    ) -> Result<Self> {
        if affine.c.len() != facility_count {
            return Err(Error::validation(
                "affine.c",
                format!("expected {facility_count} entries, got {}", affine.c.len()),
            ));
        }
        let tables = affine.tables(n)?;
        let mut game = Self::new(n, facility_count, k, action_space, tables, kernel)?;
        game.affine = Some(affine);
        Ok(game)
    }

    /// Uniform-random reward tables in [0, 1], all k-subsets as actions.
    pub fn random(
        n: usize,
        facility_count: usize,
        k: usize,
        kernel: RewardKernel,
        rng: &mut SimRng,
    ) -> Self {
        let rewards = (0..facility_count)
            .map(|_| FacilityRewardTable {
                values: (0..n).map(|_| rng.random::<f64>()).collect(),
            })
            .collect();
        CongestionGame::new(
            n,
            facility_count,
            k,
            ActionSpace::AllKSubsets,
            rewards,
            kernel,
        )
        .expect("random game parameters are valid by construction")
    }

    pub fn player_count(&self) -> usize {
        self.n
    }

    pub fn facility_count(&self) -> usize {
        self.facility_count
    }

    pub fn subset_size(&self) -> usize {
        self.k
    }

    pub fn kernel(&self) -> RewardKernel {
        self.kernel
    }

    pub fn action_space(&self) -> &ActionSpace {
        &self.action_space
    }

    pub fn reward_table(&self, facility: usize) -> &FacilityRewardTable {
        &self.rewards[facility]
    }

    /// Number of actions available to `player`.
    pub fn action_count(&self, player: usize) -> u128 {
        match &self.action_space {
            ActionSpace::AllKSubsets => binomial(self.facility_count, self.k),
            ActionSpace::Explicit(lists) => lists[player].len() as u128,
        }
    }

    /// Materialize the action list for `player` (enumerates k-subsets in
    /// AllKSubsets mode; intended for oracles and small action spaces).
    pub fn enumerate_actions(&self, player: usize) -> Vec<Action> {
        match &self.action_space {
            ActionSpace::AllKSubsets => enumerate_k_subsets(self.facility_count, self.k),
            ActionSpace::Explicit(lists) => lists[player].clone(),
        }
    }

    pub fn is_valid_action(&self, player: usize, action: Action) -> bool {
        match &self.action_space {
            ActionSpace::AllKSubsets => {
                action.len() == self.k
                    && (self.facility_count == MAX_FACILITIES
                        || action.bitmask() >> self.facility_count == 0)
            }
            ActionSpace::Explicit(lists) => lists[player].contains(&action),
        }
    }

    pub fn validate_joint_action(&self, joint: &[Action]) -> Result<()> {
        if joint.len() != self.n {
            return Err(Error::validation(
                "joint_action",
                format!("expected {} actions, got {}", self.n, joint.len()),
            ));
        }
        for (i, &a) in joint.iter().enumerate() {
            if !self.is_valid_action(i, a) {
                return Err(Error::validation(
                    format!("joint_action[{i}]"),
                    format!("{a:?} is not a valid action for player {i}"),
                ));
            }
        }
        Ok(())
    }

    /// Facility loads `n_f(a)` under a joint action.
    pub fn facility_loads(&self, joint: &[Action]) -> Vec<usize> {
        let mut loads = vec![0usize; self.facility_count];
        for a in joint {
            for f in a.facilities() {
                loads[f] += 1;
            }
        }
        loads
    }

    /// Mean reward `r^f(n_f(a))` for every facility; facilities with zero
    /// load report 0 as an "unused" marker (no player observes them).
    pub fn facility_rewards(&self, joint: &[Action]) -> Vec<f64> {
        let loads = self.facility_loads(joint);
        loads
            .iter()
            .enumerate()
            .map(|(f, &m)| {
                if m == 0 {
                    0.0
                } else {
                    self.rewards[f].at_load(m)
                }
            })
            .collect()
    }

    /// Player `i`'s deterministic reward `Σ_{f ∈ a_i} r^f(n_f(a))`.
    pub fn player_reward(&self, player: usize, joint: &[Action]) -> f64 {
        let loads = self.facility_loads(joint);
        joint[player]
            .facilities()
            .map(|f| self.rewards[f].at_load(loads[f]))
            .sum()
    }

    /// Realize one round of per-facility rewards under the game's kernel.
    /// Facilities with zero load report 0. Draws happen in ascending facility
    /// order, used facilities only, so the stream layout is deterministic.
    pub fn sample_facility_rewards(&self, joint: &[Action], rng: &mut SimRng) -> Vec<f64> {
        let loads = self.facility_loads(joint);
        loads
            .iter()
            .enumerate()
            .map(|(f, &m)| {
                if m == 0 {
                    return 0.0;
                }
                let mean = self.rewards[f].at_load(m);
                match self.kernel {
                    RewardKernel::Deterministic => mean,
                    RewardKernel::Bernoulli => {
                        if rng.random::<f64>() < mean {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect()
    }

    /// Realize a reward draw for facility `f` at an explicit load (used for
    /// counterfactual full-information observations).
    pub fn sample_reward_at_load(&self, facility: usize, load: usize, rng: &mut SimRng) -> f64 {
        let mean = self.rewards[facility].at_load(load);
        match self.kernel {
            RewardKernel::Deterministic => mean,
            RewardKernel::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact expected payout of facility `f` to `player`, were the player to
    /// include it, with every opponent `j` including `f` independently with
    /// probability `marginals[j][f]`. Row `player` of `marginals` is ignored.
    ///
    /// The opponent load on `f` is Poisson-binomial, so this is
    /// `Σ_m P[load = m] · r^f(m + 1)` — exact, no sampling.
    pub fn expected_facility_reward(
        &self,
        player: usize,
        facility: usize,
        marginals: &[Vec<f64>],
    ) -> f64 {
        let probs: Vec<f64> = (0..self.n)
            .filter(|&j| j != player)
            .map(|j| marginals[j][facility])
            .collect();
        let pmf = poisson_binomial_pmf(&probs);
        pmf.iter()
            .enumerate()
            .map(|(m, &p)| p * self.rewards[facility].at_load(m + 1))
            .sum()
    }

    /// Exact expected reward of `player` playing pure `action` against
    /// opponents' marginals (additive over the action's facilities).
    pub fn expected_action_reward(
        &self,
        player: usize,
        action: Action,
        marginals: &[Vec<f64>],
    ) -> f64 {
        action
            .facilities()
            .map(|f| self.expected_facility_reward(player, f, marginals))
            .sum()
    }

    /// Exact expected social welfare `Σ_f E[n_f · r^f(n_f)]` under the
    /// product joint policy with per-player inclusion marginals.
    pub fn expected_welfare(&self, marginals: &[Vec<f64>]) -> f64 {
        (0..self.facility_count)
            .map(|f| {
                let probs: Vec<f64> = (0..self.n).map(|i| marginals[i][f]).collect();
                let pmf = poisson_binomial_pmf(&probs);
                pmf.iter()
                    .enumerate()
                    .skip(1)
                    .map(|(m, &p)| p * m as f64 * self.rewards[f].at_load(m))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Social welfare of a pure profile: `Σ_i r_i(a)`.
    pub fn welfare(&self, joint: &[Action]) -> f64 {
        (0..self.n).map(|i| self.player_reward(i, joint)).sum()
    }
}

/// PMF of a sum of independent Bernoulli variables with the given success
/// probabilities; `pmf[m] = P[sum = m]`, length `probs.len() + 1`.
pub fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; probs.len() + 1];
    pmf[0] = 1.0;
    for (count, &p) in probs.iter().enumerate() {
        for m in (0..=count).rev() {
            pmf[m + 1] += pmf[m] * p;
            pmf[m] *= 1.0 - p;
        }
    }
    pmf
}

// ---------------------------------------------------------------------------
// Game definition file
// ---------------------------------------------------------------------------

/// On-disk game schema. Exactly one of `rewards` / `affine` must be present.
///
/// ```json
/// {
///   "n": 2, "F": 2, "k": 1,
///   "action_space": "all_k_subsets",
///   "rewards": [[1.0, 0.2], [0.8, 0.3]],
///   "kernel": "deterministic"
/// }
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameFile {
    pub n: usize,
    #[serde(rename = "F")]
    pub facility_count: usize,
    pub k: usize,
    #[serde(default = "default_action_space")]
    pub action_space: ActionSpace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineRewardSpec>,
    pub kernel: RewardKernel,
}

fn default_action_space() -> ActionSpace {
    ActionSpace::AllKSubsets
}

impl GameFile {
    pub fn into_game(self) -> Result<CongestionGame> {
        match (self.rewards, self.affine) {
            (Some(tables), None) => {
                let rewards = tables
                    .into_iter()
                    .map(FacilityRewardTable::new)
                    .collect::<Result<Vec<_>>>()?;
                CongestionGame::new(
                    self.n,
                    self.facility_count,
                    self.k,
                    self.action_space,
                    rewards,
                    self.kernel,
                )
            }
            (None, Some(affine)) => CongestionGame::from_affine(
                self.n,
                self.facility_count,
                self.k,
                self.action_space,
                affine,
                self.kernel,
            ),
            (Some(_), Some(_)) => Err(Error::validation(
                "game",
                "give either `rewards` or `affine`, not both",
            )),
            (None, None) => Err(Error::validation(
                "game",
                "one of `rewards` or `affine` is required",
            )),
        }
    }

    pub fn from_game(game: &CongestionGame) -> Self {
        let (rewards, affine) = match &game.affine {
            Some(spec) => (None, Some(spec.clone())),
            None => (
                Some(game.rewards.iter().map(|t| t.values.clone()).collect()),
                None,
            ),
        };
        GameFile {
            n: game.n,
            facility_count: game.facility_count,
            k: game.k,
            action_space: game.action_space.clone(),
            rewards,
            affine,
            kernel: game.kernel,
        }
    }
}
