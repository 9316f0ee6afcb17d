//! Product-form distributions over k-subsets of facilities.
//!
//! A policy keeps one cumulative score `G(f)` per facility and assigns
//!
//! ```text
//! ω(a) = exp(Σ_{f∈a} G(f)) / Σ_{a'} exp(Σ_{f∈a'} G(f'))
//! ```
//!
//! over its action space. When every k-subset is an action, the normalizer is
//! the elementary symmetric polynomial `e_k` of the per-facility weights
//! `exp(G(f))`, and marginals, sampling, and the normalizer all reduce to
//! `O(F·k)` ESP recursions. The maximum score is subtracted before any
//! exponentiation, so scores may grow without bound (they do, near strict
//! equilibria) without overflowing.
//!
//! All ESP work uses prefix/suffix tables containing only sums and products
//! of positive terms — no cancellation — so the results match brute-force
//! enumeration to near machine precision.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{enumerate_k_subsets, Action};
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Which subsets the policy ranges over.
#[derive(Clone, Debug)]
pub enum PolicySupport {
    /// Every k-subset of the facilities.
    AllKSubsets,
    /// An explicit action list (shared, immutable).
    Explicit(Arc<[Action]>),
}

/// Exponential-weights distribution over k-subsets, parameterized by
/// per-facility cumulative scores. Immutable: updates build a new value.
#[derive(Clone, Debug)]
pub struct FactoredPolicy {
    facility_count: usize,
    k: usize,
    scores: Vec<f64>,
    support: PolicySupport,
}

/// Snapshot of the normalizer and marginals, with the full probability table
/// when the action space is explicitly enumerated.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionStats {
    pub log_normalizer: f64,
    pub marginals: Vec<f64>,
    pub table: Option<Vec<(Action, f64)>>,
}

impl FactoredPolicy {
    /// Uniform policy over all k-subsets (all scores zero).
    pub fn uniform_all_subsets(facility_count: usize, k: usize) -> Self {
        Self::all_subsets(vec![0.0; facility_count], k)
    }

    /// Policy over all k-subsets with the given scores.
    pub fn all_subsets(scores: Vec<f64>, k: usize) -> Self {
        assert!(k >= 1 && k <= scores.len());
        FactoredPolicy {
            facility_count: scores.len(),
            k,
            scores,
            support: PolicySupport::AllKSubsets,
        }
    }

    /// Policy over an explicit action list.
    pub fn explicit(scores: Vec<f64>, k: usize, actions: Arc<[Action]>) -> Self {
        assert!(!actions.is_empty());
        FactoredPolicy {
            facility_count: scores.len(),
            k,
            scores,
            support: PolicySupport::Explicit(actions),
        }
    }

    pub fn facility_count(&self) -> usize {
        self.facility_count
    }

    pub fn subset_size(&self) -> usize {
        self.k
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn support(&self) -> &PolicySupport {
        &self.support
    }

    /// New policy with `G(f) += scale · values[f]`.
    pub fn updated(&self, scale: f64, values: &[f64]) -> Self {
        debug_assert_eq!(values.len(), self.facility_count);
        let scores = self
            .scores
            .iter()
            .zip(values)
            .map(|(g, v)| g + scale * v)
            .collect();
        FactoredPolicy {
            facility_count: self.facility_count,
            k: self.k,
            scores,
            support: self.support.clone(),
        }
    }

    /// Rescaled weights `exp(G(f) - max G)` and the shift used.
    fn weights(&self) -> (Vec<f64>, f64) {
        let shift = self
            .scores
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let w = self.scores.iter().map(|g| (g - shift).exp()).collect();
        (w, shift)
    }

    /// `log Σ_a exp(Σ_{f∈a} G(f))`.
    pub fn log_normalizer(&self) -> f64 {
        match &self.support {
            PolicySupport::AllKSubsets => {
                let (w, shift) = self.weights();
                let e = esp(&w, self.k);
                e[self.k].ln() + self.k as f64 * shift
            }
            PolicySupport::Explicit(actions) => {
                let sums: Vec<f64> = actions.iter().map(|a| self.score_sum(*a)).collect();
                log_sum_exp(&sums)
            }
        }
    }

    fn score_sum(&self, action: Action) -> f64 {
        action.facilities().map(|f| self.scores[f]).sum()
    }

    /// Exact inclusion probability `q(f) = Σ_{a∋f} ω(a)` for every facility.
    pub fn marginals(&self) -> Vec<f64> {
        match &self.support {
            PolicySupport::AllKSubsets => {
                let (w, _) = self.weights();
                let k = self.k;
                let pre = esp_prefix(&w, k);
                let suf = esp_suffix(&w, k);
                let norm = suf[0][k];
                (0..self.facility_count)
                    .map(|f| {
                        // e_{k-1} of the weights without f, split at f
                        let mut excl = 0.0;
                        for j in 0..k {
                            excl += pre[f][j] * suf[f + 1][k - 1 - j];
                        }
                        (w[f] * excl / norm).clamp(0.0, 1.0)
                    })
                    .collect()
            }
            PolicySupport::Explicit(actions) => {
                let sums: Vec<f64> = actions.iter().map(|a| self.score_sum(*a)).collect();
                let log_z = log_sum_exp(&sums);
                let mut q = vec![0.0; self.facility_count];
                for (a, s) in actions.iter().zip(&sums) {
                    let p = (s - log_z).exp();
                    for f in a.facilities() {
                        q[f] += p;
                    }
                }
                for v in &mut q {
                    *v = v.clamp(0.0, 1.0);
                }
                q
            }
        }
    }

    /// Inclusion probability of one facility.
    pub fn marginal(&self, facility: usize) -> f64 {
        self.marginals()[facility]
    }

    /// `ω(a)`. For explicit action spaces, actions of the right size that are
    /// not listed have probability 0.
    pub fn action_probability(&self, action: Action) -> Result<f64> {
        if action.len() != self.k {
            return Err(Error::validation(
                "action",
                format!(
                    "expected a {}-subset, got {} facilities",
                    self.k,
                    action.len()
                ),
            ));
        }
        match &self.support {
            PolicySupport::AllKSubsets => {
                Ok((self.score_sum(action) - self.log_normalizer()).exp())
            }
            PolicySupport::Explicit(actions) => {
                if !actions.contains(&action) {
                    return Ok(0.0);
                }
                Ok((self.score_sum(action) - self.log_normalizer()).exp())
            }
        }
    }

    /// `‖ω − δ_{a*}‖₁ = 2(1 − ω(a*))` — total-variation-style distance to the
    /// point mass at a pure action.
    pub fn l1_distance_to_pure(&self, pure: Action) -> Result<f64> {
        Ok(2.0 * (1.0 - self.action_probability(pure)?))
    }

    /// Draw one action. Distribution is exactly `ω`; deterministic given the
    /// RNG state. Facilities are considered in ascending index order.
    pub fn sample(&self, rng: &mut SimRng) -> Action {
        match &self.support {
            PolicySupport::AllKSubsets => self.sample_all_subsets(rng),
            PolicySupport::Explicit(actions) => {
                let sums: Vec<f64> = actions.iter().map(|a| self.score_sum(*a)).collect();
                let mx = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = sums.iter().map(|s| (s - mx).exp()).collect();
                let total: f64 = weights.iter().sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for (a, w) in actions.iter().zip(&weights) {
                    acc += w;
                    if u < acc {
                        return *a;
                    }
                }
                *actions.last().unwrap()
            }
        }
    }

    fn sample_all_subsets(&self, rng: &mut SimRng) -> Action {
        let (w, _) = self.weights();
        let k = self.k;
        let suf = esp_suffix(&w, k);
        let mut chosen: Vec<usize> = Vec::with_capacity(k);
        let mut remaining = k;
        for f in 0..self.facility_count {
            if remaining == 0 {
                break;
            }
            let denom = suf[f][remaining];
            if denom <= 0.0 || !denom.is_finite() {
                // Weights beyond this point underflowed entirely; the
                // conditional law is a point mass on the top-scored
                // remaining facilities.
                let mut rest: Vec<usize> = (f..self.facility_count).collect();
                rest.sort_by(|&a, &b| {
                    self.scores[b]
                        .partial_cmp(&self.scores[a])
                        .unwrap()
                        .then(a.cmp(&b))
                });
                chosen.extend(rest.into_iter().take(remaining));
                chosen.sort_unstable();
                return Action::from_facilities(&chosen);
            }
            let p_include = w[f] * suf[f + 1][remaining - 1] / denom;
            if rng.random::<f64>() < p_include {
                chosen.push(f);
                remaining -= 1;
            }
        }
        debug_assert_eq!(chosen.len(), k);
        Action::from_facilities(&chosen)
    }

    /// Normalizer, marginals, and (for explicit spaces or on request via
    /// `enumerated_distribution`) the probability table.
    pub fn stats(&self) -> DistributionStats {
        let table = match &self.support {
            PolicySupport::AllKSubsets => None,
            PolicySupport::Explicit(_) => Some(self.enumerated_distribution()),
        };
        DistributionStats {
            log_normalizer: self.log_normalizer(),
            marginals: self.marginals(),
            table,
        }
    }

    /// Full probability table by enumeration. In AllKSubsets mode this
    /// enumerates C(F, k) subsets — use at desk scale only.
    pub fn enumerated_distribution(&self) -> Vec<(Action, f64)> {
        let actions: Vec<Action> = match &self.support {
            PolicySupport::AllKSubsets => enumerate_k_subsets(self.facility_count, self.k),
            PolicySupport::Explicit(actions) => actions.to_vec(),
        };
        let sums: Vec<f64> = actions.iter().map(|a| self.score_sum(*a)).collect();
        let log_z = log_sum_exp(&sums);
        actions
            .into_iter()
            .zip(sums)
            .map(|(a, s)| (a, (s - log_z).exp()))
            .collect()
    }
}

/// Elementary symmetric polynomials `e_0..e_k` of `weights`.
pub fn esp(weights: &[f64], k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (count, &w) in weights.iter().enumerate() {
        let top = k.min(count + 1);
        for j in (1..=top).rev() {
            e[j] += w * e[j - 1];
        }
    }
    e
}

/// `pre[i][j] = e_j(weights[..i])` for `i = 0..=F`, `j = 0..=k`.
fn esp_prefix(weights: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut rows = Vec::with_capacity(weights.len() + 1);
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    rows.push(e.clone());
    for &w in weights {
        for j in (1..=k).rev() {
            e[j] += w * e[j - 1];
        }
        rows.push(e.clone());
    }
    rows
}

/// `suf[i][j] = e_j(weights[i..])` for `i = 0..=F`, `j = 0..=k`.
fn esp_suffix(weights: &[f64], k: usize) -> Vec<Vec<f64>> {
    let f_count = weights.len();
    let mut rows = vec![vec![0.0; k + 1]; f_count + 1];
    rows[f_count][0] = 1.0;
    for i in (0..f_count).rev() {
        rows[i][0] = 1.0;
        for j in 1..=k {
            rows[i][j] = rows[i + 1][j] + weights[i] * rows[i + 1][j - 1];
        }
    }
    rows
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let mx = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    let sum: f64 = values.iter().map(|v| (v - mx).exp()).sum();
    sum.ln() + mx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_chacha::rand_core::SeedableRng;
    use std::collections::HashMap;

    /// Scores with weights (1, 2, 3): the worked three-facility case.
    fn weights_123() -> Vec<f64> {
        vec![0.0, 2.0_f64.ln(), 3.0_f64.ln()]
    }

    #[test]
    fn log_normalizer_uniform_and_weighted() {
        // F=3, k=2, G ≡ 0: three equal-weight subsets
        let p = FactoredPolicy::uniform_all_subsets(3, 2);
        assert_relative_eq!(p.log_normalizer(), 3.0_f64.ln(), max_relative = 1e-12);
        // weights (1,2,3): e_2 = 1·2 + 1·3 + 2·3 = 11
        let p = FactoredPolicy::all_subsets(weights_123(), 2);
        assert_relative_eq!(p.log_normalizer(), 11.0_f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn log_normalizer_single_action_space() {
        let scores = vec![1.5, -2.0, 0.25];
        let p = FactoredPolicy::all_subsets(scores.clone(), 3);
        let expect: f64 = scores.iter().sum();
        assert_relative_eq!(p.log_normalizer(), expect, max_relative = 1e-12);
    }

    #[test]
    fn marginals_symmetry_and_weighted() {
        let p = FactoredPolicy::uniform_all_subsets(3, 2);
        for f in 0..3 {
            assert_relative_eq!(p.marginal(f), 2.0 / 3.0, max_relative = 1e-12);
        }
        let p = FactoredPolicy::all_subsets(weights_123(), 2);
        // q(f3) = 3·(1+2)/11
        assert_relative_eq!(p.marginal(2), 9.0 / 11.0, max_relative = 1e-12);
    }

    #[test]
    fn marginals_single_action_are_one() {
        let p = FactoredPolicy::all_subsets(vec![0.3, -7.0], 2);
        for f in 0..2 {
            assert_relative_eq!(p.marginal(f), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn action_probability_worked_cases() {
        let p = FactoredPolicy::uniform_all_subsets(4, 2);
        let a = Action::from_facilities(&[1, 3]);
        assert_relative_eq!(
            p.action_probability(a).unwrap(),
            1.0 / 6.0,
            max_relative = 1e-12
        );

        let p = FactoredPolicy::all_subsets(weights_123(), 2);
        let a = Action::from_facilities(&[0, 1]);
        assert_relative_eq!(
            p.action_probability(a).unwrap(),
            2.0 / 11.0,
            max_relative = 1e-12
        );

        // wrong size is a structural error
        assert!(p.action_probability(Action::from_facilities(&[0])).is_err());
    }

    #[test]
    fn l1_distance_worked_cases() {
        // near-point-mass
        let mut scores = vec![0.0; 3];
        scores[0] = 40.0;
        scores[1] = 40.0;
        let p = FactoredPolicy::all_subsets(scores, 2);
        let target = Action::from_facilities(&[0, 1]);
        assert!(p.l1_distance_to_pure(target).unwrap() <= 1e-6);

        // uniform: 2(1 - 1/A)
        let p = FactoredPolicy::uniform_all_subsets(4, 2);
        assert_relative_eq!(
            p.l1_distance_to_pure(Action::from_facilities(&[0, 1]))
                .unwrap(),
            2.0 * (1.0 - 1.0 / 6.0),
            max_relative = 1e-12
        );

        // weights (1,2,3), a* = {f2, f3}: 2(1 - 6/11)
        let p = FactoredPolicy::all_subsets(weights_123(), 2);
        assert_relative_eq!(
            p.l1_distance_to_pure(Action::from_facilities(&[1, 2]))
                .unwrap(),
            10.0 / 11.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn sample_single_action_space() {
        let p = FactoredPolicy::all_subsets(vec![0.0, 1.0], 2);
        let mut rng = SimRng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(p.sample(&mut rng), Action::from_facilities(&[0, 1]));
        }
    }

    #[test]
    fn sample_matches_enumeration_uniform() {
        let p = FactoredPolicy::uniform_all_subsets(3, 2);
        let mut rng = SimRng::seed_from_u64(5);
        let draws = 30_000;
        let mut counts: HashMap<Action, usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(p.sample(&mut rng)).or_default() += 1;
        }
        // each subset frequency within 3σ of 1/3
        let sigma = (draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for &c in counts.values() {
            assert!(
                (c as f64 - draws as f64 / 3.0).abs() <= 3.0 * sigma,
                "count {c} too far from uniform"
            );
        }
        assert_eq!(counts.len(), 3);
    }

    #[test]
    fn sample_matches_enumeration_weighted() {
        let p = FactoredPolicy::all_subsets(weights_123(), 2);
        let mut rng = SimRng::seed_from_u64(17);
        let draws = 100_000;
        let target = Action::from_facilities(&[1, 2]);
        let mut hits = 0usize;
        for _ in 0..draws {
            if p.sample(&mut rng) == target {
                hits += 1;
            }
        }
        let p_true = 6.0 / 11.0;
        let sigma = (draws as f64 * p_true * (1.0 - p_true)).sqrt();
        assert!(
            (hits as f64 - draws as f64 * p_true).abs() <= 3.0 * sigma,
            "hits {hits} vs expected {}",
            draws as f64 * p_true
        );
    }

    #[test]
    fn explicit_support_matches_enumeration() {
        let actions: Arc<[Action]> = vec![
            Action::from_facilities(&[0, 1]),
            Action::from_facilities(&[2, 3]),
            Action::from_facilities(&[0, 3]),
        ]
        .into();
        let scores = vec![0.4, -0.3, 1.1, 0.0];
        let p = FactoredPolicy::explicit(scores.clone(), 2, actions.clone());
        let table = p.enumerated_distribution();
        let total: f64 = table.iter().map(|(_, q)| q).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
        // unlisted action of the right size has probability zero
        assert_eq!(
            p.action_probability(Action::from_facilities(&[1, 2]))
                .unwrap(),
            0.0
        );
        // marginals from table, both directly and through the stats snapshot
        let stats = p.stats();
        let q = p.marginals();
        for f in 0..4 {
            let direct: f64 = table
                .iter()
                .filter(|(a, _)| a.contains(f))
                .map(|(_, q)| q)
                .sum();
            assert_relative_eq!(q[f], direct, max_relative = 1e-12);
            assert_relative_eq!(stats.marginals[f], direct, max_relative = 1e-12);
        }
        let stats_table = stats.table.unwrap();
        assert_eq!(stats_table.len(), table.len());
    }

    #[test]
    fn degenerate_scores_sample_top_subset() {
        // huge spread: everything but the top-2 underflows
        let scores = vec![0.0, 1600.0, -800.0, 1600.0];
        let p = FactoredPolicy::all_subsets(scores, 2);
        let mut rng = SimRng::seed_from_u64(9);
        for _ in 0..10 {
            assert_eq!(p.sample(&mut rng), Action::from_facilities(&[1, 3]));
        }
    }

    fn scores_strategy(max_f: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-30.0f64..30.0, 2..=max_f)
    }

    proptest! {
        #[test]
        fn esp_quantities_match_enumeration(scores in scores_strategy(10), k_seed in 0usize..100) {
            let f_count = scores.len();
            let k = 1 + k_seed % f_count;
            let p = FactoredPolicy::all_subsets(scores, k);
            let table = p.enumerated_distribution();

            // normalizer
            let sums: Vec<f64> = table.iter().map(|(a, _)| {
                a.facilities().map(|f| p.scores()[f]).sum()
            }).collect();
            let direct_log_z = log_sum_exp(&sums);
            prop_assert!((p.log_normalizer() - direct_log_z).abs() <= 1e-9 * direct_log_z.abs().max(1.0));

            // marginals
            for (f, q) in p.marginals().iter().enumerate() {
                let direct: f64 = table.iter().filter(|(a, _)| a.contains(f)).map(|(_, w)| w).sum();
                prop_assert!((q - direct).abs() <= 1e-9 * direct.max(1e-12),
                    "marginal mismatch at {f}: {} vs {}", q, direct);
            }

            // action probabilities
            for (a, w) in table.iter().take(20) {
                let own = p.action_probability(*a).unwrap();
                prop_assert!((own - w).abs() <= 1e-9 * w.max(1e-12));
            }
        }

        #[test]
        fn marginals_sum_to_k(scores in scores_strategy(10), k_seed in 0usize..100) {
            let f_count = scores.len();
            let k = 1 + k_seed % f_count;
            let p = FactoredPolicy::all_subsets(scores, k);
            let total: f64 = p.marginals().iter().sum();
            prop_assert!((total - k as f64).abs() <= 1e-9, "sum {total} != {k}");
        }

        #[test]
        fn shift_invariance(scores in scores_strategy(8), shift in -50.0f64..50.0, k_seed in 0usize..100) {
            let f_count = scores.len();
            let k = 1 + k_seed % f_count;
            let p = FactoredPolicy::all_subsets(scores.clone(), k);
            let shifted = FactoredPolicy::all_subsets(scores.iter().map(|g| g + shift).collect(), k);
            let q1 = p.marginals();
            let q2 = shifted.marginals();
            for f in 0..f_count {
                prop_assert!((q1[f] - q2[f]).abs() <= 1e-9);
            }
            let a = enumerate_k_subsets(f_count, k)[0];
            let w1 = p.action_probability(a).unwrap();
            let w2 = shifted.action_probability(a).unwrap();
            prop_assert!((w1 - w2).abs() <= 1e-9);
        }

        #[test]
        fn raising_a_score_never_lowers_its_marginal(
            scores in scores_strategy(8),
            bump in 0.0f64..10.0,
            pick in 0usize..100,
            k_seed in 0usize..100,
        ) {
            let f_count = scores.len();
            let k = 1 + k_seed % f_count;
            let f = pick % f_count;
            let p = FactoredPolicy::all_subsets(scores.clone(), k);
            let mut bumped = scores;
            bumped[f] += bump;
            let pb = FactoredPolicy::all_subsets(bumped, k);
            prop_assert!(pb.marginal(f) >= p.marginal(f) - 1e-12);
        }
    }
}
