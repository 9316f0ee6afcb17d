//! Online congestion game simulator.
//!
//! Congestion games share `F` facilities among `n` players; each action is a
//! set of `k` facilities and each facility pays by how many players chose it.
//! This crate implements facility-level exponential-weights learning for the
//! repeated game under semi-bandit and full-information feedback, together
//! with the analysis tooling used to check its regret, welfare, and
//! Nash-convergence behavior at desk scale:
//!
//! - [`game`] — game model, reward kernels, exact Poisson-binomial
//!   expectations, game files.
//! - [`policy`] — product-form k-subset distributions (scores, marginals,
//!   normalizers, exact sampling via elementary symmetric polynomials).
//! - [`learner`] — the facility-level estimator and policy update in its
//!   semi-bandit and full-information variants, learning-rate schedules,
//!   near-equilibrium initialization, and the score-gap monitor.
//! - [`analysis`] — ground-truth oracles: pure Nash enumeration, potential
//!   and best-response dynamics, best-in-hindsight regret, smoothness and
//!   welfare bounds.
//! - [`harness`] — seeded, reproducible experiment driver with CSV/JSON
//!   artifacts, regret-scaling sweeps, and convergence studies.
//!
//! # Example
//!
//! Two players, two facilities, singleton actions; the semi-bandit learner
//! keeps both players' regret well under the `kF√T` ceiling:
//!
//! ```
//! use congestexp::game::{ActionSpace, CongestionGame, FacilityRewardTable, RewardKernel};
//! use congestexp::harness::{run, RunSpec};
//! use congestexp::learner::{FeedbackMode, LearningRateSchedule};
//!
//! let game = CongestionGame::new(
//!     2, 2, 1,
//!     ActionSpace::AllKSubsets,
//!     vec![
//!         FacilityRewardTable::new(vec![1.0, 0.2]).unwrap(),
//!         FacilityRewardTable::new(vec![0.8, 0.3]).unwrap(),
//!     ],
//!     RewardKernel::Bernoulli,
//! ).unwrap();
//!
//! let horizon = 1_000;
//! let spec = RunSpec::simple(
//!     game,
//!     FeedbackMode::SemiBandit,
//!     LearningRateSchedule::for_horizon(horizon),
//!     horizon,
//! );
//! let record = run(&spec, 7).unwrap();
//! let ceiling = 2.0 * (horizon as f64).sqrt(); // kF√T
//! assert!(record.regrets.iter().all(|r| r.expected.regret <= ceiling));
//! ```

pub mod action;
pub mod analysis;
pub mod error;
pub mod game;
pub mod harness;
pub mod learner;
pub mod policy;
pub mod record;
pub mod rng;
#[cfg(test)]
pub(crate) mod testutil;

pub use action::Action;
pub use error::{Error, Result};
pub use game::{ActionSpace, AffineRewardSpec, CongestionGame, FacilityRewardTable, RewardKernel};
pub use policy::FactoredPolicy;
