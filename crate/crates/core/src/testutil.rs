//! Shared fixtures for unit tests.

use crate::game::{ActionSpace, CongestionGame, FacilityRewardTable, RewardKernel};

/// Two players, two facilities, singleton actions:
/// r^{f1} = (1.0, 0.2), r^{f2} = (0.8, 0.3).
///
/// Pure Nash equilibria are (f1, f2) and (f2, f1), both strict with
/// deviation gap 0.6.
pub fn g1(kernel: RewardKernel) -> CongestionGame {
    CongestionGame::new(
        2,
        2,
        1,
        ActionSpace::AllKSubsets,
        vec![
            FacilityRewardTable::new(vec![1.0, 0.2]).unwrap(),
            FacilityRewardTable::new(vec![0.8, 0.3]).unwrap(),
        ],
        kernel,
    )
    .unwrap()
}
