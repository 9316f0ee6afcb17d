//! Measured behavior of the simulation harness beyond the acceptance gate:
//! the worked regret ceiling on the running example and regret growth when
//! the facility count doubles.

use congestexp::game::{ActionSpace, GameFile, RewardKernel};
use congestexp::harness::{run_all_seeds, sweep_regret_scaling, RegretSweepGrid, RunSpec};
use congestexp::learner::{FeedbackMode, LearningRateSchedule};

fn g1() -> congestexp::CongestionGame {
    GameFile {
        n: 2,
        facility_count: 2,
        k: 1,
        action_space: ActionSpace::AllKSubsets,
        rewards: Some(vec![vec![1.0, 0.2], vec![0.8, 0.3]]),
        affine: None,
        kernel: RewardKernel::Bernoulli,
    }
    .into_game()
    .unwrap()
}

/// Semi-bandit on the example game at T = 10⁴ with η = 1/√T stays under the
/// kF√T ceiling (empirical constant 1) for both players on every seed.
#[test]
fn g1_semibandit_regret_under_kf_sqrt_t() {
    let horizon = 10_000usize;
    let spec = RunSpec {
        trace_every: horizon,
        ..RunSpec::simple(
            g1(),
            FeedbackMode::SemiBandit,
            LearningRateSchedule::for_horizon(horizon),
            horizon,
        )
    };
    let ceiling = 1.0 * 2.0 * (horizon as f64).sqrt(); // kF√T with k=1, F=2
    let records = run_all_seeds(&spec, &[3, 17, 2024]).unwrap();
    for record in &records {
        for (player, summary) in record.regrets.iter().enumerate() {
            let regret = summary.expected.regret;
            assert!(
                regret <= ceiling,
                "seed {}, player {player}: regret {regret} above kF√T = {ceiling}",
                record.seed
            );
        }
    }
}

/// Doubling F at fixed T grows measured regret at most ~linearly: the ratio
/// of mean max-player regret between F=12 and F=6 stays ≤ 2.8.
#[test]
fn doubling_facilities_grows_regret_at_most_linearly() {
    let grid = RegretSweepGrid {
        n: 4,
        horizons: vec![2_000],
        facility_counts: vec![6, 12],
        subset_sizes: vec![2],
        seeds: (1..=10).collect(),
        game_seed: 0xC0FFEE,
        kernel: RewardKernel::Bernoulli,
    };
    let summary = sweep_regret_scaling(&grid).unwrap();
    assert_eq!(summary.points.len(), 2);
    let small = &summary.points[0];
    let large = &summary.points[1];
    assert_eq!(small.facility_count, 6);
    assert_eq!(large.facility_count, 12);
    let ratio = large.mean_max_regret / small.mean_max_regret;
    println!(
        "F=6 mean regret {:.3}, F=12 mean regret {:.3}, ratio {ratio:.3}",
        small.mean_max_regret, large.mean_max_regret
    );
    assert!(ratio <= 2.8, "regret ratio {ratio} exceeds 2.8");
}
