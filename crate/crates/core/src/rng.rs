//! Seed derivation and the simulation RNG.
//!
//! Every run owns one ChaCha12 stream seeded from a single `u64`. Streams for
//! indexed work items (sweep grid points, generated games) are derived with
//! SplitMix64: `derive_seed(master, index)` is the `index`-th output of the
//! SplitMix64 sequence started at `master`. Derivation is pure arithmetic on
//! the seed, so parallel execution cannot perturb any stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The RNG used for all stochastic simulation.
pub type SimRng = ChaCha12Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `index`-th output of the SplitMix64 sequence seeded with `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// RNG stream for a run identified by its seed value alone.
///
/// A run's stream depends only on its own seed, never on its position in a
/// seed list or the thread that executes it.
pub fn run_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // stable across calls
        assert_eq!(a, derive_seed(42, 0));
    }

    #[test]
    fn run_rng_is_deterministic() {
        let mut r1 = run_rng(7);
        let mut r2 = run_rng(7);
        for _ in 0..100 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }
}
