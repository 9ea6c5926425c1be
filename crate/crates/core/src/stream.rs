//! Counter-based RNG stream derivation. Every simulated step gets its own
//! generator seeded from (master_seed, run, student, step) through a
//! SplitMix64 fold, so results never depend on execution order or
//! parallelism: the scheme is pure in its four counters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a list of counters into one seed: each component passes through a
/// SplitMix64 round before absorbing the next.
pub fn derive_seed(components: &[u64]) -> u64 {
    let mut state = 0x6A09_E667_F3BC_C909; // fixed offset so derive_seed(&[0]) != 0
    for &part in components {
        state = splitmix64(state ^ part);
    }
    state
}

/// Generator for one derived stream.
pub fn derive_rng(components: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(components))
}

/// Per-(run, student) step counter handing out one fresh generator per
/// simulated step.
#[derive(Debug, Clone)]
pub struct StepStreams {
    master_seed: u64,
    run: u64,
    student: u64,
    next_step: u64,
}

impl StepStreams {
    pub fn new(master_seed: u64, run: u64, student: u64) -> Self {
        Self {
            master_seed,
            run,
            student,
            next_step: 0,
        }
    }

    pub fn next_step(&mut self) -> ChaCha8Rng {
        let rng = derive_rng(&[self.master_seed, self.run, self.student, self.next_step]);
        self.next_step += 1;
        rng
    }
}
