//! Synthetic linear-bandit benchmark: a fixed arm set with a hidden weight
//! vector, Gaussian reward noise, and cumulative-regret curves for LinUCB
//! and a uniform-random reference policy on the same instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bandit::{BanditError, LinUcb};
use crate::stream::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBenchConfig {
    pub d: usize,
    pub arms: usize,
    pub horizon: usize,
    pub noise: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for RegretBenchConfig {
    fn default() -> Self {
        Self {
            d: 8,
            arms: 20,
            horizon: 10_000,
            noise: 0.1,
            alpha: 1.0,
            lambda: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegretBenchResult {
    /// Cumulative expected regret of the LinUCB agent after each round.
    pub linucb_cumulative: Vec<f64>,
    /// Cumulative expected regret of uniform-random arm choice on the same
    /// instance.
    pub random_cumulative: Vec<f64>,
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Run the benchmark. Regret is measured against noiseless expected
/// rewards; noise only perturbs the feedback the agent learns from. The
/// instance, the agent's noise, and the random policy's choices each use
/// their own stream derived from the seed.
pub fn run_regret_bench(cfg: &RegretBenchConfig) -> Result<RegretBenchResult, BanditError> {
    if cfg.horizon == 0 {
        return Err(BanditError::CorruptState("horizon must be at least 1".into()));
    }
    if cfg.arms == 0 {
        return Err(BanditError::NoCandidates);
    }
    if !cfg.noise.is_finite() || cfg.noise < 0.0 {
        return Err(BanditError::NonFiniteInput);
    }

    let mut instance_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 0]));
    let mut agent_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 1]));
    let mut random_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 2]));

    let hidden = unit_vector(&mut instance_rng, cfg.d);
    let arms: Vec<Vec<f64>> = (0..cfg.arms)
        .map(|_| unit_vector(&mut instance_rng, cfg.d))
        .collect();
    let means: Vec<f64> = arms
        .iter()
        .map(|arm| arm.iter().zip(&hidden).map(|(a, h)| a * h).sum())
        .collect();
    let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let noise = if cfg.noise > 0.0 {
        Some(Normal::new(0.0, cfg.noise).expect("validated noise"))
    } else {
        None
    };

    let mut bandit = LinUcb::new(cfg.d, cfg.alpha, cfg.lambda)?;
    let mut linucb_cumulative = Vec::with_capacity(cfg.horizon);
    let mut random_cumulative = Vec::with_capacity(cfg.horizon);
    let mut agent_total = 0.0;
    let mut random_total = 0.0;

    for _ in 0..cfg.horizon {
        let chosen = bandit.select(arms.iter().map(|a| a.as_slice()))?;
        agent_total += best - means[chosen];
        let observed = means[chosen] + noise.map_or(0.0, |n| n.sample(&mut agent_rng));
        bandit.update(&arms[chosen], observed)?;
        linucb_cumulative.push(agent_total);

        let uniform = random_rng.random_range(0..cfg.arms);
        random_total += best - means[uniform];
        random_cumulative.push(random_total);
    }

    Ok(RegretBenchResult {
        linucb_cumulative,
        random_cumulative,
    })
}
