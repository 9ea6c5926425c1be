//! LinUCB checked against a brute-force dense ridge solver. The oracle
//! accumulates the raw update log and solves (λI + Σxxᵀ)θ = Σrx directly
//! with its own Gaussian elimination, independent of the incremental
//! Sherman-Morrison path used by the implementation.

use curricula_core::bandit::LinUcb;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight-line Gaussian elimination with partial pivoting; test-local so
/// the oracle shares no code with the implementation.
fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        assert!(m[col][col].abs() > 1e-12, "oracle matrix is singular");
        let pivot_row = m[col].clone();
        for (row, cells) in m.iter_mut().enumerate() {
            if row == col {
                continue;
            }
            let factor = cells[col] / pivot_row[col];
            for (cell, pv) in cells.iter_mut().zip(&pivot_row).skip(col) {
                *cell -= factor * pv;
            }
        }
    }
    (0..n).map(|i| m[i][n] / m[i][i]).collect()
}

fn solve_sym(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    solve_dense(a, b)
}

/// Oracle state: the explicit update log.
struct RidgeOracle {
    lambda: f64,
    log: Vec<(Vec<f64>, f64)>,
}

impl RidgeOracle {
    fn new(lambda: f64) -> Self {
        Self {
            lambda,
            log: Vec::new(),
        }
    }

    fn record(&mut self, x: &[f64], r: f64) {
        self.log.push((x.to_vec(), r));
    }

    fn gram(&self, d: usize) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; d]; d];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = self.lambda;
        }
        for (x, _) in &self.log {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += x[i] * x[j];
                }
            }
        }
        a
    }

    fn response(&self, d: usize) -> Vec<f64> {
        let mut b = vec![0.0; d];
        for (x, r) in &self.log {
            for (bi, xi) in b.iter_mut().zip(x) {
                *bi += r * xi;
            }
        }
        b
    }

    fn theta(&self, d: usize) -> Vec<f64> {
        solve_sym(&self.gram(d), &self.response(d))
    }

    /// θᵀx + α·sqrt(xᵀ A⁻¹ x), with A⁻¹x obtained by a dense solve.
    fn score(&self, d: usize, alpha: f64, x: &[f64]) -> f64 {
        let theta = self.theta(d);
        let mean: f64 = theta.iter().zip(x).map(|(t, xi)| t * xi).sum();
        let ainv_x = solve_sym(&self.gram(d), x);
        let width: f64 = x.iter().zip(&ainv_x).map(|(a, b)| a * b).sum();
        mean + alpha * width.max(0.0).sqrt()
    }
}

fn random_context(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn theta_and_score_match_dense_solve_after_200_updates() {
    let d = 12;
    let (alpha, lambda) = (1.0, 1.0);
    let mut bandit = LinUcb::new(d, alpha, lambda).unwrap();
    let mut oracle = RidgeOracle::new(lambda);
    assert_eq!(bandit.theta(), vec![0.0; d]);

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..200 {
        let x = random_context(&mut rng, d);
        let r = rng.random_range(-1.0..2.0);
        bandit.update(&x, r).unwrap();
        oracle.record(&x, r);
    }

    let theta = bandit.theta();
    for (got, want) in theta.iter().zip(oracle.theta(d)) {
        assert!(
            (got - want).abs() < 1e-8,
            "theta mismatch: {got} vs {want}"
        );
    }
    for _ in 0..100 {
        let x = random_context(&mut rng, d);
        let got = bandit.score(&x).unwrap();
        let want = oracle.score(d, alpha, &x);
        assert!((got - want).abs() < 1e-8, "score mismatch: {got} vs {want}");
    }
}

#[test]
fn select_matches_oracle_argmax_over_random_candidates() {
    let d = 6;
    let (alpha, lambda) = (0.7, 2.0);
    let mut bandit = LinUcb::new(d, alpha, lambda).unwrap();
    let mut oracle = RidgeOracle::new(lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..80 {
        let x = random_context(&mut rng, d);
        let r = rng.random_range(-1.0..1.0);
        bandit.update(&x, r).unwrap();
        oracle.record(&x, r);
    }

    for _ in 0..20 {
        let candidates: Vec<Vec<f64>> = (0..10).map(|_| random_context(&mut rng, d)).collect();
        let oracle_best = (0..candidates.len())
            .map(|i| (i, oracle.score(d, alpha, &candidates[i])))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, (i, s)| {
                if s > best.1 {
                    (i, s)
                } else {
                    best
                }
            })
            .0;
        let got = bandit
            .select(candidates.iter().map(|c| c.as_slice()))
            .unwrap();
        assert_eq!(got, oracle_best);
    }
}

#[test]
fn shifted_reward_histories_keep_the_oracle_argmax() {
    // Two bandits fed the same contexts, one with every reward shifted by a
    // constant; each must still select its own oracle's argmax.
    let d = 5;
    let (alpha, lambda) = (1.0, 1.0);
    let shift = 2.5;
    let mut plain = LinUcb::new(d, alpha, lambda).unwrap();
    let mut shifted = LinUcb::new(d, alpha, lambda).unwrap();
    let mut plain_oracle = RidgeOracle::new(lambda);
    let mut shifted_oracle = RidgeOracle::new(lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..120 {
        let x = random_context(&mut rng, d);
        let r = rng.random_range(0.0..1.0);
        plain.update(&x, r).unwrap();
        plain_oracle.record(&x, r);
        shifted.update(&x, r + shift).unwrap();
        shifted_oracle.record(&x, r + shift);
    }
    let candidates: Vec<Vec<f64>> = (0..8).map(|_| random_context(&mut rng, d)).collect();
    for (bandit, oracle) in [(&plain, &plain_oracle), (&shifted, &shifted_oracle)] {
        let oracle_best = (0..candidates.len())
            .map(|i| (i, oracle.score(d, alpha, &candidates[i])))
            .fold((usize::MAX, f64::NEG_INFINITY), |best, (i, s)| {
                if s > best.1 {
                    (i, s)
                } else {
                    best
                }
            })
            .0;
        let got = bandit
            .select(candidates.iter().map(|c| c.as_slice()))
            .unwrap();
        assert_eq!(got, oracle_best);
    }
}

#[test]
fn cached_inverse_stays_close_to_fresh_inversion_across_reinversions() {
    // Crosses the periodic reinversion boundary several times.
    let d = 10;
    let mut bandit = LinUcb::new(d, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for step in 1..=2500u64 {
        let x = random_context(&mut rng, d);
        bandit.update(&x, rng.random_range(-1.0..1.0)).unwrap();
        if step % 500 == 0 {
            let fresh = bandit.refreshed_inverse();
            let worst = bandit
                .cached_inverse()
                .iter()
                .zip(&fresh)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(worst < 1e-6, "drift {worst} at step {step}");
        }
    }
    assert_eq!(bandit.update_count(), 2500);
}
