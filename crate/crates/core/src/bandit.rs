//! Shared-parameter LinUCB over joint (student, action) feature vectors.
//!
//! One ridge model θ = A⁻¹b is shared by every action; an action is scored
//! as θᵀx + α·sqrt(xᵀA⁻¹x). The inverse is maintained incrementally with
//! Sherman-Morrison rank-1 updates and recomputed from A by direct
//! inversion every [`REINVERSION_PERIOD`] updates to bound numerical drift.

use thiserror::Error;

use crate::linalg::{add_outer, dot, invert, mat_vec};

/// Updates between full recomputations of the cached inverse.
pub const REINVERSION_PERIOD: u64 = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("alpha must be finite and non-negative, got {0}")]
    InvalidAlpha(f64),
    #[error("lambda must be finite and positive, got {0}")]
    InvalidLambda(f64),
    #[error("context has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in context or reward")]
    NonFiniteInput,
    #[error("score is not finite; bandit state is numerically corrupt")]
    NonFiniteScore,
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("restored state is inconsistent: {0}")]
    CorruptState(String),
}

/// Ridge statistics plus the exploration coefficient.
///
/// `a` is the regularized Gram accumulator λI + Σxxᵀ, `b` the
/// reward-weighted feature accumulator Σrx, both row-major flat buffers.
#[derive(Debug, Clone)]
pub struct LinUcb {
    d: usize,
    alpha: f64,
    lambda: f64,
    a: Vec<f64>,
    a_inv: Vec<f64>,
    b: Vec<f64>,
    update_count: u64,
}

impl LinUcb {
    pub fn new(d: usize, alpha: f64, lambda: f64) -> Result<Self, BanditError> {
        if d == 0 {
            return Err(BanditError::ZeroDimension);
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(BanditError::InvalidAlpha(alpha));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(BanditError::InvalidLambda(lambda));
        }
        let mut a = vec![0.0; d * d];
        let mut a_inv = vec![0.0; d * d];
        for i in 0..d {
            a[i * d + i] = lambda;
            a_inv[i * d + i] = 1.0 / lambda;
        }
        Ok(Self {
            d,
            alpha,
            lambda,
            a,
            a_inv,
            b: vec![0.0; d],
            update_count: 0,
        })
    }

    /// Rebuild a bandit from checkpointed state. The cached inverse is
    /// restored verbatim (not recomputed) so scores reproduce bitwise.
    #[allow(clippy::too_many_arguments)]
    pub fn from_state(
        d: usize,
        alpha: f64,
        lambda: f64,
        a: Vec<f64>,
        a_inv: Vec<f64>,
        b: Vec<f64>,
        update_count: u64,
    ) -> Result<Self, BanditError> {
        let template = Self::new(d, alpha, lambda)?;
        if a.len() != d * d || a_inv.len() != d * d || b.len() != d {
            return Err(BanditError::CorruptState(format!(
                "buffer sizes {}/{}/{} do not match d={d}",
                a.len(),
                a_inv.len(),
                b.len()
            )));
        }
        if a.iter().chain(&a_inv).chain(&b).any(|v| !v.is_finite()) {
            return Err(BanditError::CorruptState("non-finite entry".into()));
        }
        let restored = Self {
            a,
            a_inv,
            b,
            update_count,
            ..template
        };
        let drift = restored.inverse_drift();
        if drift.is_nan() || drift >= 1e-4 {
            return Err(BanditError::CorruptState(format!(
                "A·A_inv deviates from identity by {drift}"
            )));
        }
        Ok(restored)
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn gram(&self) -> &[f64] {
        &self.a
    }

    pub fn response(&self) -> &[f64] {
        &self.b
    }

    pub fn cached_inverse(&self) -> &[f64] {
        &self.a_inv
    }

    /// Direct inversion of the current A, independent of the cached inverse.
    pub fn refreshed_inverse(&self) -> Vec<f64> {
        invert(&self.a, self.d).expect("regularized Gram matrix is positive definite")
    }

    /// Max absolute deviation of A·A_inv from the identity; the on-demand
    /// positive-definiteness/consistency probe.
    pub fn inverse_drift(&self) -> f64 {
        let d = self.d;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for k in 0..d {
                    s += self.a[i * d + k] * self.a_inv[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    /// Ridge estimate θ = A⁻¹ b.
    pub fn theta(&self) -> Vec<f64> {
        mat_vec(&self.a_inv, self.d, &self.b)
    }

    fn check_context(&self, x: &[f64]) -> Result<(), BanditError> {
        if x.len() != self.d {
            return Err(BanditError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFiniteInput);
        }
        Ok(())
    }

    /// UCB score θᵀx + α·sqrt(xᵀA⁻¹x).
    pub fn score(&self, x: &[f64]) -> Result<f64, BanditError> {
        self.check_context(x)?;
        let mean = dot(&self.theta(), x);
        let ax = mat_vec(&self.a_inv, self.d, x);
        // Clamp tiny negative values from rounding before the sqrt.
        let variance = dot(x, &ax).max(0.0);
        let score = mean + self.alpha * variance.sqrt();
        if score.is_finite() {
            Ok(score)
        } else {
            Err(BanditError::NonFiniteScore)
        }
    }

    /// Index of the highest-scoring candidate; ties go to the lowest index.
    pub fn select<'a, I>(&self, candidates: I) -> Result<usize, BanditError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut best: Option<(usize, f64)> = None;
        for (i, x) in candidates.into_iter().enumerate() {
            let s = self.score(x)?;
            match best {
                Some((_, current)) if s <= current => {}
                _ => best = Some((i, s)),
            }
        }
        best.map(|(i, _)| i).ok_or(BanditError::NoCandidates)
    }

    /// Fold in one observation: A += xxᵀ, b += r·x. The cached inverse is
    /// advanced with a Sherman-Morrison update and refreshed by direct
    /// inversion every [`REINVERSION_PERIOD`] updates.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<(), BanditError> {
        self.check_context(x)?;
        if !reward.is_finite() {
            return Err(BanditError::NonFiniteInput);
        }
        let d = self.d;
        add_outer(&mut self.a, d, 1.0, x, x);

        // (A + xxᵀ)⁻¹ = A⁻¹ − (A⁻¹x)(A⁻¹x)ᵀ / (1 + xᵀA⁻¹x); the
        // denominator is ≥ 1 because A is positive definite.
        let ax = mat_vec(&self.a_inv, d, x);
        let denom = 1.0 + dot(x, &ax);
        add_outer(&mut self.a_inv, d, -1.0 / denom, &ax, &ax);

        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += reward * xi;
        }
        self.update_count += 1;
        if self.update_count.is_multiple_of(REINVERSION_PERIOD) {
            self.a_inv = self.refreshed_inverse();
        }
        Ok(())
    }
}
