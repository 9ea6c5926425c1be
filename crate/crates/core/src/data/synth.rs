//! Seeded synthetic cohort generator. Real attempt logs cannot ship, so the
//! generator plants a known ground-truth outcome model: every generated
//! outcome is sampled from a softmax over the same feature encoding the
//! world model trains on, which makes model recovery measurable.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::Dataset;
use crate::domain::{AttemptRecord, Exercise, ExerciseFormat, LearningUnit};
use crate::features::{build_context, FeatureLayout, StudentUnitState};
use crate::world::{class_logits, OutcomeDistribution, NUM_CLASSES};

/// Categorical vocabularies baked into generated catalogs.
pub const SOLUTION_FORMS: [&str; 4] = ["code", "derivation", "numeric", "short_text"];
pub const APPLICATION_CONTEXTS: [&str; 3] = ["applied", "conceptual", "visual"];

/// Outcome prior used when no ground-truth model is planted:
/// (instant success, eventual success, eventual failure, instant skip,
/// eventual skip).
pub const UNPLANTED_PRIOR: [f64; NUM_CLASSES] = [0.45, 0.15, 0.10, 0.20, 0.10];

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid synthetic config: {0}")]
pub struct SyntheticConfigError(String);

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_students: usize,
    pub n_units: usize,
    pub exercises_per_unit: usize,
    /// Bounds on how many distinct exercises a student attempts in each
    /// started unit.
    pub min_attempts_per_unit: usize,
    pub max_attempts_per_unit: usize,
    /// Probability a student starts any given unit.
    pub unit_participation: f64,
    /// Probability an observed attempt was presented as an MCQ.
    pub mcq_rate: f64,
    /// Row-major 5×d ground-truth weights over [`synthetic_layout`]
    /// features; `None` draws outcomes from [`UNPLANTED_PRIOR`] instead.
    pub planted_weights: Option<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn new(n_students: usize, n_units: usize, exercises_per_unit: usize, seed: u64) -> Self {
        // Default attempt bounds scale down with tiny units. Most of each
        // unit stays unattempted so simulation runs mostly on sampled
        // outcomes rather than replay.
        let max_attempts = exercises_per_unit.clamp(1, 4);
        Self {
            n_students,
            n_units,
            exercises_per_unit,
            min_attempts_per_unit: max_attempts.min(2),
            max_attempts_per_unit: max_attempts,
            unit_participation: 1.0,
            mcq_rate: 0.15,
            planted_weights: None,
            seed,
        }
    }

    /// Enable the default planted ground-truth model.
    pub fn with_planted_defaults(mut self) -> Self {
        self.planted_weights = Some(default_planted_weights(&synthetic_layout()));
        self
    }

    fn validate(&self) -> Result<(), SyntheticConfigError> {
        if self.n_students == 0 || self.n_units == 0 || self.exercises_per_unit == 0 {
            return Err(SyntheticConfigError(
                "student, unit, and exercise counts must all be at least 1".into(),
            ));
        }
        if self.min_attempts_per_unit == 0 {
            return Err(SyntheticConfigError("min_attempts_per_unit must be at least 1".into()));
        }
        if self.min_attempts_per_unit > self.max_attempts_per_unit {
            return Err(SyntheticConfigError(format!(
                "min_attempts_per_unit {} exceeds max_attempts_per_unit {}",
                self.min_attempts_per_unit, self.max_attempts_per_unit
            )));
        }
        if self.max_attempts_per_unit > self.exercises_per_unit {
            return Err(SyntheticConfigError(format!(
                "max_attempts_per_unit {} exceeds exercises_per_unit {}",
                self.max_attempts_per_unit, self.exercises_per_unit
            )));
        }
        if !(0.0..=1.0).contains(&self.unit_participation) || self.unit_participation == 0.0 {
            return Err(SyntheticConfigError(format!(
                "unit_participation must be in (0, 1], got {}",
                self.unit_participation
            )));
        }
        if !(0.0..=1.0).contains(&self.mcq_rate) {
            return Err(SyntheticConfigError(format!(
                "mcq_rate must be in [0, 1], got {}",
                self.mcq_rate
            )));
        }
        if let Some(w) = &self.planted_weights {
            let expected = NUM_CLASSES * synthetic_layout().dimension();
            if w.len() != expected {
                return Err(SyntheticConfigError(format!(
                    "planted_weights has {} entries, expected {expected}",
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(SyntheticConfigError("planted_weights has non-finite entries".into()));
            }
        }
        Ok(())
    }
}

/// The feature layout every generated catalog induces.
pub fn synthetic_layout() -> FeatureLayout {
    FeatureLayout::new(
        SOLUTION_FORMS.iter().map(|s| s.to_string()),
        APPLICATION_CONTEXTS.iter().map(|s| s.to_string()),
    )
}

/// Ground-truth weights for the planted outcome model, row-major 5×d over
/// `layout`. The signal structure:
///
/// * difficulty (smoothed success rate, higher = easier) strongly raises
///   success logits;
/// * MCQ presentation shifts failure/skip mass toward instant success by
///   roughly enough that the 0.4 reward penalty cancels the gain, so a
///   reward-maximizing policy uses MCQs selectively rather than always;
/// * momentum: the previous outcome pulls the next one the same way;
/// * unit skip rate feeds further skips; the watched-video flag helps.
pub fn default_planted_weights(layout: &FeatureLayout) -> Vec<f64> {
    let d = layout.dimension();
    let mut weights = vec![0.0; NUM_CLASSES * d];
    // Class order: instant success, eventual success, eventual failure,
    // instant skip, eventual skip.
    let bias = [-1.95, -1.00, -0.05, 0.35, -0.27];
    let difficulty = [4.0, 0.6, -1.3, -2.0, -1.3];
    let is_mcq = [1.25, 0.0, -0.5, -0.5, -0.5];
    let watched = [0.6, 0.1, -0.1, -0.4, -0.25];
    let skip_rate = [-1.6, -0.6, 0.0, 2.2, 1.5];
    // prev_outcome[k] = per-class weights when the previous outcome was k.
    let prev_outcome = [
        [1.2, 0.3, -0.3, -0.8, -0.5],
        [0.8, 0.35, 0.0, -0.5, -0.3],
        [-0.7, 0.0, 0.9, 0.3, 0.3],
        [-1.0, -0.3, 0.0, 1.5, 0.5],
        [-0.7, -0.3, 0.3, 0.5, 1.25],
    ];

    let sf_len = layout.solution_form_vocab().len();
    let ac_len = layout.application_context_vocab().len();
    for class in 0..NUM_CLASSES {
        let row = &mut weights[class * d..(class + 1) * d];
        // Slot 0 is the "no previous attempt" flag and stays 0.
        for (prev, w) in prev_outcome.iter().enumerate() {
            row[1 + prev] = w[class];
        }
        row[layout.skip_rate_slot()] = skip_rate[class];
        row[layout.watched_video_slot()] = watched[class];
        row[layout.difficulty_slot()] = difficulty[class];
        // Mild categorical texture so the one-hot blocks carry some signal.
        for i in 0..sf_len {
            row[9 + i] = 0.15 * (((class + 2) * (i + 1)) as f64).sin();
        }
        for i in 0..ac_len {
            row[9 + sf_len + i] = 0.15 * (((class + 3) * (i + 5)) as f64).sin();
        }
        row[layout.is_mcq_slot()] = is_mcq[class];
        row[layout.bias_slot()] = bias[class];
    }
    weights
}

/// Generate a full dataset: catalog, units, and per-student attempt
/// histories. Deterministic given the config.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset, SyntheticConfigError> {
    cfg.validate()?;
    let layout = synthetic_layout();
    let d = layout.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut catalog = Vec::new();
    let mut units = Vec::new();
    let mut easiness: Vec<Vec<f64>> = Vec::new(); // latent, per unit per exercise
    for u in 0..cfg.n_units {
        let unit_id = format!("u{u:02}");
        let mut exercise_ids = Vec::new();
        let mut unit_easiness = Vec::new();
        for e in 0..cfg.exercises_per_unit {
            let exercise_id = format!("{unit_id}-e{e:02}");
            let solution_form = SOLUTION_FORMS[rng.random_range(0..SOLUTION_FORMS.len())];
            let application_context =
                APPLICATION_CONTEXTS[rng.random_range(0..APPLICATION_CONTEXTS.len())];
            // Latent ease ramps across the unit so the cohort spans a real
            // difficulty ladder; the empirical statistic converges to it.
            let span = (cfg.exercises_per_unit - 1).max(1) as f64;
            let base = 0.20 + 0.65 * (e as f64 / span);
            let ease = (base + rng.random_range(-0.05..0.05)).clamp(0.05, 0.95);
            unit_easiness.push(ease);
            catalog.push(Exercise {
                exercise_id: exercise_id.clone(),
                unit_id: unit_id.clone(),
                solution_form: solution_form.to_string(),
                application_context: application_context.to_string(),
            });
            exercise_ids.push(exercise_id);
        }
        units.push(LearningUnit {
            unit_id,
            exercise_ids,
            has_video: rng.random_bool(0.8),
        });
        easiness.push(unit_easiness);
    }

    let prior = OutcomeDistribution::new(UNPLANTED_PRIOR).expect("prior sums to 1");
    let mut attempts = Vec::new();
    for s in 0..cfg.n_students {
        let student_id = format!("s{s:04}");
        let mut seq = 0u64;
        for (u, unit) in units.iter().enumerate() {
            if !rng.random_bool(cfg.unit_participation) {
                continue;
            }
            let watched_video = rng.random_bool(0.5);
            let n_attempts =
                rng.random_range(cfg.min_attempts_per_unit..=cfg.max_attempts_per_unit);
            let mut order: Vec<usize> = (0..unit.exercise_ids.len()).collect();
            order.shuffle(&mut rng);
            order.truncate(n_attempts);

            let mut state = StudentUnitState::new(&student_id, &unit.unit_id, watched_video);
            for e in order {
                let exercise_id = &unit.exercise_ids[e];
                let exercise = &catalog[u * cfg.exercises_per_unit + e];
                debug_assert_eq!(&exercise.exercise_id, exercise_id);
                let format = if rng.random_bool(cfg.mcq_rate) {
                    ExerciseFormat::Mcq
                } else {
                    ExerciseFormat::FreeForm
                };
                let outcome = match &cfg.planted_weights {
                    Some(weights) => {
                        let context =
                            build_context(&state, exercise, format, easiness[u][e], &layout)
                                .expect("generated labels are always in the layout");
                        OutcomeDistribution::from_logits(class_logits(
                            weights,
                            d,
                            context.values(),
                        ))
                        .sample(&mut rng)
                    }
                    None => prior.sample(&mut rng),
                };
                seq += 1;
                attempts.push(AttemptRecord {
                    student_id: student_id.clone(),
                    exercise_id: exercise_id.clone(),
                    unit_id: unit.unit_id.clone(),
                    seq,
                    format,
                    outcome,
                    watched_video,
                });
                state.record(outcome);
            }
        }
    }

    Ok(Dataset::from_parts(attempts, catalog, units)
        .expect("generated dataset satisfies its own invariants"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Outcome;

    #[test]
    fn generation_is_deterministic() {
        let cfg = SyntheticConfig::new(10, 2, 5, 7).with_planted_defaults();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_synthetic(&SyntheticConfig::new(10, 2, 5, 7)).unwrap();
        let b = generate_synthetic(&SyntheticConfig::new(10, 2, 5, 8)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn minimal_config_is_valid() {
        let mut cfg = SyntheticConfig::new(1, 1, 1, 0);
        cfg.min_attempts_per_unit = 1;
        cfg.max_attempts_per_unit = 1;
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.attempts().len(), 1);
    }

    #[test]
    fn zero_students_rejected() {
        assert!(generate_synthetic(&SyntheticConfig::new(0, 1, 1, 0)).is_err());
    }

    #[test]
    fn attempt_bounds_exceeding_unit_size_rejected() {
        let mut cfg = SyntheticConfig::new(5, 1, 2, 0);
        cfg.max_attempts_per_unit = 3;
        assert!(generate_synthetic(&cfg).is_err());
    }

    #[test]
    fn watched_video_correlates_with_success_under_planted_model() {
        let cfg = SyntheticConfig::new(300, 2, 8, 42).with_planted_defaults();
        let ds = generate_synthetic(&cfg).unwrap();
        // Point-biserial correlation between the watched flag and success.
        let n = ds.attempts().len() as f64;
        let watched: Vec<f64> = ds
            .attempts()
            .iter()
            .map(|a| if a.watched_video { 1.0 } else { 0.0 })
            .collect();
        let success: Vec<f64> = ds
            .attempts()
            .iter()
            .map(|a| if a.outcome.is_success() { 1.0 } else { 0.0 })
            .collect();
        let mean_w = watched.iter().sum::<f64>() / n;
        let mean_s = success.iter().sum::<f64>() / n;
        let cov = watched
            .iter()
            .zip(&success)
            .map(|(w, s)| (w - mean_w) * (s - mean_s))
            .sum::<f64>()
            / n;
        let var_w = watched.iter().map(|w| (w - mean_w).powi(2)).sum::<f64>() / n;
        let var_s = success.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / n;
        let corr = cov / (var_w * var_s).sqrt();
        assert!(corr > 0.05, "correlation {corr} too weak");
    }

    #[test]
    fn unplanted_outcomes_follow_the_prior_roughly() {
        let cfg = SyntheticConfig::new(400, 2, 8, 3);
        let ds = generate_synthetic(&cfg).unwrap();
        let n = ds.attempts().len() as f64;
        for outcome in Outcome::ALL {
            let freq = ds
                .attempts()
                .iter()
                .filter(|a| a.outcome == outcome)
                .count() as f64
                / n;
            let expected = UNPLANTED_PRIOR[outcome.index()];
            assert!(
                (freq - expected).abs() < 0.05,
                "{outcome:?}: {freq} vs {expected}"
            );
        }
    }
}
