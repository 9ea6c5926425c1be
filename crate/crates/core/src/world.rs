//! Outcome world model: a 5-class multinomial softmax regression trained on
//! masked attempt histories. Given a context it returns a probability vector
//! over the five outcomes; the simulator samples unattempted exercises from
//! a table of such predictions.
//!
//! Training is full-batch gradient descent from zero-initialized weights on
//! the L2-regularized mean cross-entropy, so results are deterministic and
//! independent of dataset row permutations (rows are consumed in the
//! dataset's canonical student/seq order). The hyperparameter seed drives
//! cross-validation fold assignment only.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::domain::{AttemptRecord, Exercise, ExerciseFormat, Outcome};
use crate::features::{
    build_context, exercise_difficulty, ContextVector, FeatureError, FeatureLayout,
    StudentUnitState,
};

pub const NUM_CLASSES: usize = Outcome::COUNT;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("context was built with a different feature layout")]
    LayoutMismatch,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("cross-validation needs at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("{students} students cannot fill {folds} folds")]
    TooFewStudents { students: usize, folds: usize },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Training settings. The seed only affects cross-validation fold shuffling;
/// the descent itself is deterministic from zero initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub l2: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            learning_rate: 0.5,
            epochs: 2000,
            seed: 0,
        }
    }
}

impl Hyperparams {
    fn validate(&self) -> Result<(), ModelError> {
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(ModelError::InvalidHyperparams(format!(
                "l2 must be finite and non-negative, got {}",
                self.l2
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(ModelError::InvalidHyperparams(format!(
                "learning_rate must be finite and positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(ModelError::InvalidHyperparams(
                "epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Probability vector over the five outcomes, indexed by [`Outcome::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    probabilities: [f64; NUM_CLASSES],
}

impl OutcomeDistribution {
    pub fn new(probabilities: [f64; NUM_CLASSES]) -> Result<Self, ModelError> {
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ModelError::InvalidDistribution(format!(
                "entries outside [0,1]: {probabilities:?}"
            )));
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { probabilities })
    }

    pub fn from_logits(logits: [f64; NUM_CLASSES]) -> Self {
        Self {
            probabilities: softmax(logits),
        }
    }

    pub fn probabilities(&self) -> &[f64; NUM_CLASSES] {
        &self.probabilities
    }

    pub fn probability(&self, outcome: Outcome) -> f64 {
        self.probabilities[outcome.index()]
    }

    /// Most probable outcome; ties resolve to the lowest class index.
    pub fn argmax(&self) -> Outcome {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate().skip(1) {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        Outcome::from_index(best).expect("index within class count")
    }

    /// Categorical draw; the last class absorbs any floating-point
    /// remainder so the draw is total.
    pub fn sample(&self, rng: &mut impl Rng) -> Outcome {
        let u: f64 = rng.random();
        let mut cumulative = 0.0;
        for outcome in Outcome::ALL {
            cumulative += self.probabilities[outcome.index()];
            if u < cumulative {
                return outcome;
            }
        }
        *Outcome::ALL.last().expect("non-empty class list")
    }
}

fn softmax(logits: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_CLASSES];
    let mut z = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        z += *o;
    }
    for o in &mut out {
        *o /= z;
    }
    out
}

/// One training example: a masked context and the outcome it led to.
#[derive(Debug, Clone)]
pub struct TrainingRow {
    pub context: ContextVector,
    pub label: Outcome,
}

/// Per-exercise (successes, attempts) counts over a reference population.
fn exercise_stats<'a>(
    attempts: impl IntoIterator<Item = &'a AttemptRecord>,
) -> BTreeMap<&'a str, (usize, usize)> {
    let mut stats: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for attempt in attempts {
        let entry = stats.entry(attempt.exercise_id.as_str()).or_insert((0, 0));
        if attempt.outcome.is_success() {
            entry.0 += 1;
        }
        entry.1 += 1;
    }
    stats
}

/// Build one masked training row per attempt: the context encodes the
/// student's history strictly before that attempt, and when `exclude_self`
/// is set the attempt is also removed from its own exercise's difficulty
/// statistic (use it whenever `target` is part of `stats_source`).
pub fn build_training_rows(
    target: &[AttemptRecord],
    stats_source: &[AttemptRecord],
    exclude_self: bool,
    catalog: &BTreeMap<String, Exercise>,
    layout: &FeatureLayout,
) -> Result<Vec<TrainingRow>, ModelError> {
    let stats = exercise_stats(stats_source);
    let mut states: BTreeMap<(String, String), StudentUnitState> = BTreeMap::new();
    let mut rows = Vec::with_capacity(target.len());
    for attempt in target {
        let exercise = catalog
            .get(&attempt.exercise_id)
            .unwrap_or_else(|| panic!("attempt references exercise {:?} missing from catalog", attempt.exercise_id));
        let (mut successes, mut count) = stats
            .get(attempt.exercise_id.as_str())
            .copied()
            .unwrap_or((0, 0));
        if exclude_self {
            count -= 1;
            if attempt.outcome.is_success() {
                successes -= 1;
            }
        }
        let difficulty = exercise_difficulty(successes, count);
        let state = states
            .entry((attempt.student_id.clone(), attempt.unit_id.clone()))
            .or_insert_with(|| {
                StudentUnitState::new(&attempt.student_id, &attempt.unit_id, attempt.watched_video)
            });
        // The flag is observable before the attempt resolves.
        state.watched_video = attempt.watched_video;
        let context = build_context(state, exercise, attempt.format, difficulty, layout)?;
        rows.push(TrainingRow {
            context,
            label: attempt.outcome,
        });
        state.record(attempt.outcome);
    }
    Ok(rows)
}

/// Regularized mean cross-entropy of `weights` (row-major 5×d) on `rows`.
pub fn loss(weights: &[f64], rows: &[TrainingRow], l2: f64) -> f64 {
    let n = rows.len();
    assert!(n > 0, "loss needs at least one row");
    let d = rows[0].context.len();
    assert_eq!(weights.len(), NUM_CLASSES * d);
    let mut total = 0.0;
    for row in rows {
        let logits = class_logits(weights, d, row.context.values());
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        total += log_z - logits[row.label.index()];
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * 0.5 * l2;
    total / n as f64 + penalty
}

/// Analytic gradient of [`loss`] with respect to every weight.
pub fn gradient(weights: &[f64], rows: &[TrainingRow], l2: f64) -> Vec<f64> {
    let n = rows.len();
    assert!(n > 0, "gradient needs at least one row");
    let d = rows[0].context.len();
    assert_eq!(weights.len(), NUM_CLASSES * d);
    let mut grad = vec![0.0; weights.len()];
    let inv_n = 1.0 / n as f64;
    for row in rows {
        let x = row.context.values();
        let probs = softmax(class_logits(weights, d, x));
        for class in 0..NUM_CLASSES {
            let residual = probs[class] - if class == row.label.index() { 1.0 } else { 0.0 };
            let coef = residual * inv_n;
            let row_slice = &mut grad[class * d..(class + 1) * d];
            for (g, xi) in row_slice.iter_mut().zip(x) {
                *g += coef * xi;
            }
        }
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    grad
}

/// Logits of every class for one context under row-major 5×d weights.
pub fn class_logits(weights: &[f64], d: usize, x: &[f64]) -> [f64; NUM_CLASSES] {
    debug_assert_eq!(x.len(), d);
    let mut logits = [0.0; NUM_CLASSES];
    for (class, logit) in logits.iter_mut().enumerate() {
        *logit = crate::linalg::dot(&weights[class * d..(class + 1) * d], x);
    }
    logits
}

/// Trained multinomial outcome predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    weights: Vec<f64>,
    layout: FeatureLayout,
    hyperparams: Hyperparams,
}

impl WorldModel {
    /// Rebuild a model from checkpointed parts.
    pub fn from_parts(
        weights: Vec<f64>,
        layout: FeatureLayout,
        hyperparams: Hyperparams,
    ) -> Result<Self, ModelError> {
        hyperparams.validate()?;
        if weights.len() != NUM_CLASSES * layout.dimension() {
            return Err(ModelError::InvalidHyperparams(format!(
                "weight matrix has {} entries, expected {}",
                weights.len(),
                NUM_CLASSES * layout.dimension()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::InvalidHyperparams(
                "weight matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            weights,
            layout,
            hyperparams,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    /// Softmax of weights · context.
    pub fn predict(&self, context: &ContextVector) -> Result<OutcomeDistribution, ModelError> {
        if context.layout_fingerprint() != self.layout.fingerprint()
            || context.len() != self.layout.dimension()
        {
            return Err(ModelError::LayoutMismatch);
        }
        let logits = class_logits(&self.weights, self.layout.dimension(), context.values());
        Ok(OutcomeDistribution::from_logits(logits))
    }
}

/// Full-batch gradient descent on pre-built rows. Returns the model and the
/// per-epoch loss trace (index 0 is the loss before the first step).
pub fn fit_rows(
    rows: &[TrainingRow],
    layout: &FeatureLayout,
    hyperparams: Hyperparams,
) -> Result<(WorldModel, Vec<f64>), ModelError> {
    hyperparams.validate()?;
    if rows.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let d = layout.dimension();
    let mut weights = vec![0.0; NUM_CLASSES * d];
    let mut trace = Vec::with_capacity(hyperparams.epochs + 1);
    trace.push(loss(&weights, rows, hyperparams.l2));
    for epoch in 0..hyperparams.epochs {
        let grad = gradient(&weights, rows, hyperparams.l2);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= hyperparams.learning_rate * g;
        }
        let current = loss(&weights, rows, hyperparams.l2);
        if !current.is_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        trace.push(current);
    }
    let model = WorldModel::from_parts(weights, layout.clone(), hyperparams)?;
    Ok((model, trace))
}

/// Train on every attempt of the dataset with masked histories and
/// leave-own-attempt-out difficulty statistics.
pub fn train(
    dataset: &Dataset,
    layout: &FeatureLayout,
    hyperparams: Hyperparams,
) -> Result<WorldModel, ModelError> {
    if dataset.attempts().is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let rows = build_training_rows(
        dataset.attempts(),
        dataset.attempts(),
        true,
        dataset.catalog(),
        layout,
    )?;
    fit_rows(&rows, layout, hyperparams).map(|(model, _)| model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_rows: usize,
    pub accuracy: f64,
    pub majority_baseline: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValidationReport {
    pub folds: usize,
    pub accuracy: f64,
    pub majority_baseline: f64,
    pub per_fold: Vec<FoldReport>,
}

/// Student-level k-fold cross-validation: folds partition students, never
/// attempts, so a held-out student's own history cannot leak into training.
/// Fold assignment is a seeded shuffle of the sorted student list.
pub fn cross_validate(
    dataset: &Dataset,
    layout: &FeatureLayout,
    hyperparams: Hyperparams,
    k: usize,
) -> Result<CrossValidationReport, ModelError> {
    if k < 2 {
        return Err(ModelError::InvalidFolds(k));
    }
    if dataset.attempts().is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut students: Vec<&str> = dataset.students();
    if students.len() < k {
        return Err(ModelError::TooFewStudents {
            students: students.len(),
            folds: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyperparams.seed);
    students.shuffle(&mut rng);
    let fold_of: BTreeMap<&str, usize> = students
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i % k))
        .collect();

    let mut per_fold = Vec::with_capacity(k);
    for fold in 0..k {
        let train_attempts: Vec<AttemptRecord> = dataset
            .attempts()
            .iter()
            .filter(|a| fold_of[a.student_id.as_str()] != fold)
            .cloned()
            .collect();
        let test_attempts: Vec<AttemptRecord> = dataset
            .attempts()
            .iter()
            .filter(|a| fold_of[a.student_id.as_str()] == fold)
            .cloned()
            .collect();
        if train_attempts.is_empty() || test_attempts.is_empty() {
            return Err(ModelError::TooFewStudents {
                students: students.len(),
                folds: k,
            });
        }
        let train_rows = build_training_rows(
            &train_attempts,
            &train_attempts,
            true,
            dataset.catalog(),
            layout,
        )?;
        let (model, _) = fit_rows(&train_rows, layout, hyperparams)?;
        // Held-out rows use training-fold difficulty statistics: the fold's
        // own outcomes stay invisible to its features.
        let test_rows = build_training_rows(
            &test_attempts,
            &train_attempts,
            false,
            dataset.catalog(),
            layout,
        )?;

        let mut class_counts = [0usize; NUM_CLASSES];
        for row in &train_rows {
            class_counts[row.label.index()] += 1;
        }
        let mut majority = 0;
        for (i, c) in class_counts.iter().enumerate().skip(1) {
            if *c > class_counts[majority] {
                majority = i;
            }
        }

        let mut correct = 0usize;
        let mut majority_hits = 0usize;
        for row in &test_rows {
            let predicted = model.predict(&row.context)?.argmax();
            if predicted == row.label {
                correct += 1;
            }
            if row.label.index() == majority {
                majority_hits += 1;
            }
        }
        per_fold.push(FoldReport {
            fold,
            test_rows: test_rows.len(),
            accuracy: correct as f64 / test_rows.len() as f64,
            majority_baseline: majority_hits as f64 / test_rows.len() as f64,
        });
    }

    let accuracy = per_fold.iter().map(|f| f.accuracy).sum::<f64>() / k as f64;
    let majority_baseline = per_fold.iter().map(|f| f.majority_baseline).sum::<f64>() / k as f64;
    Ok(CrossValidationReport {
        folds: k,
        accuracy,
        majority_baseline,
        per_fold,
    })
}

/// Predicted outcome distributions for (student, exercise, format) triples,
/// covering every unattempted exercise in every unit the student started.
#[derive(Debug, Clone, Default)]
pub struct PredictionTable {
    entries: BTreeMap<(String, String, ExerciseFormat), OutcomeDistribution>,
}

impl PredictionTable {
    pub fn get(
        &self,
        student_id: &str,
        exercise_id: &str,
        format: ExerciseFormat,
    ) -> Option<&OutcomeDistribution> {
        self.entries
            .get(&(student_id.to_string(), exercise_id.to_string(), format))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(
        &self,
    ) -> impl Iterator<Item = (&(String, String, ExerciseFormat), &OutcomeDistribution)> {
        self.entries.iter()
    }
}

/// Predict both formats of every (started unit, unattempted exercise) pair.
/// The prediction context freezes the student's observed end-of-log state in
/// that unit; difficulty uses full-dataset statistics.
pub fn predict_missing(
    model: &WorldModel,
    dataset: &Dataset,
) -> Result<PredictionTable, ModelError> {
    let difficulty = dataset.difficulty_map();
    let mut attempted: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut end_states: BTreeMap<(&str, &str), StudentUnitState> = BTreeMap::new();
    for attempt in dataset.attempts() {
        attempted
            .entry(attempt.student_id.as_str())
            .or_default()
            .insert(attempt.exercise_id.as_str());
        let state = end_states
            .entry((attempt.student_id.as_str(), attempt.unit_id.as_str()))
            .or_insert_with(|| {
                StudentUnitState::new(&attempt.student_id, &attempt.unit_id, false)
            });
        state.watched_video |= attempt.watched_video;
        state.record(attempt.outcome);
    }

    let mut entries = BTreeMap::new();
    for ((student_id, unit_id), state) in &end_states {
        let unit = &dataset.units()[*unit_id];
        for exercise_id in &unit.exercise_ids {
            if attempted[student_id].contains(exercise_id.as_str()) {
                continue;
            }
            let exercise = &dataset.catalog()[exercise_id];
            let diff = difficulty[exercise_id];
            for format in ExerciseFormat::ALL {
                let context = build_context(state, exercise, format, diff, model.layout())?;
                let distribution = model.predict(&context)?;
                entries.insert(
                    (student_id.to_string(), exercise_id.clone(), format),
                    distribution,
                );
            }
        }
    }
    Ok(PredictionTable { entries })
}
