//! Joint (student, action) context vectors. The same encoding feeds the
//! outcome world model and the bandit, so both see identical feature space.
//!
//! Vector layout, in order:
//!
//! ```text
//! [0..6)           previous-outcome one-hot (slot 0 = no attempt yet)
//! [6]              skip rate within the unit
//! [7]              watched the unit video (0/1)
//! [8]              exercise difficulty (smoothed historic success rate)
//! [9..9+S)         solution-form one-hot
//! [9+S..9+S+C)     application-context one-hot
//! [9+S+C]          is_mcq (0/1)
//! [9+S+C+1]        bias (always 1)
//! ```
//!
//! where S and C are the vocabulary sizes. Every entry is a rate, flag, or
//! one-hot cell, so the max-norm of a valid vector is 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Exercise, ExerciseFormat, Outcome};

/// Slots before the solution-form block: 6 for the previous-outcome one-hot,
/// then skip rate, watched-video, difficulty.
const FIXED_PREFIX: usize = 9;
/// Slots after the categorical blocks: is_mcq and bias.
const FIXED_SUFFIX: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("unknown solution_form label {0:?}")]
    UnknownSolutionForm(String),
    #[error("unknown application_context label {0:?}")]
    UnknownApplicationContext(String),
}

/// Categorical vocabularies plus derived offsets. Vocabularies are sorted
/// and deduplicated at construction so the same catalog always yields the
/// same layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    solution_form_vocab: Vec<String>,
    application_context_vocab: Vec<String>,
}

impl FeatureLayout {
    pub fn new(
        solution_forms: impl IntoIterator<Item = String>,
        application_contexts: impl IntoIterator<Item = String>,
    ) -> Self {
        let mut sf: Vec<String> = solution_forms.into_iter().collect();
        sf.sort();
        sf.dedup();
        let mut ac: Vec<String> = application_contexts.into_iter().collect();
        ac.sort();
        ac.dedup();
        Self {
            solution_form_vocab: sf,
            application_context_vocab: ac,
        }
    }

    pub fn from_catalog<'a>(exercises: impl IntoIterator<Item = &'a Exercise>) -> Self {
        let mut sf = Vec::new();
        let mut ac = Vec::new();
        for ex in exercises {
            sf.push(ex.solution_form.clone());
            ac.push(ex.application_context.clone());
        }
        Self::new(sf, ac)
    }

    pub fn solution_form_vocab(&self) -> &[String] {
        &self.solution_form_vocab
    }

    pub fn application_context_vocab(&self) -> &[String] {
        &self.application_context_vocab
    }

    pub fn dimension(&self) -> usize {
        FIXED_PREFIX + self.solution_form_vocab.len() + self.application_context_vocab.len()
            + FIXED_SUFFIX
    }

    pub fn skip_rate_slot(&self) -> usize {
        6
    }

    pub fn watched_video_slot(&self) -> usize {
        7
    }

    pub fn difficulty_slot(&self) -> usize {
        8
    }

    pub fn is_mcq_slot(&self) -> usize {
        self.dimension() - 2
    }

    pub fn bias_slot(&self) -> usize {
        self.dimension() - 1
    }

    /// Stable identity for checkpoint compatibility checks: a small FNV-1a
    /// hash over both vocabularies.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(b"solution_form");
        for label in &self.solution_form_vocab {
            eat(label.as_bytes());
            eat(&[0]);
        }
        eat(b"application_context");
        for label in &self.application_context_vocab {
            eat(label.as_bytes());
            eat(&[0]);
        }
        hash
    }

    fn solution_form_index(&self, label: &str) -> Option<usize> {
        self.solution_form_vocab
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
    }

    fn application_context_index(&self, label: &str) -> Option<usize> {
        self.application_context_vocab
            .binary_search_by(|probe| probe.as_str().cmp(label))
            .ok()
    }
}

/// A student's evolving state within one learning unit: the ordered outcome
/// history plus the watched-video flag. Counts are derived from the history
/// so the invariants (skip_count ≤ attempt_count, last_outcome absent iff
/// empty) hold by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentUnitState {
    pub student_id: String,
    pub unit_id: String,
    outcomes: Vec<Outcome>,
    pub watched_video: bool,
}

impl StudentUnitState {
    pub fn new(student_id: impl Into<String>, unit_id: impl Into<String>, watched_video: bool) -> Self {
        Self {
            student_id: student_id.into(),
            unit_id: unit_id.into(),
            outcomes: Vec::new(),
            watched_video,
        }
    }

    pub fn record(&mut self, outcome: Outcome) {
        self.outcomes.push(outcome);
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn attempt_count(&self) -> usize {
        self.outcomes.len()
    }

    pub fn skip_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_skip()).count()
    }

    pub fn last_outcome(&self) -> Option<Outcome> {
        self.outcomes.last().copied()
    }

    /// Fraction of unit attempts the student skipped; 0.0 before the first
    /// attempt (optimistic cold start).
    pub fn skip_rate(&self) -> f64 {
        if self.outcomes.is_empty() {
            0.0
        } else {
            self.skip_count() as f64 / self.outcomes.len() as f64
        }
    }
}

/// Laplace-smoothed historic success rate: (successes + 1) / (attempts + 2).
/// Unseen exercises land on the 0.5 prior. Higher values mean easier.
pub fn exercise_difficulty(successes: usize, attempts: usize) -> f64 {
    (successes as f64 + 1.0) / (attempts as f64 + 2.0)
}

/// A finished feature vector tagged with the fingerprint of the layout that
/// produced it, so consumers can reject vectors from a different encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    values: Vec<f64>,
    layout_fingerprint: u64,
}

impl ContextVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout_fingerprint(&self) -> u64 {
        self.layout_fingerprint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Encode one (student state, candidate action) pair. `difficulty` is the
/// smoothed historic success rate of the exercise; the caller decides which
/// attempt population that statistic is drawn from.
pub fn build_context(
    state: &StudentUnitState,
    exercise: &Exercise,
    format: ExerciseFormat,
    difficulty: f64,
    layout: &FeatureLayout,
) -> Result<ContextVector, FeatureError> {
    let sf_index = layout
        .solution_form_index(&exercise.solution_form)
        .ok_or_else(|| FeatureError::UnknownSolutionForm(exercise.solution_form.clone()))?;
    let ac_index = layout
        .application_context_index(&exercise.application_context)
        .ok_or_else(|| {
            FeatureError::UnknownApplicationContext(exercise.application_context.clone())
        })?;

    let mut values = vec![0.0; layout.dimension()];
    match state.last_outcome() {
        None => values[0] = 1.0,
        Some(outcome) => values[1 + outcome.index()] = 1.0,
    }
    values[layout.skip_rate_slot()] = state.skip_rate();
    values[layout.watched_video_slot()] = if state.watched_video { 1.0 } else { 0.0 };
    values[layout.difficulty_slot()] = difficulty;
    values[FIXED_PREFIX + sf_index] = 1.0;
    values[FIXED_PREFIX + layout.solution_form_vocab.len() + ac_index] = 1.0;
    values[layout.is_mcq_slot()] = match format {
        ExerciseFormat::FreeForm => 0.0,
        ExerciseFormat::Mcq => 1.0,
    };
    values[layout.bias_slot()] = 1.0;

    Ok(ContextVector {
        values,
        layout_fingerprint: layout.fingerprint(),
    })
}
