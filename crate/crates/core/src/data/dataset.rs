//! Validated in-memory dataset: attempt log plus exercise catalog plus unit
//! definitions. Immutable once constructed; attempts are held in canonical
//! (student_id, seq) order so downstream computations are independent of
//! input row permutations.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::domain::{AttemptRecord, Exercise, LearningUnit};
use crate::features::exercise_difficulty;

/// Validation failures. `index` fields refer to positions in the input
/// vectors handed to [`Dataset::from_parts`], letting file loaders map them
/// back to line numbers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("duplicate exercise_id {exercise_id:?} in catalog")]
    DuplicateExercise { index: usize, exercise_id: String },
    #[error("duplicate unit_id {unit_id:?} in units")]
    DuplicateUnit { index: usize, unit_id: String },
    #[error("unit {unit_id:?} has an empty exercise list")]
    EmptyUnit { index: usize, unit_id: String },
    #[error("unit {unit_id:?} lists exercise {exercise_id:?} twice")]
    DuplicateExerciseInUnit {
        index: usize,
        unit_id: String,
        exercise_id: String,
    },
    #[error("unit {unit_id:?} lists unknown exercise {exercise_id:?}")]
    UnknownExerciseInUnit {
        index: usize,
        unit_id: String,
        exercise_id: String,
    },
    #[error("unit {unit_id:?} lists exercise {exercise_id:?} which belongs to unit {actual_unit:?}")]
    ForeignExerciseInUnit {
        index: usize,
        unit_id: String,
        exercise_id: String,
        actual_unit: String,
    },
    #[error("exercise {exercise_id:?} references unknown unit {unit_id:?}")]
    UnknownUnitForExercise {
        index: usize,
        exercise_id: String,
        unit_id: String,
    },
    #[error("attempt references unknown exercise {exercise_id:?}")]
    UnknownExercise { index: usize, exercise_id: String },
    #[error("attempt references unknown unit {unit_id:?}")]
    UnknownUnit { index: usize, unit_id: String },
    #[error("attempt on exercise {exercise_id:?} names unit {attempt_unit:?} but the catalog places it in {catalog_unit:?}")]
    UnitMismatch {
        index: usize,
        exercise_id: String,
        attempt_unit: String,
        catalog_unit: String,
    },
    #[error("student {student_id:?} attempts exercise {exercise_id:?} more than once")]
    DuplicateAttempt {
        index: usize,
        student_id: String,
        exercise_id: String,
    },
    #[error("student {student_id:?} repeats seq {seq}")]
    DuplicateSeq {
        index: usize,
        student_id: String,
        seq: u64,
    },
}

impl DatasetError {
    /// Position in the offending input vector, for line-number attribution.
    pub fn input_index(&self) -> usize {
        match self {
            DatasetError::DuplicateExercise { index, .. }
            | DatasetError::DuplicateUnit { index, .. }
            | DatasetError::EmptyUnit { index, .. }
            | DatasetError::DuplicateExerciseInUnit { index, .. }
            | DatasetError::UnknownExerciseInUnit { index, .. }
            | DatasetError::ForeignExerciseInUnit { index, .. }
            | DatasetError::UnknownUnitForExercise { index, .. }
            | DatasetError::UnknownExercise { index, .. }
            | DatasetError::UnknownUnit { index, .. }
            | DatasetError::UnitMismatch { index, .. }
            | DatasetError::DuplicateAttempt { index, .. }
            | DatasetError::DuplicateSeq { index, .. } => *index,
        }
    }

    /// Which of the three inputs the index refers to.
    pub fn input_kind(&self) -> DatasetInput {
        match self {
            DatasetError::DuplicateExercise { .. }
            | DatasetError::UnknownUnitForExercise { .. } => DatasetInput::Catalog,
            DatasetError::DuplicateUnit { .. }
            | DatasetError::EmptyUnit { .. }
            | DatasetError::DuplicateExerciseInUnit { .. }
            | DatasetError::UnknownExerciseInUnit { .. }
            | DatasetError::ForeignExerciseInUnit { .. } => DatasetInput::Units,
            _ => DatasetInput::Attempts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetInput {
    Attempts,
    Catalog,
    Units,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    attempts: Vec<AttemptRecord>,
    catalog: BTreeMap<String, Exercise>,
    units: BTreeMap<String, LearningUnit>,
}

impl Dataset {
    /// Validate and canonicalize. Attempts are checked for referential
    /// integrity, per-student seq uniqueness (seq defines each student's
    /// timeline, so input row order is free), and (student, exercise)
    /// uniqueness, then sorted by (student_id, seq).
    pub fn from_parts(
        attempts: Vec<AttemptRecord>,
        catalog: Vec<Exercise>,
        units: Vec<LearningUnit>,
    ) -> Result<Self, DatasetError> {
        let mut unit_map: BTreeMap<String, LearningUnit> = BTreeMap::new();
        for (index, unit) in units.into_iter().enumerate() {
            if unit.exercise_ids.is_empty() {
                return Err(DatasetError::EmptyUnit {
                    index,
                    unit_id: unit.unit_id,
                });
            }
            let mut seen = BTreeSet::new();
            for exercise_id in &unit.exercise_ids {
                if !seen.insert(exercise_id.clone()) {
                    return Err(DatasetError::DuplicateExerciseInUnit {
                        index,
                        unit_id: unit.unit_id,
                        exercise_id: exercise_id.clone(),
                    });
                }
            }
            if unit_map.insert(unit.unit_id.clone(), unit.clone()).is_some() {
                return Err(DatasetError::DuplicateUnit {
                    index,
                    unit_id: unit.unit_id,
                });
            }
        }

        let mut catalog_map: BTreeMap<String, Exercise> = BTreeMap::new();
        for (index, exercise) in catalog.into_iter().enumerate() {
            if !unit_map.contains_key(&exercise.unit_id) {
                return Err(DatasetError::UnknownUnitForExercise {
                    index,
                    exercise_id: exercise.exercise_id,
                    unit_id: exercise.unit_id,
                });
            }
            if catalog_map
                .insert(exercise.exercise_id.clone(), exercise.clone())
                .is_some()
            {
                return Err(DatasetError::DuplicateExercise {
                    index,
                    exercise_id: exercise.exercise_id,
                });
            }
        }

        for (index, unit) in unit_map.values().enumerate() {
            for exercise_id in &unit.exercise_ids {
                match catalog_map.get(exercise_id) {
                    None => {
                        return Err(DatasetError::UnknownExerciseInUnit {
                            index,
                            unit_id: unit.unit_id.clone(),
                            exercise_id: exercise_id.clone(),
                        })
                    }
                    Some(exercise) if exercise.unit_id != unit.unit_id => {
                        return Err(DatasetError::ForeignExerciseInUnit {
                            index,
                            unit_id: unit.unit_id.clone(),
                            exercise_id: exercise_id.clone(),
                            actual_unit: exercise.unit_id.clone(),
                        })
                    }
                    _ => {}
                }
            }
        }

        let mut seen_seqs: BTreeSet<(&str, u64)> = BTreeSet::new();
        let mut seen_pairs: BTreeSet<(&str, &str)> = BTreeSet::new();
        for (index, attempt) in attempts.iter().enumerate() {
            let exercise = catalog_map.get(&attempt.exercise_id).ok_or_else(|| {
                DatasetError::UnknownExercise {
                    index,
                    exercise_id: attempt.exercise_id.clone(),
                }
            })?;
            if !unit_map.contains_key(&attempt.unit_id) {
                return Err(DatasetError::UnknownUnit {
                    index,
                    unit_id: attempt.unit_id.clone(),
                });
            }
            if exercise.unit_id != attempt.unit_id {
                return Err(DatasetError::UnitMismatch {
                    index,
                    exercise_id: attempt.exercise_id.clone(),
                    attempt_unit: attempt.unit_id.clone(),
                    catalog_unit: exercise.unit_id.clone(),
                });
            }
            if !seen_pairs.insert((&attempt.student_id, &attempt.exercise_id)) {
                return Err(DatasetError::DuplicateAttempt {
                    index,
                    student_id: attempt.student_id.clone(),
                    exercise_id: attempt.exercise_id.clone(),
                });
            }
            if !seen_seqs.insert((&attempt.student_id, attempt.seq)) {
                return Err(DatasetError::DuplicateSeq {
                    index,
                    student_id: attempt.student_id.clone(),
                    seq: attempt.seq,
                });
            }
        }

        let mut attempts = attempts;
        attempts.sort_by(|a, b| (&a.student_id, a.seq).cmp(&(&b.student_id, b.seq)));
        Ok(Self {
            attempts,
            catalog: catalog_map,
            units: unit_map,
        })
    }

    pub fn attempts(&self) -> &[AttemptRecord] {
        &self.attempts
    }

    pub fn catalog(&self) -> &BTreeMap<String, Exercise> {
        &self.catalog
    }

    pub fn units(&self) -> &BTreeMap<String, LearningUnit> {
        &self.units
    }

    /// Sorted unique student ids.
    pub fn students(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self
            .attempts
            .iter()
            .map(|a| a.student_id.as_str())
            .collect();
        set.into_iter().collect()
    }

    /// Units each student has started (≥ 1 observed attempt), sorted.
    pub fn started_units(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut map: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for attempt in &self.attempts {
            map.entry(attempt.student_id.as_str())
                .or_default()
                .insert(attempt.unit_id.as_str());
        }
        map
    }

    /// Smoothed historic success rate for every catalog exercise; exercises
    /// nobody attempted sit on the 0.5 prior.
    pub fn difficulty_map(&self) -> BTreeMap<String, f64> {
        let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for attempt in &self.attempts {
            let entry = counts.entry(attempt.exercise_id.as_str()).or_insert((0, 0));
            if attempt.outcome.is_success() {
                entry.0 += 1;
            }
            entry.1 += 1;
        }
        self.catalog
            .keys()
            .map(|id| {
                let (successes, attempts) = counts.get(id.as_str()).copied().unwrap_or((0, 0));
                (id.clone(), exercise_difficulty(successes, attempts))
            })
            .collect()
    }
}
