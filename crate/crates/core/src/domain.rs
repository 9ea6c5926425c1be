//! Domain vocabulary shared by every other module: attempt outcomes,
//! exercise formats, catalog entries, attempt logs, and the reward function.

use serde::{Deserialize, Serialize};

/// The five possible results of one student/exercise interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Solved correctly on the first try.
    InstantSuccess,
    /// Solved correctly after multiple tries.
    EventualSuccess,
    /// Attempted unsuccessfully until the solution was shown.
    EventualFailure,
    /// Skipped without any attempt.
    InstantSkip,
    /// Attempted but eventually skipped.
    EventualSkip,
}

impl Outcome {
    pub const COUNT: usize = 5;

    /// Canonical ordering used for class indices and probability vectors.
    pub const ALL: [Outcome; Outcome::COUNT] = [
        Outcome::InstantSuccess,
        Outcome::EventualSuccess,
        Outcome::EventualFailure,
        Outcome::InstantSkip,
        Outcome::EventualSkip,
    ];

    pub fn index(self) -> usize {
        match self {
            Outcome::InstantSuccess => 0,
            Outcome::EventualSuccess => 1,
            Outcome::EventualFailure => 2,
            Outcome::InstantSkip => 3,
            Outcome::EventualSkip => 4,
        }
    }

    pub fn from_index(index: usize) -> Option<Outcome> {
        Outcome::ALL.get(index).copied()
    }

    /// True for instant and eventual success; the numerator of every
    /// success-rate metric in this crate.
    pub fn is_success(self) -> bool {
        matches!(self, Outcome::InstantSuccess | Outcome::EventualSuccess)
    }

    /// True for both skip variants.
    pub fn is_skip(self) -> bool {
        matches!(self, Outcome::InstantSkip | Outcome::EventualSkip)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::InstantSuccess => "instant_success",
            Outcome::EventualSuccess => "eventual_success",
            Outcome::EventualFailure => "eventual_failure",
            Outcome::InstantSkip => "instant_skip",
            Outcome::EventualSkip => "eventual_skip",
        }
    }
}

/// How an exercise is presented to the student.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExerciseFormat {
    /// Free-form text answer.
    FreeForm,
    /// Multiple-choice question.
    Mcq,
}

impl ExerciseFormat {
    pub const ALL: [ExerciseFormat; 2] = [ExerciseFormat::FreeForm, ExerciseFormat::Mcq];

    pub fn as_str(self) -> &'static str {
        match self {
            ExerciseFormat::FreeForm => "free_form",
            ExerciseFormat::Mcq => "mcq",
        }
    }
}

/// One catalog entry. `solution_form` and `application_context` are the
/// categorical labels one-hot encoded into context vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exercise {
    pub exercise_id: String,
    pub unit_id: String,
    pub solution_form: String,
    pub application_context: String,
}

/// A continuous topic grouping exercises; the candidate pool for sequencing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningUnit {
    pub unit_id: String,
    pub exercise_ids: Vec<String>,
    pub has_video: bool,
}

/// One row of the attempt log. `seq` orders a student's attempts; it must be
/// strictly increasing per student. `watched_video` records whether the
/// student had watched the unit video at attempt time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub student_id: String,
    pub exercise_id: String,
    pub unit_id: String,
    pub seq: u64,
    pub format: ExerciseFormat,
    pub outcome: Outcome,
    pub watched_video: bool,
}

/// Per-outcome base rewards plus the penalty subtracted when the chosen
/// format is MCQ. Defaults: 1.5 / 1.0 / 0.5 / 0.0 with a 0.4 MCQ penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub reward_instant_success: f64,
    pub reward_eventual_success: f64,
    pub reward_eventual_failure: f64,
    pub reward_skip: f64,
    pub mcq_penalty: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            reward_instant_success: 1.5,
            reward_eventual_success: 1.0,
            reward_eventual_failure: 0.5,
            reward_skip: 0.0,
            mcq_penalty: 0.4,
        }
    }
}

impl RewardConfig {
    pub fn is_finite(&self) -> bool {
        self.reward_instant_success.is_finite()
            && self.reward_eventual_success.is_finite()
            && self.reward_eventual_failure.is_finite()
            && self.reward_skip.is_finite()
            && self.mcq_penalty.is_finite()
    }

    /// Reward observed by the learner for `outcome` under the chosen
    /// `format`. MCQ answers are penalized by `mcq_penalty`; the result may
    /// go negative (no clamping).
    pub fn reward(&self, outcome: Outcome, format: ExerciseFormat) -> f64 {
        let base = match outcome {
            Outcome::InstantSuccess => self.reward_instant_success,
            Outcome::EventualSuccess => self.reward_eventual_success,
            Outcome::EventualFailure => self.reward_eventual_failure,
            Outcome::InstantSkip | Outcome::EventualSkip => self.reward_skip,
        };
        match format {
            ExerciseFormat::FreeForm => base,
            ExerciseFormat::Mcq => base - self.mcq_penalty,
        }
    }
}
