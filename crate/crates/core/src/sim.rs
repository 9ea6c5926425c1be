//! Cohort simulator: runs every student through each unit they started,
//! letting a policy pick the next exercise until the unit's candidates are
//! exhausted. Observed (student, exercise) pairs replay their logged
//! outcome; unobserved pairs sample from the world model's predicted
//! distribution at the step-time context, so the simulated student state
//! (momentum, skip rate) feeds back into outcomes. Everything is driven by
//! counter-derived RNG streams, so a report is a pure function of
//! (dataset, model, config).

use std::collections::{BTreeMap, BTreeSet};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{BanditError, LinUcb};
use crate::data::Dataset;
use crate::domain::{Exercise, ExerciseFormat, LearningUnit, Outcome, RewardConfig};
use crate::features::{build_context, ContextVector, FeatureLayout, StudentUnitState};
use crate::policies::{
    ActionChoice, HeuristicPolicy, LinUcbPolicy, Policy, PolicyError, PolicyId, RandomPolicy,
};
use crate::stream::StepStreams;
use crate::world::{ModelError, WorldModel};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no prediction for student {student_id:?}, exercise {exercise_id:?}, format {format:?}; train a world model or provide a fully observed cohort")]
    MissingPrediction {
        student_id: String,
        exercise_id: String,
        format: ExerciseFormat,
    },
    #[error("policy returned exercise {exercise_id:?} outside the candidate set")]
    ForeignAction { exercise_id: String },
    #[error("dataset has no started (student, unit) pairs to simulate")]
    EmptyCohort,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How one simulated step was resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedOutcome {
    pub outcome: Outcome,
    /// True when the logged outcome was replayed rather than sampled.
    pub replayed: bool,
    /// True when a replayed step's chosen format differs from the logged
    /// one; kept on the trajectory for audit.
    pub format_mismatch: bool,
}

/// Resolves outcomes: logged attempts replay their outcome, everything else
/// samples from the world model's prediction for the step-time context.
pub struct OutcomeSource<'a> {
    observed: BTreeMap<(&'a str, &'a str), (ExerciseFormat, Outcome)>,
    model: Option<&'a WorldModel>,
}

impl<'a> OutcomeSource<'a> {
    pub fn new(dataset: &'a Dataset, model: Option<&'a WorldModel>) -> Self {
        let observed = dataset
            .attempts()
            .iter()
            .map(|a| {
                (
                    (a.student_id.as_str(), a.exercise_id.as_str()),
                    (a.format, a.outcome),
                )
            })
            .collect();
        Self { observed, model }
    }

    /// `context` must encode the same (student state, exercise, format) the
    /// lookup names; it selects the sampled distribution for unobserved
    /// pairs and is ignored on replay.
    pub fn resolve(
        &self,
        student_id: &str,
        exercise_id: &str,
        format: ExerciseFormat,
        context: &ContextVector,
        rng: &mut ChaCha8Rng,
    ) -> Result<ResolvedOutcome, SimError> {
        if let Some((logged_format, outcome)) = self.observed.get(&(student_id, exercise_id)) {
            return Ok(ResolvedOutcome {
                outcome: *outcome,
                replayed: true,
                format_mismatch: *logged_format != format,
            });
        }
        let model = self.model.ok_or_else(|| SimError::MissingPrediction {
            student_id: student_id.to_string(),
            exercise_id: exercise_id.to_string(),
            format,
        })?;
        let distribution = model.predict(context)?;
        Ok(ResolvedOutcome {
            outcome: distribution.sample(rng),
            replayed: false,
            format_mismatch: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub choice: ActionChoice,
    pub outcome: Outcome,
    pub reward: f64,
    pub replayed: bool,
    pub format_mismatch: bool,
}

/// One student's pass through one unit: every unit exercise exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub student_id: String,
    pub unit_id: String,
    pub steps: Vec<TrajectoryStep>,
}

/// Run one episode: the policy picks from the unresolved exercises, the
/// outcome is resolved (replayed or sampled at the step-time context) and
/// rewarded, the policy observes, and the student state advances, until no
/// candidates remain.
#[allow(clippy::too_many_arguments)]
pub fn simulate_unit(
    policy: &mut dyn Policy,
    student_id: &str,
    unit: &LearningUnit,
    catalog: &BTreeMap<String, Exercise>,
    difficulty: &BTreeMap<String, f64>,
    layout: &FeatureLayout,
    watched_video: bool,
    source: &OutcomeSource<'_>,
    reward_cfg: &RewardConfig,
    streams: &mut StepStreams,
) -> Result<Trajectory, SimError> {
    let mut remaining: Vec<&Exercise> = unit
        .exercise_ids
        .iter()
        .map(|id| &catalog[id])
        .collect();
    let mut state = StudentUnitState::new(student_id, &unit.unit_id, watched_video);
    let mut steps = Vec::with_capacity(remaining.len());

    while !remaining.is_empty() {
        let mut rng = streams.next_step();
        let choice = policy.next_action(&state, &remaining, difficulty, &mut rng)?;
        let position = remaining
            .iter()
            .position(|e| e.exercise_id == choice.exercise_id)
            .ok_or_else(|| SimError::ForeignAction {
                exercise_id: choice.exercise_id.clone(),
            })?;
        let exercise = remaining.remove(position);
        let rate = difficulty
            .get(&exercise.exercise_id)
            .copied()
            .ok_or_else(|| PolicyError::MissingDifficulty(exercise.exercise_id.clone()))?;
        let context = build_context(&state, exercise, choice.format, rate, layout)
            .map_err(PolicyError::Feature)?;
        let resolved = source.resolve(
            student_id,
            &choice.exercise_id,
            choice.format,
            &context,
            &mut rng,
        )?;
        let reward = reward_cfg.reward(resolved.outcome, choice.format);
        policy.observe(&choice, resolved.outcome, reward);
        state.record(resolved.outcome);
        steps.push(TrajectoryStep {
            choice,
            outcome: resolved.outcome,
            reward,
            replayed: resolved.replayed,
            format_mismatch: resolved.format_mismatch,
        });
    }

    Ok(Trajectory {
        student_id: student_id.to_string(),
        unit_id: unit.unit_id.clone(),
        steps,
    })
}

/// Outcome frequencies over all steps of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub success_rate: f64,
    pub skip_rate: f64,
    pub fail_rate: f64,
    pub mcq_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub policy: String,
    pub runs: u32,
    pub per_run: Vec<RunMetrics>,
    pub mean: RunMetrics,
    /// Max absolute deviation of any run from the mean, per metric.
    pub max_deviation: RunMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub policy: PolicyId,
    pub runs: u32,
    pub master_seed: u64,
    pub alpha: f64,
    pub lambda: f64,
    pub reward_cfg: RewardConfig,
}

impl SimConfig {
    pub fn new(policy: PolicyId, master_seed: u64) -> Self {
        Self {
            policy,
            runs: 20,
            master_seed,
            alpha: 1.0,
            lambda: 1.0,
            reward_cfg: RewardConfig::default(),
        }
    }
}

fn fresh_policy(cfg: &SimConfig, layout: &FeatureLayout) -> Result<Box<dyn Policy>, SimError> {
    Ok(match cfg.policy {
        PolicyId::Random => Box::new(RandomPolicy),
        PolicyId::Heuristic => Box::new(HeuristicPolicy::new()),
        PolicyId::LinUcb => {
            let bandit = LinUcb::new(layout.dimension(), cfg.alpha, cfg.lambda)?;
            Box::new(LinUcbPolicy::new(bandit, layout.clone()))
        }
    })
}

/// Simulate the whole cohort `cfg.runs` times. Each run derives its RNG
/// streams from (master_seed, run, student, step); the LinUCB policy starts
/// each run fresh and learns online across the run's episodes. Students are
/// visited in ascending id order, each student's started units in ascending
/// unit order.
pub fn run_cohort(
    dataset: &Dataset,
    model: Option<&WorldModel>,
    cfg: &SimConfig,
) -> Result<CohortReport, SimError> {
    if cfg.runs == 0 {
        return Err(SimError::InvalidConfig("runs must be at least 1".into()));
    }
    if !cfg.reward_cfg.is_finite() {
        return Err(SimError::InvalidConfig("reward config has non-finite entries".into()));
    }
    let started = dataset.started_units();
    if started.is_empty() {
        return Err(SimError::EmptyCohort);
    }

    let layout = match model {
        Some(m) => m.layout().clone(),
        None => FeatureLayout::from_catalog(dataset.catalog().values()),
    };
    let source = OutcomeSource::new(dataset, model);
    let difficulty = dataset.difficulty_map();

    // Whether each (student, unit) ever saw the unit video in the log.
    let mut watched: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    for attempt in dataset.attempts() {
        let flag = watched
            .entry((attempt.student_id.as_str(), attempt.unit_id.as_str()))
            .or_insert(false);
        *flag |= attempt.watched_video;
    }

    let mut per_run = Vec::with_capacity(cfg.runs as usize);
    for run in 0..cfg.runs {
        let mut policy = fresh_policy(cfg, &layout)?;
        let mut steps = 0usize;
        let mut successes = 0usize;
        let mut skips = 0usize;
        let mut failures = 0usize;
        let mut mcqs = 0usize;

        for (student_index, (student_id, units)) in started.iter().enumerate() {
            let mut streams = StepStreams::new(cfg.master_seed, run as u64, student_index as u64);
            for unit_id in units {
                let unit = &dataset.units()[*unit_id];
                policy.begin_episode();
                let trajectory = simulate_unit(
                    policy.as_mut(),
                    student_id,
                    unit,
                    dataset.catalog(),
                    &difficulty,
                    &layout,
                    watched.get(&(*student_id, *unit_id)).copied().unwrap_or(false),
                    &source,
                    &cfg.reward_cfg,
                    &mut streams,
                )?;
                for step in &trajectory.steps {
                    steps += 1;
                    if step.outcome.is_success() {
                        successes += 1;
                    } else if step.outcome.is_skip() {
                        skips += 1;
                    } else {
                        failures += 1;
                    }
                    if step.choice.format == ExerciseFormat::Mcq {
                        mcqs += 1;
                    }
                }
            }
        }

        let total = steps as f64;
        per_run.push(RunMetrics {
            success_rate: successes as f64 / total,
            skip_rate: skips as f64 / total,
            fail_rate: failures as f64 / total,
            mcq_frequency: mcqs as f64 / total,
        });
    }

    let n = per_run.len() as f64;
    let mean = RunMetrics {
        success_rate: per_run.iter().map(|r| r.success_rate).sum::<f64>() / n,
        skip_rate: per_run.iter().map(|r| r.skip_rate).sum::<f64>() / n,
        fail_rate: per_run.iter().map(|r| r.fail_rate).sum::<f64>() / n,
        mcq_frequency: per_run.iter().map(|r| r.mcq_frequency).sum::<f64>() / n,
    };
    let spread = |f: fn(&RunMetrics) -> f64, center: f64| {
        per_run
            .iter()
            .map(|r| (f(r) - center).abs())
            .fold(0.0, f64::max)
    };
    let max_deviation = RunMetrics {
        success_rate: spread(|r| r.success_rate, mean.success_rate),
        skip_rate: spread(|r| r.skip_rate, mean.skip_rate),
        fail_rate: spread(|r| r.fail_rate, mean.fail_rate),
        mcq_frequency: spread(|r| r.mcq_frequency, mean.mcq_frequency),
    };

    Ok(CohortReport {
        policy: cfg.policy.as_str().to_string(),
        runs: cfg.runs,
        per_run,
        mean,
        max_deviation,
    })
}

/// Distinct (student, started unit, unattempted exercise) pairs; the
/// prediction table must cover each with both formats.
pub fn unattempted_pairs(dataset: &Dataset) -> BTreeSet<(String, String)> {
    let mut attempted: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for attempt in dataset.attempts() {
        attempted
            .entry(attempt.student_id.as_str())
            .or_default()
            .insert(attempt.exercise_id.as_str());
    }
    let mut pairs = BTreeSet::new();
    for (student, units) in dataset.started_units() {
        for unit_id in units {
            for exercise_id in &dataset.units()[unit_id].exercise_ids {
                if !attempted[student].contains(exercise_id.as_str()) {
                    pairs.insert((student.to_string(), exercise_id.clone()));
                }
            }
        }
    }
    pairs
}
