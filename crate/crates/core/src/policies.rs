//! The three selection policies behind one interface, so the simulator is
//! policy-agnostic: uniform random (free-form only), a difficulty-ladder
//! heuristic, and the LinUCB learner over joint exercise+format actions.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bandit::{BanditError, LinUcb};
use crate::domain::{Exercise, ExerciseFormat, Outcome};
use crate::features::{build_context, ContextVector, FeatureError, FeatureLayout, StudentUnitState};

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("no difficulty entry for exercise {0:?}")]
    MissingDifficulty(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolicyId {
    Random,
    Heuristic,
    LinUcb,
}

impl PolicyId {
    pub const ALL: [PolicyId; 3] = [PolicyId::Random, PolicyId::Heuristic, PolicyId::LinUcb];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyId::Random => "random",
            PolicyId::Heuristic => "heuristic",
            PolicyId::LinUcb => "linucb",
        }
    }
}

impl std::fmt::Display for PolicyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown policy {0:?} (expected random, heuristic, or linucb)")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyId {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(PolicyId::Random),
            "heuristic" => Ok(PolicyId::Heuristic),
            "linucb" => Ok(PolicyId::LinUcb),
            other => Err(UnknownPolicy(other.to_string())),
        }
    }
}

/// A chosen exercise plus the format to present it in.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ActionChoice {
    pub exercise_id: String,
    pub format: ExerciseFormat,
}

/// Selection policy interface. A policy instance serves one episode at a
/// time; [`Policy::begin_episode`] resets per-episode state while learned
/// state (the LinUCB statistics) persists across episodes.
pub trait Policy {
    fn id(&self) -> PolicyId;

    fn begin_episode(&mut self) {}

    /// Pick the next action from `candidates` (never empty, never returns
    /// an exercise outside it). `difficulty` maps exercise ids to smoothed
    /// historic success rates, higher meaning easier.
    fn next_action(
        &mut self,
        state: &StudentUnitState,
        candidates: &[&Exercise],
        difficulty: &BTreeMap<String, f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<ActionChoice, PolicyError>;

    /// Feed back the resolved outcome and the reward the learner observed.
    fn observe(&mut self, choice: &ActionChoice, outcome: Outcome, reward: f64);
}

/// Uniform draw over candidates; always free-form.
#[derive(Debug, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::Random
    }

    fn next_action(
        &mut self,
        _state: &StudentUnitState,
        candidates: &[&Exercise],
        _difficulty: &BTreeMap<String, f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<ActionChoice, PolicyError> {
        if candidates.is_empty() {
            return Err(PolicyError::NoCandidates);
        }
        let index = rand::Rng::random_range(rng, 0..candidates.len());
        Ok(ActionChoice {
            exercise_id: candidates[index].exercise_id.clone(),
            format: ExerciseFormat::FreeForm,
        })
    }

    fn observe(&mut self, _choice: &ActionChoice, _outcome: Outcome, _reward: f64) {}
}

/// Difficulty-ladder heuristic: candidates are sorted easiest to hardest
/// (highest smoothed success rate first, ids breaking ties), the first pick
/// is the median rung, then the rung moves one step harder after a success
/// and one step easier after a failure or skip. Two non-successes in a row
/// switch to MCQs until the next success.
#[derive(Debug, Default)]
pub struct HeuristicPolicy {
    rung: Option<usize>,
    consecutive_failures: u32,
    mcq_mode: bool,
}

impl HeuristicPolicy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn mcq_mode(&self) -> bool {
        self.mcq_mode
    }
}

impl Policy for HeuristicPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::Heuristic
    }

    fn begin_episode(&mut self) {
        *self = Self::default();
    }

    fn next_action(
        &mut self,
        _state: &StudentUnitState,
        candidates: &[&Exercise],
        difficulty: &BTreeMap<String, f64>,
        _rng: &mut ChaCha8Rng,
    ) -> Result<ActionChoice, PolicyError> {
        if candidates.is_empty() {
            return Err(PolicyError::NoCandidates);
        }
        let mut ladder: Vec<(&Exercise, f64)> = Vec::with_capacity(candidates.len());
        for exercise in candidates {
            let rate = *difficulty
                .get(&exercise.exercise_id)
                .ok_or_else(|| PolicyError::MissingDifficulty(exercise.exercise_id.clone()))?;
            ladder.push((exercise, rate));
        }
        // Easiest first: success rate descending, then id for determinism.
        ladder.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| a.0.exercise_id.cmp(&b.0.exercise_id))
        });
        let rung = match self.rung {
            None => (ladder.len() - 1) / 2,
            Some(r) => r.min(ladder.len() - 1),
        };
        self.rung = Some(rung);
        Ok(ActionChoice {
            exercise_id: ladder[rung].0.exercise_id.clone(),
            format: if self.mcq_mode {
                ExerciseFormat::Mcq
            } else {
                ExerciseFormat::FreeForm
            },
        })
    }

    fn observe(&mut self, _choice: &ActionChoice, outcome: Outcome, _reward: f64) {
        let rung = self.rung.unwrap_or(0);
        if outcome.is_success() {
            self.rung = Some(rung + 1);
            self.consecutive_failures = 0;
            self.mcq_mode = false;
        } else {
            self.rung = Some(rung.saturating_sub(1));
            self.consecutive_failures += 1;
            if self.consecutive_failures >= 2 {
                self.mcq_mode = true;
            }
        }
    }
}

/// LinUCB over the joint action space: both formats of every unresolved
/// exercise are scored and the best-scoring (exercise, format) wins. Ties
/// resolve to the lowest candidate index with free-form before MCQ.
#[derive(Debug)]
pub struct LinUcbPolicy {
    bandit: LinUcb,
    layout: FeatureLayout,
    pending: Option<ContextVector>,
}

impl LinUcbPolicy {
    pub fn new(bandit: LinUcb, layout: FeatureLayout) -> Self {
        Self {
            bandit,
            layout,
            pending: None,
        }
    }

    pub fn bandit(&self) -> &LinUcb {
        &self.bandit
    }

    pub fn into_bandit(self) -> LinUcb {
        self.bandit
    }
}

impl Policy for LinUcbPolicy {
    fn id(&self) -> PolicyId {
        PolicyId::LinUcb
    }

    fn begin_episode(&mut self) {
        self.pending = None;
    }

    fn next_action(
        &mut self,
        state: &StudentUnitState,
        candidates: &[&Exercise],
        difficulty: &BTreeMap<String, f64>,
        _rng: &mut ChaCha8Rng,
    ) -> Result<ActionChoice, PolicyError> {
        if candidates.is_empty() {
            return Err(PolicyError::NoCandidates);
        }
        let mut best: Option<(f64, ActionChoice, ContextVector)> = None;
        for exercise in candidates {
            let rate = *difficulty
                .get(&exercise.exercise_id)
                .ok_or_else(|| PolicyError::MissingDifficulty(exercise.exercise_id.clone()))?;
            for format in ExerciseFormat::ALL {
                let context = build_context(state, exercise, format, rate, &self.layout)?;
                let score = self.bandit.score(context.values())?;
                let better = match &best {
                    None => true,
                    Some((top, _, _)) => score > *top,
                };
                if better {
                    best = Some((
                        score,
                        ActionChoice {
                            exercise_id: exercise.exercise_id.clone(),
                            format,
                        },
                        context,
                    ));
                }
            }
        }
        let (_, choice, context) = best.expect("candidates checked non-empty");
        self.pending = Some(context);
        Ok(choice)
    }

    fn observe(&mut self, _choice: &ActionChoice, _outcome: Outcome, reward: f64) {
        if let Some(context) = self.pending.take() {
            self.bandit
                .update(context.values(), reward)
                .expect("context built by this policy matches the bandit dimension");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn exercise(id: &str) -> Exercise {
        Exercise {
            exercise_id: id.into(),
            unit_id: "u".into(),
            solution_form: "code".into(),
            application_context: "applied".into(),
        }
    }

    fn layout() -> FeatureLayout {
        FeatureLayout::new(["code".to_string()], ["applied".to_string()])
    }

    fn difficulty_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn policy_ids_parse_and_print() {
        for id in PolicyId::ALL {
            assert_eq!(id.as_str().parse::<PolicyId>().unwrap(), id);
        }
        assert!("greedy".parse::<PolicyId>().is_err());
    }

    #[test]
    fn random_single_candidate_free_form() {
        let mut policy = RandomPolicy;
        let e = exercise("e1");
        let state = StudentUnitState::new("s", "u", false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let choice = policy
            .next_action(&state, &[&e], &difficulty_of(&[("e1", 0.5)]), &mut rng)
            .unwrap();
        assert_eq!(choice.exercise_id, "e1");
        assert_eq!(choice.format, ExerciseFormat::FreeForm);
    }

    #[test]
    fn random_is_roughly_uniform_and_never_mcq() {
        let mut policy = RandomPolicy;
        let exercises: Vec<Exercise> = (0..4).map(|i| exercise(&format!("e{i}"))).collect();
        let candidates: Vec<&Exercise> = exercises.iter().collect();
        let difficulty = difficulty_of(&[("e0", 0.5), ("e1", 0.5), ("e2", 0.5), ("e3", 0.5)]);
        let state = StudentUnitState::new("s", "u", false);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = BTreeMap::new();
        let draws = 10_000;
        for _ in 0..draws {
            let choice = policy
                .next_action(&state, &candidates, &difficulty, &mut rng)
                .unwrap();
            assert_eq!(choice.format, ExerciseFormat::FreeForm);
            *counts.entry(choice.exercise_id).or_insert(0usize) += 1;
        }
        for (_, count) in counts {
            let freq = count as f64 / draws as f64;
            assert!((freq - 0.25).abs() < 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn heuristic_starts_at_median_and_walks_the_ladder() {
        let mut policy = HeuristicPolicy::new();
        let exercises: Vec<Exercise> = (0..5).map(|i| exercise(&format!("e{i}"))).collect();
        let candidates: Vec<&Exercise> = exercises.iter().collect();
        // e0 easiest ... e4 hardest.
        let difficulty = difficulty_of(&[
            ("e0", 0.9),
            ("e1", 0.7),
            ("e2", 0.5),
            ("e3", 0.3),
            ("e4", 0.1),
        ]);
        let state = StudentUnitState::new("s", "u", false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let first = policy
            .next_action(&state, &candidates, &difficulty, &mut rng)
            .unwrap();
        assert_eq!(first.exercise_id, "e2"); // median of 5
        assert_eq!(first.format, ExerciseFormat::FreeForm);

        policy.observe(&first, Outcome::InstantSuccess, 1.5);
        let harder = policy
            .next_action(&state, &candidates, &difficulty, &mut rng)
            .unwrap();
        assert_eq!(harder.exercise_id, "e3");

        policy.observe(&harder, Outcome::EventualFailure, 0.5);
        let easier = policy
            .next_action(&state, &candidates, &difficulty, &mut rng)
            .unwrap();
        assert_eq!(easier.exercise_id, "e2");
    }

    #[test]
    fn heuristic_enters_mcq_mode_after_two_failures_and_exits_on_success() {
        let mut policy = HeuristicPolicy::new();
        let e = exercise("e1");
        let difficulty = difficulty_of(&[("e1", 0.5)]);
        let state = StudentUnitState::new("s", "u", false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);

        let c1 = policy.next_action(&state, &[&e], &difficulty, &mut rng).unwrap();
        assert_eq!(c1.format, ExerciseFormat::FreeForm);
        policy.observe(&c1, Outcome::EventualFailure, 0.5);

        let c2 = policy.next_action(&state, &[&e], &difficulty, &mut rng).unwrap();
        assert_eq!(c2.format, ExerciseFormat::FreeForm);
        policy.observe(&c2, Outcome::InstantSkip, 0.0);

        let c3 = policy.next_action(&state, &[&e], &difficulty, &mut rng).unwrap();
        assert_eq!(c3.format, ExerciseFormat::Mcq);
        policy.observe(&c3, Outcome::EventualSuccess, 0.6);
        assert!(!policy.mcq_mode());

        let c4 = policy.next_action(&state, &[&e], &difficulty, &mut rng).unwrap();
        assert_eq!(c4.format, ExerciseFormat::FreeForm);
    }

    #[test]
    fn linucb_ties_break_to_first_candidate_free_form() {
        // With alpha = 0 a fresh bandit scores every context 0, a full tie:
        // the first candidate wins and free-form beats MCQ.
        let lay = layout();
        let bandit = LinUcb::new(lay.dimension(), 0.0, 1.0).unwrap();
        let mut policy = LinUcbPolicy::new(bandit, lay.clone());
        let a = exercise("e1");
        let b = exercise("e2");
        let difficulty = difficulty_of(&[("e1", 0.5), ("e2", 0.5)]);
        let state = StudentUnitState::new("s", "u", false);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let choice = policy
            .next_action(&state, &[&a, &b], &difficulty, &mut rng)
            .unwrap();
        assert_eq!(choice.exercise_id, "e1");
        assert_eq!(choice.format, ExerciseFormat::FreeForm);

        // With alpha > 0 the MCQ variant of the first candidate scores
        // strictly higher on a fresh bandit (its extra active coordinate
        // widens the uncertainty bonus), so there is no tie to break.
        let bandit = LinUcb::new(lay.dimension(), 1.0, 1.0).unwrap();
        let mut policy = LinUcbPolicy::new(bandit, lay);
        let choice = policy
            .next_action(&state, &[&a, &b], &difficulty, &mut rng)
            .unwrap();
        assert_eq!(choice.exercise_id, "e1");
        assert_eq!(choice.format, ExerciseFormat::Mcq);
    }

    #[test]
    fn linucb_alpha_zero_matches_exhaustive_argmax() {
        let layout = layout();
        let d = layout.dimension();
        let mut bandit = LinUcb::new(d, 0.0, 1.0).unwrap();
        // Teach the bandit to dislike difficulty (slot 8) via synthetic
        // updates: reward = 1 - difficulty.
        let state = StudentUnitState::new("s", "u", false);
        let trainer = exercise("t");
        for i in 0..200 {
            let difficulty = (i % 10) as f64 / 10.0;
            let ctx = build_context(
                &state,
                &trainer,
                ExerciseFormat::FreeForm,
                difficulty,
                &layout,
            )
            .unwrap();
            bandit.update(ctx.values(), 1.0 - difficulty).unwrap();
        }

        let exercises: Vec<Exercise> = (0..6).map(|i| exercise(&format!("e{i}"))).collect();
        let candidates: Vec<&Exercise> = exercises.iter().collect();
        let difficulty: BTreeMap<String, f64> = exercises
            .iter()
            .enumerate()
            .map(|(i, e)| (e.exercise_id.clone(), 0.15 * i as f64))
            .collect();

        // Exhaustive oracle over all 2n contexts.
        let mut oracle_best: Option<(f64, ActionChoice)> = None;
        for e in &candidates {
            for format in ExerciseFormat::ALL {
                let ctx = build_context(
                    &state,
                    e,
                    format,
                    difficulty[&e.exercise_id],
                    &layout,
                )
                .unwrap();
                let score = bandit.score(ctx.values()).unwrap();
                if oracle_best.as_ref().is_none_or(|(s, _)| score > *s) {
                    oracle_best = Some((
                        score,
                        ActionChoice {
                            exercise_id: e.exercise_id.clone(),
                            format,
                        },
                    ));
                }
            }
        }

        let mut policy = LinUcbPolicy::new(bandit, layout);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let choice = policy
            .next_action(&state, &candidates, &difficulty, &mut rng)
            .unwrap();
        assert_eq!(choice, oracle_best.unwrap().1);
    }

    #[test]
    fn empty_candidates_rejected_by_all_policies() {
        let state = StudentUnitState::new("s", "u", false);
        let difficulty = BTreeMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut random = RandomPolicy;
        let mut heuristic = HeuristicPolicy::new();
        let layout = layout();
        let mut linucb = LinUcbPolicy::new(LinUcb::new(layout.dimension(), 1.0, 1.0).unwrap(), layout);
        assert_eq!(
            random.next_action(&state, &[], &difficulty, &mut rng).unwrap_err(),
            PolicyError::NoCandidates
        );
        assert_eq!(
            heuristic.next_action(&state, &[], &difficulty, &mut rng).unwrap_err(),
            PolicyError::NoCandidates
        );
        assert_eq!(
            linucb.next_action(&state, &[], &difficulty, &mut rng).unwrap_err(),
            PolicyError::NoCandidates
        );
    }
}
