//! Curriculum sequencing engine: an outcome world model, a LinUCB
//! contextual bandit, baseline selection policies, and a seeded cohort
//! simulator for comparing them offline.
//!
//! The pipeline: [`data::generate_synthetic`] (or [`data::load_dataset`])
//! produces an attempt log; [`world::train`] fits the 5-class outcome
//! predictor; [`world::predict_missing`] fills in distributions for
//! unattempted exercises; [`sim::run_cohort`] replays or samples each
//! student's units under a policy and reports success/skip/fail/MCQ rates.

pub mod bandit;
pub mod data;
pub mod domain;
pub mod features;
mod linalg;
pub mod policies;
pub mod regret;
pub mod sim;
pub mod stream;
pub mod world;
