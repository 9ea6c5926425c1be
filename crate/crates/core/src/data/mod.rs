//! Dataset ingestion, synthetic cohort generation, and checkpoint/report
//! serialization.

mod checkpoint;
mod dataset;
mod io;
mod synth;

pub use checkpoint::{
    cohort_report_bytes, load_bandit, load_cohort_report, load_world_model, render_report_csv,
    save_bandit, save_cohort_report, save_world_model, world_model_bytes, CHECKPOINT_VERSION,
    REPORT_CSV_HEADER,
};
pub use dataset::{Dataset, DatasetError};
pub use io::{load_dataset, save_dataset, DataError};
pub use synth::{
    default_planted_weights, generate_synthetic, synthetic_layout, SyntheticConfig,
    SyntheticConfigError, APPLICATION_CONTEXTS, SOLUTION_FORMS, UNPLANTED_PRIOR,
};
