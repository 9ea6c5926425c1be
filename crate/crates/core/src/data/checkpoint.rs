//! Versioned JSON checkpoints for models, bandits, and cohort reports, plus
//! the flat CSV report rendering. f64 values are written in shortest
//! round-trip form, so a save/load cycle restores bit-identical state.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bandit::LinUcb;
use crate::data::io::DataError;
use crate::features::FeatureLayout;
use crate::sim::CohortReport;
use crate::world::{Hyperparams, WorldModel, NUM_CLASSES};

pub const CHECKPOINT_VERSION: u32 = 1;
pub const REPORT_CSV_HEADER: &str = "policy,run,success_rate,skip_rate,fail_rate,mcq_frequency";

#[derive(Debug, Serialize, Deserialize)]
struct WorldModelDoc {
    version: u32,
    kind: String,
    classes: usize,
    dimension: usize,
    layout: FeatureLayout,
    hyperparams: Hyperparams,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct BanditDoc {
    version: u32,
    kind: String,
    d: usize,
    alpha: f64,
    lambda: f64,
    update_count: u64,
    layout_fingerprint: u64,
    a: Vec<f64>,
    a_inv: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDoc {
    version: u32,
    kind: String,
    reports: Vec<CohortReport>,
}

fn render_doc<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut body = serde_json::to_string_pretty(doc).expect("checkpoint serialization cannot fail");
    body.push('\n');
    body.into_bytes()
}

fn write_doc<T: Serialize>(path: &Path, doc: &T) -> Result<(), DataError> {
    fs::write(path, render_doc(doc)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a versioned document: version and kind are checked before the full
/// payload is decoded, and any syntax error (including truncation) surfaces
/// as a corrupt-document failure without partial state.
fn read_doc<T: DeserializeOwned>(path: &Path, expected_kind: &str) -> Result<T, DataError> {
    let content = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&content).map_err(|e| DataError::Corrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| DataError::Corrupt {
            path: path.display().to_string(),
            message: "missing version field".into(),
        })?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(DataError::Version {
            path: path.display().to_string(),
            found: version as u32,
            expected: CHECKPOINT_VERSION,
        });
    }
    let kind = value.get("kind").and_then(|v| v.as_str()).unwrap_or("");
    if kind != expected_kind {
        return Err(DataError::Corrupt {
            path: path.display().to_string(),
            message: format!("kind {kind:?}, expected {expected_kind:?}"),
        });
    }
    serde_json::from_value(value).map_err(|e| DataError::Corrupt {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Serialized checkpoint bytes, exactly what [`save_world_model`] writes.
pub fn world_model_bytes(model: &WorldModel) -> Vec<u8> {
    let doc = WorldModelDoc {
        version: CHECKPOINT_VERSION,
        kind: "world_model".into(),
        classes: NUM_CLASSES,
        dimension: model.layout().dimension(),
        layout: model.layout().clone(),
        hyperparams: *model.hyperparams(),
        weights: model.weights().to_vec(),
    };
    render_doc(&doc)
}

pub fn save_world_model(model: &WorldModel, path: &Path) -> Result<(), DataError> {
    fs::write(path, world_model_bytes(model)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_world_model(path: &Path) -> Result<WorldModel, DataError> {
    let doc: WorldModelDoc = read_doc(path, "world_model")?;
    if doc.classes != NUM_CLASSES || doc.dimension != doc.layout.dimension() {
        return Err(DataError::Corrupt {
            path: path.display().to_string(),
            message: format!(
                "inconsistent shape: {} classes × {} dims for a layout of dimension {}",
                doc.classes,
                doc.dimension,
                doc.layout.dimension()
            ),
        });
    }
    WorldModel::from_parts(doc.weights, doc.layout, doc.hyperparams).map_err(|e| {
        DataError::Corrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    })
}

/// The fingerprint records which feature layout the bandit's contexts came
/// from; restoring against a different layout must be rejected by callers.
pub fn save_bandit(bandit: &LinUcb, layout_fingerprint: u64, path: &Path) -> Result<(), DataError> {
    let doc = BanditDoc {
        version: CHECKPOINT_VERSION,
        kind: "bandit".into(),
        d: bandit.dimension(),
        alpha: bandit.alpha(),
        lambda: bandit.lambda(),
        update_count: bandit.update_count(),
        layout_fingerprint,
        a: bandit.gram().to_vec(),
        a_inv: bandit.cached_inverse().to_vec(),
        b: bandit.response().to_vec(),
    };
    write_doc(path, &doc)
}

pub fn load_bandit(path: &Path) -> Result<(LinUcb, u64), DataError> {
    let doc: BanditDoc = read_doc(path, "bandit")?;
    let bandit = LinUcb::from_state(
        doc.d,
        doc.alpha,
        doc.lambda,
        doc.a,
        doc.a_inv,
        doc.b,
        doc.update_count,
    )
    .map_err(|e| DataError::Corrupt {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok((bandit, doc.layout_fingerprint))
}

/// Serialized report bytes, exactly what [`save_cohort_report`] writes.
pub fn cohort_report_bytes(reports: &[CohortReport]) -> Vec<u8> {
    let doc = ReportDoc {
        version: CHECKPOINT_VERSION,
        kind: "cohort_report".into(),
        reports: reports.to_vec(),
    };
    render_doc(&doc)
}

pub fn save_cohort_report(reports: &[CohortReport], path: &Path) -> Result<(), DataError> {
    fs::write(path, cohort_report_bytes(reports)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_cohort_report(path: &Path) -> Result<Vec<CohortReport>, DataError> {
    let doc: ReportDoc = read_doc(path, "cohort_report")?;
    Ok(doc.reports)
}

/// Flat CSV: one row per (policy, run), runs numbered from 1.
pub fn render_report_csv(reports: &[CohortReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for report in reports {
        for (i, run) in report.per_run.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                report.policy,
                i + 1,
                run.success_rate,
                run.skip_rate,
                run.fail_rate,
                run.mcq_frequency
            ));
        }
    }
    out
}
