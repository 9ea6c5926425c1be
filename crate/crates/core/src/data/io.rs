//! Line-delimited JSON dataset files: one record per line, lowercase
//! snake_case enum strings. Every load failure carries the file and line it
//! came from.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::data::dataset::{Dataset, DatasetError, DatasetInput};
use crate::domain::{AttemptRecord, Exercise, LearningUnit};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    Invalid {
        path: String,
        line: usize,
        #[source]
        source: DatasetError,
    },
    #[error("{path}: unsupported version {found} (expected {expected})")]
    Version {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("{path}: truncated or corrupt document: {message}")]
    Corrupt { path: String, message: String },
}

fn read_to_string(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DataError> {
    let content = read_to_string(path)?;
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| DataError::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

fn write_lines<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buffer = Vec::new();
    for record in records {
        let line = serde_json::to_string(record).expect("record serialization cannot fail");
        buffer.extend_from_slice(line.as_bytes());
        buffer.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&buffer).map_err(io_err)
}

/// Load and validate the three dataset files. Validation failures are
/// reported against the file and line of the offending record.
pub fn load_dataset(
    attempts_path: &Path,
    catalog_path: &Path,
    units_path: &Path,
) -> Result<Dataset, DataError> {
    let attempts: Vec<AttemptRecord> = parse_lines(attempts_path)?;
    let catalog: Vec<Exercise> = parse_lines(catalog_path)?;
    let units: Vec<LearningUnit> = parse_lines(units_path)?;
    Dataset::from_parts(attempts, catalog, units).map_err(|e| {
        let (path, line) = match e.input_kind() {
            DatasetInput::Attempts => (attempts_path, e.input_index() + 1),
            DatasetInput::Catalog => (catalog_path, e.input_index() + 1),
            DatasetInput::Units => (units_path, e.input_index() + 1),
        };
        DataError::Invalid {
            path: path.display().to_string(),
            line,
            source: e,
        }
    })
}

/// Write the three dataset files in canonical order: attempts by
/// (student_id, seq), catalog by exercise_id, units by unit_id. Repeated
/// saves of the same dataset are byte-identical.
pub fn save_dataset(
    dataset: &Dataset,
    attempts_path: &Path,
    catalog_path: &Path,
    units_path: &Path,
) -> Result<(), DataError> {
    write_lines(attempts_path, dataset.attempts())?;
    let catalog: Vec<&Exercise> = dataset.catalog().values().collect();
    write_lines(catalog_path, &catalog)?;
    let units: Vec<&LearningUnit> = dataset.units().values().collect();
    write_lines(units_path, &units)
}
