//! Line-delimited task records and solution-length statistics.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use synmark_core::syntax::BUILTIN_LANGUAGES;
use synmark_core::tokenizer::{TokenizeError, Tokenizer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub prompt: String,
    pub reference_solution: String,
    /// Shell command; `{file}` is replaced by the candidate program path and
    /// `{dir}` by its directory.
    pub test_command: String,
    pub language: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: missing field \"{field}\"")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field \"{field}\" must be a string")]
    WrongType { line: usize, field: &'static str },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown language \"{language}\"")]
    UnknownLanguage { line: usize, language: String },
    #[error("line {line}: duplicate task_id \"{task_id}\"")]
    DuplicateId { line: usize, task_id: String },
    #[error("dataset is empty")]
    Empty,
}

const FIELDS: [&str; 5] = [
    "task_id",
    "prompt",
    "reference_solution",
    "test_command",
    "language",
];

pub fn load_dataset(path: &Path) -> Result<Vec<TaskRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text)
}

/// Parses JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_dataset(text: &str) -> Result<Vec<TaskRecord>, DatasetError> {
    let mut tasks = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| DatasetError::Malformed {
                line,
                message: e.to_string(),
            })?;
        let object = value.as_object().ok_or(DatasetError::Malformed {
            line,
            message: "record is not a JSON object".into(),
        })?;
        let mut fields = Vec::with_capacity(FIELDS.len());
        for field in FIELDS {
            let v = object
                .get(field)
                .ok_or(DatasetError::MissingField { line, field })?;
            let s = v.as_str().ok_or(DatasetError::WrongType { line, field })?;
            fields.push(s.to_string());
        }
        let [task_id, prompt, reference_solution, test_command, language]: [String; 5] =
            fields.try_into().expect("five fields");
        if !BUILTIN_LANGUAGES.contains(&language.as_str()) {
            return Err(DatasetError::UnknownLanguage { line, language });
        }
        if !seen.insert(task_id.clone()) {
            return Err(DatasetError::DuplicateId { line, task_id });
        }
        tasks.push(TaskRecord {
            task_id,
            prompt,
            reference_solution,
            test_command,
            language,
        });
    }
    if tasks.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub problems: usize,
    pub max: usize,
    pub min: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single problem.
    pub std: f64,
}

pub fn length_stats(lengths: &[usize]) -> Option<LengthStats> {
    let n = lengths.len();
    if n == 0 {
        return None;
    }
    let mean = lengths.iter().sum::<usize>() as f64 / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let ss: f64 = lengths.iter().map(|&l| (l as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Some(LengthStats {
        problems: n,
        max: *lengths.iter().max()?,
        min: *lengths.iter().min()?,
        mean,
        std,
    })
}

/// Token-length statistics of the reference solutions.
pub fn dataset_stats(
    tasks: &[TaskRecord],
    tokenizer: &dyn Tokenizer,
) -> Result<LengthStats, TokenizeError> {
    let lengths = tasks
        .iter()
        .map(|t| tokenizer.encode(&t.reference_solution).map(|ids| ids.len()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(length_stats(&lengths).expect("datasets are non-empty"))
}
