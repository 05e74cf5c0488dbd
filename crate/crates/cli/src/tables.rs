//! CSV and JSON artifacts written by the evaluation commands and read back by `report`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use timbre_core::fsutil::write_atomic;

use crate::error::{CliError, Context, Result};

/// Cell text for a correlation that is undefined (zero variance).
pub const UNDEFINED: &str = "undefined";

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string())
}

pub fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == UNDEFINED {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|e| CliError::Input(format!("bad number {s:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorRow {
    pub descriptor: String,
    pub r: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentRow {
    pub instrument: String,
    pub group: String,
    pub r: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub instrument: String,
    pub descriptor: String,
    pub human_rating: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scope: String,
    pub positive: usize,
    pub negative: usize,
    pub defined: usize,
    pub undefined: usize,
    pub mean_r: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub descriptor: String,
    pub effect: String,
    pub level: f64,
    pub model: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCsvRow {
    pub descriptor: String,
    pub model: String,
    pub trend: String,
    pub symbol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCountRow {
    pub effect: String,
    pub model: String,
    pub monotonic_up: usize,
    pub monotonic_down: usize,
    pub peaked: usize,
    pub dipped: usize,
    pub flat: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    /// Relative to the index file's directory.
    pub dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentsIndex {
    pub models: Vec<ModelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectsIndex {
    pub models: Vec<String>,
    pub effects: Vec<String>,
    pub levels: Vec<f64>,
    pub tolerance: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).internal(&path.display().to_string())?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(path, &bytes).internal(&path.display().to_string())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).input(&path.display().to_string())?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .input(&path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).internal("serialize")?;
    text.push('\n');
    write_atomic(path, text.as_bytes()).internal(&path.display().to_string())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).input(&path.display().to_string())?;
    serde_json::from_str(&text).input(&path.display().to_string())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes()).internal(&path.display().to_string())
}

/// File-system-safe directory name for a model.
pub fn model_dir_name(model: &str) -> String {
    model
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}
