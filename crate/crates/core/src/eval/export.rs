use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AblationTable, EpisodeRecord, EvalError, EvalMetrics};

/// Column order of the ablation CSV.
pub const TABLE_HEADER: [&str; 17] = [
    "variant",
    "seed",
    "success_rate",
    "joint_err_mean",
    "joint_err_std",
    "body_err_mean",
    "body_err_std",
    "object_err_pos",
    "object_err_ori",
    "ep_len",
    "term_none",
    "term_root_pose",
    "term_body_pose",
    "term_object_pose",
    "term_lost_contact",
    "term_motion_end",
    "error",
];

/// One variant × seed row. Metric cells are empty for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableCsvRow {
    pub variant: String,
    pub seed: u64,
    pub success_rate: Option<f64>,
    pub joint_err_mean: Option<f64>,
    pub joint_err_std: Option<f64>,
    pub body_err_mean: Option<f64>,
    pub body_err_std: Option<f64>,
    pub object_err_pos: Option<f64>,
    pub object_err_ori: Option<f64>,
    pub ep_len: Option<f64>,
    pub term_none: Option<u64>,
    pub term_root_pose: Option<u64>,
    pub term_body_pose: Option<u64>,
    pub term_object_pose: Option<u64>,
    pub term_lost_contact: Option<u64>,
    pub term_motion_end: Option<u64>,
    pub error: Option<String>,
}

impl TableCsvRow {
    fn new(variant: &str, seed: u64, m: Option<&EvalMetrics>, error: Option<&str>) -> Self {
        let term = |k: &str| m.map(|m| m.termination_histogram.get(k).copied().unwrap_or(0));
        Self {
            variant: variant.to_string(),
            seed,
            success_rate: m.map(|m| m.success_rate),
            joint_err_mean: m.map(|m| m.joint_err_mean),
            joint_err_std: m.map(|m| m.joint_err_std),
            body_err_mean: m.map(|m| m.body_err_mean),
            body_err_std: m.map(|m| m.body_err_std),
            object_err_pos: m.map(|m| m.object_err_pos),
            object_err_ori: m.map(|m| m.object_err_ori),
            ep_len: m.map(|m| m.episode_length),
            term_none: term("none"),
            term_root_pose: term("root_pose"),
            term_body_pose: term("body_pose"),
            term_object_pose: term("object_pose"),
            term_lost_contact: term("lost_contact"),
            term_motion_end: term("motion_end"),
            error: error.map(str::to_string),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Path of the JSON summary written next to `csv_path`.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(value).expect("summary serialises");
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Writes one CSV row per variant × seed and a JSON summary with the
/// per-variant medians.
pub fn export_table(table: &AblationTable, csv_path: &Path) -> Result<(), EvalError> {
    let rows: Vec<TableCsvRow> = table
        .rows
        .iter()
        .map(|r| TableCsvRow::new(&r.variant, r.seed, r.metrics.as_ref(), r.error.as_deref()))
        .collect();
    write_rows(csv_path, &TABLE_HEADER, &rows)?;
    write_json(&summary_path(csv_path), &serde_json::json!({ "task": table.task, "summary": table.summary }))
}

pub fn read_table_csv(path: &Path) -> Result<Vec<TableCsvRow>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| io_err(path, e))?.iter().map(str::to_string).collect();
    if header != TABLE_HEADER {
        return Err(io_err(path, "unexpected CSV header"));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(|e| io_err(path, e))
}

const EPISODE_HEADER: [&str; 10] = [
    "env",
    "seed",
    "success",
    "reason",
    "length",
    "ret",
    "joint_err",
    "body_err",
    "object_err_pos",
    "object_err_ori",
];

/// Writes one CSV row per episode and a JSON summary of the aggregates.
pub fn export_metrics(metrics: &EvalMetrics, csv_path: &Path) -> Result<(), EvalError> {
    write_rows(csv_path, &EPISODE_HEADER, &metrics.episodes)?;
    write_json(&summary_path(csv_path), metrics)
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeRecord>, EvalError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| io_err(path, e))
}
