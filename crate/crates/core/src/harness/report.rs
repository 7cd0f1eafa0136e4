use serde::Serialize;

use super::{Checkpoint, HarnessError, ReplicateRecord, StatsSummary};

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, HarnessError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(|e| HarnessError::Report(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| HarnessError::Report(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HarnessError::Report(e.to_string()))
}

/// One row per record.
pub fn records_csv(records: &[ReplicateRecord]) -> Result<String, HarnessError> {
    to_csv(records)
}

pub fn records_json(records: &[ReplicateRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records always serialize")
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    layout: &'a str,
    modality: &'a str,
    molecule: &'a str,
    checkpoint: Checkpoint,
    n: usize,
    mean: f64,
    std: f64,
    median: f64,
    q1: f64,
    q3: f64,
    iqr: f64,
    whisker_low: f64,
    whisker_high: f64,
    /// Space-separated.
    outliers: String,
}

/// One row per summary, with box-plot columns.
pub fn summaries_csv(summaries: &[StatsSummary]) -> Result<String, HarnessError> {
    to_csv(summaries.iter().map(|s| SummaryRow {
        layout: &s.layout,
        modality: &s.modality,
        molecule: &s.molecule,
        checkpoint: s.checkpoint,
        n: s.stats.n,
        mean: s.stats.mean,
        std: s.stats.std,
        median: s.stats.median,
        q1: s.stats.q1,
        q3: s.stats.q3,
        iqr: s.stats.iqr,
        whisker_low: s.stats.whisker_low,
        whisker_high: s.stats.whisker_high,
        outliers: s.stats.outliers.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
    }))
}

pub fn summaries_json(summaries: &[StatsSummary]) -> String {
    serde_json::to_string_pretty(summaries).expect("summaries always serialize")
}
