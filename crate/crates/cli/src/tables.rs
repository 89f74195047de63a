//! CSV row shapes exchanged between commands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use voyagekit_core::path_id::PathLabeling;

pub const SUMMARIES: &str = "summaries.csv";
pub const GAINS: &str = "gains.csv";
pub const WEATHER_GAINS: &str = "weather_gains.csv";
pub const VOYAGE_GAINS: &str = "voyage_gains.csv";
pub const SPLIT: &str = "split.csv";
pub const DISTANCE_MATRIX: &str = "distance_matrix.csv";
pub const LABELS: &str = "labels.csv";
pub const CONFUSION: &str = "confusion.csv";
pub const METRICS: &str = "metrics.csv";
pub const REPORT: &str = "report.json";
pub const PROFILES_DIR: &str = "profiles";
pub const PLOTS_DIR: &str = "plots";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub voyage_id: String,
    pub fuel_total: f64,
    pub time_total: f64,
    pub fuel_norm: f64,
    pub time_norm: f64,
    pub eff_score: f64,
    pub top10: bool,
    pub top25: bool,
    pub top50: bool,
    pub top75: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCsvRow {
    pub cluster: String,
    pub model: String,
    pub status: String,
    pub eff_gain_pct: Option<f64>,
    pub improved_count: usize,
    pub evaluated: usize,
    pub undefined: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeatherGainCsvRow {
    pub model: String,
    pub weather_state: String,
    pub avg: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoyageGainCsvRow {
    pub cluster: String,
    pub model: String,
    pub voyage_id: String,
    pub weather_state: Option<String>,
    pub meas_score: f64,
    pub pred_score: Option<f64>,
    pub gain_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub voyage_id: String,
    pub split: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub voyage_id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

/// Header row plus records, for tables whose columns are data-dependent.
pub fn write_raw_csv(path: &Path, header: &[String], records: &[Vec<String>]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in records {
        w.write_record(r)?;
    }
    w.flush()
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        bail!("missing input {}", path.display());
    }
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.with_context(|| format!("{} record {}", path.display(), i + 1)))
        .collect()
}

/// Read a `voyage_id,label` file.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for row in read_csv::<LabelRow>(path)? {
        if out.insert(row.voyage_id.clone(), row.label).is_some() {
            bail!(
                "{}: duplicate voyage_id `{}`",
                path.display(),
                row.voyage_id
            );
        }
    }
    Ok(out)
}

/// Restrict truth labels to `ids`, failing on the first id the file lacks.
pub fn truth_for(
    truth: &BTreeMap<String, String>,
    ids: &[String],
    source: &Path,
) -> Result<PathLabeling> {
    let mut pairs = Vec::with_capacity(ids.len());
    for id in ids {
        match truth.get(id) {
            Some(l) => pairs.push((id.clone(), l.clone())),
            None => bail!(
                "truth labels {} have no entry for voyage_id `{id}`",
                source.display()
            ),
        }
    }
    Ok(PathLabeling::from_pairs(pairs)?)
}
