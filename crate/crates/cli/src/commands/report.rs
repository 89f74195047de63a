use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use super::{ensure_dir, shown};
use crate::config::RunConfig;
use crate::runlog::RunLog;
use crate::svg::{chart, Series, Style};
use crate::tables::*;

pub const EFF_SCATTER: &str = "eff_scatter.svg";
pub const SORTED_GAINS: &str = "sorted_gains.svg";

/// Consolidated run summary written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub voyages: usize,
    pub scores: ScoreSection,
    pub gains: GainSection,
    /// Per-class metrics when `pathid` ran with truth labels.
    pub path_identification: Option<Vec<MetricRow>>,
    /// Plot files, relative to the output directory.
    pub plots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub cluster_sizes: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    pub rows: Vec<GainCsvRow>,
    /// Mean of a model's per-cluster averages over rows with status ok.
    pub model_averages: BTreeMap<String, Option<f64>>,
    pub weather: Vec<WeatherGainCsvRow>,
}

pub fn run(cfg: &RunConfig, log: &RunLog) -> Result<()> {
    let required = [SUMMARIES, GAINS, VOYAGE_GAINS, WEATHER_GAINS];
    let missing: Vec<String> = required
        .iter()
        .map(|f| cfg.out.join(f))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("report inputs missing: {}", missing.join(", "));
    }
    let summaries: Vec<SummaryRow> = read_csv(&cfg.out.join(SUMMARIES))?;
    let gains: Vec<GainCsvRow> = read_csv(&cfg.out.join(GAINS))?;
    let voyage_gains: Vec<VoyageGainCsvRow> = read_csv(&cfg.out.join(VOYAGE_GAINS))?;
    let weather: Vec<WeatherGainCsvRow> = read_csv(&cfg.out.join(WEATHER_GAINS))?;
    let metrics_path = cfg.out.join(METRICS);
    let path_identification = if metrics_path.exists() {
        Some(read_csv(&metrics_path)?)
    } else {
        None
    };
    if summaries.is_empty() {
        bail!("{} has no voyages", cfg.out.join(SUMMARIES).display());
    }

    let plot_dir = ensure_dir(&cfg.out.join(PLOTS_DIR))?;
    let scatter = chart(
        "Eff-Score against normalized totals",
        "normalized total",
        "Eff-Score",
        &[
            Series::new(
                "fuel",
                summaries
                    .iter()
                    .map(|s| (s.fuel_norm, s.eff_score))
                    .collect(),
                Style::Markers,
            ),
            Series::new(
                "time",
                summaries
                    .iter()
                    .map(|s| (s.time_norm, s.eff_score))
                    .collect(),
                Style::Markers,
            ),
        ],
    );
    let curves: Vec<Series> = model_order(&gains)
        .into_iter()
        .map(|m| Series::new(m.clone(), sorted_gain_curve(&voyage_gains, &m), Style::Line))
        .collect();
    let sorted = chart(
        "Sorted efficiency gains",
        "voyage rank",
        "gain (%)",
        &curves,
    );
    let mut plots = Vec::new();
    for (name, svg) in [(EFF_SCATTER, scatter), (SORTED_GAINS, sorted)] {
        let path = plot_dir.join(name);
        std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        plots.push(format!("{PLOTS_DIR}/{name}"));
    }

    let effs: Vec<f64> = summaries.iter().map(|s| s.eff_score).collect();
    let cluster_sizes = [
        ("Top10Pr", summaries.iter().filter(|s| s.top10).count()),
        ("Top25Pr", summaries.iter().filter(|s| s.top25).count()),
        ("Top50Pr", summaries.iter().filter(|s| s.top50).count()),
        ("Top75Pr", summaries.iter().filter(|s| s.top75).count()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let model_averages = model_order(&gains)
        .into_iter()
        .map(|m| {
            let v: Vec<f64> = gains
                .iter()
                .filter(|r| r.model == m && r.status == "ok")
                .filter_map(|r| r.eff_gain_pct)
                .collect();
            let avg = (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
            (m, avg)
        })
        .collect();
    let report = Report {
        voyages: summaries.len(),
        scores: ScoreSection {
            mean: effs.iter().sum::<f64>() / effs.len() as f64,
            min: effs.iter().copied().fold(f64::INFINITY, f64::min),
            max: effs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            cluster_sizes,
        },
        gains: GainSection {
            rows: gains,
            model_averages,
            weather,
        },
        path_identification,
        plots,
    };
    let path = cfg.out.join(REPORT);
    let text = serde_json::to_string_pretty(&report)? + "\n";
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    log.info(format!(
        "report: {} and {} plots written",
        shown(cfg, &path),
        report.plots.len()
    ))
}

/// Models in first-appearance order.
fn model_order(gains: &[GainCsvRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in gains {
        if !out.contains(&r.model) {
            out.push(r.model.clone());
        }
    }
    out
}

/// Defined gains of one model across clusters and voyages, largest first,
/// plotted against rank.
pub fn sorted_gain_curve(rows: &[VoyageGainCsvRow], model: &str) -> Vec<(f64, f64)> {
    let mut g: Vec<f64> = rows
        .iter()
        .filter(|r| r.model == model)
        .filter_map(|r| r.gain_pct)
        .collect();
    g.sort_by(|a, b| b.total_cmp(a));
    g.into_iter()
        .enumerate()
        .map(|(i, v)| (i as f64, v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(model: &str, gain: Option<f64>) -> VoyageGainCsvRow {
        VoyageGainCsvRow {
            cluster: "Top10Pr".into(),
            model: model.into(),
            voyage_id: "V".into(),
            weather_state: None,
            meas_score: 0.5,
            pred_score: None,
            gain_pct: gain,
        }
    }

    #[test]
    fn sorted_curve_non_increasing_and_skips_undefined() {
        let rows = vec![
            row("HMM", Some(1.0)),
            row("HMM", Some(-3.0)),
            row("kNN", Some(9.0)),
            row("HMM", None),
            row("HMM", Some(4.0)),
        ];
        let c = sorted_gain_curve(&rows, "HMM");
        assert_eq!(c, vec![(0.0, 4.0), (1.0, 1.0), (2.0, -3.0)]);
    }
}
