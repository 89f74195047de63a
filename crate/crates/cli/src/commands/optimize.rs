use std::collections::BTreeMap;

use anyhow::{bail, Context, Result};
use voyagekit_core::efficiency::{
    build_percentile_clusters, normalize_and_score, train_estimator, voyage_totals, FeatureCase,
    PercentileCluster, ScoreScale,
};
use voyagekit_core::speed_opt::{
    run_optimization_benchmark, split_train_test, BenchmarkInputs, DtwOptimizer, GainReport,
    HmmConfig, HmmOptimizer, IdentityOptimizer, KnnOptimizer, RowStatus, SpeedOptimizer,
};
use voyagekit_core::Voyage;

use super::{ensure_dir, load_store, shown};
use crate::config::RunConfig;
use crate::runlog::RunLog;
use crate::svg::{chart, Series, Style};
use crate::tables::*;

pub const MODEL_NAMES: [&str; 4] = ["kNN", "1NN-DTW", "HMM", "Identity"];

/// Build an optimizer from its report name (case-insensitive).
pub fn model_by_name(name: &str, cfg: &RunConfig) -> Result<Box<dyn SpeedOptimizer>> {
    let model: Box<dyn SpeedOptimizer> = match name.to_ascii_lowercase().as_str() {
        "knn" => Box::new(KnnOptimizer {
            k: cfg.optimize.k,
            ..Default::default()
        }),
        "1nn-dtw" | "dtw" => Box::new(DtwOptimizer),
        "hmm" => Box::new(HmmOptimizer {
            config: HmmConfig::default().with_seed(cfg.seed),
        }),
        "identity" => Box::new(IdentityOptimizer),
        _ => bail!(
            "unknown model `{name}`; valid models: {}",
            MODEL_NAMES.join(", ")
        ),
    };
    Ok(model)
}

pub fn run(cfg: &RunConfig, log: &RunLog) -> Result<()> {
    let models = cfg
        .optimize
        .models
        .iter()
        .map(|m| model_by_name(m, cfg))
        .collect::<Result<Vec<_>>>()?;
    if models.is_empty() {
        bail!("optimize.models is empty");
    }
    let case: FeatureCase = cfg.optimize.feature_case.parse()?;
    let store = load_store(cfg)?;
    let ids: Vec<String> = store.voyages.iter().map(|v| v.voyage_id.clone()).collect();
    let (train_ids, test_ids) = split_train_test(&ids, cfg.optimize.train_fraction, cfg.seed)?;
    let pick = |keep: &[String]| -> Vec<Voyage> {
        store
            .voyages
            .iter()
            .filter(|v| keep.binary_search(&v.voyage_id).is_ok())
            .cloned()
            .collect()
    };
    let (training, test) = (pick(&train_ids), pick(&test_ids));
    let mut split_rows: Vec<SplitRow> = ids
        .iter()
        .map(|id| SplitRow {
            voyage_id: id.clone(),
            split: if train_ids.binary_search(id).is_ok() {
                "train"
            } else {
                "test"
            }
            .into(),
        })
        .collect();
    split_rows.sort_by(|a, b| a.voyage_id.cmp(&b.voyage_id));
    write_csv(&cfg.out.join(SPLIT), &split_rows)?;

    let totals = training
        .iter()
        .map(|v| Ok((v.voyage_id.clone(), voyage_totals(v)?)))
        .collect::<voyagekit_core::Result<Vec<_>>>()?;
    let clusters = build_percentile_clusters(&normalize_and_score(&totals)?)?;
    let estimator =
        train_estimator(training.iter(), case).context("training the fuel estimator")?;
    let all_totals = store
        .voyages
        .iter()
        .map(voyage_totals)
        .collect::<voyagekit_core::Result<Vec<_>>>()?;
    let inputs = BenchmarkInputs {
        clusters: &clusters,
        training: &training,
        test: &test,
        estimator: &estimator,
        scale: ScoreScale::from_totals(all_totals.iter())?,
        state_decoder: HmmConfig::default().with_seed(cfg.seed),
    };
    let report = run_optimization_benchmark(&inputs, &models)?;

    for r in report
        .rows
        .iter()
        .filter(|r| r.status == RowStatus::Insufficient)
    {
        log.warn(format!(
            "{} on {}: insufficient cluster data, row marked insufficient",
            r.model,
            r.cluster.label()
        ))?;
    }
    write_tables(cfg, &report)?;
    write_profiles(cfg, &report, &test)?;

    let averages: Vec<String> = models
        .iter()
        .map(|m| match report.model_average(m.name()) {
            Some(a) => format!("{} {a:.2}%", m.name()),
            None => format!("{} n/a", m.name()),
        })
        .collect();
    log.info(format!(
        "optimize: {} training / {} test voyages; average gain {}",
        training.len(),
        test.len(),
        averages.join(", ")
    ))
}

fn status_name(s: RowStatus) -> &'static str {
    match s {
        RowStatus::Ok => "ok",
        RowStatus::Insufficient => "insufficient",
    }
}

fn write_tables(cfg: &RunConfig, report: &GainReport) -> Result<()> {
    let rows: Vec<GainCsvRow> = report
        .rows
        .iter()
        .map(|r| GainCsvRow {
            cluster: r.cluster.label().into(),
            model: r.model.clone(),
            status: status_name(r.status).into(),
            eff_gain_pct: r.avg_gain_pct,
            improved_count: r.improved_count,
            evaluated: r.evaluated,
            undefined: r.undefined,
            failed: r.failed,
        })
        .collect();
    write_csv(&cfg.out.join(GAINS), &rows)?;
    let states: Vec<WeatherGainCsvRow> = report
        .states
        .iter()
        .map(|s| WeatherGainCsvRow {
            model: s.model.clone(),
            weather_state: s.state.to_string(),
            avg: s.avg,
            std: s.std,
            n: s.n,
        })
        .collect();
    write_csv(&cfg.out.join(WEATHER_GAINS), &states)?;
    let voyages: Vec<VoyageGainCsvRow> = report
        .voyages
        .iter()
        .map(|v| VoyageGainCsvRow {
            cluster: v.cluster.label().into(),
            model: v.model.clone(),
            voyage_id: v.voyage_id.clone(),
            weather_state: v.state.map(|s| s.to_string()),
            meas_score: v.meas_score,
            pred_score: v.pred_score,
            gain_pct: v.gain_pct,
        })
        .collect();
    write_csv(&cfg.out.join(VOYAGE_GAINS), &voyages)
}

/// One CSV per test voyage with the measured profile and every prediction,
/// plus an SVG of measured against the Top10 predictions when enabled.
fn write_profiles(cfg: &RunConfig, report: &GainReport, test: &[Voyage]) -> Result<()> {
    let dir = ensure_dir(&cfg.out.join(PROFILES_DIR))?;
    let plot_dir = if cfg.optimize.plots {
        Some(ensure_dir(&cfg.out.join(PLOTS_DIR))?)
    } else {
        None
    };
    let mut by_voyage: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for g in &report.voyages {
        by_voyage.entry(g.voyage_id.as_str()).or_default().push(g);
    }
    for v in test {
        let gains = by_voyage
            .get(v.voyage_id.as_str())
            .cloned()
            .unwrap_or_default();
        let t0 = v.samples()[0].timestamp;
        let hours: Vec<f64> = v
            .samples()
            .iter()
            .map(|s| (s.timestamp - t0) / 3600.0)
            .collect();
        let measured = v.sog();

        let mut header = vec!["hours".to_string(), "measured".to_string()];
        header.extend(
            gains
                .iter()
                .map(|g| format!("{}@{}", g.model, g.cluster.label())),
        );
        let records: Vec<Vec<String>> = (0..v.len())
            .map(|i| {
                let mut r = vec![hours[i].to_string(), measured[i].to_string()];
                r.extend(gains.iter().map(|g| {
                    g.predicted
                        .as_ref()
                        .and_then(|p| p.sog().get(i))
                        .map(f64::to_string)
                        .unwrap_or_default()
                }));
                r
            })
            .collect();
        write_raw_csv(&dir.join(format!("{}.csv", v.voyage_id)), &header, &records)?;

        if let Some(plot_dir) = &plot_dir {
            let mut series = vec![Series::new("measured", zip(&hours, &measured), Style::Line)];
            for g in gains
                .iter()
                .filter(|g| g.cluster == PercentileCluster::Top10)
            {
                if let Some(p) = &g.predicted {
                    series.push(Series::new(
                        g.model.clone(),
                        zip(&hours, p.sog()),
                        Style::Line,
                    ));
                }
            }
            let svg = chart(
                &format!(
                    "{}: measured vs predicted SOG (Top10Pr models)",
                    v.voyage_id
                ),
                "hours since departure",
                "SOG (m/s)",
                &series,
            );
            let path = plot_dir.join(format!("profile_{}.svg", v.voyage_id));
            std::fs::write(&path, svg).with_context(|| format!("writing {}", shown(cfg, &path)))?;
        }
    }
    Ok(())
}

fn zip(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_resolve_case_insensitively() {
        let cfg = RunConfig::default();
        for n in MODEL_NAMES {
            assert_eq!(model_by_name(&n.to_uppercase(), &cfg).unwrap().name(), n);
        }
        let err = model_by_name("lstm", &cfg).err().unwrap().to_string();
        assert!(err.contains("lstm") && err.contains("1NN-DTW"));
    }
}
