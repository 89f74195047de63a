use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use voyagekit_core::path_id::{
    align_labels, build_distance_matrix, confusion_and_metrics, fit_segment_gmms, gmm_rows,
    hierarchical_cluster, kmeans_rows, DistanceMatrix, Evaluation, Metric, Path as VoyagePath,
    PathLabeling,
};
use voyagekit_core::speed_opt::split_train_test;
use voyagekit_core::RouteSegmentSpec;

use super::{load_store, shown};
use crate::config::RunConfig;
use crate::runlog::RunLog;
use crate::tables::*;

pub const UNCLASSIFIED: &str = "unclassified";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KMeans,
    Gmm,
    Hierarchical,
    SegmentGmm,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::KMeans,
        Method::Gmm,
        Method::Hierarchical,
        Method::SegmentGmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::KMeans => "kmeans",
            Method::Gmm => "gmm",
            Method::Hierarchical => "hierarchical",
            Method::SegmentGmm => "segment-gmm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match Method::ALL
            .into_iter()
            .find(|m| m.name() == s.to_ascii_lowercase())
        {
            Some(m) => Ok(m),
            None => {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                bail!("unknown method `{s}`; valid methods: {}", valid.join(", "))
            }
        }
    }
}

pub fn run(cfg: &RunConfig, log: &RunLog) -> Result<()> {
    let method: Method = cfg.pathid.method.parse()?;
    let store = load_store(cfg)?;
    if store.voyages.len() < 2 {
        bail!(
            "path identification needs at least 2 voyages, store has {}",
            store.voyages.len()
        );
    }
    let paths: Vec<VoyagePath> = store.voyages.iter().map(VoyagePath::from_voyage).collect();
    let truth_path = cfg.input_or_synth(&cfg.inputs.labels, "labels.csv");
    let truth = match &truth_path {
        Some(p) => Some(read_labels(p)?),
        None => None,
    };

    let (predicted, truth_labels) = match method {
        Method::SegmentGmm => {
            let (Some(truth), Some(truth_path)) = (&truth, &truth_path) else {
                bail!("segment-gmm trains on truth labels; set inputs.labels");
            };
            let seg_path = cfg
                .input_or_synth(&cfg.inputs.segments, "segments.json")
                .context("segment-gmm needs a route segment spec; set inputs.segments")?;
            let spec = RouteSegmentSpec::from_json_file(&seg_path)
                .with_context(|| format!("loading segments {}", seg_path.display()))?;
            let ids: Vec<String> = paths.iter().map(|p| p.voyage_id.clone()).collect();
            let (train_ids, test_ids) =
                split_train_test(&ids, cfg.pathid.train_fraction, cfg.seed)?;
            let pick = |keep: &[String]| -> Vec<VoyagePath> {
                paths
                    .iter()
                    .filter(|p| keep.binary_search(&p.voyage_id).is_ok())
                    .cloned()
                    .collect()
            };
            let (train, test) = (pick(&train_ids), pick(&test_ids));
            let train_truth = truth_for(truth, &train_ids, truth_path)?;
            let test_truth = truth_for(truth, &test_ids, truth_path)?;
            let mut seg_cfg = cfg.pathid.segment.clone();
            seg_cfg.seed = cfg.seed;
            let models = fit_segment_gmms(&train, &train_truth, &spec, &seg_cfg)?;
            remove_stale(cfg, &[DISTANCE_MATRIX])?;
            log.info(format!(
                "pathid: discriminative segments {}",
                models.discriminative_names().join(", ")
            ))?;
            let (labeled, failed) = models.classify_all(&test)?;
            for id in &failed {
                log.warn(format!(
                    "{id}: touches no discriminative segment; labeled {UNCLASSIFIED}"
                ))?;
            }
            let map = labeled.as_map();
            let pred = PathLabeling::from_pairs(test_ids.iter().map(|id| {
                (
                    id.clone(),
                    map.get(id.as_str())
                        .map_or(UNCLASSIFIED.to_string(), |l| l.to_string()),
                )
            }))?;
            (pred, Some(test_truth))
        }
        _ => {
            let metric: Metric = cfg.pathid.metric.parse()?;
            let matrix = build_distance_matrix(&paths, metric)?;
            write_matrix(cfg, &matrix)?;
            let raw = match method {
                Method::KMeans => kmeans_rows(&matrix, cfg.pathid.clusters, cfg.seed)?,
                Method::Gmm => gmm_rows(&matrix, cfg.pathid.clusters, cfg.seed)?,
                _ => hierarchical_cluster(&matrix, cfg.pathid.cutoff)?,
            };
            match (&truth, &truth_path) {
                (Some(t), Some(p)) => {
                    let truth_labels = truth_for(t, matrix.ids(), p)?;
                    let aligned = align_labels(&raw, &truth_labels)?;
                    (aligned.labeling, Some(truth_labels))
                }
                _ => (raw, None),
            }
        }
    };

    let rows: Vec<LabelRow> = predicted
        .iter()
        .map(|(id, l)| LabelRow {
            voyage_id: id.to_string(),
            label: l.to_string(),
        })
        .collect();
    write_csv(&cfg.out.join(LABELS), &rows)?;
    let n_clusters = predicted.label_set().len();

    match truth_labels {
        Some(t) => {
            let ev = confusion_and_metrics(&t, &predicted)?;
            write_evaluation(cfg, &ev)?;
            let f1: Vec<String> = ev
                .per_class
                .iter()
                .map(|m| format!("{} {:.3}", m.class, m.f1))
                .collect();
            log.info(format!(
                "pathid: {method} labeled {} voyages into {n_clusters} groups; F1 {}",
                rows.len(),
                f1.join(", ")
            ))
        }
        None => {
            remove_stale(cfg, &[CONFUSION, METRICS])?;
            log.warn("no truth labels; confusion matrix and metrics skipped")?;
            log.info(format!(
                "pathid: {method} labeled {} voyages into {n_clusters} groups",
                rows.len()
            ))
        }
    }
}

/// Drop outputs of an earlier run that this run does not regenerate.
fn remove_stale(cfg: &RunConfig, names: &[&str]) -> Result<()> {
    for n in names {
        let p = cfg.out.join(n);
        if p.exists() {
            std::fs::remove_file(&p).with_context(|| format!("removing stale {}", p.display()))?;
        }
    }
    Ok(())
}

fn write_matrix(cfg: &RunConfig, m: &DistanceMatrix) -> Result<()> {
    let mut header = vec!["voyage_id".to_string()];
    header.extend(m.ids().iter().cloned());
    let records: Vec<Vec<String>> = (0..m.len())
        .map(|i| {
            let mut r = vec![m.ids()[i].clone()];
            r.extend(m.row(i).iter().map(f64::to_string));
            r
        })
        .collect();
    let path = cfg.out.join(DISTANCE_MATRIX);
    write_raw_csv(&path, &header, &records).with_context(|| shown(cfg, &path))
}

fn write_evaluation(cfg: &RunConfig, ev: &Evaluation) -> Result<()> {
    let classes = ev.confusion.classes();
    let mut header = vec!["actual".to_string()];
    header.extend(classes.iter().cloned());
    let records: Vec<Vec<String>> = classes
        .iter()
        .zip(ev.confusion.counts())
        .map(|(c, row)| {
            let mut r = vec![c.clone()];
            r.extend(row.iter().map(u64::to_string));
            r
        })
        .collect();
    write_raw_csv(&cfg.out.join(CONFUSION), &header, &records)?;
    let metrics: Vec<MetricRow> = ev
        .per_class
        .iter()
        .map(|m| MetricRow {
            class: m.class.clone(),
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            tn: m.tn,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        })
        .collect();
    write_csv(&cfg.out.join(METRICS), &metrics)
}
