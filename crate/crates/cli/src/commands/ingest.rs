use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use voyagekit_core::geo::{split_into_voyages, SplitConfig};
use voyagekit_core::ingest::{
    attach_weather, load_weather_dir, parse_onboard_csv, resample_voyage, VoyageStore,
};
use voyagekit_core::RouteSegmentSpec;

use super::shown;
use crate::config::RunConfig;
use crate::runlog::RunLog;

pub fn run(cfg: &RunConfig, log: &RunLog) -> Result<()> {
    let onboard_dir = cfg
        .input_or_synth(&cfg.inputs.onboard_dir, "onboard")
        .context("no onboard input: set inputs.onboard_dir or run `synth` first")?;
    let mut files: Vec<PathBuf> = std::fs::read_dir(&onboard_dir)
        .with_context(|| format!("listing {}", onboard_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no onboard CSV files in {}", onboard_dir.display());
    }

    let mut samples = Vec::new();
    for f in &files {
        let parsed = parse_onboard_csv(f).with_context(|| format!("parsing {}", f.display()))?;
        if parsed.skipped > 0 {
            log.warn(format!(
                "{}: skipped {} invalid rows",
                shown(cfg, f),
                parsed.skipped
            ))?;
        }
        samples.extend(parsed.samples);
    }
    samples.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    if let Some(seg) = cfg.input_or_synth(&cfg.inputs.segments, "segments.json") {
        RouteSegmentSpec::from_json_file(&seg)
            .with_context(|| format!("loading segments {}", seg.display()))?;
    }
    let ports = match &cfg.inputs.port_regions {
        Some(p) => RouteSegmentSpec::from_json_file(p)
            .with_context(|| format!("loading port regions {}", p.display()))?,
        None => RouteSegmentSpec::default(),
    };
    let split_cfg = SplitConfig {
        gap_threshold: cfg.ingest.gap_threshold,
        dwell_min_secs: cfg.ingest.dwell_min_secs,
        dwell_max_sog: cfg.ingest.dwell_max_sog,
    };
    let split = split_into_voyages(&samples, &split_cfg, &ports)?;
    let mut dropped = split.dropped.len();
    if dropped > 0 {
        log.warn(format!(
            "{dropped} samples in fragments too short to form a voyage were dropped"
        ))?;
    }

    let grids = match cfg.input_or_synth(&cfg.inputs.weather_dir, "weather") {
        Some(dir) => load_weather_dir(&dir)
            .with_context(|| format!("loading weather grids from {}", dir.display()))?,
        None => Vec::new(),
    };
    let mut voyages = Vec::with_capacity(split.voyages.len());
    for v in &split.voyages {
        let v = resample_voyage(v, cfg.ingest.resample_period)?;
        if grids.is_empty() {
            voyages.push(v);
            continue;
        }
        let att = attach_weather(&v, &grids);
        dropped += att.dropped;
        match att.voyage {
            Some(kept) => {
                if att.dropped > 0 {
                    log.warn(format!(
                        "{}: {} samples outside the weather grids dropped",
                        v.voyage_id, att.dropped
                    ))?;
                }
                voyages.push(kept);
            }
            None => log.warn(format!(
                "{}: too few samples inside the weather grids; voyage dropped",
                v.voyage_id
            ))?,
        }
    }

    let store = VoyageStore { voyages };
    let path = cfg.store_path();
    store.write(&path)?;
    log.info(format!(
        "ingest: {} voyages from {} samples ({} grids), {} dropped samples, store {}",
        store.voyages.len(),
        samples.len(),
        grids.len(),
        dropped,
        shown(cfg, &path)
    ))
}
