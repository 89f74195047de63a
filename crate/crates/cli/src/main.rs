//! `voyagekit`: ingest, score, optimize, identify paths and report.

mod commands;
mod config;
mod runlog;
mod svg;
mod tables;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;
use runlog::{Level, RunLog};

#[derive(Debug, Parser)]
#[command(
    name = "voyagekit",
    version,
    about = "Voyage efficiency, speed optimization and path identification"
)]
struct Cli {
    /// JSON run configuration; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the synthetic fleet, splits and model fits.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory shared by all commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic fleet (onboard CSV, weather grids, segments, labels) to <out>/synth.
    Synth {
        #[arg(long)]
        voyages_per_branch: Option<usize>,
    },
    /// Parse onboard CSVs, split into voyages, resample, attach weather; writes <out>/voyages.json.
    Ingest,
    /// Score voyages and build percentile clusters; writes summaries.csv.
    Score,
    /// Benchmark the speed-profile models; writes gains, weather gains and predicted profiles.
    Optimize {
        /// Comma-separated model names (kNN, 1NN-DTW, HMM, Identity).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Skip the per-voyage profile plots.
        #[arg(long)]
        no_plots: bool,
    },
    /// Identify vessel paths; writes labels, distance matrix and, with truth labels, metrics.
    Pathid {
        /// kmeans, gmm, hierarchical or segment-gmm.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        cutoff: Option<f64>,
        #[arg(long)]
        clusters: Option<usize>,
        /// euclidean or haversine.
        #[arg(long)]
        metric: Option<String>,
        /// Truth labels CSV (voyage_id,label).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Consolidate outputs into report.json with summary plots.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Ingest => "ingest",
            Command::Score => "score",
            Command::Optimize { .. } => "optimize",
            Command::Pathid { .. } => "pathid",
            Command::Report => "report",
        }
    }

    fn apply(&self, cfg: &mut RunConfig) {
        match self {
            Command::Synth { voyages_per_branch } => {
                if let Some(n) = voyages_per_branch {
                    cfg.synth.voyages_per_branch = *n;
                }
            }
            Command::Optimize { models, no_plots } => {
                if let Some(m) = models {
                    cfg.optimize.models = m.clone();
                }
                if *no_plots {
                    cfg.optimize.plots = false;
                }
            }
            Command::Pathid {
                method,
                cutoff,
                clusters,
                metric,
                truth,
            } => {
                let p = &mut cfg.pathid;
                if let Some(m) = method {
                    p.method = m.clone();
                }
                if let Some(c) = cutoff {
                    p.cutoff = *c;
                }
                if let Some(k) = clusters {
                    p.clusters = *k;
                }
                if let Some(m) = metric {
                    p.metric = m.clone();
                }
                if let Some(t) = truth {
                    cfg.inputs.labels = Some(t.clone());
                }
            }
            Command::Ingest | Command::Score | Command::Report => {}
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref(), std::env::vars())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    cli.command.apply(&mut cfg);
    let log = RunLog::open(&cfg.out, cli.command.name())?;
    let result = cfg.validate().and_then(|()| match cli.command {
        Command::Synth { .. } => commands::synth::run(&cfg, &log),
        Command::Ingest => commands::ingest::run(&cfg, &log),
        Command::Score => commands::score::run(&cfg, &log),
        Command::Optimize { .. } => commands::optimize::run(&cfg, &log),
        Command::Pathid { .. } => commands::pathid::run(&cfg, &log),
        Command::Report => commands::report::run(&cfg, &log),
    });
    if let Err(e) = &result {
        log.record(Level::Error, &format!("{e:#}"))?;
    }
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
