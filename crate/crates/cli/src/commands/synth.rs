use anyhow::{Context, Result};
use voyagekit_core::synth::{generate_fleet, write_fleet};

use super::shown;
use crate::config::RunConfig;
use crate::runlog::RunLog;

pub fn run(cfg: &RunConfig, log: &RunLog) -> Result<()> {
    let mut spec = cfg.synth.clone();
    spec.seed = cfg.seed;
    let fleet = generate_fleet(&spec).context("generating synthetic fleet")?;
    let dir = cfg.synth_dir();
    write_fleet(&fleet, &dir)?;
    log.info(format!(
        "synth: {} voyages on {} branches (seed {}) written to {}",
        fleet.voyages.len(),
        spec.branches.len(),
        spec.seed,
        shown(cfg, &dir)
    ))
}
