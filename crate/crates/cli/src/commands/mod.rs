pub mod ingest;
pub mod optimize;
pub mod pathid;
pub mod report;
pub mod score;
pub mod synth;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use voyagekit_core::ingest::VoyageStore;

use crate::config::RunConfig;

/// `path` relative to the output directory when it lies inside it, so
/// messages do not depend on where the run was placed.
pub fn shown(cfg: &RunConfig, path: &Path) -> String {
    path.strip_prefix(&cfg.out)
        .unwrap_or(path)
        .display()
        .to_string()
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(path.to_path_buf())
}

pub fn load_store(cfg: &RunConfig) -> Result<VoyageStore> {
    let path = cfg.store_path();
    if !path.exists() {
        anyhow::bail!(
            "voyage store {} not found; run `ingest` first",
            path.display()
        );
    }
    VoyageStore::read(&path).with_context(|| format!("reading {}", path.display()))
}
