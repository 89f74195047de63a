use anyhow::{bail, Result};
use voyagekit_core::efficiency::{
    build_percentile_clusters, normalize_and_score, voyage_totals, PercentileCluster,
};

use super::load_store;
use crate::config::RunConfig;
use crate::runlog::RunLog;
use crate::tables::{write_csv, SummaryRow, SUMMARIES};

pub fn run(cfg: &RunConfig, log: &RunLog) -> Result<()> {
    let store = load_store(cfg)?;
    if store.voyages.is_empty() {
        bail!("voyage store is empty");
    }
    let totals = store
        .voyages
        .iter()
        .map(|v| Ok((v.voyage_id.clone(), voyage_totals(v)?)))
        .collect::<voyagekit_core::Result<Vec<_>>>()?;
    let summaries = normalize_and_score(&totals)?;
    let clusters = build_percentile_clusters(&summaries)?;
    let rows: Vec<SummaryRow> = summaries
        .iter()
        .map(|s| {
            let member = |c| clusters.contains(c, &s.voyage_id);
            SummaryRow {
                voyage_id: s.voyage_id.clone(),
                fuel_total: s.fuel_total,
                time_total: s.time_total,
                fuel_norm: s.fuel_norm,
                time_norm: s.time_norm,
                eff_score: s.eff_score,
                top10: member(PercentileCluster::Top10),
                top25: member(PercentileCluster::Top25),
                top50: member(PercentileCluster::Top50),
                top75: member(PercentileCluster::Top75),
            }
        })
        .collect();
    write_csv(&cfg.out.join(SUMMARIES), &rows)?;
    let sizes: Vec<String> = PercentileCluster::ALL
        .iter()
        .map(|&c| format!("{} {}", c.label(), clusters.get(c).len()))
        .collect();
    log.info(format!(
        "score: {} voyages; clusters {}",
        rows.len(),
        sizes.join(", ")
    ))
}
