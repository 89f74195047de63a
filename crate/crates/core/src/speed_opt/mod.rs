//! Speed-profile predictors and the efficiency-gain benchmark.

mod benchmark;
mod dtw;
pub mod hmm;
mod knn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Voyage;

pub use benchmark::{
    run_optimization_benchmark, standard_models, BenchmarkInputs, DtwOptimizer, GainReport,
    GainRow, HmmOptimizer, IdentityOptimizer, KnnOptimizer, RowStatus, SpeedOptimizer,
    StateGainRow, TrainedOptimizer, VoyageGain,
};
pub use dtw::{dtw_distance, predict_1nn_dtw, resample_linear};
pub use hmm::{
    fit_weather_hmm, hmm_predict, HmmConfig, SpeedStats, WeatherState, WeatherStateModel,
};
pub use knn::{knn_predict, KnnSpeedModel};

/// Speed over ground per sample of one voyage, m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub voyage_id: String,
    sog: Vec<f64>,
}

impl SpeedProfile {
    pub fn new(voyage_id: impl Into<String>, sog: Vec<f64>) -> Result<Self> {
        let voyage_id = voyage_id.into();
        if let Some(bad) = sog.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!(
                "profile {voyage_id} has invalid speed {bad}"
            )));
        }
        Ok(SpeedProfile { voyage_id, sog })
    }

    /// The measured profile of a voyage.
    pub fn measured(v: &Voyage) -> Self {
        SpeedProfile {
            voyage_id: v.voyage_id.clone(),
            sog: v.sog(),
        }
    }

    pub fn sog(&self) -> &[f64] {
        &self.sog
    }

    pub fn len(&self) -> usize {
        self.sog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sog.is_empty()
    }

    pub fn into_sog(self) -> Vec<f64> {
        self.sog
    }
}

/// Seeded voyage-level split; returns (train, test) ids, each sorted.
///
/// The training side gets `round(fraction * n)` voyages, at least one of each
/// side when `n >= 2`.
pub fn split_train_test(
    ids: &[String],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    if ids.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 voyages to split".into(),
        ));
    }
    let mut shuffled = ids.to_vec();
    shuffled.sort();
    shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((train_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let mut test = shuffled.split_off(n_train);
    shuffled.sort();
    test.sort();
    Ok((shuffled, test))
}
