use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::efficiency::{
    efficiency_gain, estimate_fuel_time, FuelRateEstimator, PercentileCluster, PercentileClusters,
    ScoreScale,
};
use crate::error::{Error, Result};
use crate::geo::{channels, Voyage};
use crate::stats::{mean, sample_std};

use super::dtw::predict_1nn_dtw;
use super::hmm::{fit_weather_hmm, hmm_predict, HmmConfig, WeatherState, WeatherStateModel};
use super::knn::KnnSpeedModel;
use super::SpeedProfile;

/// A speed-profile model that can be trained on a cluster of voyages.
pub trait SpeedOptimizer: Send + Sync {
    fn name(&self) -> &str;
    fn train(&self, cluster: &[&Voyage]) -> Result<Box<dyn TrainedOptimizer>>;
}

pub trait TrainedOptimizer: Send + Sync {
    fn predict(&self, test: &Voyage) -> Result<SpeedProfile>;
}

#[derive(Debug, Clone)]
pub struct KnnOptimizer {
    pub channels: Vec<String>,
    pub k: usize,
}

impl Default for KnnOptimizer {
    fn default() -> Self {
        KnnOptimizer {
            channels: vec![
                channels::WIND_SPEED_ONB.into(),
                channels::WAVE_HEIGHT.into(),
            ],
            k: 5,
        }
    }
}

impl TrainedOptimizer for KnnSpeedModel {
    fn predict(&self, test: &Voyage) -> Result<SpeedProfile> {
        KnnSpeedModel::predict(self, test)
    }
}

impl SpeedOptimizer for KnnOptimizer {
    fn name(&self) -> &str {
        "kNN"
    }

    fn train(&self, cluster: &[&Voyage]) -> Result<Box<dyn TrainedOptimizer>> {
        Ok(Box::new(KnnSpeedModel::fit(
            cluster.iter().copied(),
            &self.channels,
            self.k,
        )?))
    }
}

#[derive(Debug, Clone, Default)]
pub struct DtwOptimizer;

struct DtwTrained(Vec<SpeedProfile>);

impl TrainedOptimizer for DtwTrained {
    fn predict(&self, test: &Voyage) -> Result<SpeedProfile> {
        predict_1nn_dtw(&SpeedProfile::measured(test), &self.0)
    }
}

impl SpeedOptimizer for DtwOptimizer {
    fn name(&self) -> &str {
        "1NN-DTW"
    }

    fn train(&self, cluster: &[&Voyage]) -> Result<Box<dyn TrainedOptimizer>> {
        if cluster.is_empty() {
            return Err(Error::InsufficientData("1NN-DTW cluster is empty".into()));
        }
        Ok(Box::new(DtwTrained(
            cluster.iter().map(|v| SpeedProfile::measured(v)).collect(),
        )))
    }
}

#[derive(Debug, Clone, Default)]
pub struct HmmOptimizer {
    pub config: HmmConfig,
}

impl TrainedOptimizer for WeatherStateModel {
    fn predict(&self, test: &Voyage) -> Result<SpeedProfile> {
        hmm_predict(test, self)
    }
}

impl SpeedOptimizer for HmmOptimizer {
    fn name(&self) -> &str {
        "HMM"
    }

    fn train(&self, cluster: &[&Voyage]) -> Result<Box<dyn TrainedOptimizer>> {
        Ok(Box::new(fit_weather_hmm(
            cluster.iter().copied(),
            &self.config,
        )?))
    }
}

/// Returns every test voyage's measured profile unchanged.
#[derive(Debug, Clone, Default)]
pub struct IdentityOptimizer;

struct Identity;

impl TrainedOptimizer for Identity {
    fn predict(&self, test: &Voyage) -> Result<SpeedProfile> {
        Ok(SpeedProfile::measured(test))
    }
}

impl SpeedOptimizer for IdentityOptimizer {
    fn name(&self) -> &str {
        "Identity"
    }

    fn train(&self, _cluster: &[&Voyage]) -> Result<Box<dyn TrainedOptimizer>> {
        Ok(Box::new(Identity))
    }
}

/// kNN, 1NN-DTW and HMM with default settings; the HMM uses `seed`.
pub fn standard_models(seed: u64) -> Vec<Box<dyn SpeedOptimizer>> {
    vec![
        Box::new(KnnOptimizer::default()),
        Box::new(DtwOptimizer),
        Box::new(HmmOptimizer {
            config: HmmConfig::default().with_seed(seed),
        }),
    ]
}

pub struct BenchmarkInputs<'a> {
    pub clusters: &'a PercentileClusters,
    /// Voyages the cluster ids refer to.
    pub training: &'a [Voyage],
    pub test: &'a [Voyage],
    pub estimator: &'a dyn FuelRateEstimator,
    /// Normalization shared by measured and predicted totals.
    pub scale: ScoreScale,
    /// Configuration of the decoder that labels test voyages with a weather state.
    pub state_decoder: HmmConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    /// The model could not be trained on this cluster.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub cluster: PercentileCluster,
    pub model: String,
    pub status: RowStatus,
    pub avg_gain_pct: Option<f64>,
    pub improved_count: usize,
    pub evaluated: usize,
    /// Voyages whose measured score was not positive.
    pub undefined: usize,
    /// Voyages the trained model or estimator could not handle.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGainRow {
    pub model: String,
    pub state: WeatherState,
    pub avg: Option<f64>,
    pub std: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoyageGain {
    pub cluster: PercentileCluster,
    pub model: String,
    pub voyage_id: String,
    pub state: Option<WeatherState>,
    pub meas_score: f64,
    pub pred_score: Option<f64>,
    pub gain_pct: Option<f64>,
    #[serde(skip)]
    pub predicted: Option<SpeedProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub rows: Vec<GainRow>,
    pub states: Vec<StateGainRow>,
    pub voyages: Vec<VoyageGain>,
}

impl GainReport {
    pub fn row(&self, cluster: PercentileCluster, model: &str) -> Option<&GainRow> {
        self.rows
            .iter()
            .find(|r| r.cluster == cluster && r.model == model)
    }

    /// Mean of the defined per-cluster averages of one model.
    pub fn model_average(&self, model: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.model == model)
            .filter_map(|r| r.avg_gain_pct)
            .collect();
        (!v.is_empty()).then(|| mean(&v))
    }
}

/// Dominant decoded weather state of each test voyage (ties to the calmer state).
fn dominant_states(
    test: &[Voyage],
    training: &[Voyage],
    cfg: &HmmConfig,
) -> Vec<Option<WeatherState>> {
    let Ok(model) = fit_weather_hmm(training.iter(), cfg) else {
        return vec![None; test.len()];
    };
    test.par_iter()
        .map(|v| {
            let states = model.decode(v).ok()?;
            let mut counts = [0usize; 3];
            for s in states {
                counts[s.index()] += 1;
            }
            let best = (0..3).max_by_key(|&i| (counts[i], std::cmp::Reverse(i)))?;
            Some(WeatherState::from_index(best))
        })
        .collect()
}

/// Train every model on every cluster and score its profiles on the test voyages.
pub fn run_optimization_benchmark(
    inputs: &BenchmarkInputs<'_>,
    models: &[Box<dyn SpeedOptimizer>],
) -> Result<GainReport> {
    if inputs.test.is_empty() {
        return Err(Error::invalid("benchmark needs at least one test voyage"));
    }
    if models.is_empty() {
        return Err(Error::invalid("benchmark needs at least one model"));
    }
    let by_id: BTreeMap<&str, &Voyage> = inputs
        .training
        .iter()
        .map(|v| (v.voyage_id.as_str(), v))
        .collect();
    let test_ids: HashSet<&str> = inputs.test.iter().map(|v| v.voyage_id.as_str()).collect();
    let mut members: Vec<Vec<&Voyage>> = Vec::new();
    for c in PercentileCluster::ALL {
        let mut vs = Vec::new();
        for id in inputs.clusters.get(c) {
            if test_ids.contains(id.as_str()) {
                return Err(Error::invalid(format!(
                    "test voyage {id} is also in cluster {c}"
                )));
            }
            let v = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::invalid(format!("cluster {c} names unknown voyage {id}")))?;
            vs.push(*v);
        }
        members.push(vs);
    }

    // Measured scores do not depend on the model.
    let meas: Vec<Result<f64>> = inputs
        .test
        .par_iter()
        .map(|v| {
            let t = estimate_fuel_time(&v.sog(), v, inputs.estimator)?;
            Ok(inputs.scale.score(&t))
        })
        .collect();
    let states = dominant_states(inputs.test, inputs.training, &inputs.state_decoder);

    let cells: Vec<(usize, usize)> = (0..PercentileCluster::ALL.len())
        .flat_map(|c| (0..models.len()).map(move |m| (c, m)))
        .collect();
    let results: Vec<(GainRow, Vec<VoyageGain>)> = cells
        .par_iter()
        .map(|&(ci, mi)| {
            let cluster = PercentileCluster::ALL[ci];
            let model = &models[mi];
            let mut row = GainRow {
                cluster,
                model: model.name().to_string(),
                status: RowStatus::Ok,
                avg_gain_pct: None,
                improved_count: 0,
                evaluated: 0,
                undefined: 0,
                failed: 0,
            };
            let trained = match model.train(&members[ci]) {
                Ok(t) => t,
                Err(_) => {
                    row.status = RowStatus::Insufficient;
                    return (row, Vec::new());
                }
            };
            let per_voyage: Vec<VoyageGain> = inputs
                .test
                .par_iter()
                .enumerate()
                .map(|(i, v)| {
                    let meas_score = meas[i].as_ref().ok().copied();
                    let predicted = trained.predict(v).ok();
                    let pred_score = match (&predicted, meas_score) {
                        (Some(p), Some(_)) => estimate_fuel_time(p.sog(), v, inputs.estimator)
                            .ok()
                            .map(|t| inputs.scale.score(&t)),
                        _ => None,
                    };
                    let gain_pct = match (meas_score, pred_score) {
                        (Some(m), Some(p)) => efficiency_gain(m, p).ok(),
                        _ => None,
                    };
                    VoyageGain {
                        cluster,
                        model: model.name().to_string(),
                        voyage_id: v.voyage_id.clone(),
                        state: states[i],
                        meas_score: meas_score.unwrap_or(f64::NAN),
                        pred_score,
                        gain_pct,
                        predicted,
                    }
                })
                .collect();
            let mut gains = Vec::new();
            for g in &per_voyage {
                match (g.pred_score, g.gain_pct) {
                    (Some(_), Some(x)) => gains.push(x),
                    (Some(_), None) => row.undefined += 1,
                    _ => row.failed += 1,
                }
            }
            row.evaluated = gains.len();
            row.improved_count = gains.iter().filter(|g| **g > 0.0).count();
            row.avg_gain_pct = (!gains.is_empty()).then(|| mean(&gains));
            (row, per_voyage)
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut voyages = Vec::new();
    for (r, v) in results {
        rows.push(r);
        voyages.extend(v);
    }

    let mut states_out = Vec::new();
    for m in models {
        for st in WeatherState::ALL {
            let g: Vec<f64> = voyages
                .iter()
                .filter(|v| v.model == m.name() && v.state == Some(st))
                .filter_map(|v| v.gain_pct)
                .collect();
            states_out.push(StateGainRow {
                model: m.name().to_string(),
                state: st,
                avg: (!g.is_empty()).then(|| mean(&g)),
                std: (!g.is_empty()).then(|| sample_std(&g)),
                n: g.len(),
            });
        }
    }
    Ok(GainReport {
        rows,
        states: states_out,
        voyages,
    })
}
