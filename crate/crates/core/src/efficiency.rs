//! Voyage totals, efficiency scores, percentile clusters and the fuel-rate estimator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{channels, SamplePoint, Voyage};
use crate::stats::KnnRegressor;

/// Speed floor (m/s) applied when rescaling step durations.
pub const MIN_SPEED_FOR_DURATION: f64 = 0.1;
/// Minimum number of training samples for [`train_estimator`].
pub const MIN_TRAINING_SAMPLES: usize = 100;
/// Neighbour count of the default fuel-rate estimator.
pub const ESTIMATOR_K: usize = 5;

/// Total fuel (liters) and elapsed time (hours) of one voyage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoyageTotals {
    pub fuel_total: f64,
    pub time_total: f64,
}

/// Left-rectangle integration of fuel rate over the sample intervals.
pub fn totals_from_samples(samples: &[SamplePoint]) -> Result<VoyageTotals> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples to integrate, got {}",
            samples.len()
        )));
    }
    let fuel_total = samples
        .windows(2)
        .map(|w| w[0].fuel_rate * (w[1].timestamp - w[0].timestamp) / 3600.0)
        .sum();
    let time_total = (samples[samples.len() - 1].timestamp - samples[0].timestamp) / 3600.0;
    Ok(VoyageTotals {
        fuel_total,
        time_total,
    })
}

pub fn voyage_totals(v: &Voyage) -> Result<VoyageTotals> {
    totals_from_samples(v.samples())
}

/// One minus the harmonic mean of normalized fuel and time.
///
/// Defined as 1 at `f = t = 0`.
pub fn eff_score(fuel_norm: f64, time_norm: f64) -> f64 {
    let sum = fuel_norm + time_norm;
    if sum == 0.0 {
        return 1.0;
    }
    1.0 - 2.0 * fuel_norm * time_norm / sum
}

/// Fleet maxima used to normalize totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreScale {
    pub max_fuel: f64,
    pub max_time: f64,
}

impl ScoreScale {
    pub fn from_totals<'a>(totals: impl IntoIterator<Item = &'a VoyageTotals>) -> Result<Self> {
        let (mut max_fuel, mut max_time) = (0.0f64, 0.0f64);
        let mut n = 0;
        for t in totals {
            max_fuel = max_fuel.max(t.fuel_total);
            max_time = max_time.max(t.time_total);
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyInput("no voyages to score".into()));
        }
        if !(max_fuel > 0.0) || !(max_time > 0.0) || !max_fuel.is_finite() || !max_time.is_finite()
        {
            return Err(Error::DegenerateFleet(format!(
                "fleet maxima must be positive (fuel {max_fuel}, time {max_time})"
            )));
        }
        Ok(ScoreScale { max_fuel, max_time })
    }

    pub fn score(&self, t: &VoyageTotals) -> f64 {
        eff_score(t.fuel_total / self.max_fuel, t.time_total / self.max_time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoyageSummary {
    pub voyage_id: String,
    pub fuel_total: f64,
    pub time_total: f64,
    pub fuel_norm: f64,
    pub time_norm: f64,
    pub eff_score: f64,
}

/// Normalize totals by the fleet maxima and score each voyage.
pub fn normalize_and_score(totals: &[(String, VoyageTotals)]) -> Result<Vec<VoyageSummary>> {
    let scale = ScoreScale::from_totals(totals.iter().map(|(_, t)| t))?;
    Ok(totals
        .iter()
        .map(|(id, t)| {
            let fuel_norm = t.fuel_total / scale.max_fuel;
            let time_norm = t.time_total / scale.max_time;
            VoyageSummary {
                voyage_id: id.clone(),
                fuel_total: t.fuel_total,
                time_total: t.time_total,
                fuel_norm,
                time_norm,
                eff_score: eff_score(fuel_norm, time_norm),
            }
        })
        .collect())
}

/// The four nested percentile clusters, listed from most to least selective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PercentileCluster {
    Top10,
    Top25,
    Top50,
    Top75,
}

impl PercentileCluster {
    pub const ALL: [PercentileCluster; 4] = [
        PercentileCluster::Top10,
        PercentileCluster::Top25,
        PercentileCluster::Top50,
        PercentileCluster::Top75,
    ];

    pub fn percent(self) -> usize {
        match self {
            PercentileCluster::Top10 => 10,
            PercentileCluster::Top25 => 25,
            PercentileCluster::Top50 => 50,
            PercentileCluster::Top75 => 75,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PercentileCluster::Top10 => "Top10Pr",
            PercentileCluster::Top25 => "Top25Pr",
            PercentileCluster::Top50 => "Top50Pr",
            PercentileCluster::Top75 => "Top75Pr",
        }
    }

    /// `ceil(percent / 100 * fleet_size)`.
    pub fn size_for(self, fleet_size: usize) -> usize {
        (self.percent() * fleet_size).div_ceil(100)
    }
}

impl fmt::Display for PercentileCluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Voyage ids per cluster, each list in rank order (best first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileClusters {
    pub top10: Vec<String>,
    pub top25: Vec<String>,
    pub top50: Vec<String>,
    pub top75: Vec<String>,
}

impl PercentileClusters {
    pub fn get(&self, c: PercentileCluster) -> &[String] {
        match c {
            PercentileCluster::Top10 => &self.top10,
            PercentileCluster::Top25 => &self.top25,
            PercentileCluster::Top50 => &self.top50,
            PercentileCluster::Top75 => &self.top75,
        }
    }

    pub fn contains(&self, c: PercentileCluster, voyage_id: &str) -> bool {
        self.get(c).iter().any(|id| id == voyage_id)
    }
}

/// Minimum fleet size for percentile clustering.
pub const MIN_FLEET_FOR_CLUSTERS: usize = 4;

/// Cumulative top-P% sets by descending score, ties broken by voyage id.
pub fn build_percentile_clusters(summaries: &[VoyageSummary]) -> Result<PercentileClusters> {
    if summaries.len() < MIN_FLEET_FOR_CLUSTERS {
        return Err(Error::TooFewVoyages {
            needed: MIN_FLEET_FOR_CLUSTERS,
            got: summaries.len(),
        });
    }
    let mut ranked: Vec<&VoyageSummary> = summaries.iter().collect();
    ranked.sort_by(|a, b| {
        b.eff_score
            .total_cmp(&a.eff_score)
            .then_with(|| a.voyage_id.cmp(&b.voyage_id))
    });
    let m = ranked.len();
    let take = |c: PercentileCluster| -> Vec<String> {
        ranked[..c.size_for(m)]
            .iter()
            .map(|s| s.voyage_id.clone())
            .collect()
    };
    Ok(PercentileClusters {
        top10: take(PercentileCluster::Top10),
        top25: take(PercentileCluster::Top25),
        top50: take(PercentileCluster::Top50),
        top75: take(PercentileCluster::Top75),
    })
}

/// Relative change of the efficiency score in percent.
pub fn efficiency_gain(meas_score: f64, pred_score: f64) -> Result<f64> {
    if !(meas_score > 0.0) {
        return Err(Error::UndefinedGain(meas_score));
    }
    Ok((pred_score - meas_score) / meas_score * 100.0)
}

/// Which weather channels feed the fuel-rate estimator.
///
/// Position, speed and heading are always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureCase {
    /// Onboard wind only.
    I,
    /// External wind, wave and current.
    II,
    /// Onboard wind with external wave and current.
    III,
    /// Onboard wind with external wind, wave and current.
    IV,
}

const ONBOARD_WIND: [&str; 2] = [channels::WIND_SPEED_ONB, channels::WIND_DIRECTION_ONB];
const EXTERNAL_WIND: [&str; 2] = [channels::WIND_SPEED_CPS, channels::WIND_DIRECTION_CPS];
const WAVE_CURRENT: [&str; 4] = [
    channels::WAVE_HEIGHT,
    channels::WAVE_DIRECTION,
    channels::CURRENT_SPEED,
    channels::CURRENT_DIRECTION,
];

impl FeatureCase {
    pub fn weather_channels(self) -> Vec<&'static str> {
        let mut out = Vec::new();
        match self {
            FeatureCase::I => out.extend(ONBOARD_WIND),
            FeatureCase::II => {
                out.extend(EXTERNAL_WIND);
                out.extend(WAVE_CURRENT);
            }
            FeatureCase::III => {
                out.extend(ONBOARD_WIND);
                out.extend(WAVE_CURRENT);
            }
            FeatureCase::IV => {
                out.extend(ONBOARD_WIND);
                out.extend(EXTERNAL_WIND);
                out.extend(WAVE_CURRENT);
            }
        }
        out
    }
}

impl std::str::FromStr for FeatureCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(FeatureCase::I),
            "II" | "2" => Ok(FeatureCase::II),
            "III" | "3" => Ok(FeatureCase::III),
            "IV" | "4" => Ok(FeatureCase::IV),
            other => Err(Error::Config(format!("unknown feature case `{other}`"))),
        }
    }
}

/// Anything that predicts an engine fuel rate (L/h) for a sample sailed at `sog`.
pub trait FuelRateEstimator: Send + Sync {
    fn fuel_rate(&self, context: &SamplePoint, sog: f64) -> Result<f64>;
}

/// Feature vector of position, speed, heading and the given channels.
///
/// Angles enter as (sin, cos) pairs. `None` when a channel is absent.
pub fn feature_vector(s: &SamplePoint, sog: f64, weather: &[&str]) -> Option<Vec<f64>> {
    let h = s.heading.to_radians();
    let mut f = vec![s.position.lat, s.position.lon, sog, h.sin(), h.cos()];
    for &name in weather {
        let v = s.channel(name)?;
        if channels::is_direction(name) {
            let r = v.to_radians();
            f.push(r.sin());
            f.push(r.cos());
        } else {
            f.push(v);
        }
    }
    Some(f)
}

/// Distance-weighted nearest-neighbour fuel-rate regressor over z-scaled features.
#[derive(Debug, Clone)]
pub struct KnnFuelEstimator {
    case: FeatureCase,
    channels: Vec<&'static str>,
    knn: KnnRegressor,
}

impl KnnFuelEstimator {
    pub fn feature_case(&self) -> FeatureCase {
        self.case
    }

    pub fn channels(&self) -> &[&'static str] {
        &self.channels
    }

    pub fn training_size(&self) -> usize {
        self.knn.len()
    }
}

impl FuelRateEstimator for KnnFuelEstimator {
    fn fuel_rate(&self, context: &SamplePoint, sog: f64) -> Result<f64> {
        let f = feature_vector(context, sog, &self.channels).ok_or_else(|| {
            Error::invalid(format!(
                "sample at t={} lacks channels required by feature case {:?}",
                context.timestamp, self.case
            ))
        })?;
        Ok(self.knn.predict(&f).max(0.0))
    }
}

/// Fit the fuel-rate estimator on every sample of the given voyages that carries
/// the case's channels.
pub fn train_estimator<'a>(
    voyages: impl IntoIterator<Item = &'a Voyage>,
    case: FeatureCase,
) -> Result<KnnFuelEstimator> {
    let channels = case.weather_channels();
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    let mut n_voyages = 0;
    for v in voyages {
        n_voyages += 1;
        for s in v.samples() {
            if let Some(f) = feature_vector(s, s.sog, &channels) {
                rows.push(f);
                targets.push(s.fuel_rate);
            }
        }
    }
    if n_voyages == 0 {
        return Err(Error::InsufficientData("estimator cluster is empty".into()));
    }
    if rows.len() < MIN_TRAINING_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "estimator needs at least {MIN_TRAINING_SAMPLES} usable samples, got {}",
            rows.len()
        )));
    }
    let knn = KnnRegressor::fit(&rows, targets, ESTIMATOR_K);
    Ok(KnnFuelEstimator {
        case,
        channels,
        knn,
    })
}

/// Fuel and time of `context` re-sailed with the speed `profile`.
///
/// Each step keeps its distance over ground: its duration scales by
/// `max(sog_meas, 0.1) / max(sog_pred, 0.1)`.
pub fn estimate_fuel_time(
    profile: &[f64],
    context: &Voyage,
    est: &dyn FuelRateEstimator,
) -> Result<VoyageTotals> {
    let samples = context.samples();
    if profile.len() != samples.len() {
        return Err(Error::invalid(format!(
            "profile length {} != voyage {} length {}",
            profile.len(),
            context.voyage_id,
            samples.len()
        )));
    }
    if let Some(bad) = profile.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!(
            "profile speed {bad} is not a finite non-negative value"
        )));
    }
    let (mut fuel, mut time) = (0.0, 0.0);
    for (i, w) in samples.windows(2).enumerate() {
        let dt_h = (w[1].timestamp - w[0].timestamp) / 3600.0;
        let ratio = w[0].sog.max(MIN_SPEED_FOR_DURATION) / profile[i].max(MIN_SPEED_FOR_DURATION);
        let dt = dt_h * ratio;
        fuel += est.fuel_rate(&w[0], profile[i])? * dt;
        time += dt;
    }
    Ok(VoyageTotals {
        fuel_total: fuel,
        time_total: time,
    })
}
