use crate::error::{Error, Result};
use crate::geo::{SamplePoint, Voyage};
use crate::stats::KnnRegressor;

use super::SpeedProfile;

fn features(s: &SamplePoint, channels: &[String]) -> Option<Vec<f64>> {
    let mut f = vec![s.position.lat, s.position.lon];
    for c in channels {
        f.push(s.channel(c)?);
    }
    Some(f)
}

/// kNN regressor from (lat, lon, weather channels) to speed over ground.
#[derive(Debug, Clone)]
pub struct KnnSpeedModel {
    channels: Vec<String>,
    knn: KnnRegressor,
}

impl KnnSpeedModel {
    pub fn fit<'a>(
        voyages: impl IntoIterator<Item = &'a Voyage>,
        channels: &[String],
        k: usize,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for v in voyages {
            for s in v.samples() {
                if let Some(f) = features(s, channels) {
                    rows.push(f);
                    targets.push(s.sog);
                }
            }
        }
        if rows.len() < k {
            return Err(Error::InsufficientData(format!(
                "kNN needs at least {k} training samples, got {}",
                rows.len()
            )));
        }
        Ok(KnnSpeedModel {
            channels: channels.to_vec(),
            knn: KnnRegressor::fit(&rows, targets, k),
        })
    }

    pub fn predict(&self, test: &Voyage) -> Result<SpeedProfile> {
        let sog = test
            .samples()
            .iter()
            .map(|s| {
                features(s, &self.channels)
                    .map(|f| self.knn.predict(&f))
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "voyage {} lacks kNN channels {:?}",
                            test.voyage_id, self.channels
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        SpeedProfile::new(test.voyage_id.clone(), sog)
    }
}

/// Fit on `cluster` and predict a speed for every sample of `test`.
pub fn knn_predict(
    test: &Voyage,
    cluster: &[&Voyage],
    channels: &[String],
    k: usize,
) -> Result<SpeedProfile> {
    KnnSpeedModel::fit(cluster.iter().copied(), channels, k)?.predict(test)
}
