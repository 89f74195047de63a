//! Path identification: ANND distances, clustering back-ends, the segmented
//! likelihood classifier and confusion-matrix evaluation.

mod align;
mod cluster;
mod hierarchical;
mod metrics;
mod segment;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{euclidean_unchecked, haversine_unchecked, GeoPoint, Voyage};

pub use align::{align_labels, hungarian_max, AlignedLabeling};
pub use cluster::{gmm_rows, gmm_rows_fit, kmeans_rows, kmeans_rows_fit, GmmFit, KMeansFit};
pub use hierarchical::{dendrogram, hierarchical_cluster, Merge};
pub use metrics::{confusion_and_metrics, ClassMetrics, ConfusionMatrix, Evaluation};
pub use segment::{
    classify_by_segment_likelihood, fit_segment_gmms, ComponentCount, Gaussian2, SegmentConfig,
    SegmentModel, SegmentModelSet, COVARIANCE_REGULARIZATION,
};

/// Positions of one voyage, without timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub voyage_id: String,
    points: Vec<GeoPoint>,
}

impl Path {
    pub fn new(voyage_id: impl Into<String>, points: Vec<GeoPoint>) -> Result<Self> {
        let voyage_id = voyage_id.into();
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "path {voyage_id} needs at least 2 points, got {}",
                points.len()
            )));
        }
        for p in &points {
            p.validate()?;
        }
        Ok(Path { voyage_id, points })
    }

    pub fn from_voyage(v: &Voyage) -> Self {
        Path {
            voyage_id: v.voyage_id.clone(),
            points: v.positions(),
        }
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Straight-line distance on raw (lat, lon) degrees.
    #[default]
    EuclideanDegrees,
    /// Great-circle distance in meters.
    Haversine,
}

impl Metric {
    pub fn distance(self, a: GeoPoint, b: GeoPoint) -> f64 {
        match self {
            Metric::EuclideanDegrees => euclidean_unchecked(a, b),
            Metric::Haversine => haversine_unchecked(a, b),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "euclidean-degrees" => Ok(Metric::EuclideanDegrees),
            "haversine" => Ok(Metric::Haversine),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Mean distance from each point of `a` to its nearest point in `b`.
pub fn annd_directed(a: &[GeoPoint], b: &[GeoPoint], metric: Metric) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ANND needs two non-empty point sets"));
    }
    let total: f64 = a
        .iter()
        .map(|&p| {
            b.iter()
                .map(|&q| metric.distance(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / a.len() as f64)
}

/// Symmetrized average nearest-neighbour distance.
pub fn annd(a: &[GeoPoint], b: &[GeoPoint], metric: Metric) -> Result<f64> {
    Ok((annd_directed(a, b, metric)? + annd_directed(b, a, metric)?) / 2.0)
}

/// Pairwise ANND between paths, in path order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Wrap a precomputed square matrix, checking symmetry and the zero diagonal.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = ids.len();
        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
            return Err(Error::invalid(
                "distance matrix must be square and match the ids",
            ));
        }
        for i in 0..m {
            if rows[i][i] != 0.0 {
                return Err(Error::invalid("distance matrix diagonal must be zero"));
            }
            for j in 0..m {
                let v = rows[i][j];
                if !v.is_finite() || v < 0.0 || v != rows[j][i] {
                    return Err(Error::invalid(format!(
                        "distance matrix entry ({i},{j}) = {v} is not a symmetric non-negative value"
                    )));
                }
            }
        }
        Ok(DistanceMatrix {
            ids,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.len();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.row(i).to_vec()).collect()
    }
}

pub fn build_distance_matrix(paths: &[Path], metric: Metric) -> Result<DistanceMatrix> {
    let m = paths.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!(
            "distance matrix needs at least 2 paths, got {m}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let upper: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| annd(paths[i].points(), paths[j].points(), metric))
        .collect::<Result<_>>()?;
    let mut values = vec![0.0; m * m];
    for (&(i, j), d) in pairs.iter().zip(upper) {
        values[i * m + j] = d;
        values[j * m + i] = d;
    }
    Ok(DistanceMatrix {
        ids: paths.iter().map(|p| p.voyage_id.clone()).collect(),
        values,
    })
}

/// One label per voyage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathLabeling {
    ids: Vec<String>,
    labels: Vec<String>,
}

impl PathLabeling {
    pub fn new(ids: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if ids.len() != labels.len() {
            return Err(Error::invalid("ids and labels differ in length"));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::invalid(format!("voyage {dup} labeled twice")));
        }
        Ok(PathLabeling { ids, labels })
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let (ids, labels) = pairs.into_iter().map(|(a, b)| (a.into(), b.into())).unzip();
        Self::new(ids, labels)
    }

    /// Numeric cluster indices turned into string labels.
    pub(crate) fn from_indices(ids: &[String], idx: &[usize]) -> Self {
        PathLabeling {
            ids: ids.to_vec(),
            labels: idx.iter().map(|i| i.to_string()).collect(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.labels[i].as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.labels.iter().map(String::as_str))
    }

    pub fn as_map(&self) -> BTreeMap<&str, &str> {
        self.iter().collect()
    }

    /// Distinct labels, sorted.
    pub fn label_set(&self) -> Vec<String> {
        self.labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Relabel cluster indices in order of first appearance.
pub(crate) fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    raw.iter()
        .map(|&r| {
            let next = map.len();
            *map.entry(r).or_insert(next)
        })
        .collect()
}
