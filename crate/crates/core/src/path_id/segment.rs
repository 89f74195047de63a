use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, RouteSegmentSpec};
use crate::stats::{argmax, log_sum_exp};

use super::cluster::kmeans;
use super::{Path, PathLabeling};

/// Added to covariance diagonals after every M-step.
pub const COVARIANCE_REGULARIZATION: f64 = 1e-6;
/// Fewest training points a segment may receive.
pub const MIN_SEGMENT_POINTS: usize = 10;
const EM_MAX_ITER: usize = 300;
const EM_TOL: f64 = 1e-8;
const INIT_RESTARTS: usize = 10;

/// Full-covariance Gaussian over (lat, lon).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2 {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl Gaussian2 {
    pub fn log_pdf(&self, x: [f64; 2]) -> f64 {
        let [[a, b], [_, d]] = self.cov;
        let det = a * d - b * b;
        let (dx, dy) = (x[0] - self.mean[0], x[1] - self.mean[1]);
        let maha = (d * dx * dx - 2.0 * b * dx * dy + a * dy * dy) / det;
        -0.5 * (maha + det.ln()) - (2.0 * std::f64::consts::PI).ln()
    }

    /// Eigenvalues of the covariance, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, d]] = self.cov;
        let half_tr = (a + d) / 2.0;
        let disc = (((a - d) / 2.0).powi(2) + b * b).sqrt();
        [half_tr - disc, half_tr + disc]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentCount {
    /// One component per distinct label among the segment's training points.
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub components: ComponentCount,
    /// Component counts for individual segments, by name.
    pub per_segment: BTreeMap<String, usize>,
    /// Explicit discriminative segment names; automatic when absent.
    pub discriminative: Option<Vec<String>>,
    /// Minimum label purity of every mapped component for automatic selection.
    pub min_purity: f64,
    pub seed: u64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            components: ComponentCount::Auto,
            per_segment: BTreeMap::new(),
            discriminative: None,
            min_purity: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentModel {
    pub name: String,
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian2>,
    /// Path label assigned to each component; `None` if it claimed no training point.
    pub table: Vec<Option<String>>,
    /// Share of the component's claimed points carrying its label.
    pub purity: Vec<f64>,
    pub discriminative: bool,
    pub n_points: usize,
    pub log_likelihoods: Vec<f64>,
}

impl SegmentModel {
    fn responsibilities(&self, x: [f64; 2]) -> Vec<f64> {
        let lp: Vec<f64> = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(g, w)| w.ln() + g.log_pdf(x))
            .collect();
        let norm = log_sum_exp(&lp);
        lp.iter().map(|v| (v - norm).exp()).collect()
    }

    /// Component with the highest mean log-density over `points`.
    pub fn best_component(&self, points: &[GeoPoint]) -> usize {
        let scores: Vec<f64> = self
            .components
            .iter()
            .map(|g| {
                points
                    .iter()
                    .map(|p| g.log_pdf([p.lat, p.lon]))
                    .sum::<f64>()
                    / points.len() as f64
            })
            .collect();
        argmax(&scores)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentModelSet {
    spec: RouteSegmentSpec,
    segments: Vec<SegmentModel>,
}

impl SegmentModelSet {
    pub fn segments(&self) -> &[SegmentModel] {
        &self.segments
    }

    pub fn spec(&self) -> &RouteSegmentSpec {
        &self.spec
    }

    pub fn discriminative_names(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter(|s| s.discriminative)
            .map(|s| s.name.as_str())
            .collect()
    }

    /// Classify every path; unclassifiable ones are returned separately.
    pub fn classify_all(&self, paths: &[Path]) -> Result<(PathLabeling, Vec<String>)> {
        let mut pairs = Vec::new();
        let mut failed = Vec::new();
        for p in paths {
            match classify_by_segment_likelihood(p, self) {
                Ok(l) => pairs.push((p.voyage_id.clone(), l)),
                Err(Error::Unclassifiable(id)) => failed.push(id),
                Err(e) => return Err(e),
            }
        }
        Ok((PathLabeling::from_pairs(pairs)?, failed))
    }
}

/// EM for a 2-D mixture. Starts from `init` (component per point) when given,
/// otherwise from k-means.
fn fit_mixture(
    points: &[[f64; 2]],
    c: usize,
    init: Option<Vec<usize>>,
    seed: u64,
) -> Result<(Vec<f64>, Vec<Gaussian2>, Vec<f64>)> {
    let init = match init {
        Some(i) => i,
        None => {
            let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
            kmeans(&rows, c, seed, INIT_RESTARTS)?.labels
        }
    };
    let n = points.len() as f64;
    let mut resp: Vec<Vec<f64>> = init
        .iter()
        .map(|&l| (0..c).map(|j| if j == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut weights = vec![1.0 / c as f64; c];
    let mut comps = vec![
        Gaussian2 {
            mean: [0.0; 2],
            cov: [[1.0, 0.0], [0.0, 1.0]],
        };
        c
    ];
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..EM_MAX_ITER {
        // M-step from the current responsibilities.
        for j in 0..c {
            let nk: f64 = resp.iter().map(|r| r[j]).sum();
            if nk < 1e-12 {
                continue;
            }
            weights[j] = nk / n;
            let mut mean = [0.0; 2];
            for (p, r) in points.iter().zip(&resp) {
                mean[0] += r[j] * p[0];
                mean[1] += r[j] * p[1];
            }
            mean = [mean[0] / nk, mean[1] / nk];
            let mut cov = [[0.0; 2]; 2];
            for (p, r) in points.iter().zip(&resp) {
                let d = [p[0] - mean[0], p[1] - mean[1]];
                for a in 0..2 {
                    for b in 0..2 {
                        cov[a][b] += r[j] * d[a] * d[b];
                    }
                }
            }
            for row in cov.iter_mut() {
                for v in row.iter_mut() {
                    *v /= nk;
                }
            }
            cov[0][0] += COVARIANCE_REGULARIZATION;
            cov[1][1] += COVARIANCE_REGULARIZATION;
            comps[j] = Gaussian2 { mean, cov };
        }
        let wsum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= wsum);

        // E-step.
        let mut ll = 0.0;
        for (p, r) in points.iter().zip(resp.iter_mut()) {
            let lp: Vec<f64> = (0..c)
                .map(|j| weights[j].ln() + comps[j].log_pdf(*p))
                .collect();
            let norm = log_sum_exp(&lp);
            ll += norm;
            for j in 0..c {
                r[j] = (lp[j] - norm).exp();
            }
        }
        let done = history
            .last()
            .is_some_and(|prev| ll - prev < EM_TOL * prev.abs().max(1.0));
        history.push(ll);
        if done {
            break;
        }
    }
    Ok((weights, comps, history))
}

/// Fit one (lat, lon) mixture per route segment and map components to path labels.
pub fn fit_segment_gmms(
    paths: &[Path],
    labels: &PathLabeling,
    spec: &RouteSegmentSpec,
    config: &SegmentConfig,
) -> Result<SegmentModelSet> {
    if spec.is_empty() {
        return Err(Error::Config("route segment spec is empty".into()));
    }
    let label_of = labels.as_map();
    let mut per_seg: Vec<Vec<([f64; 2], &str)>> = vec![Vec::new(); spec.len()];
    for p in paths {
        let l = *label_of
            .get(p.voyage_id.as_str())
            .ok_or_else(|| Error::invalid(format!("no label for training path {}", p.voyage_id)))?;
        for &pt in p.points() {
            if let Some(s) = spec.locate(pt) {
                per_seg[s].push(([pt.lat, pt.lon], l));
            }
        }
    }
    let all_labels: BTreeSet<&str> = paths
        .iter()
        .map(|p| label_of[p.voyage_id.as_str()])
        .collect();
    if let Some(names) = &config.discriminative {
        for n in names {
            if !spec.segments().iter().any(|s| &s.name == n) {
                return Err(Error::Config(format!(
                    "unknown discriminative segment `{n}`"
                )));
            }
        }
    }

    let mut segments = Vec::with_capacity(spec.len());
    for (si, seg) in spec.segments().iter().enumerate() {
        let data = &per_seg[si];
        if data.len() < MIN_SEGMENT_POINTS {
            return Err(Error::Config(format!(
                "segment `{}` has {} training points, needs at least {MIN_SEGMENT_POINTS}",
                seg.name,
                data.len()
            )));
        }
        let seg_labels: BTreeSet<&str> = data.iter().map(|d| d.1).collect();
        let c = match (config.per_segment.get(&seg.name), config.components) {
            (Some(&n), _) | (None, ComponentCount::Fixed(n)) => n,
            (None, ComponentCount::Auto) => seg_labels.len(),
        };
        if c == 0 || c > data.len() {
            return Err(Error::Config(format!(
                "segment `{}`: {c} components for {} points",
                seg.name,
                data.len()
            )));
        }
        let pts: Vec<[f64; 2]> = data.iter().map(|d| d.0).collect();
        // With one component per label, start each component on its label's points.
        let init = (c == seg_labels.len()).then(|| {
            data.iter()
                .map(|d| {
                    seg_labels
                        .iter()
                        .position(|l| *l == d.1)
                        .expect("label present")
                })
                .collect()
        });
        let (weights, components, log_likelihoods) =
            fit_mixture(&pts, c, init, config.seed.wrapping_add(si as u64))?;
        let mut model = SegmentModel {
            name: seg.name.clone(),
            weights,
            components,
            table: vec![None; c],
            purity: vec![0.0; c],
            discriminative: false,
            n_points: data.len(),
            log_likelihoods,
        };
        let mut votes: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); c];
        for (p, l) in data {
            let j = argmax(&model.responsibilities(*p));
            *votes[j].entry(l).or_default() += 1;
        }
        for (j, v) in votes.iter().enumerate() {
            let total: usize = v.values().sum();
            let mut best: Option<(&str, usize)> = None;
            for (l, &n) in v {
                if best.is_none_or(|(_, bn)| n > bn) {
                    best = Some((l, n));
                }
            }
            if let Some((l, n)) = best {
                model.table[j] = Some(l.to_string());
                model.purity[j] = n as f64 / total as f64;
            }
        }
        model.discriminative = match &config.discriminative {
            Some(names) => names.contains(&seg.name),
            None => {
                let mapped: BTreeSet<&str> =
                    model.table.iter().flatten().map(String::as_str).collect();
                let pure = model
                    .table
                    .iter()
                    .zip(&model.purity)
                    .all(|(t, p)| t.is_none() || *p >= config.min_purity);
                pure && (mapped.len() >= 2
                    || (!mapped.is_empty() && mapped.len() < all_labels.len()))
            }
        };
        segments.push(model);
    }
    Ok(SegmentModelSet {
        spec: spec.clone(),
        segments,
    })
}

/// Majority vote over the discriminative segments the path enters.
pub fn classify_by_segment_likelihood(path: &Path, models: &SegmentModelSet) -> Result<String> {
    let mut in_seg: Vec<Vec<GeoPoint>> = vec![Vec::new(); models.segments.len()];
    for &p in path.points() {
        if let Some(s) = models.spec.locate(p) {
            in_seg[s].push(p);
        }
    }
    // label -> (votes, first segment index that voted for it)
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (si, (seg, pts)) in models.segments.iter().zip(&in_seg).enumerate() {
        if !seg.discriminative || pts.is_empty() {
            continue;
        }
        if let Some(label) = &seg.table[seg.best_component(pts)] {
            tally.entry(label.clone()).or_insert((0, si)).0 += 1;
        }
    }
    tally
        .into_iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(l, _)| l)
        .ok_or_else(|| Error::Unclassifiable(path.voyage_id.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn branch_path(id: &str, lat: f64, lon0: f64, lon1: f64, rng: &mut ChaCha8Rng) -> Path {
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts = (0..=30)
            .map(|i| GeoPoint {
                lat: lat + noise.sample(rng),
                lon: lon0 + (lon1 - lon0) * i as f64 / 30.0,
            })
            .collect();
        Path::new(id, pts).unwrap()
    }

    fn rect(name: &str, lat0: f64, lat1: f64, lon0: f64, lon1: f64) -> (String, Vec<(f64, f64)>) {
        (
            name.into(),
            vec![(lat0, lon0), (lat0, lon1), (lat1, lon1), (lat1, lon0)],
        )
    }

    fn two_branches() -> (Vec<Path>, PathLabeling) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut paths = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let (lat, l) = if i % 2 == 0 { (0.0, "A") } else { (1.0, "B") };
            paths.push(branch_path(&format!("V{i}"), lat, 0.0, 2.0, &mut rng));
            labels.push((format!("V{i}"), l));
        }
        (paths, PathLabeling::from_pairs(labels).unwrap())
    }

    #[test]
    fn components_sit_on_branch_centerlines() {
        let (paths, labels) = two_branches();
        let spec =
            RouteSegmentSpec::from_polygons(vec![rect("all", -0.5, 1.5, -0.1, 2.1)]).unwrap();
        let set = fit_segment_gmms(&paths, &labels, &spec, &SegmentConfig::default()).unwrap();
        let seg = &set.segments()[0];
        assert!((seg.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let mut lats: Vec<f64> = seg.components.iter().map(|g| g.mean[0]).collect();
        lats.sort_by(f64::total_cmp);
        assert!(lats[0].abs() < 0.01 && (lats[1] - 1.0).abs() < 0.01);
        for g in &seg.components {
            assert!(g.eigenvalues()[0] >= COVARIANCE_REGULARIZATION * (1.0 - 1e-9));
        }
        assert!(seg.discriminative);
        for p in &paths {
            let want = labels.get(&p.voyage_id).unwrap();
            assert_eq!(classify_by_segment_likelihood(p, &set).unwrap(), want);
        }
    }

    #[test]
    fn single_branch_segment_maps_to_its_label() {
        let (mut paths, labels) = two_branches();
        // Branch B continues into a segment of its own.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (i, p) in paths.iter_mut().enumerate() {
            if i % 2 == 1 {
                let tail = branch_path("x", 1.0, 2.5, 3.5, &mut rng);
                let mut pts = p.points().to_vec();
                pts.extend_from_slice(tail.points());
                *p = Path::new(p.voyage_id.clone(), pts).unwrap();
            }
        }
        let spec = RouteSegmentSpec::from_polygons(vec![
            rect("shared", -0.5, 1.5, -0.1, 2.1),
            rect("b_only", 0.5, 1.5, 2.4, 3.6),
        ])
        .unwrap();
        let set = fit_segment_gmms(&paths, &labels, &spec, &SegmentConfig::default()).unwrap();
        let b = &set.segments()[1];
        assert_eq!(b.components.len(), 1);
        assert_eq!(b.table, vec![Some("B".to_string())]);
        assert!(b.discriminative);
    }

    #[test]
    fn empty_segment_is_named() {
        let (paths, labels) = two_branches();
        let spec = RouteSegmentSpec::from_polygons(vec![
            rect("all", -0.5, 1.5, -0.1, 2.1),
            rect("nowhere", 10.0, 11.0, 10.0, 11.0),
        ])
        .unwrap();
        match fit_segment_gmms(&paths, &labels, &spec, &SegmentConfig::default()) {
            Err(Error::Config(msg)) => assert!(msg.contains("nowhere")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn outside_corridor_is_unclassifiable() {
        let (paths, labels) = two_branches();
        let spec =
            RouteSegmentSpec::from_polygons(vec![rect("all", -0.5, 1.5, -0.1, 2.1)]).unwrap();
        let set = fit_segment_gmms(&paths, &labels, &spec, &SegmentConfig::default()).unwrap();
        let far = Path::new(
            "far",
            vec![
                GeoPoint {
                    lat: 40.0,
                    lon: 40.0,
                },
                GeoPoint {
                    lat: 40.1,
                    lon: 40.0,
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            classify_by_segment_likelihood(&far, &set),
            Err(Error::Unclassifiable(_))
        ));
        let (ok, failed) = set.classify_all(&[paths[0].clone(), far]).unwrap();
        assert_eq!(ok.len(), 1);
        assert_eq!(failed, vec!["far".to_string()]);
    }

    #[test]
    fn tie_goes_to_earlier_segment() {
        // Two discriminative segments with opposite tables: a path voting once
        // in each gets the first segment's label.
        let (paths, labels) = two_branches();
        let spec = RouteSegmentSpec::from_polygons(vec![
            rect("west", -0.5, 1.5, -0.1, 1.0),
            rect("east", -0.5, 1.5, 1.0, 2.1),
        ])
        .unwrap();
        let mut set = fit_segment_gmms(&paths, &labels, &spec, &SegmentConfig::default()).unwrap();
        for t in set.segments[1].table.iter_mut() {
            *t = t
                .as_ref()
                .map(|l| if l == "A" { "B".into() } else { "A".into() });
        }
        let a_path = &paths[0];
        assert_eq!(classify_by_segment_likelihood(a_path, &set).unwrap(), "A");
    }
}
