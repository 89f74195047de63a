use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{diag_gaussian_log_pdf, log_sum_exp, sq_dist};

use super::{canonical_labels, DistanceMatrix, PathLabeling};

pub const KMEANS_RESTARTS: usize = 100;
const KMEANS_MAX_ITER: usize = 300;
const GMM_MAX_ITER: usize = 500;
const GMM_TOL: f64 = 1e-8;
const GMM_VAR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansFit {
    /// Cluster per row, numbered in order of first appearance.
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn check_k(k: usize, m: usize) -> Result<()> {
    if k < 1 || k > m {
        return Err(Error::Config(format!("k = {k} must lie in 1..={m}")));
    }
    Ok(())
}

fn nearest(row: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centers.iter().enumerate() {
        let d = sq_dist(row, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus(rows: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let m = rows.len();
    let mut chosen = vec![rng.random_range(0..m)];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &rows[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, d) in d2.iter().enumerate() {
                if *d > 0.0 && target < *d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            // Every point coincides with a center already; take any unused index.
            let free: Vec<usize> = (0..m).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, &rows[next]));
        }
    }
    chosen.into_iter().map(|i| rows[i].clone()).collect()
}

fn lloyd(rows: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeansFit {
    let k = centers.len();
    let dim = rows[0].len();
    let mut labels = vec![usize::MAX; rows.len()];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let (c, _) = nearest(r, &centers);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &c) in rows.iter().zip(&labels) {
            counts[c] += 1;
            for d in 0..dim {
                sums[c][d] += r[d];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Reseed empty clusters at the point farthest from its own center.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..rows.len())
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| {
                        sq_dist(&rows[a], &centers[labels[a]])
                            .total_cmp(&sq_dist(&rows[b], &centers[labels[b]]))
                            .then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    counts[labels[i]] -= 1;
                    counts[c] = 1;
                    centers[c] = rows[i].clone();
                    labels[i] = c;
                }
            }
        }
    }
    let inertia = rows
        .iter()
        .zip(&labels)
        .map(|(r, &c)| sq_dist(r, &centers[c]))
        .sum();
    KMeansFit {
        labels,
        centers,
        inertia,
    }
}

/// k-means++ with restarts on arbitrary feature rows; the lowest inertia wins.
pub(crate) fn kmeans(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    check_k(k, rows.len())?;
    let fits: Vec<KMeansFit> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(rows, plus_plus(rows, k, &mut rng))
        })
        .collect();
    let mut best = fits
        .into_iter()
        .reduce(|a, b| if b.inertia < a.inertia { b } else { a })
        .expect("at least one restart");
    // Renumber clusters by first appearance and reorder centers to match.
    let canon = canonical_labels(&best.labels);
    let mut centers = vec![Vec::new(); k];
    let mut extra = Vec::new();
    let mut used = vec![false; k];
    for (old, new) in best.labels.iter().zip(&canon) {
        if !used[*old] {
            used[*old] = true;
            centers[*new] = best.centers[*old].clone();
        }
    }
    for (c, u) in used.iter().enumerate() {
        if !u {
            extra.push(best.centers[c].clone());
        }
    }
    let n_used = used.iter().filter(|u| **u).count();
    for (i, e) in extra.into_iter().enumerate() {
        centers[n_used + i] = e;
    }
    best.labels = canon;
    best.centers = centers;
    Ok(best)
}

/// k-means on distance-matrix rows.
pub fn kmeans_rows_fit(matrix: &DistanceMatrix, k: usize, seed: u64) -> Result<KMeansFit> {
    kmeans(&matrix.rows(), k, seed, KMEANS_RESTARTS)
}

pub fn kmeans_rows(matrix: &DistanceMatrix, k: usize, seed: u64) -> Result<PathLabeling> {
    let fit = kmeans_rows_fit(matrix, k, seed)?;
    Ok(PathLabeling::from_indices(matrix.ids(), &fit.labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
    /// Log-likelihood at every EM iteration.
    pub log_likelihoods: Vec<f64>,
}

/// Diagonal-covariance EM on distance-matrix rows, started from k-means.
pub fn gmm_rows_fit(matrix: &DistanceMatrix, k: usize, seed: u64) -> Result<GmmFit> {
    let rows = matrix.rows();
    let km = kmeans(&rows, k, seed, KMEANS_RESTARTS)?;
    let m = rows.len();
    let dim = rows[0].len();

    let mut weights = vec![0.0f64; k];
    let mut means = km.centers.clone();
    let mut vars = vec![vec![0.0; dim]; k];
    for (r, &c) in rows.iter().zip(&km.labels) {
        weights[c] += 1.0;
        for d in 0..dim {
            vars[c][d] += (r[d] - means[c][d]).powi(2);
        }
    }
    for c in 0..k {
        for d in 0..dim {
            vars[c][d] = (vars[c][d] / weights[c].max(1.0)).max(GMM_VAR_FLOOR);
        }
        weights[c] = weights[c].max(1e-12) / m as f64;
    }
    let wsum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= wsum);

    let mut history = Vec::new();
    let mut resp = vec![vec![0.0; k]; m];
    for _ in 0..GMM_MAX_ITER {
        let mut ll = 0.0;
        for (i, r) in rows.iter().enumerate() {
            let lp: Vec<f64> = (0..k)
                .map(|c| weights[c].ln() + diag_gaussian_log_pdf(r, &means[c], &vars[c]))
                .collect();
            let norm = log_sum_exp(&lp);
            ll += norm;
            for c in 0..k {
                resp[i][c] = (lp[c] - norm).exp();
            }
        }
        let done = history
            .last()
            .is_some_and(|prev: &f64| ll - prev < GMM_TOL * prev.abs().max(1.0));
        history.push(ll);
        if done {
            break;
        }
        for c in 0..k {
            let nk: f64 = resp.iter().map(|r| r[c]).sum();
            if nk < 1e-12 {
                continue;
            }
            weights[c] = nk / m as f64;
            for d in 0..dim {
                let mu = rows
                    .iter()
                    .zip(&resp)
                    .map(|(r, g)| g[c] * r[d])
                    .sum::<f64>()
                    / nk;
                let var = rows
                    .iter()
                    .zip(&resp)
                    .map(|(r, g)| g[c] * (r[d] - mu).powi(2))
                    .sum::<f64>()
                    / nk;
                means[c][d] = mu;
                vars[c][d] = var.max(GMM_VAR_FLOOR);
            }
        }
        let wsum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= wsum);
    }
    let raw: Vec<usize> = resp.iter().map(|r| crate::stats::argmax(r)).collect();
    Ok(GmmFit {
        labels: canonical_labels(&raw),
        weights,
        means,
        vars,
        log_likelihoods: history,
    })
}

pub fn gmm_rows(matrix: &DistanceMatrix, k: usize, seed: u64) -> Result<PathLabeling> {
    let fit = gmm_rows_fit(matrix, k, seed)?;
    Ok(PathLabeling::from_indices(matrix.ids(), &fit.labels))
}
