//! Small numeric helpers shared by the regressors and mixture models.

use std::cmp::Ordering;

/// Per-feature z-scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance features get unit scale so they contribute nothing.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Brute-force k-nearest-neighbour regressor with inverse-distance weights.
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    k: usize,
    scaler: Standardizer,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl KnnRegressor {
    /// `rows` are raw features; they are z-scaled with statistics from these rows.
    pub fn fit(rows: &[Vec<f64>], targets: Vec<f64>, k: usize) -> Self {
        assert_eq!(rows.len(), targets.len());
        assert!(k >= 1 && k <= rows.len());
        let scaler = Standardizer::fit(rows);
        let rows = rows.iter().map(|r| scaler.transform(r)).collect();
        KnnRegressor {
            k,
            scaler,
            rows,
            targets,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The `k` nearest training indices with squared distances, ordered by (distance, index).
    pub fn neighbors(&self, query: &[f64]) -> Vec<(f64, usize)> {
        let q = self.scaler.transform(query);
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (sq_dist(&q, r), i))
            .collect();
        let by = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, by);
            d.truncate(self.k);
        }
        d.sort_by(by);
        d
    }

    /// Inverse-distance-weighted mean target. Exact matches take the plain mean of
    /// all zero-distance neighbours.
    pub fn predict(&self, query: &[f64]) -> f64 {
        let nn = self.neighbors(query);
        let exact: Vec<f64> = nn
            .iter()
            .filter(|(d, _)| *d == 0.0)
            .map(|&(_, i)| self.targets[i])
            .collect();
        if !exact.is_empty() {
            return exact.iter().sum::<f64>() / exact.len() as f64;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (d2, i) in nn {
            let w = 1.0 / d2.sqrt();
            num += w * self.targets[i];
            den += w;
        }
        num / den
    }
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log density of a diagonal Gaussian.
pub fn diag_gaussian_log_pdf(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(var)
        .map(|((x, m), v)| -0.5 * (LN_2PI + v.ln() + (x - m).powi(2) / v))
        .sum()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if x.total_cmp(&xs[best]) == Ordering::Greater {
            best = i;
        }
    }
    best
}
