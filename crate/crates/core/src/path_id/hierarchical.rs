use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{canonical_labels, DistanceMatrix, PathLabeling};

/// One agglomeration step. `a` and `b` are representative row indices of the
/// two merged clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub size: usize,
}

/// Average-linkage dendrogram (nearest-neighbour chain), merges sorted by height.
pub fn dendrogram(matrix: &DistanceMatrix) -> Vec<Merge> {
    let m = matrix.len();
    let mut d = matrix.rows();
    let mut size = vec![1usize; m];
    let mut active = vec![true; m];
    let mut n_active = m;
    let mut chain: Vec<usize> = Vec::new();
    let mut merges = Vec::with_capacity(m.saturating_sub(1));

    while n_active > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|a| *a).expect("an active cluster"));
        }
        let a = *chain.last().unwrap();
        let prev = chain.len().checked_sub(2).map(|i| chain[i]);
        // Nearest active neighbour; prefer the previous chain element on ties.
        let mut best: Option<(f64, usize)> = prev.map(|p| (d[a][p], p));
        for j in 0..m {
            if !active[j] || j == a {
                continue;
            }
            match best {
                Some((bd, _)) if d[a][j] >= bd => {}
                _ => best = Some((d[a][j], j)),
            }
        }
        let (h, b) = best.expect("another active cluster");
        if Some(b) == prev {
            chain.pop();
            chain.pop();
            let (keep, gone) = (a.min(b), a.max(b));
            let (sa, sb) = (size[keep] as f64, size[gone] as f64);
            for k in 0..m {
                if active[k] && k != keep && k != gone {
                    let v = (sa * d[keep][k] + sb * d[gone][k]) / (sa + sb);
                    d[keep][k] = v;
                    d[k][keep] = v;
                }
            }
            size[keep] += size[gone];
            active[gone] = false;
            n_active -= 1;
            merges.push(Merge {
                a: keep,
                b: gone,
                height: h,
                size: size[keep],
            });
        } else {
            chain.push(b);
        }
    }
    merges.sort_by(|x, y| x.height.total_cmp(&y.height));
    merges
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Cut the average-linkage dendrogram: merges up to `cutoff` are applied.
pub fn hierarchical_cluster(matrix: &DistanceMatrix, cutoff: f64) -> Result<PathLabeling> {
    if !(cutoff >= 0.0) {
        return Err(Error::Config(format!(
            "cutoff must be non-negative, got {cutoff}"
        )));
    }
    let m = matrix.len();
    let mut parent: Vec<usize> = (0..m).collect();
    for mg in dendrogram(matrix)
        .iter()
        .take_while(|mg| mg.height <= cutoff)
    {
        let (ra, rb) = (find(&mut parent, mg.a), find(&mut parent, mg.b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    let roots: Vec<usize> = (0..m).map(|i| find(&mut parent, i)).collect();
    Ok(PathLabeling::from_indices(
        matrix.ids(),
        &canonical_labels(&roots),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix::from_rows((0..rows.len()).map(|i| format!("P{i}")).collect(), rows).unwrap()
    }

    fn from_points(xs: &[f64]) -> DistanceMatrix {
        matrix(
            xs.iter()
                .map(|a| xs.iter().map(|b| (a - b).abs()).collect())
                .collect(),
        )
    }

    fn n_clusters(l: &PathLabeling) -> usize {
        l.label_set().len()
    }

    /// Naive O(m^3) average linkage: repeatedly merge the closest pair.
    fn naive_heights(xs: &[f64]) -> Vec<f64> {
        let mut clusters: Vec<Vec<usize>> = (0..xs.len()).map(|i| vec![i]).collect();
        let mut heights = Vec::new();
        while clusters.len() > 1 {
            let mut best = (f64::INFINITY, 0, 0);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let mut s = 0.0;
                    for &p in &clusters[i] {
                        for &q in &clusters[j] {
                            s += (xs[p] - xs[q]).abs();
                        }
                    }
                    let avg = s / (clusters[i].len() * clusters[j].len()) as f64;
                    if avg < best.0 {
                        best = (avg, i, j);
                    }
                }
            }
            let moved = clusters.remove(best.2);
            clusters[best.1].extend(moved);
            heights.push(best.0);
        }
        heights
    }

    #[test]
    fn extremes() {
        let m = from_points(&[0.0, 1.0, 5.0, 6.5]);
        assert_eq!(n_clusters(&hierarchical_cluster(&m, 100.0).unwrap()), 1);
        assert_eq!(n_clusters(&hierarchical_cluster(&m, 0.0).unwrap()), 4);
        assert!(hierarchical_cluster(&m, -1.0).is_err());
    }

    #[test]
    fn three_bundles() {
        let m = from_points(&[0.0, 0.1, 0.2, 5.0, 5.1, 10.0, 10.2, 10.1]);
        let l = hierarchical_cluster(&m, 1.0).unwrap();
        assert_eq!(l.labels(), &["0", "0", "0", "1", "1", "2", "2", "2"]);
    }

    proptest! {
        #[test]
        fn heights_match_naive(xs in prop::collection::vec(0.0..100.0f64, 2..9)) {
            let got: Vec<f64> = dendrogram(&from_points(&xs)).iter().map(|m| m.height).collect();
            let mut want = naive_heights(&xs);
            want.sort_by(f64::total_cmp);
            prop_assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                prop_assert!((g - w).abs() < 1e-9);
            }
        }

        #[test]
        fn cluster_count_monotone(xs in prop::collection::vec(0.0..100.0f64, 2..15), cuts in prop::collection::vec(0.0..120.0f64, 2..6)) {
            let m = from_points(&xs);
            let mut cuts = cuts;
            cuts.sort_by(f64::total_cmp);
            let counts: Vec<usize> = cuts.iter().map(|c| n_clusters(&hierarchical_cluster(&m, *c).unwrap())).collect();
            for w in counts.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
