use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::PathLabeling;

/// Maximum-weight assignment of rows to columns on a (possibly rectangular)
/// matrix. Returns the column assigned to each row, `None` when rows outnumber
/// columns and the row is left unmatched.
pub fn hungarian_max(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let top = weights.iter().flatten().copied().fold(0.0f64, f64::max);
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            top - weights[i][j]
        } else {
            top
        }
    };
    // Shortest augmenting path formulation with potentials, 1-based.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedLabeling {
    /// Prediction expressed in the truth's label names.
    pub labeling: PathLabeling,
    /// Predicted label to truth label.
    pub mapping: BTreeMap<String, String>,
    /// Voyages whose aligned label equals the truth.
    pub agreement: usize,
}

/// Rename predicted clusters to truth labels so that total agreement is maximal.
///
/// Predicted clusters left without a partner keep their own name.
pub fn align_labels(pred: &PathLabeling, truth: &PathLabeling) -> Result<AlignedLabeling> {
    let truth_map = truth.as_map();
    if pred.len() != truth.len()
        || pred
            .ids()
            .iter()
            .any(|id| !truth_map.contains_key(id.as_str()))
    {
        return Err(Error::invalid(
            "predicted and true labelings cover different voyages",
        ));
    }
    let p_labels = pred.label_set();
    let t_labels = truth.label_set();
    let p_idx: BTreeMap<&str, usize> = p_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let t_idx: BTreeMap<&str, usize> = t_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut table = vec![vec![0.0; t_labels.len()]; p_labels.len()];
    for (id, pl) in pred.iter() {
        table[p_idx[pl]][t_idx[truth_map[id]]] += 1.0;
    }
    let assignment = hungarian_max(&table);
    let mapping: BTreeMap<String, String> = p_labels
        .iter()
        .zip(&assignment)
        .map(|(p, a)| {
            (
                p.clone(),
                a.map_or_else(|| p.clone(), |t| t_labels[t].clone()),
            )
        })
        .collect();
    let labels: Vec<String> = pred.labels().iter().map(|l| mapping[l].clone()).collect();
    let labeling = PathLabeling::new(pred.ids().to_vec(), labels)?;
    let agreement = labeling
        .iter()
        .filter(|(id, l)| truth_map[id] == *l)
        .count();
    Ok(AlignedLabeling {
        labeling,
        mapping,
        agreement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn labeling(labels: &[&str]) -> PathLabeling {
        PathLabeling::from_pairs(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| (format!("V{i}"), *l)),
        )
        .unwrap()
    }

    #[test]
    fn identity_and_permutation() {
        let truth = labeling(&["A", "A", "B", "C", "C"]);
        let same = align_labels(&truth, &truth).unwrap();
        assert_eq!(same.labeling, truth);
        let perm = labeling(&["2", "2", "0", "1", "1"]);
        let out = align_labels(&perm, &truth).unwrap();
        assert_eq!(out.labeling.labels(), truth.labels());
        assert_eq!(out.agreement, 5);
        assert_eq!(out.mapping["2"], "A");
    }

    #[test]
    fn fewer_predicted_clusters() {
        let truth = labeling(&["A", "A", "B", "C"]);
        let pred = labeling(&["x", "x", "y", "y"]);
        let out = align_labels(&pred, &truth).unwrap();
        assert_eq!(out.mapping["x"], "A");
        assert_eq!(out.agreement, 3);
    }

    #[test]
    fn voyage_mismatch() {
        let a = labeling(&["A", "B"]);
        let b = PathLabeling::from_pairs([("V0", "A"), ("Z", "B")]).unwrap();
        assert!(align_labels(&a, &b).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..=5, cells in prop::collection::vec(0u32..20, 25)) {
            let w: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cells[i * 5 + j] as f64).collect()).collect();
            let got = hungarian_max(&w);
            let got_total: f64 = got.iter().enumerate().map(|(i, j)| w[i][j.unwrap()]).sum();
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| w[i][j]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(got_total, best);
        }
    }
}
