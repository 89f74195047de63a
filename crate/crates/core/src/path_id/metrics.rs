use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::PathLabeling;

/// Counts with actual classes as rows and predicted classes as columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
}

impl ConfusionMatrix {
    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("confusion matrix must be k x k"));
        }
        if classes.iter().collect::<BTreeSet<_>>().len() != k {
            return Err(Error::invalid("class names must be unique"));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, c)| i == j || *c == 0))
    }

    /// One-vs-all bookkeeping and scores for class `c`.
    pub fn class_metrics(&self, c: usize) -> ClassMetrics {
        let k = self.classes.len();
        let tp = self.counts[c][c];
        let fn_ = self.counts[c].iter().sum::<u64>() - tp;
        let fp = (0..k).map(|i| self.counts[i][c]).sum::<u64>() - tp;
        let tn = self.total() - tp - fn_ - fp;
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            class: self.classes[c].clone(),
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    pub fn metrics(&self) -> Vec<ClassMetrics> {
        (0..self.classes.len())
            .map(|c| self.class_metrics(c))
            .collect()
    }
}

/// Confusion matrix over the sorted union of labels, plus per-class scores.
pub fn confusion_and_metrics(truth: &PathLabeling, pred: &PathLabeling) -> Result<Evaluation> {
    let pred_map = pred.as_map();
    if truth.len() != pred.len()
        || truth
            .ids()
            .iter()
            .any(|id| !pred_map.contains_key(id.as_str()))
    {
        return Err(Error::invalid(
            "truth and prediction cover different voyages",
        ));
    }
    let classes: Vec<String> = truth
        .labels()
        .iter()
        .chain(pred.labels())
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index = |l: &str| classes.iter().position(|c| c == l).expect("known class");
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (id, t) in truth.iter() {
        counts[index(t)][index(pred_map[id])] += 1;
    }
    let confusion = ConfusionMatrix::from_counts(classes, counts)?;
    Ok(Evaluation {
        per_class: confusion.metrics(),
        confusion,
    })
}
