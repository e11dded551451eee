use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{predict_labels, Model};

/// Counts indexed `[true class][predicted class]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(
        truth: &[usize],
        predicted: &[usize],
        num_classes: usize,
    ) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::eval("confusion matrix over an empty sample set"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::eval("truth and prediction lengths differ"));
        }
        let mut counts = vec![vec![0u64; num_classes]; num_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= num_classes || p >= num_classes {
                return Err(Error::eval(format!(
                    "class id {} out of range for {num_classes} classes",
                    t.max(p)
                )));
            }
            counts[t][p] += 1;
        }
        Ok(Self {
            counts,
            total: truth.len() as u64,
        })
    }

    /// Builds from raw counts; `total` is their sum.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if counts.iter().any(|r| r.len() != n) {
            return Err(Error::eval("confusion matrix must be square"));
        }
        let total = counts.iter().flatten().sum();
        Ok(Self { counts, total })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.counts[truth].iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        self.counts.iter().map(|r| r[predicted]).sum()
    }
}

/// Confusion matrix of `model`'s argmax predictions (ties to the lower id).
pub fn confusion_matrix(
    model: &Model,
    features: ArrayView2<f64>,
    labels: &[usize],
) -> Result<ConfusionMatrix> {
    if labels.is_empty() {
        return Err(Error::eval("confusion matrix over an empty sample set"));
    }
    let predicted = predict_labels(model, features)?;
    ConfusionMatrix::from_predictions(labels, &predicted, model.num_classes())
}

/// Percentage of samples from `affected` classes that are misclassified.
pub fn err(c: &ConfusionMatrix, affected: &[usize]) -> Result<f64> {
    if affected.is_empty() {
        return Err(Error::eval("err needs at least one affected class"));
    }
    let mut wrong = 0u64;
    let mut seen = 0u64;
    for &a in affected {
        if a >= c.num_classes() {
            return Err(Error::eval(format!("class {a} out of range")));
        }
        let row = c.row_sum(a);
        seen += row;
        wrong += row - c.get(a, a);
    }
    if seen == 0 {
        return Err(Error::eval("no samples from the affected classes"));
    }
    Ok(100.0 * wrong as f64 / seen as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FgtMode {
    /// Pairwise confusions among a set of at least two classes.
    Confusion(Vec<usize>),
    /// Every sample predicted as the removed class.
    ClassRemoval(usize),
}

/// Forgetting score: the count of samples classified in a way only the
/// deleted data explains.
pub fn fgt(c: &ConfusionMatrix, mode: &FgtMode) -> Result<u64> {
    let k = c.num_classes();
    match mode {
        FgtMode::Confusion(set) => {
            let mut set = set.clone();
            set.sort_unstable();
            set.dedup();
            if set.len() < 2 {
                return Err(Error::config(
                    "fgt confusion mode needs at least two classes",
                ));
            }
            if let Some(&bad) = set.iter().find(|&&x| x >= k) {
                return Err(Error::config(format!("class {bad} out of range")));
            }
            let mut total = 0;
            for (i, &a) in set.iter().enumerate() {
                for &b in &set[i + 1..] {
                    total += c.get(a, b) + c.get(b, a);
                }
            }
            Ok(total)
        }
        FgtMode::ClassRemoval(removed) => {
            if *removed >= k {
                return Err(Error::config(format!("class {removed} out of range")));
            }
            Ok(c.column_sum(*removed))
        }
    }
}
