use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::view::DataView;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// Feature rows with class labels and a split tag per row. A row's index
/// is its sample id.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    splits: Vec<Split>,
    num_classes: usize,
}

impl LabeledDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        splits: Vec<Split>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.nrows() != labels.len() || labels.len() != splits.len() {
            return Err(Error::config(format!(
                "dataset has {} rows, {} labels and {} split tags",
                features.nrows(),
                labels.len(),
                splits.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::config(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        let ds = Self {
            features,
            labels,
            splits,
            num_classes,
        };
        for class in 0..num_classes {
            for split in [Split::Train, Split::Test] {
                if ds.rows_of(split, class).is_empty() {
                    return Err(Error::config(format!(
                        "class {class} has no {split:?} samples"
                    )));
                }
            }
        }
        Ok(ds)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Row ids of `split`, ascending.
    pub fn rows(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.splits[i] == split)
            .collect()
    }

    /// Row ids of `split` with label `class`, ascending.
    pub fn rows_of(&self, split: Split, class: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.splits[i] == split && self.labels[i] == class)
            .collect()
    }

    pub fn view(&self, rows: Vec<usize>) -> DataView<'_> {
        DataView::new(self.features.view(), &self.labels, rows)
    }

    pub fn split_view(&self, split: Split) -> DataView<'_> {
        self.view(self.rows(split))
    }

    /// Per-class centroid of the train split.
    pub fn train_centroids(&self) -> Array2<f64> {
        let mut sums = Array2::zeros((self.num_classes, self.dim()));
        let mut counts = vec![0usize; self.num_classes];
        for i in self.rows(Split::Train) {
            let y = self.labels[i];
            let mut row = sums.row_mut(y);
            row += &self.features.row(i);
            counts[y] += 1;
        }
        for (mut row, &c) in sums.rows_mut().into_iter().zip(&counts) {
            row /= c.max(1) as f64;
        }
        sums
    }
}

/// Per-class split sizes: 70% train, 15% valid, the rest test.
pub fn split_sizes(per_class: usize) -> (usize, usize, usize) {
    let train = per_class * 70 / 100;
    let valid = per_class * 15 / 100;
    (train, valid, per_class - train - valid)
}

/// Isotropic Gaussian blobs. Class centers are drawn from
/// `N(0, center_spread²)` per coordinate and samples add `N(0, noise_sigma²)`
/// noise. Each class is split 70/15/15 into train/valid/test.
pub fn synth_gaussians(
    num_classes: usize,
    per_class: usize,
    dims: usize,
    center_spread: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if num_classes == 0 || per_class == 0 || dims == 0 {
        return Err(Error::config("synthetic dataset counts must be positive"));
    }
    let (train, valid, test) = split_sizes(per_class);
    if train == 0 || test == 0 {
        return Err(Error::config(format!(
            "per_class {per_class} is too small for a 70/15/15 split"
        )));
    }
    let mut center_rng = seed::rng(seed::derive(seed, "synth-centers", 0));
    let centers = Array2::from_shape_simple_fn((num_classes, dims), || {
        let z: f64 = center_rng.sample(StandardNormal);
        z * center_spread
    });

    let total = num_classes * per_class;
    let mut features = Array2::zeros((total, dims));
    let mut labels = Vec::with_capacity(total);
    let mut splits = Vec::with_capacity(total);
    let mut noise_rng = seed::rng(seed::derive(seed, "synth-noise", 0));
    for class in 0..num_classes {
        for i in 0..per_class {
            let row = class * per_class + i;
            for d in 0..dims {
                let z: f64 = noise_rng.sample(StandardNormal);
                features[[row, d]] = centers[[class, d]] + noise_sigma * z;
            }
            labels.push(class);
            splits.push(if i < train {
                Split::Train
            } else if i < train + valid {
                Split::Valid
            } else {
                Split::Test
            });
        }
    }
    debug_assert_eq!(train + valid + test, per_class);
    LabeledDataset::new(features, labels, splits, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::argmax;

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_sizes(500), (350, 75, 75));
        assert_eq!(split_sizes(715), (500, 107, 108));
        let ds = synth_gaussians(4, 500, 3, 1.0, 0.5, 1).unwrap();
        for c in 0..4 {
            assert_eq!(ds.rows_of(Split::Train, c).len(), 350);
            assert_eq!(ds.rows_of(Split::Test, c).len(), 75);
        }
    }

    #[test]
    fn deterministic() {
        let a = synth_gaussians(3, 20, 4, 2.0, 0.3, 5).unwrap();
        assert_eq!(a, synth_gaussians(3, 20, 4, 2.0, 0.3, 5).unwrap());
        assert_ne!(a, synth_gaussians(3, 20, 4, 2.0, 0.3, 6).unwrap());
    }

    #[test]
    fn noiseless_blobs_are_separable_by_nearest_center() {
        let ds = synth_gaussians(5, 40, 6, 1.0, 0.0, 2).unwrap();
        let centers = ds.train_centroids();
        for i in ds.rows(Split::Test) {
            let x = ds.features().row(i);
            let neg_dist: Vec<f64> = centers
                .rows()
                .into_iter()
                .map(|c| -(&c - &x).mapv(|v| v * v).sum())
                .collect();
            assert_eq!(argmax(ndarray::ArrayView1::from(&neg_dist)), ds.labels()[i]);
        }
    }

    #[test]
    fn invariants_enforced() {
        let x = Array2::zeros((2, 1));
        assert!(
            LabeledDataset::new(x.clone(), vec![0, 2], vec![Split::Train, Split::Test], 2).is_err()
        );
        // class 1 missing from test
        assert!(LabeledDataset::new(x, vec![0, 1], vec![Split::Test, Split::Train], 2).is_err());
        assert!(synth_gaussians(0, 10, 2, 1.0, 1.0, 0).is_err());
        assert!(synth_gaussians(2, 1, 2, 1.0, 1.0, 0).is_err());
    }
}
