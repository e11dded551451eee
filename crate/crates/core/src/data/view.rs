//! Row sources consumed by training and evaluation.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// An indexable set of labeled rows.
pub trait Samples: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dim(&self) -> usize;

    /// Copies rows at `positions` into `features` (one row each) and their
    /// labels into `labels`.
    fn gather(
        &self,
        positions: &[usize],
        features: &mut Array2<f64>,
        labels: &mut [usize],
    ) -> Result<()>;

    /// All rows in order.
    fn materialize(&self) -> Result<FeatureSet> {
        let positions: Vec<usize> = (0..self.len()).collect();
        let mut features = Array2::zeros((self.len(), self.dim()));
        let mut labels = vec![0; self.len()];
        self.gather(&positions, &mut features, &mut labels)?;
        Ok(FeatureSet { features, labels })
    }
}

/// Owned feature matrix with labels.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl FeatureSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::config(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        Ok(Self { features, labels })
    }
}

impl Samples for FeatureSet {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn gather(
        &self,
        positions: &[usize],
        features: &mut Array2<f64>,
        labels: &mut [usize],
    ) -> Result<()> {
        for (i, &p) in positions.iter().enumerate() {
            features.row_mut(i).assign(&self.features.row(p));
            labels[i] = self.labels[p];
        }
        Ok(())
    }
}

/// Records every row read through a [`DataView`] and flags reads of
/// forbidden (deletion-set) rows.
#[derive(Debug)]
pub struct AccessAudit {
    forbidden: Vec<bool>,
    reads: AtomicU64,
    violations: AtomicU64,
}

impl AccessAudit {
    /// `rows` is the size of the underlying table.
    pub fn new(rows: usize, forbidden: &[usize]) -> Self {
        let mut mask = vec![false; rows];
        for &i in forbidden {
            mask[i] = true;
        }
        Self {
            forbidden: mask,
            reads: AtomicU64::new(0),
            violations: AtomicU64::new(0),
        }
    }

    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn violations(&self) -> u64 {
        self.violations.load(Ordering::Relaxed)
    }

    fn check(&self, row: usize) -> Result<()> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        if self.forbidden[row] {
            self.violations.fetch_add(1, Ordering::Relaxed);
            return Err(Error::AccessViolation { index: row });
        }
        Ok(())
    }
}

/// A subset of rows of a borrowed table, optionally audited.
#[derive(Clone, Debug)]
pub struct DataView<'a> {
    features: ArrayView2<'a, f64>,
    labels: &'a [usize],
    rows: Vec<usize>,
    audit: Option<&'a AccessAudit>,
}

impl<'a> DataView<'a> {
    pub fn new(features: ArrayView2<'a, f64>, labels: &'a [usize], rows: Vec<usize>) -> Self {
        Self {
            features,
            labels,
            rows,
            audit: None,
        }
    }

    pub fn audited(mut self, audit: &'a AccessAudit) -> Self {
        self.audit = Some(audit);
        self
    }

    /// Underlying row index of each position.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }
}

impl Samples for DataView<'_> {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn gather(
        &self,
        positions: &[usize],
        features: &mut Array2<f64>,
        labels: &mut [usize],
    ) -> Result<()> {
        for (i, &p) in positions.iter().enumerate() {
            let row = self.rows[p];
            if let Some(audit) = self.audit {
                audit.check(row)?;
            }
            features.row_mut(i).assign(&self.features.row(row));
            labels[i] = self.labels[row];
        }
        Ok(())
    }
}
