//! Deletion tests.
//!
//! * RS: `n` random train samples, an equal number from every class.
//! * CR: `n` train samples of one class.
//! * RC: `n` random train samples (equal per class), each relabelled to a
//!   uniformly chosen different class before training.
//! * IC: `n/2` samples of class A relabelled B and `n/2` of B relabelled A.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{LabeledDataset, Split};
use super::view::{AccessAudit, DataView};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Rs,
    Cr,
    Rc,
    Ic,
}

impl TestKind {
    /// Targeted tests evaluate property generalization on affected classes
    /// only.
    pub fn is_targeted(self) -> bool {
        matches!(self, TestKind::Cr | TestKind::Ic)
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestKind::Rs => "rs",
            TestKind::Cr => "cr",
            TestKind::Rc => "rc",
            TestKind::Ic => "ic",
        })
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rs" => Ok(TestKind::Rs),
            "cr" => Ok(TestKind::Cr),
            "rc" => Ok(TestKind::Rc),
            "ic" => Ok(TestKind::Ic),
            other => Err(Error::config(format!("unknown test kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassParams {
    None,
    Class(usize),
    Pair(usize, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSpec {
    pub kind: TestKind,
    pub n: usize,
    pub class_params: ClassParams,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeletionPlan {
    pub kind: TestKind,
    /// Dataset row id of every sample of D′, ascending.
    pub train_rows: Vec<usize>,
    /// Labels after manipulation, indexed by dataset row id.
    pub labels: Vec<usize>,
    /// Positions of D_f within `train_rows`, ascending.
    pub df_indices: Vec<usize>,
    /// Labels of D_f before manipulation, aligned with `df_indices`.
    pub original_labels: Vec<usize>,
    pub affected_classes: Vec<usize>,
}

impl DeletionPlan {
    pub fn n(&self) -> usize {
        self.df_indices.len()
    }

    /// Dataset row ids of D_f, aligned with `df_indices`.
    pub fn df_rows(&self) -> Vec<usize> {
        self.df_indices
            .iter()
            .map(|&p| self.train_rows[p])
            .collect()
    }

    /// Labels of D_f as trained on (after manipulation).
    pub fn df_labels(&self) -> Vec<usize> {
        self.df_rows().iter().map(|&r| self.labels[r]).collect()
    }

    /// Dataset row ids of D′ \ D_f.
    pub fn retain_rows(&self) -> Vec<usize> {
        let mut keep = vec![true; self.train_rows.len()];
        for &p in &self.df_indices {
            keep[p] = false;
        }
        self.train_rows
            .iter()
            .zip(keep)
            .filter_map(|(&r, k)| k.then_some(r))
            .collect()
    }

    /// D′ with manipulated labels.
    pub fn d_prime<'a>(&'a self, data: &'a LabeledDataset) -> DataView<'a> {
        DataView::new(
            data.features().view(),
            &self.labels,
            self.train_rows.clone(),
        )
    }

    pub fn retain<'a>(&'a self, data: &'a LabeledDataset) -> DataView<'a> {
        DataView::new(data.features().view(), &self.labels, self.retain_rows())
    }

    /// Audit that flags any read of a D_f row.
    pub fn deletion_audit(&self, data: &LabeledDataset) -> AccessAudit {
        AccessAudit::new(data.len(), &self.df_rows())
    }

    /// The confused pair of an IC plan.
    pub fn confused_pair(&self) -> Option<(usize, usize)> {
        match (self.kind, self.affected_classes.as_slice()) {
            (TestKind::Ic, &[a, b]) => Some((a, b)),
            _ => None,
        }
    }
}

fn sample_rows(rows: &[usize], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    index::sample(rng, rows.len(), count)
        .into_iter()
        .map(|i| rows[i])
        .collect()
}

fn check_class(class: usize, num_classes: usize) -> Result<()> {
    if class >= num_classes {
        return Err(Error::spec(format!(
            "class {class} out of range for {num_classes} classes"
        )));
    }
    Ok(())
}

/// Builds the deletion test described by `spec`. Sampling is uniform
/// without replacement within the train split and a pure function of
/// `(data, spec)`.
pub fn make_deletion_plan(data: &LabeledDataset, spec: &TestSpec) -> Result<DeletionPlan> {
    let classes = data.num_classes();
    let mut rng = seed::rng(seed::derive(spec.seed, "deletion-plan", 0));
    let per_class_rows = |c: usize| data.rows_of(Split::Train, c);

    // (row, new label)
    let mut picks: Vec<(usize, usize)> = Vec::with_capacity(spec.n);
    let affected: Vec<usize> = match (spec.kind, spec.class_params) {
        (TestKind::Rs | TestKind::Rc, ClassParams::None) => {
            if !spec.n.is_multiple_of(classes) {
                return Err(Error::spec(format!(
                    "{} needs n divisible by the {classes} classes, got {}",
                    spec.kind, spec.n
                )));
            }
            let each = spec.n / classes;
            for c in 0..classes {
                let rows = per_class_rows(c);
                if each > rows.len() {
                    return Err(Error::spec(format!(
                        "class {c} has {} train samples, {each} requested",
                        rows.len()
                    )));
                }
                for r in sample_rows(&rows, each, &mut rng) {
                    let label = if spec.kind == TestKind::Rc {
                        if classes < 2 {
                            return Err(Error::spec("rc needs at least two classes"));
                        }
                        let shift = rng.random_range(1..classes);
                        (c + shift) % classes
                    } else {
                        c
                    };
                    picks.push((r, label));
                }
            }
            (0..classes).collect()
        }
        (TestKind::Cr, ClassParams::Class(c)) => {
            check_class(c, classes)?;
            let rows = per_class_rows(c);
            if spec.n > rows.len() {
                return Err(Error::spec(format!(
                    "cr on class {c}: n = {} exceeds its {} train samples",
                    spec.n,
                    rows.len()
                )));
            }
            picks.extend(
                sample_rows(&rows, spec.n, &mut rng)
                    .into_iter()
                    .map(|r| (r, c)),
            );
            vec![c]
        }
        (TestKind::Ic, ClassParams::Pair(a, b)) => {
            check_class(a, classes)?;
            check_class(b, classes)?;
            if a == b {
                return Err(Error::spec("ic needs two distinct classes"));
            }
            if !spec.n.is_multiple_of(2) {
                return Err(Error::spec(format!("ic needs an even n, got {}", spec.n)));
            }
            let half = spec.n / 2;
            for (from, to) in [(a, b), (b, a)] {
                let rows = per_class_rows(from);
                if half > rows.len() {
                    return Err(Error::spec(format!(
                        "class {from} has {} train samples, {half} requested",
                        rows.len()
                    )));
                }
                picks.extend(
                    sample_rows(&rows, half, &mut rng)
                        .into_iter()
                        .map(|r| (r, to)),
                );
            }
            vec![a.min(b), a.max(b)]
        }
        (kind, params) => {
            return Err(Error::spec(format!(
                "test {kind} does not take class parameters {params:?}"
            )));
        }
    };

    let train_rows = data.rows(Split::Train);
    let mut position = vec![usize::MAX; data.len()];
    for (p, &r) in train_rows.iter().enumerate() {
        position[r] = p;
    }
    picks.sort_unstable();
    let mut labels = data.labels().to_vec();
    let mut df_indices = Vec::with_capacity(picks.len());
    let mut original_labels = Vec::with_capacity(picks.len());
    for (r, new_label) in picks {
        df_indices.push(position[r]);
        original_labels.push(labels[r]);
        labels[r] = new_label;
    }
    Ok(DeletionPlan {
        kind: spec.kind,
        train_rows,
        labels,
        df_indices,
        original_labels,
        affected_classes: affected,
    })
}

/// Evaluation subset D_t for property generalization: test samples of the
/// affected classes for CR and IC, the whole test split otherwise.
pub fn dt_for(plan: &DeletionPlan, data: &LabeledDataset) -> Vec<usize> {
    let test = data.rows(Split::Test);
    if !plan.kind.is_targeted() {
        return test;
    }
    test.into_iter()
        .filter(|&r| plan.affected_classes.contains(&data.labels()[r]))
        .collect()
}

/// Pair of classes a nearest-centroid probe confuses most on the validation
/// split (or the train split when there is no validation data). Ties go to
/// the pair with the closest centroids, then the lowest ids.
pub fn hardest_pair(data: &LabeledDataset) -> Result<(usize, usize)> {
    let classes = data.num_classes();
    if classes < 2 {
        return Err(Error::spec("need at least two classes to pick a pair"));
    }
    let centers = data.train_centroids();
    let mut rows = data.rows(Split::Valid);
    if rows.is_empty() {
        rows = data.rows(Split::Train);
    }
    let mut confusion = vec![vec![0usize; classes]; classes];
    let features = data.features();
    for r in rows {
        let x = features.row(r);
        let mut best = (f64::INFINITY, 0);
        for (c, center) in centers.rows().into_iter().enumerate() {
            let d = (&center - &x).mapv(|v| v * v).sum();
            if d < best.0 {
                best = (d, c);
            }
        }
        confusion[data.labels()[r]][best.1] += 1;
    }
    let mut best: Option<((usize, f64), (usize, usize))> = None;
    #[allow(clippy::needless_range_loop)]
    for a in 0..classes {
        for b in a + 1..classes {
            let count = confusion[a][b] + confusion[b][a];
            let dist = (&centers.row(a) - &centers.row(b)).mapv(|v| v * v).sum();
            let better = match best {
                None => true,
                Some(((c, d), _)) => count > c || (count == c && dist < d),
            };
            if better {
                best = Some(((count, dist), (a, b)));
            }
        }
    }
    Ok(best.unwrap().1)
}
