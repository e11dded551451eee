//! Forgetting and utility metrics.

mod confusion;
mod mia;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use confusion::{confusion_matrix, err, fgt, ConfusionMatrix, FgtMode};
pub use mia::{
    comi, comi_from_observations, fit_threshold, threshold_accuracy, MiaConfig, MiaOutcome,
    Observation,
};

use crate::data::{DeletionPlan, LabeledDataset, Samples, Split, TestKind};
use crate::error::{Error, Result};
use crate::nn::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Err,
    Fgt,
    Comi,
    Utility,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Err => "err",
            Metric::Fgt => "fgt",
            Metric::Comi => "comi",
            Metric::Utility => "utility",
        }
    }

    pub fn unit(self) -> Unit {
        match self {
            Metric::Fgt => Unit::Count,
            _ => Unit::Percent,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "err" => Ok(Metric::Err),
            "fgt" => Ok(Metric::Fgt),
            "comi" => Ok(Metric::Comi),
            "utility" => Ok(Metric::Utility),
            other => Err(Error::config(format!("unknown metric {other:?}"))),
        }
    }
}

/// What a metric is evaluated on: D_f itself, unseen samples like D_f, or
/// the retain distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Memorization,
    PropertyGeneralization,
    Utility,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Memorization => "memorization",
            Target::PropertyGeneralization => "property_generalization",
            Target::Utility => "utility",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Target::Memorization => "mem",
            Target::PropertyGeneralization => "gen",
            Target::Utility => "util",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Percent,
    Count,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub test: TestKind,
    pub target: Target,
    pub value: f64,
    pub unit: Unit,
    pub seed: u64,
}

impl MetricReport {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.unit {
            Unit::Percent => (0.0..=100.0).contains(&self.value),
            Unit::Count => self.value >= 0.0 && self.value.fract() == 0.0,
        };
        if !ok {
            return Err(Error::eval(format!(
                "{} value {} invalid for unit {:?}",
                self.metric, self.value, self.unit
            )));
        }
        Ok(())
    }
}

/// Classes outside the plan's affected set (all classes for RS/RC).
pub fn unaffected_classes(plan: &DeletionPlan, num_classes: usize) -> Vec<usize> {
    if !plan.kind.is_targeted() {
        return (0..num_classes).collect();
    }
    (0..num_classes)
        .filter(|c| !plan.affected_classes.contains(c))
        .collect()
}

/// Test error on the retain distribution: test samples outside the
/// affected classes for CR and IC, the whole test split for RS and RC.
pub fn utility_err(model: &Model, data: &LabeledDataset, plan: &DeletionPlan) -> Result<f64> {
    let keep = unaffected_classes(plan, data.num_classes());
    let rows: Vec<usize> = data
        .rows(Split::Test)
        .into_iter()
        .filter(|&r| keep.contains(&data.labels()[r]))
        .collect();
    if rows.is_empty() {
        return Err(Error::eval(
            "utility: no test samples outside the affected classes",
        ));
    }
    let set = data.view(rows).materialize()?;
    let c = confusion_matrix(model, set.features.view(), &set.labels)?;
    err(&c, &keep)
}
