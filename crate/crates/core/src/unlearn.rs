//! Unlearning procedures. None of them is handed the deletion set; each
//! only sees the retain set.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Samples;
use crate::error::{Error, Result};
use crate::nn::{
    init_model, precompute_prefix_features, reinit_suffix, train, ArchSpec, Model, TrainingConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Retrain,
    Eu,
    Cf,
    Noop,
}

/// An unlearning method as written in configs: `retrain`, `noop`, `eu:k`,
/// `cf:k` or `cf:k:epochs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UnlearnMethod {
    pub kind: MethodKind,
    /// Trailing parameterized layers touched (EU/CF only).
    pub k: usize,
    pub cf_epochs_override: Option<usize>,
}

impl UnlearnMethod {
    pub const RETRAIN: Self = Self {
        kind: MethodKind::Retrain,
        k: 0,
        cf_epochs_override: None,
    };
    pub const NOOP: Self = Self {
        kind: MethodKind::Noop,
        k: 0,
        cf_epochs_override: None,
    };

    pub fn eu(k: usize) -> Self {
        Self {
            kind: MethodKind::Eu,
            k,
            cf_epochs_override: None,
        }
    }

    pub fn cf(k: usize) -> Self {
        Self {
            kind: MethodKind::Cf,
            k,
            cf_epochs_override: None,
        }
    }

    pub fn cf_with_epochs(k: usize, epochs: usize) -> Self {
        Self {
            cf_epochs_override: Some(epochs),
            ..Self::cf(k)
        }
    }

    /// Table row label, e.g. `EU-2`, `CF-1`, `CF-1/4ep`.
    pub fn label(&self) -> String {
        match self.kind {
            MethodKind::Retrain => "Retrain".into(),
            MethodKind::Noop => "NoOp".into(),
            MethodKind::Eu => format!("EU-{}", self.k),
            MethodKind::Cf => match self.cf_epochs_override {
                Some(e) => format!("CF-{}/{e}ep", self.k),
                None => format!("CF-{}", self.k),
            },
        }
    }

    pub fn validate_for(&self, param_layer_count: usize) -> Result<()> {
        if matches!(self.kind, MethodKind::Eu | MethodKind::Cf)
            && !(1..=param_layer_count).contains(&self.k)
        {
            return Err(Error::config(format!(
                "{}: k must lie in 1..={param_layer_count}",
                self
            )));
        }
        Ok(())
    }
}

impl fmt::Display for UnlearnMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            MethodKind::Retrain => f.write_str("retrain"),
            MethodKind::Noop => f.write_str("noop"),
            MethodKind::Eu => write!(f, "eu:{}", self.k),
            MethodKind::Cf => match self.cf_epochs_override {
                Some(e) => write!(f, "cf:{}:{e}", self.k),
                None => write!(f, "cf:{}", self.k),
            },
        }
    }
}

impl FromStr for UnlearnMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| Error::config(format!("bad number {t:?} in method {s:?}")))
        };
        match parts.as_slice() {
            ["retrain"] => Ok(Self::RETRAIN),
            ["noop"] => Ok(Self::NOOP),
            ["eu", k] => Ok(Self::eu(num(k)?)),
            ["cf", k] => Ok(Self::cf(num(k)?)),
            ["cf", k, e] => Ok(Self::cf_with_epochs(num(k)?, num(e)?)),
            _ => Err(Error::config(format!("unknown unlearning method {s:?}"))),
        }
        .and_then(|m| {
            if matches!(m.kind, MethodKind::Eu | MethodKind::Cf) && m.k == 0 {
                Err(Error::config(format!("{s:?}: k must be at least 1")))
            } else {
                Ok(m)
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct UnlearnResult {
    pub model: Model,
    /// Time spent in the unlearning call, excluding prefix precomputation.
    pub wall_time_s: f64,
    /// One-off cost of caching frozen-prefix activations.
    pub precompute_time_s: f64,
    pub method: UnlearnMethod,
}

/// Trains layers `frozen_prefix..` of `start`, timing the prefix cache and
/// the suffix training separately.
fn train_suffix_timed(
    start: &Model,
    retain: &dyn Samples,
    config: &TrainingConfig,
    frozen_prefix: usize,
) -> Result<(Model, f64, f64)> {
    if frozen_prefix == 0 || frozen_prefix == start.param_layer_count() || config.epochs == 0 {
        let t = Instant::now();
        let model = train(start, retain, config, frozen_prefix)?;
        return Ok((model, 0.0, t.elapsed().as_secs_f64()));
    }
    let t = Instant::now();
    let cached = precompute_prefix_features(start, frozen_prefix, retain)?;
    let precompute = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let suffix = train(&start.suffix(frozen_prefix), &cached, config, 0)?;
    let model = start.with_suffix(frozen_prefix, suffix);
    Ok((model, precompute, t.elapsed().as_secs_f64()))
}

/// Trains a fresh model on the retain set with the original procedure.
pub fn retrain(
    arch: &ArchSpec,
    retain: &dyn Samples,
    config: &TrainingConfig,
    seed: u64,
) -> Result<UnlearnResult> {
    let t = Instant::now();
    let model = train(&init_model(arch, seed)?, retain, config, 0)?;
    Ok(UnlearnResult {
        model,
        wall_time_s: t.elapsed().as_secs_f64(),
        precompute_time_s: 0.0,
        method: UnlearnMethod::RETRAIN,
    })
}

/// EU-k: reinitialize the last `k` layers with `seed` and retrain them on
/// the retain set with everything before them frozen.
pub fn eu_k(
    original: &Model,
    retain: &dyn Samples,
    config: &TrainingConfig,
    k: usize,
    seed: u64,
) -> Result<UnlearnResult> {
    let method = UnlearnMethod::eu(k);
    method.validate_for(original.param_layer_count())?;
    let t = Instant::now();
    let start = reinit_suffix(original, k, seed)?;
    let reinit = t.elapsed().as_secs_f64();
    let prefix = original.param_layer_count() - k;
    let (model, precompute, trained) = train_suffix_timed(&start, retain, config, prefix)?;
    Ok(UnlearnResult {
        model,
        wall_time_s: reinit + trained,
        precompute_time_s: precompute,
        method,
    })
}

/// Epoch budget for CF-k: the override, or half the original epochs
/// rounded down.
pub fn cf_epochs(config: &TrainingConfig, epochs_override: Option<usize>) -> usize {
    epochs_override.unwrap_or(config.epochs / 2)
}

/// CF-k: finetune the last `k` layers of the original model on the retain
/// set, starting from its weights with a fresh schedule and zero momentum.
pub fn cf_k(
    original: &Model,
    retain: &dyn Samples,
    config: &TrainingConfig,
    k: usize,
    epochs_override: Option<usize>,
) -> Result<UnlearnResult> {
    let method = UnlearnMethod {
        kind: MethodKind::Cf,
        k,
        cf_epochs_override: epochs_override,
    };
    method.validate_for(original.param_layer_count())?;
    let config = TrainingConfig {
        epochs: cf_epochs(config, epochs_override),
        ..config.clone()
    };
    let prefix = original.param_layer_count() - k;
    let (model, precompute, trained) = train_suffix_timed(original, retain, &config, prefix)?;
    Ok(UnlearnResult {
        model,
        wall_time_s: trained,
        precompute_time_s: precompute,
        method,
    })
}

/// Runs `method`. `seed` initializes freshly drawn layers (Retrain, EU-k);
/// `config.seed` drives shuffling.
pub fn apply(
    method: &UnlearnMethod,
    original: &Model,
    retain: &dyn Samples,
    arch: &ArchSpec,
    config: &TrainingConfig,
    seed: u64,
) -> Result<UnlearnResult> {
    match method.kind {
        MethodKind::Noop => Ok(UnlearnResult {
            model: original.clone(),
            wall_time_s: 0.0,
            precompute_time_s: 0.0,
            method: *method,
        }),
        MethodKind::Retrain => retrain(arch, retain, config, seed),
        MethodKind::Eu => eu_k(original, retain, config, method.k, seed),
        MethodKind::Cf => cf_k(
            original,
            retain,
            config,
            method.k,
            method.cf_epochs_override,
        ),
    }
}
