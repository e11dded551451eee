//! Experiment configuration: a flat `key = value` text file. Blank lines and
//! `#` comments are ignored; unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{load_idx, synth_gaussians, ClassParams, LabeledDataset, TestKind};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MiaConfig, Target};
use crate::nn::{ArchSpec, TrainingConfig};
use crate::unlearn::{MethodKind, UnlearnMethod};

/// Every accepted key with its default (`None` = required or optional
/// without a default).
const KEYS: &[(&str, Option<&str>)] = &[
    ("dataset.kind", Some("synthetic")),
    ("dataset.num_classes", Some("4")),
    ("dataset.per_class", Some("715")),
    ("dataset.dims", Some("16")),
    ("dataset.center_spread", Some("1.0")),
    ("dataset.noise_sigma", Some("1.0")),
    ("dataset.seed", Some("0")),
    ("dataset.images", None),
    ("dataset.labels", None),
    ("model.layers", None),
    ("train.epochs", Some("62")),
    ("train.batch_size", Some("64")),
    ("train.momentum", Some("0.9")),
    ("train.weight_decay", Some("5e-5")),
    ("train.min_lr", Some("5e-3")),
    ("train.max_lr", Some("0.01")),
    ("train.t0", Some("1")),
    ("train.t_mult", Some("2")),
    ("train.warm_restarts", Some("true")),
    ("test.kind", Some("ic")),
    ("test.n", None),
    ("test.classes", Some("auto")),
    ("unlearn.methods", Some("noop,retrain")),
    ("unlearn.k", Some("1")),
    ("unlearn.cf_epochs", None),
    ("metrics", Some("err,fgt,comi,utility")),
    ("targets", Some("memorization,property_generalization")),
    ("mia.shadow_fraction", Some("0.5")),
    ("mia.repetitions", Some("20")),
    ("seeds", Some("0")),
    ("output_dir", None),
    ("report.clamp_comi", Some("false")),
];

pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

/// Parses `key = value` lines into a map, rejecting unknown and duplicate
/// keys.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    let mut unknown = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!(
                "line {}: expected `key = value`, got {raw:?}",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if !known_keys().any(|k| k == key) {
            unknown.push(key.to_string());
            continue;
        }
        if map
            .insert(key.to_string(), value.trim().to_string())
            .is_some()
        {
            return Err(Error::config(format!(
                "line {}: duplicate key {key}",
                lineno + 1
            )));
        }
    }
    if !unknown.is_empty() {
        return Err(Error::config(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )));
    }
    Ok(map)
}

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    Synthetic {
        num_classes: usize,
        per_class: usize,
        dims: usize,
        center_spread: f64,
        noise_sigma: f64,
        seed: u64,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

impl DatasetSpec {
    pub fn load(&self) -> Result<LabeledDataset> {
        match self {
            DatasetSpec::Synthetic {
                num_classes,
                per_class,
                dims,
                center_spread,
                noise_sigma,
                seed,
            } => synth_gaussians(
                *num_classes,
                *per_class,
                *dims,
                *center_spread,
                *noise_sigma,
                *seed,
            ),
            DatasetSpec::Idx { images, labels } => load_idx(images, labels),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassChoice {
    /// IC: the pair a probe confuses most; CR: class 0.
    Auto,
    Class(usize),
    Pair(usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestConfig {
    pub kind: TestKind,
    pub n: usize,
    pub classes: ClassChoice,
}

impl TestConfig {
    pub fn class_params(&self, data: &LabeledDataset) -> Result<ClassParams> {
        Ok(match (self.kind, self.classes) {
            (TestKind::Rs | TestKind::Rc, _) => ClassParams::None,
            (TestKind::Cr, ClassChoice::Auto) => ClassParams::Class(0),
            (TestKind::Cr, ClassChoice::Class(c)) => ClassParams::Class(c),
            (TestKind::Ic, ClassChoice::Auto) => {
                let (a, b) = crate::data::hardest_pair(data)?;
                ClassParams::Pair(a, b)
            }
            (TestKind::Ic, ClassChoice::Pair(a, b)) => ClassParams::Pair(a, b),
            (kind, choice) => {
                return Err(Error::config(format!(
                    "test.classes {choice:?} does not fit test {kind}"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub layers: String,
    pub training: TrainingConfig,
    pub test: TestConfig,
    pub methods: Vec<UnlearnMethod>,
    pub metrics: Vec<Metric>,
    pub targets: Vec<Target>,
    pub mia: MiaConfig,
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub clamp_comi: bool,
    /// Effective key/value pairs, defaults included.
    pub values: BTreeMap<String, String>,
}

fn parse_value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = map
        .get(key)
        .ok_or_else(|| Error::config(format!("missing required key {key}")))?;
    raw.parse()
        .map_err(|e| Error::config(format!("{key} = {raw:?}: {e}")))
}

fn parse_list<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let raw = map
        .get(key)
        .ok_or_else(|| Error::config(format!("missing required key {key}")))?;
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| Error::config(format!("{key}: {s:?}: {e}")))
        })
        .collect()
}

fn parse_target(s: &str) -> Result<Target> {
    match s {
        "memorization" | "mem" => Ok(Target::Memorization),
        "property_generalization" | "gen" => Ok(Target::PropertyGeneralization),
        other => Err(Error::config(format!("unknown target {other:?}"))),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_map(parse_kv(&text)?, &base)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_map(parse_kv(text)?, Path::new("."))
    }

    /// Builds and validates a config; relative dataset paths resolve
    /// against `base`.
    pub fn from_map(mut map: BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let unknown: Vec<&String> = map
            .keys()
            .filter(|k| !known_keys().any(|x| x == *k))
            .collect();
        if !unknown.is_empty() {
            let names: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(Error::config(format!(
                "unknown config keys: {}",
                names.join(", ")
            )));
        }
        for (k, default) in KEYS {
            if let Some(d) = default {
                map.entry((*k).to_string())
                    .or_insert_with(|| (*d).to_string());
            }
        }

        let dataset = match map["dataset.kind"].as_str() {
            "synthetic" => DatasetSpec::Synthetic {
                num_classes: parse_value(&map, "dataset.num_classes")?,
                per_class: parse_value(&map, "dataset.per_class")?,
                dims: parse_value(&map, "dataset.dims")?,
                center_spread: parse_value(&map, "dataset.center_spread")?,
                noise_sigma: parse_value(&map, "dataset.noise_sigma")?,
                seed: parse_value(&map, "dataset.seed")?,
            },
            "idx" => {
                let path = |k: &str| -> Result<PathBuf> {
                    let p = PathBuf::from(parse_value::<String>(&map, k)?);
                    Ok(if p.is_relative() { base.join(p) } else { p })
                };
                DatasetSpec::Idx {
                    images: path("dataset.images")?,
                    labels: path("dataset.labels")?,
                }
            }
            other => return Err(Error::config(format!("unknown dataset.kind {other:?}"))),
        };

        let training = TrainingConfig {
            epochs: parse_value(&map, "train.epochs")?,
            batch_size: parse_value(&map, "train.batch_size")?,
            momentum: parse_value(&map, "train.momentum")?,
            weight_decay: parse_value(&map, "train.weight_decay")?,
            min_lr: parse_value(&map, "train.min_lr")?,
            max_lr: parse_value(&map, "train.max_lr")?,
            t0: parse_value(&map, "train.t0")?,
            t_mult: parse_value(&map, "train.t_mult")?,
            seed: 0,
            warm_restarts: parse_value(&map, "train.warm_restarts")?,
        };
        training.validate()?;
        if training.epochs == 0 {
            return Err(Error::config("train.epochs must be positive"));
        }

        let kind: TestKind = parse_value(&map, "test.kind")?;
        let classes_raw = map["test.classes"].clone();
        let classes = if classes_raw == "auto" {
            ClassChoice::Auto
        } else {
            let ids: Vec<usize> = parse_list(&map, "test.classes")?;
            match ids.as_slice() {
                [c] => ClassChoice::Class(*c),
                [a, b] => ClassChoice::Pair(*a, *b),
                _ => return Err(Error::config("test.classes takes one class or a pair")),
            }
        };
        let test = TestConfig {
            kind,
            n: parse_value(&map, "test.n")?,
            classes,
        };
        match (kind, classes) {
            (TestKind::Rs | TestKind::Rc, ClassChoice::Auto)
            | (TestKind::Cr, ClassChoice::Auto | ClassChoice::Class(_))
            | (TestKind::Ic, ClassChoice::Auto | ClassChoice::Pair(..)) => {}
            _ => {
                return Err(Error::config(format!(
                    "test.classes = {classes_raw} does not fit test {kind}"
                )))
            }
        }

        let default_k: usize = parse_value(&map, "unlearn.k")?;
        let default_cf_epochs: Option<usize> = match map.get("unlearn.cf_epochs") {
            Some(_) => Some(parse_value(&map, "unlearn.cf_epochs")?),
            None => None,
        };
        let mut methods = Vec::new();
        for item in map["unlearn.methods"]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
        {
            let method = match item {
                "eu" => UnlearnMethod::eu(default_k),
                "cf" => UnlearnMethod {
                    cf_epochs_override: default_cf_epochs,
                    ..UnlearnMethod::cf(default_k)
                },
                other => {
                    let mut m: UnlearnMethod = other.parse()?;
                    if m.kind == MethodKind::Cf && m.cf_epochs_override.is_none() {
                        m.cf_epochs_override = default_cf_epochs;
                    }
                    m
                }
            };
            if methods.contains(&method) {
                return Err(Error::config(format!("method {item} listed twice")));
            }
            methods.push(method);
        }
        if methods.is_empty() {
            return Err(Error::config("unlearn.methods is empty"));
        }

        let mut metrics: Vec<Metric> = parse_list(&map, "metrics")?;
        metrics.sort();
        metrics.dedup();
        if metrics.is_empty() {
            return Err(Error::config("no metrics configured"));
        }
        let mut targets = map["targets"]
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(parse_target)
            .collect::<Result<Vec<_>>>()?;
        targets.sort();
        targets.dedup();
        if !kind.is_targeted() && metrics.contains(&Metric::Fgt) {
            return Err(Error::config(format!(
                "fgt equals err for the untargeted {kind} test; drop it from metrics"
            )));
        }
        if metrics.contains(&Metric::Comi) && !targets.contains(&Target::Memorization) {
            return Err(Error::config(
                "comi measures memorization only; add memorization to targets or drop comi",
            ));
        }
        let needs_target = metrics.iter().any(|m| *m != Metric::Utility);
        if needs_target && targets.is_empty() {
            return Err(Error::config("targets is empty"));
        }

        let mia = MiaConfig {
            shadow_fraction: parse_value(&map, "mia.shadow_fraction")?,
            repetitions: parse_value(&map, "mia.repetitions")?,
            seed: 0,
        };
        mia.validate()?;

        let seeds: Vec<u64> = parse_list(&map, "seeds")?;
        if seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let mut unique = seeds.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() != seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }

        let layers = parse_value::<String>(&map, "model.layers")?;
        let config = Self {
            dataset,
            layers,
            training,
            test,
            methods,
            metrics,
            targets,
            mia,
            seeds,
            output_dir: map.get("output_dir").map(PathBuf::from),
            clamp_comi: parse_value(&map, "report.clamp_comi")?,
            values: map,
        };
        if let DatasetSpec::Synthetic {
            dims, num_classes, ..
        } = config.dataset
        {
            config.arch(dims, num_classes)?;
        }
        Ok(config)
    }

    /// Architecture for a dataset of the given shape; also checks every
    /// method's `k` against it.
    pub fn arch(&self, input_dim: usize, num_classes: usize) -> Result<ArchSpec> {
        let arch = ArchSpec::parse(input_dim, &self.layers)?;
        arch.validate_classes(num_classes)?;
        for m in &self.methods {
            m.validate_for(arch.param_layer_count())?;
        }
        Ok(arch)
    }

    /// `(metric, target)` columns in report order.
    pub fn columns(&self) -> Vec<(Metric, Target)> {
        let mut cols = Vec::new();
        for &m in &self.metrics {
            match m {
                Metric::Utility => cols.push((m, Target::Utility)),
                Metric::Comi => cols.push((m, Target::Memorization)),
                _ => cols.extend(self.targets.iter().map(|&t| (m, t))),
            }
        }
        cols
    }

    /// Methods in report order: Retrain moves to the end.
    pub fn ordered_methods(&self) -> Vec<UnlearnMethod> {
        let mut out: Vec<UnlearnMethod> = self
            .methods
            .iter()
            .copied()
            .filter(|m| m.kind != MethodKind::Retrain)
            .collect();
        if self.methods.iter().any(|m| m.kind == MethodKind::Retrain) {
            out.push(UnlearnMethod::RETRAIN);
        }
        out
    }

    /// Copy with `key` set to `value`, revalidated.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.values.clone();
        if !known_keys().any(|k| k == key) {
            return Err(Error::config(format!("unknown config keys: {key}")));
        }
        map.insert(key.to_string(), value.to_string());
        // Dataset paths are already absolute or base-relative.
        Self::from_map(map, Path::new(""))
    }

    /// Effective configuration as `key = value` lines.
    pub fn to_text(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
