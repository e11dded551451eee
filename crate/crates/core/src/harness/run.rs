use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::{
    dt_for, make_deletion_plan, DeletionPlan, LabeledDataset, Samples, TestKind, TestSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    comi, confusion_matrix, err, fgt, utility_err, FgtMode, Metric, MetricReport, MiaConfig, Target,
};
use crate::nn::{init_model, train, ArchSpec, Model, TrainingConfig};
use crate::seed::derive;
use crate::unlearn::apply;

pub const ORIGINAL_LABEL: &str = "Original";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed { error: String },
}

/// One row of a run: the original model or one unlearning method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub label: String,
    /// Method as written in a config; `None` for the original model.
    pub method: Option<String>,
    #[serde(flatten)]
    pub status: Status,
    pub metrics: Vec<MetricReport>,
}

impl MethodRecord {
    pub fn value(&self, metric: Metric, target: Target) -> Option<f64> {
        self.metrics
            .iter()
            .find(|r| r.metric == metric && r.target == target)
            .map(|r| r.value)
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub label: String,
    pub wall_time_s: f64,
    pub precompute_time_s: f64,
}

/// Wall-clock measurements of a run, kept apart from the deterministic
/// record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub seed: u64,
    pub original_train_s: f64,
    pub methods: Vec<MethodTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub test: TestKind,
    pub n: usize,
    pub affected_classes: Vec<usize>,
    pub arch_id: String,
    /// Rows read from the retain set by all unlearning methods; none of them
    /// may belong to D_f.
    pub retain_reads: u64,
    pub rows: Vec<MethodRecord>,
    #[serde(skip)]
    pub timings: RunTimings,
}

impl RunRecord {
    pub fn row(&self, label: &str) -> Option<&MethodRecord> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Evaluation sets shared by every model in a run.
struct EvalSets {
    kind: TestKind,
    affected: Vec<usize>,
    fgt_mode: FgtMode,
    df: (ndarray::Array2<f64>, Vec<usize>),
    df_targets: Vec<usize>,
    dt: (ndarray::Array2<f64>, Vec<usize>),
    dt_targets: Vec<usize>,
}

impl EvalSets {
    fn new(plan: &DeletionPlan, data: &LabeledDataset) -> Result<Self> {
        let df = data.view(plan.df_rows()).materialize()?;
        let dt = data.view(dt_for(plan, data)).materialize()?;
        let fgt_mode = match (plan.kind, plan.affected_classes.as_slice()) {
            (TestKind::Cr, &[c]) => FgtMode::ClassRemoval(c),
            _ => FgtMode::Confusion(plan.affected_classes.clone()),
        };
        // IC members are probed on the label they were trained with and
        // unseen samples on the partner class, i.e. the label swap that
        // memorization would produce.
        let (df_targets, dt_targets) = match plan.confused_pair() {
            Some((a, b)) => {
                let partner = |y: usize| if y == a { b } else { a };
                (
                    plan.df_labels(),
                    dt.labels.iter().map(|&y| partner(y)).collect(),
                )
            }
            None => (plan.original_labels.clone(), dt.labels.clone()),
        };
        Ok(Self {
            kind: plan.kind,
            affected: plan.affected_classes.clone(),
            fgt_mode,
            df: (df.features, plan.original_labels.clone()),
            df_targets,
            dt: (dt.features, dt.labels),
            dt_targets,
        })
    }

    fn set(&self, target: Target) -> &(ndarray::Array2<f64>, Vec<usize>) {
        if target == Target::Memorization {
            &self.df
        } else {
            &self.dt
        }
    }

    fn evaluate(
        &self,
        model: &Model,
        data: &LabeledDataset,
        plan: &DeletionPlan,
        columns: &[(Metric, Target)],
        mia: &MiaConfig,
        seed: u64,
    ) -> Result<Vec<MetricReport>> {
        let mut out = Vec::with_capacity(columns.len());
        for &(metric, target) in columns {
            let value = match metric {
                Metric::Err | Metric::Fgt => {
                    let (x, y) = self.set(target);
                    let c = confusion_matrix(model, x.view(), y)?;
                    if metric == Metric::Err {
                        err(&c, &self.affected)?
                    } else {
                        fgt(&c, &self.fgt_mode)? as f64
                    }
                }
                Metric::Comi => {
                    comi(
                        model,
                        (self.df.0.view(), &self.df_targets),
                        (self.dt.0.view(), &self.dt_targets),
                        mia,
                    )?
                    .accuracy
                }
                Metric::Utility => utility_err(model, data, plan)?,
            };
            let report = MetricReport {
                metric,
                test: self.kind,
                target,
                value,
                unit: metric.unit(),
                seed,
            };
            report.validate()?;
            out.push(report);
        }
        Ok(out)
    }
}

/// Stream seeds of one run. Retrain and EU-k draw from the same unlearning
/// streams so that EU over every layer reproduces Retrain exactly.
#[derive(Clone, Copy, Debug)]
pub struct RunSeeds {
    pub plan: u64,
    pub original_init: u64,
    pub original_shuffle: u64,
    pub unlearn_init: u64,
    pub unlearn_shuffle: u64,
    pub mia: u64,
}

impl RunSeeds {
    pub fn new(seed: u64) -> Self {
        Self {
            plan: derive(seed, "plan", 0),
            original_init: derive(seed, "original-init", 0),
            original_shuffle: derive(seed, "original-shuffle", 0),
            unlearn_init: derive(seed, "unlearn-init", 0),
            unlearn_shuffle: derive(seed, "unlearn-shuffle", 0),
            mia: derive(seed, "mia", 0),
        }
    }
}

/// Runs one seed end to end: build the deletion test, train the original
/// model on D′, apply every method to the retain set and score all models.
///
/// A method that fails is recorded with its error; the others still run.
/// Errors from building the test or training the original abort the run.
pub fn run_experiment(
    config: &ExperimentConfig,
    data: &LabeledDataset,
    seed: u64,
) -> Result<RunRecord> {
    let arch = config.arch(data.dim(), data.num_classes())?;
    let seeds = RunSeeds::new(seed);
    let spec = TestSpec {
        kind: config.test.kind,
        n: config.test.n,
        class_params: config.test.class_params(data)?,
        seed: seeds.plan,
    };
    let plan = make_deletion_plan(data, &spec)?;
    let columns = config.columns();
    let mia = MiaConfig {
        seed: seeds.mia,
        ..config.mia.clone()
    };
    let eval = EvalSets::new(&plan, data)?;

    let t = Instant::now();
    let original = train_original(&arch, &plan, data, &config.training, &seeds)?;
    let original_train_s = t.elapsed().as_secs_f64();
    log::info!("seed {seed}: original trained in {original_train_s:.2}s");

    let mut rows = vec![score(
        ORIGINAL_LABEL.to_string(),
        None,
        eval.evaluate(&original, data, &plan, &columns, &mia, seed),
    )];
    let mut timings = RunTimings {
        seed,
        original_train_s,
        methods: Vec::new(),
    };

    let audit = plan.deletion_audit(data);
    let unlearn_config = TrainingConfig {
        seed: seeds.unlearn_shuffle,
        ..config.training.clone()
    };
    for method in config.ordered_methods() {
        let retain = plan.retain(data).audited(&audit);
        let outcome = apply(
            &method,
            &original,
            &retain,
            &arch,
            &unlearn_config,
            seeds.unlearn_init,
        );
        let label = method.label();
        let result = outcome.and_then(|r| {
            timings.methods.push(MethodTiming {
                label: label.clone(),
                wall_time_s: r.wall_time_s,
                precompute_time_s: r.precompute_time_s,
            });
            eval.evaluate(&r.model, data, &plan, &columns, &mia, seed)
        });
        if let Err(e) = &result {
            log::warn!("seed {seed}: {label} failed: {e}");
        }
        rows.push(score(label, Some(method.to_string()), result));
    }
    if audit.violations() > 0 {
        return Err(Error::AccessViolation {
            index: plan.df_rows()[0],
        });
    }

    Ok(RunRecord {
        seed,
        test: plan.kind,
        n: plan.n(),
        affected_classes: plan.affected_classes.clone(),
        arch_id: arch.arch_id(),
        retain_reads: audit.reads(),
        rows,
        timings,
    })
}

fn train_original(
    arch: &ArchSpec,
    plan: &DeletionPlan,
    data: &LabeledDataset,
    training: &TrainingConfig,
    seeds: &RunSeeds,
) -> Result<Model> {
    let config = TrainingConfig {
        seed: seeds.original_shuffle,
        ..training.clone()
    };
    let d_prime = plan.d_prime(data);
    debug_assert_eq!(d_prime.len(), plan.train_rows.len());
    train(
        &init_model(arch, seeds.original_init)?,
        &d_prime,
        &config,
        0,
    )
}

fn score(label: String, method: Option<String>, result: Result<Vec<MetricReport>>) -> MethodRecord {
    match result {
        Ok(metrics) => MethodRecord {
            label,
            method,
            status: Status::Ok,
            metrics,
        },
        Err(e) => MethodRecord {
            label,
            method,
            status: Status::Failed {
                error: e.to_string(),
            },
            metrics: Vec::new(),
        },
    }
}

/// Runs every seed of `config` (shifted by `seed_offset`) on `jobs` threads.
/// Records come back in seed order regardless of scheduling.
pub fn run_all(
    config: &ExperimentConfig,
    data: &LabeledDataset,
    seed_offset: u64,
    jobs: usize,
) -> Result<Vec<RunRecord>> {
    use rayon::prelude::*;
    let seeds: Vec<u64> = config
        .seeds
        .iter()
        .map(|s| s.wrapping_add(seed_offset))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| run_experiment(config, data, s))
            .collect()
    })
}

/// The deletion plan and original model that a run with `seed` starts from.
pub fn original_model(
    config: &ExperimentConfig,
    data: &LabeledDataset,
    seed: u64,
) -> Result<(Model, DeletionPlan)> {
    let arch = config.arch(data.dim(), data.num_classes())?;
    let seeds = RunSeeds::new(seed);
    let spec = TestSpec {
        kind: config.test.kind,
        n: config.test.n,
        class_params: config.test.class_params(data)?,
        seed: seeds.plan,
    };
    let plan = make_deletion_plan(data, &spec)?;
    let model = train_original(&arch, &plan, data, &config.training, &seeds)?;
    Ok((model, plan))
}
