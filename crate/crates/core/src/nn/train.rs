use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;

use super::arch::Activation;
use super::model::{cross_entropy, softmax_rows, Model};
use super::schedule::TrainingConfig;
use crate::data::{FeatureSet, Samples};
use crate::error::{Error, Result};
use crate::seed;

/// A mini-batch of rows with their class ids.
#[derive(Clone, Debug)]
pub struct Batch {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if self.features.nrows() != self.labels.len() {
            return Err(Error::config("batch rows and labels differ in length"));
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::config(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(())
    }
}

/// Parameter gradients for one layer.
#[derive(Clone, Debug)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Mean cross-entropy over `batch` and its gradient with respect to the
/// parameters of layers `frozen_prefix..`. Frozen layers are run forward
/// only; the returned vector holds one entry per trainable layer.
pub fn loss_and_grads(model: &Model, batch: &Batch, frozen_prefix: usize) -> (f64, Vec<LayerGrad>) {
    let count = model.param_layer_count();
    let mut inputs: Vec<Array2<f64>> = Vec::with_capacity(count - frozen_prefix);
    let mut a = model.forward_prefix(batch.features.view(), frozen_prefix);
    for layer in &model.layers[frozen_prefix..] {
        let next = layer.forward(a.view());
        inputs.push(a);
        a = next;
    }
    let loss = cross_entropy(&a, &batch.labels);

    let rows = batch.labels.len() as f64;
    softmax_rows(&mut a);
    for (mut row, &y) in a.axis_iter_mut(Axis(0)).zip(&batch.labels) {
        row[y] -= 1.0;
    }
    a.mapv_inplace(|v| v / rows);
    let mut delta = a;

    let mut grads = Vec::with_capacity(count - frozen_prefix);
    for l in (frozen_prefix..count).rev() {
        let layer = &model.layers[l];
        let input = &inputs[l - frozen_prefix];
        let weights = delta.t().dot(input);
        let bias = delta.sum_axis(Axis(0));
        if l > frozen_prefix {
            let mut below = delta.dot(&layer.weights);
            if model.layers[l - 1].activation == Activation::Relu {
                Zip::from(&mut below).and(input).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = below;
        }
        grads.push(LayerGrad { weights, bias });
    }
    grads.reverse();
    (loss, grads)
}

struct Velocity {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

/// Mini-batch SGD with momentum and coupled L2 decay on softmax
/// cross-entropy. The first `frozen_prefix` parameterized layers are left
/// untouched. Momentum buffers start at zero and the learning-rate schedule
/// starts at epoch 0 on every call.
pub fn train(
    model: &Model,
    data: &dyn Samples,
    config: &TrainingConfig,
    frozen_prefix: usize,
) -> Result<Model> {
    config.validate()?;
    let count = model.param_layer_count();
    if frozen_prefix > count {
        return Err(Error::config(format!(
            "frozen prefix {frozen_prefix} exceeds the {count} parameterized layers"
        )));
    }
    if data.is_empty() {
        return Err(Error::config("training data is empty"));
    }
    model.check_input(data.dim())?;

    let mut out = model.clone();
    if frozen_prefix == count || config.epochs == 0 {
        return Ok(out);
    }

    let mut velocity: Vec<Velocity> = out.layers[frozen_prefix..]
        .iter()
        .map(|l| Velocity {
            weights: Array2::zeros(l.weights.raw_dim()),
            bias: Array1::zeros(l.bias.raw_dim()),
        })
        .collect();

    let n = data.len();
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch = Batch {
        features: Array2::zeros((config.batch_size.min(n), data.dim())),
        labels: vec![0; config.batch_size.min(n)],
    };

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() != batch.labels.len() {
                batch.features = Array2::zeros((chunk.len(), data.dim()));
                batch.labels = vec![0; chunk.len()];
            }
            data.gather(chunk, &mut batch.features, &mut batch.labels)?;
            batch.validate(out.num_classes())?;

            let (loss, grads) = loss_and_grads(&out, &batch, frozen_prefix);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            for ((layer, grad), vel) in out.layers[frozen_prefix..]
                .iter_mut()
                .zip(grads)
                .zip(&mut velocity)
            {
                sgd_step(
                    &mut layer.weights,
                    grad.weights,
                    &mut vel.weights,
                    lr,
                    config,
                );
                sgd_step(&mut layer.bias, grad.bias, &mut vel.bias, lr, config);
            }
        }
    }
    Ok(out)
}

fn sgd_step<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    grad: ndarray::Array<f64, D>,
    velocity: &mut ndarray::Array<f64, D>,
    lr: f64,
    config: &TrainingConfig,
) {
    let (mu, wd) = (config.momentum, config.weight_decay);
    Zip::from(param)
        .and(&grad)
        .and(velocity)
        .for_each(|w, &g, v| {
            *v = mu * *v + g + wd * *w;
            *w -= lr * *v;
        });
}

/// Activations at the freeze boundary for every row of `data`, in order.
/// Training the suffix on these rows reproduces frozen-prefix training of
/// the full model while skipping the prefix forward pass every epoch.
pub fn precompute_prefix_features(
    model: &Model,
    frozen_prefix: usize,
    data: &dyn Samples,
) -> Result<FeatureSet> {
    if frozen_prefix == 0 {
        return Err(Error::config(
            "frozen prefix of 0 leaves nothing to precompute",
        ));
    }
    if frozen_prefix > model.param_layer_count() {
        return Err(Error::config(format!(
            "frozen prefix {frozen_prefix} exceeds the {} parameterized layers",
            model.param_layer_count()
        )));
    }
    model.check_input(data.dim())?;
    let raw = data.materialize()?;
    let features = model.forward_prefix(raw.features.view(), frozen_prefix);
    FeatureSet::new(features, raw.labels)
}

/// Trains layers `frozen_prefix..` of `model` on `data`, caching the prefix
/// activations once when there is a prefix.
pub fn train_with_cached_prefix(
    model: &Model,
    data: &dyn Samples,
    config: &TrainingConfig,
    frozen_prefix: usize,
) -> Result<Model> {
    if frozen_prefix == 0 || frozen_prefix == model.param_layer_count() || config.epochs == 0 {
        return train(model, data, config, frozen_prefix);
    }
    let cached = precompute_prefix_features(model, frozen_prefix, data)?;
    let suffix = train(&model.suffix(frozen_prefix), &cached, config, 0)?;
    Ok(model.with_suffix(frozen_prefix, suffix))
}

/// Fraction of rows whose argmax prediction differs from the label.
pub fn error_rate(model: &Model, features: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    let predicted = super::model::predict_labels(model, features)?;
    let wrong = predicted.iter().zip(labels).filter(|(p, y)| p != y).count();
    Ok(wrong as f64 / labels.len().max(1) as f64)
}
