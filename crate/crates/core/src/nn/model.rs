use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use super::arch::{Activation, ArchSpec, LayerSpec};
use crate::error::{Error, Result};
use crate::seed;

/// Fully connected layer. `weights` is `(out_dim, in_dim)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Kaiming-normal weights (fan-in, ReLU gain), zero bias. Layer `index`
    /// draws from its own stream so any suffix can be redrawn in isolation.
    fn kaiming(spec: &LayerSpec, seed: u64, index: usize) -> Self {
        let std = (2.0 / spec.in_dim as f64).sqrt();
        let mut rng = seed::stream_rng(seed, index as u64);
        let weights = Array2::from_shape_simple_fn((spec.out_dim, spec.in_dim), || {
            let z: f64 = rng.sample(StandardNormal);
            z * std
        });
        Self {
            weights,
            bias: Array1::zeros(spec.out_dim),
            activation: spec.activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::dense(self.in_dim(), self.out_dim(), self.activation)
    }

    /// `x · Wᵀ + b`, then the activation.
    pub(crate) fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        if self.activation == Activation::Relu {
            z.mapv_inplace(|v| v.max(0.0));
        }
        z
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub(crate) arch: ArchSpec,
    pub(crate) layers: Vec<Dense>,
}

impl Model {
    /// Builds a model from explicit layers, which must chain and be finite.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let arch = ArchSpec::new(layers.iter().map(Dense::spec).collect())?;
        let model = Self { arch, layers };
        if !model.layers.iter().all(Dense::is_finite) {
            return Err(Error::config("model parameters must be finite"));
        }
        Ok(model)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn arch_id(&self) -> String {
        self.arch.arch_id()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn param_layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.arch.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.arch.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Layers `from..` as a standalone model.
    pub fn suffix(&self, from: usize) -> Model {
        Model {
            arch: self.arch.suffix(from),
            layers: self.layers[from..].to_vec(),
        }
    }

    /// Copy of `self` with layers `from..` taken from `suffix`.
    pub(crate) fn with_suffix(&self, from: usize, suffix: Model) -> Model {
        debug_assert_eq!(suffix.arch, self.arch.suffix(from));
        let mut layers = self.layers[..from].to_vec();
        layers.extend(suffix.layers);
        Model {
            arch: self.arch.clone(),
            layers,
        }
    }

    /// Pre-softmax outputs.
    pub fn logits(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(features.ncols())?;
        let mut x = features.to_owned();
        for layer in &self.layers {
            x = layer.forward(x.view());
        }
        Ok(x)
    }

    /// Activations after the first `count` layers.
    pub(crate) fn forward_prefix(&self, features: ArrayView2<f64>, count: usize) -> Array2<f64> {
        let mut x = features.to_owned();
        for layer in &self.layers[..count] {
            x = layer.forward(x.view());
        }
        x
    }

    pub(crate) fn check_input(&self, dim: usize) -> Result<()> {
        if dim != self.input_dim() {
            return Err(Error::config(format!(
                "model expects {} input features, got {dim}",
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Kaiming-normal initialization; identical `(arch, seed)` gives identical
/// parameters.
pub fn init_model(arch: &ArchSpec, seed: u64) -> Result<Model> {
    arch.validate()?;
    let layers = arch
        .layers
        .iter()
        .enumerate()
        .map(|(i, spec)| Dense::kaiming(spec, seed, i))
        .collect();
    Ok(Model {
        arch: arch.clone(),
        layers,
    })
}

/// Redraws the last `k` parameterized layers exactly as `init_model` would
/// have drawn them with `seed`.
pub fn reinit_suffix(model: &Model, k: usize, seed: u64) -> Result<Model> {
    let count = model.param_layer_count();
    if k > count {
        return Err(Error::config(format!(
            "cannot reinitialize {k} layers of a model with {count}"
        )));
    }
    let mut out = model.clone();
    for i in count - k..count {
        out.layers[i] = Dense::kaiming(&model.arch.layers[i], seed, i);
    }
    Ok(out)
}

/// Row-wise softmax, stabilized by the row maximum.
pub fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

pub fn predict_probs(model: &Model, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = model.logits(features)?;
    softmax_rows(&mut out);
    Ok(out)
}

/// Index of the row maximum; ties go to the lower class id.
pub fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn predict_labels(model: &Model, features: ArrayView2<f64>) -> Result<Vec<usize>> {
    let logits = model.logits(features)?;
    Ok(logits.axis_iter(Axis(0)).map(argmax).collect())
}

/// Mean softmax cross-entropy of `logits` against `labels`.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    Zip::from(logits.rows()).and(labels).for_each(|row, &y| {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    });
    total / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn arch() -> ArchSpec {
        ArchSpec::mlp(5, &[7, 6], 3).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        assert_eq!(
            init_model(&arch(), 7).unwrap(),
            init_model(&arch(), 7).unwrap()
        );
        assert_ne!(
            init_model(&arch(), 7).unwrap(),
            init_model(&arch(), 8).unwrap()
        );
    }

    #[test]
    fn biases_start_at_zero() {
        let m = init_model(&arch(), 1).unwrap();
        assert!(m.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn kaiming_scale_matches_fan_in() {
        // 100 x 200 = 2e4 draws with fan_in = 100.
        let a = ArchSpec::mlp(100, &[200], 2).unwrap();
        let m = init_model(&a, 3).unwrap();
        let w = &m.layers[0].weights;
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let target = (2.0f64 / 100.0).sqrt();
        assert!(
            (var.sqrt() - target).abs() / target < 0.1,
            "std {}",
            var.sqrt()
        );
        assert!(mean.abs() < 0.01);
    }

    #[test]
    fn reinit_boundaries() {
        let m = init_model(&arch(), 1).unwrap();
        assert_eq!(reinit_suffix(&m, 0, 9).unwrap(), m);

        let full = reinit_suffix(&m, 3, 9).unwrap();
        assert_eq!(full, init_model(&arch(), 9).unwrap());

        let last = reinit_suffix(&m, 1, 9).unwrap();
        assert_eq!(last.layers[..2], m.layers[..2]);
        assert_ne!(last.layers[2], m.layers[2]);
        assert_eq!(last.layers[2], init_model(&arch(), 9).unwrap().layers[2]);

        assert!(matches!(reinit_suffix(&m, 4, 9), Err(Error::Config(_))));
    }

    #[test]
    fn zero_output_layer_gives_uniform_probs() {
        let mut m = init_model(&arch(), 2).unwrap();
        m.layers[2].weights.fill(0.0);
        let x = Array2::from_shape_fn((4, 5), |(i, j)| (i * 5 + j) as f64 - 3.0);
        let p = predict_probs(&m, x.view()).unwrap();
        for v in p.iter() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let m = init_model(&arch(), 2).unwrap();
        let x = Array2::<f64>::zeros((2, 4));
        assert!(matches!(predict_probs(&m, x.view()), Err(Error::Config(_))));
    }

    #[test]
    fn argmax_prefers_lower_id_on_ties() {
        assert_eq!(argmax(array![0.2, 0.4, 0.4].view()), 1);
        assert_eq!(argmax(array![1.0, 1.0].view()), 0);
    }

    #[test]
    fn softmax_handles_large_logits() {
        let mut l = array![[1000.0, 1000.0], [-1000.0, 0.0]];
        softmax_rows(&mut l);
        assert!((l[[0, 0]] - 0.5).abs() < 1e-12);
        assert!(l[[1, 1]] > 0.999_999);
        assert!(cross_entropy(&array![[1000.0, 0.0]], &[0]) >= 0.0);
    }
}
