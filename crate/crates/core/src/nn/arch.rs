use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn tag(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "linear",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "linear" | "identity" | "none" => Ok(Activation::Identity),
            other => Err(Error::config(format!("unknown activation {other:?}"))),
        }
    }
}

/// One parameterized layer. Activations attach to the preceding dense
/// layer, so every entry here counts as exactly one layer for EU-k / CF-k.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// Declarative architecture description.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArchSpec {
    pub layers: Vec<LayerSpec>,
}

impl ArchSpec {
    /// Validates the shape chain and returns the spec.
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self { layers };
        spec.validate()?;
        Ok(spec)
    }

    /// ReLU MLP with a linear output layer.
    pub fn mlp(input_dim: usize, hidden: &[usize], num_classes: usize) -> Result<Self> {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &h in hidden {
            layers.push(LayerSpec::dense(prev, h, Activation::Relu));
            prev = h;
        }
        layers.push(LayerSpec::dense(prev, num_classes, Activation::Identity));
        Self::new(layers)
    }

    /// Parses a layer list such as `dense:128:relu, dense:128:relu, dense:4`
    /// whose input width is `input_dim`. A missing activation means linear.
    pub fn parse(input_dim: usize, text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = item.split(':').map(str::trim).collect();
            if parts[0] != "dense" {
                return Err(Error::config(format!(
                    "unsupported layer kind {:?} in {item:?}",
                    parts[0]
                )));
            }
            let units = parts
                .get(1)
                .ok_or_else(|| Error::config(format!("layer {item:?} is missing a width")))?
                .parse::<usize>()
                .map_err(|e| Error::config(format!("layer {item:?}: {e}")))?;
            let activation = match parts.get(2) {
                Some(a) => a.parse()?,
                None => Activation::Identity,
            };
            if parts.len() > 3 {
                return Err(Error::config(format!("layer {item:?} has trailing fields")));
            }
            layers.push(LayerSpec::dense(prev, units, activation));
            prev = units;
        }
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::config("architecture has no layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::config(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::config(format!(
                    "layer {i} outputs {} features but layer {} expects {}",
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(())
    }

    pub fn validate_classes(&self, num_classes: usize) -> Result<()> {
        if self.output_dim() != num_classes {
            return Err(Error::config(format!(
                "final layer has {} outputs but the dataset has {num_classes} classes",
                self.output_dim()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn param_layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn suffix(&self, from: usize) -> ArchSpec {
        ArchSpec {
            layers: self.layers[from..].to_vec(),
        }
    }

    pub fn arch_id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ArchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mlp:{}", self.input_dim())?;
        for l in &self.layers {
            write!(f, "-{}{}", l.out_dim, l.activation.tag())?;
        }
        Ok(())
    }
}
