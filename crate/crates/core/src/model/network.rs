use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};

/// One affine layer followed by an elementwise activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Row-major `n_out × n_in` weight matrix.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        Self {
            weights,
            bias,
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.bias.len()
    }

    /// Pre-activation `W x + b`.
    pub fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.iter().zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).fold(*b, |acc, (w, xi)| acc + w * xi)
        }));
    }
}

/// A fully connected feedforward network `f_L ∘ … ∘ f_1`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeedforwardNetwork {
    layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct RawLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: String,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    layers: Vec<RawLayer>,
}

impl FeedforwardNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("network has no layers".into()));
        }
        let mut prev: Option<usize> = None;
        for (idx, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.bias.len() {
                return Err(Error::LayerMismatch {
                    layer: idx,
                    detail: format!(
                        "{} weight rows but {} biases",
                        layer.weights.len(),
                        layer.bias.len()
                    ),
                });
            }
            if layer.bias.is_empty() {
                return Err(Error::LayerMismatch {
                    layer: idx,
                    detail: "layer has no neurons".into(),
                });
            }
            let cols = layer.input_dim();
            if cols == 0 || layer.weights.iter().any(|r| r.len() != cols) {
                return Err(Error::LayerMismatch {
                    layer: idx,
                    detail: "ragged or empty weight matrix".into(),
                });
            }
            if let Some(p) = prev {
                if p != cols {
                    return Err(Error::LayerMismatch {
                        layer: idx,
                        detail: format!("expects {cols} inputs but previous layer has {p} outputs"),
                    });
                }
            }
            let finite = layer.weights.iter().flatten().chain(&layer.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::LayerMismatch {
                    layer: idx,
                    detail: "non-finite weight or bias".into(),
                });
            }
            prev = Some(layer.output_dim());
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Same network with the final layer restricted to the given outputs.
    pub fn select_outputs(&self, outputs: &[usize]) -> Result<Self> {
        let mut layers = self.layers.clone();
        let last = layers.last_mut().expect("at least one layer");
        for &k in outputs {
            if k >= last.output_dim() {
                return Err(Error::Dimension {
                    expected: last.output_dim(),
                    got: k + 1,
                });
            }
        }
        last.weights = outputs.iter().map(|&k| last.weights[k].clone()).collect();
        last.bias = outputs.iter().map(|&k| last.bias[k]).collect();
        Self::new(layers)
    }

    pub fn is_piecewise_linear(&self) -> bool {
        self.layers.iter().all(|l| l.activation.is_piecewise_linear())
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.affine(&a, &mut z);
            for v in z.iter_mut() {
                *v = layer.activation.eval(*v);
            }
            std::mem::swap(&mut a, &mut z);
        }
        a
    }

    /// Evaluates with caller-owned scratch buffers; returns the output slice.
    pub fn eval_with<'a>(&self, x: &[f64], a: &'a mut Vec<f64>, z: &mut Vec<f64>) -> &'a [f64] {
        a.clear();
        a.extend_from_slice(x);
        for layer in &self.layers {
            layer.affine(a, z);
            for v in z.iter_mut() {
                *v = layer.activation.eval(*v);
            }
            std::mem::swap(a, z);
        }
        a
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawNetwork =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let layers = raw
            .layers
            .into_iter()
            .map(|l| {
                let activation = Activation::from_tag(&l.activation)
                    .ok_or_else(|| Error::UnknownActivation(l.activation.clone()))?;
                Ok(Layer::new(l.weights, l.bias, activation))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| RawLayer {
                    weights: l.weights.clone(),
                    bias: l.bias.clone(),
                    activation: l.activation.tag().to_string(),
                })
                .collect(),
        };
        serde_json::to_string(&raw).expect("network serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
