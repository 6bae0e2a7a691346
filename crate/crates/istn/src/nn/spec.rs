use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a layer table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    /// Bilinear/trilinear 2x upsampling followed by a convolution.
    UpsampleConv,
    MaxPool,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    None,
    Batch,
    Instance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    None,
    Relu,
    Tanh,
    Sigmoid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output channels (conv/upsample), output features (linear); ignored for
    /// max-pool.
    pub channels_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub norm: Norm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropout_keep: Option<f64>,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv(channels_out: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            channels_out,
            kernel,
            stride,
            padding,
            norm: Norm::None,
            dropout_keep: None,
            activation: Activation::None,
        }
    }

    pub fn upsample_conv(channels_out: usize, kernel: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::UpsampleConv,
            channels_out,
            kernel,
            stride: 1,
            padding,
            norm: Norm::None,
            dropout_keep: None,
            activation: Activation::None,
        }
    }

    pub fn maxpool(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::MaxPool,
            channels_out: 0,
            kernel,
            stride,
            padding,
            norm: Norm::None,
            dropout_keep: None,
            activation: Activation::None,
        }
    }

    pub fn linear(features_out: usize) -> Self {
        Self {
            kind: LayerKind::Linear,
            channels_out: features_out,
            kernel: 1,
            stride: 1,
            padding: 0,
            norm: Norm::None,
            dropout_keep: None,
            activation: Activation::None,
        }
    }

    pub fn norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn dropout(mut self, keep: f64) -> Self {
        self.dropout_keep = Some(keep);
        self
    }

    pub fn act(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    fn validate(&self, idx: usize) -> Result<()> {
        if self.kernel < 1 || self.stride < 1 {
            return Err(Error::Param(format!(
                "layer {idx}: kernel and stride must be >= 1"
            )));
        }
        if let Some(keep) = self.dropout_keep {
            if !(keep > 0.0 && keep <= 1.0) {
                return Err(Error::Param(format!(
                    "layer {idx}: dropout keep-rate must be in (0, 1], got {keep}"
                )));
            }
        }
        Ok(())
    }
}

/// Declarative network description: an ordered layer table plus additive skip
/// links between equal-shaped layer outputs. Serializes losslessly to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    /// Spatial rank: 2 or 3.
    pub dim: usize,
    /// `[C, spatial..]` without the batch axis.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    /// `(from, to)` layer indices; `from`'s output is added to `to`'s output.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skips: Vec<(usize, usize)>,
}

/// `floor((n + 2p - k) / s) + 1`, the output size of a strided convolution.
pub fn conv_out(n: usize, k: usize, s: usize, p: usize) -> Result<usize> {
    let padded = n + 2 * p;
    if padded < k {
        return Err(Error::Shape(format!(
            "kernel {k} exceeds padded extent {padded}"
        )));
    }
    Ok((padded - k) / s + 1)
}

impl NetworkSpec {
    /// Output shape (`[C, spatial..]` or `[features]`) of every layer.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input_shape.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            layer.validate(idx)?;
            cur = match layer.kind {
                LayerKind::Conv => {
                    let mut s = vec![layer.channels_out];
                    for &n in &cur[1..] {
                        s.push(conv_out(n, layer.kernel, layer.stride, layer.padding)?);
                    }
                    s
                }
                LayerKind::UpsampleConv => {
                    let mut s = vec![layer.channels_out];
                    for &n in &cur[1..] {
                        s.push(conv_out(n * 2, layer.kernel, layer.stride, layer.padding)?);
                    }
                    s
                }
                LayerKind::MaxPool => {
                    let mut s = vec![cur[0]];
                    for &n in &cur[1..] {
                        s.push(conv_out(n, layer.kernel, layer.stride, layer.padding)?);
                    }
                    s
                }
                LayerKind::Linear => vec![layer.channels_out],
            };
            shapes.push(cur.clone());
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 2 && self.dim != 3 {
            return Err(Error::Config(format!(
                "network {}: dim must be 2 or 3",
                self.name
            )));
        }
        if self.input_shape.len() != self.dim + 1 {
            return Err(Error::Shape(format!(
                "network {}: input shape {:?} does not match dim {}",
                self.name, self.input_shape, self.dim
            )));
        }
        let shapes = self.shape_trace()?;
        for &(from, to) in &self.skips {
            if from >= to || to >= shapes.len() {
                return Err(Error::Config(format!(
                    "network {}: skip ({from}, {to}) out of order",
                    self.name
                )));
            }
            if shapes[from] != shapes[to] {
                return Err(Error::Shape(format!(
                    "network {}: skip ({from}, {to}) joins shapes {:?} and {:?}",
                    self.name, shapes[from], shapes[to]
                )));
            }
        }
        Ok(())
    }

    /// Trainable parameter count: `(k^d * c_in + 1) * c_out` per conv/linear
    /// plus `2 * C` per affine batch norm.
    pub fn param_count(&self) -> Result<usize> {
        let shapes = self.shape_trace()?;
        let mut total = 0usize;
        let mut prev = self.input_shape.clone();
        for (layer, shape) in self.layers.iter().zip(shapes.iter()) {
            match layer.kind {
                LayerKind::Conv | LayerKind::UpsampleConv => {
                    let kd = layer.kernel.pow(self.dim as u32);
                    total += (kd * prev[0] + 1) * layer.channels_out;
                }
                LayerKind::Linear => {
                    let fan_in: usize = prev.iter().product();
                    total += (fan_in + 1) * layer.channels_out;
                }
                LayerKind::MaxPool => {}
            }
            if layer.norm == Norm::Batch {
                total += 2 * shape[0];
            }
            prev = shape.clone();
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shape_rule() {
        assert_eq!(conv_out(28, 3, 2, 1).unwrap(), 14);
        assert_eq!(conv_out(7, 3, 2, 1).unwrap(), 4);
        assert_eq!(conv_out(4, 3, 2, 0).unwrap(), 1);
        assert!(conv_out(1, 3, 2, 0).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = NetworkSpec {
            name: "toy".into(),
            dim: 2,
            input_shape: vec![1, 28, 28],
            layers: vec![
                LayerSpec::conv(16, 3, 1, 1).norm(Norm::Batch).act(Activation::Relu),
                LayerSpec::conv(32, 3, 2, 1).norm(Norm::Instance).dropout(0.5).act(Activation::Relu),
                LayerSpec::upsample_conv(16, 3, 1).act(Activation::Tanh),
            ],
            skips: vec![(0, 2)],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: NetworkSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn skip_with_mismatched_shapes_rejected() {
        let spec = NetworkSpec {
            name: "bad".into(),
            dim: 2,
            input_shape: vec![1, 8, 8],
            layers: vec![
                LayerSpec::conv(4, 3, 1, 1),
                LayerSpec::conv(8, 3, 2, 1),
            ],
            skips: vec![(0, 1)],
        };
        assert!(spec.validate().is_err());
    }
}
