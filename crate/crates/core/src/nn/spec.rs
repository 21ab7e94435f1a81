use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Logistic function, clamped to the representable open interval (0, 1).
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    /// Recurrent layer. `recurrent_dropout` is the drop probability applied
    /// to the previous hidden state before it enters the gates.
    Lstm {
        input: usize,
        hidden: usize,
        recurrent_dropout: f64,
    },
    Dropout {
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Sigmoid,
    Softmax,
}

/// One dropout mask slot: which layer it belongs to, its width, and its drop
/// probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSlot {
    pub layer: usize,
    pub width: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: usize,
    pub layers: Vec<LayerSpec>,
    pub head: Head,
}

impl NetworkSpec {
    pub fn new(input: usize, layers: Vec<LayerSpec>, head: Head) -> Result<Self> {
        let spec = Self { input, layers, head };
        spec.validate()?;
        Ok(spec)
    }

    /// Frame classifier: two hidden ReLU layers, each followed by dropout.
    pub fn frame_classifier(features: usize, classes: usize, p: f64, head: Head) -> Result<Self> {
        Self::new(
            features,
            vec![
                LayerSpec::Dense {
                    input: features,
                    output: 64,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { p },
                LayerSpec::Dense {
                    input: 64,
                    output: 32,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { p },
                LayerSpec::Dense {
                    input: 32,
                    output: classes,
                    activation: Activation::Identity,
                },
            ],
            head,
        )
    }

    /// Recurrent variant of [`NetworkSpec::frame_classifier`] with an LSTM
    /// (recurrent dropout `p`) in front of the output layer.
    pub fn sequence_classifier(features: usize, classes: usize, p: f64, head: Head) -> Result<Self> {
        Self::new(
            features,
            vec![
                LayerSpec::Dense {
                    input: features,
                    output: 64,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { p },
                LayerSpec::Dense {
                    input: 64,
                    output: 32,
                    activation: Activation::Relu,
                },
                LayerSpec::Dropout { p },
                LayerSpec::Lstm {
                    input: 32,
                    hidden: 32,
                    recurrent_dropout: p,
                },
                LayerSpec::Dense {
                    input: 32,
                    output: classes,
                    activation: Activation::Identity,
                },
            ],
            head,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 {
            return Err(Error::InvalidSpec("input width must be > 0".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("network has no layers".into()));
        }
        let mut width = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Dense { input, output, .. } => {
                    if input != width {
                        return Err(Error::InvalidSpec(format!(
                            "layer {i}: dense input {input} does not match incoming width {width}"
                        )));
                    }
                    if output == 0 {
                        return Err(Error::InvalidSpec(format!("layer {i}: zero-width dense layer")));
                    }
                    width = output;
                }
                LayerSpec::Lstm {
                    input,
                    hidden,
                    recurrent_dropout,
                } => {
                    if input != width {
                        return Err(Error::InvalidSpec(format!(
                            "layer {i}: lstm input {input} does not match incoming width {width}"
                        )));
                    }
                    if hidden == 0 {
                        return Err(Error::InvalidSpec(format!("layer {i}: zero-width lstm")));
                    }
                    check_probability(i, recurrent_dropout)?;
                    width = hidden;
                }
                LayerSpec::Dropout { p } => check_probability(i, p)?,
            }
        }
        Ok(())
    }

    /// Width of the head output (number of classes).
    pub fn classes(&self) -> usize {
        let mut width = self.input;
        for layer in &self.layers {
            match *layer {
                LayerSpec::Dense { output, .. } => width = output,
                LayerSpec::Lstm { hidden, .. } => width = hidden,
                LayerSpec::Dropout { .. } => {}
            }
        }
        width
    }

    pub fn is_recurrent(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, LayerSpec::Lstm { .. }))
    }

    /// Dropout slots in layer order: one per `Dropout` layer and one per
    /// LSTM (its recurrent mask).
    pub fn mask_slots(&self) -> Vec<MaskSlot> {
        let mut width = self.input;
        let mut slots = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Dense { output, .. } => width = output,
                LayerSpec::Lstm {
                    hidden,
                    recurrent_dropout,
                    ..
                } => {
                    slots.push(MaskSlot {
                        layer: i,
                        width: hidden,
                        p: recurrent_dropout,
                    });
                    width = hidden;
                }
                LayerSpec::Dropout { p } => slots.push(MaskSlot { layer: i, width, p }),
            }
        }
        slots
    }

    /// Copy of this spec with every dropout probability replaced by `p`.
    pub fn with_dropout(&self, p: f64) -> Result<Self> {
        let layers = self
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Dropout { .. } => LayerSpec::Dropout { p },
                LayerSpec::Lstm { input, hidden, .. } => LayerSpec::Lstm {
                    input,
                    hidden,
                    recurrent_dropout: p,
                },
                other => other,
            })
            .collect();
        Self::new(self.input, layers, self.head)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Dense { input, output, .. } => input * output + output,
                LayerSpec::Lstm { input, hidden, .. } => 4 * hidden * (input + hidden + 1),
                LayerSpec::Dropout { .. } => 0,
            })
            .sum()
    }
}

fn check_probability(layer: usize, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidSpec(format!(
            "layer {layer}: dropout probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}
