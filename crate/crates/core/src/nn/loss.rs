//! Training costs. Each returns its value together with the gradient with
//! respect to the predictions (head outputs), ready for [`super::backward`].

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing constant of the soft DICE coefficient.
pub const DICE_EPS: f64 = 1e-6;
/// Lower clamp for probabilities inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Per-frame annotation flags: `true` where the frame's label is known.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotationMask(pub Vec<bool>);

impl AnnotationMask {
    pub fn empty(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn full(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }
}

/// Weighted soft DICE loss over a batch of sigmoid outputs.
///
/// Per class `c` the coefficient is `(2 Σ p g + ε) / (Σ p + Σ g + ε)`, summed
/// over the batch; the loss is `Σ_c w_c (1 - dice_c) / Σ_c w_c`.
pub fn dice_loss(pred: &Array2<f64>, target: &Array2<f64>, class_weights: &[f64]) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(
            "dice target",
            format!("{:?}", pred.dim()),
            format!("{:?}", target.dim()),
        ));
    }
    let classes = pred.ncols();
    if class_weights.len() != classes {
        return Err(Error::shape("dice class weights", classes, class_weights.len()));
    }
    if class_weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::InvalidArgument(
            "dice class weights must be finite and nonnegative".into(),
        ));
    }
    let total_weight: f64 = class_weights.iter().sum();
    if total_weight <= 0.0 {
        return Err(Error::InvalidArgument("dice class weights are all zero".into()));
    }

    let mut loss = 0.0;
    let mut grad = Array2::zeros(pred.dim());
    for c in 0..classes {
        let p = pred.column(c);
        let g = target.column(c);
        let inter: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        let denom = p.sum() + g.sum() + DICE_EPS;
        let numer = 2.0 * inter + DICE_EPS;
        let w = class_weights[c] / total_weight;
        loss += w * (1.0 - numer / denom);
        let denom2 = denom * denom;
        for (n, &gv) in g.iter().enumerate() {
            grad[[n, c]] = -w * (2.0 * gv * denom - numer) / denom2;
        }
    }
    Ok((loss, grad))
}

/// Inverse class frequency weights for a binary target matrix, normalized to
/// sum to one. Absent classes are counted as if seen once.
pub fn inverse_frequency_weights(target: &Array2<f64>) -> Vec<f64> {
    let raw: Vec<f64> = target
        .columns()
        .into_iter()
        .map(|col| 1.0 / col.sum().max(1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// `-ln max(pred[target], 1e-12)`.
pub fn cross_entropy(pred: ArrayView1<f64>, target: usize) -> Result<f64> {
    if target >= pred.len() {
        return Err(Error::InvalidArgument(format!(
            "target class {target} out of range for {} classes",
            pred.len()
        )));
    }
    Ok(-pred[target].max(PROB_FLOOR).ln())
}

/// Gradient of [`cross_entropy`] with respect to `pred`.
pub fn cross_entropy_grad(pred: ArrayView1<f64>, target: usize) -> Result<Vec<f64>> {
    if target >= pred.len() {
        return Err(Error::InvalidArgument(format!(
            "target class {target} out of range for {} classes",
            pred.len()
        )));
    }
    let mut g = vec![0.0; pred.len()];
    if pred[target] > PROB_FLOOR {
        g[target] = -1.0 / pred[target];
    }
    Ok(g)
}

/// Result of [`masked_sequence_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedLoss {
    pub value: f64,
    /// `d value / d C_i` for every frame: `m_i / Σ m`.
    pub frame_weights: Vec<f64>,
    /// No frame was annotated; the loss carries no gradient.
    pub empty: bool,
}

/// Mean of `m_i * C_i` over annotated frames. Unannotated frames contribute
/// nothing to the value or its gradient.
pub fn masked_sequence_loss(costs: &[f64], mask: &AnnotationMask) -> Result<MaskedLoss> {
    if costs.len() != mask.len() {
        return Err(Error::shape("annotation mask", costs.len(), mask.len()));
    }
    let count = mask.count();
    if count == 0 {
        return Ok(MaskedLoss {
            value: 0.0,
            frame_weights: vec![0.0; costs.len()],
            empty: true,
        });
    }
    let norm = 1.0 / count as f64;
    let mut value = 0.0;
    let mut frame_weights = vec![0.0; costs.len()];
    for (i, (&c, &m)) in costs.iter().zip(&mask.0).enumerate() {
        if m {
            value += c;
            frame_weights[i] = norm;
        }
    }
    Ok(MaskedLoss {
        value: value * norm,
        frame_weights,
        empty: false,
    })
}
