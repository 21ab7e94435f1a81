use std::ops::Range;

use ndarray::Array2;

use super::spec::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Adam moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Array2<f64>>,
    pub second: Vec<Array2<f64>>,
    pub step: u64,
}

/// All trainable tensors of a network plus their optimizer state.
///
/// Tensor layout per layer:
/// - dense: `[weights (in x out), bias (1 x out)]`
/// - lstm: `[input weights (in x 4h), recurrent weights (h x 4h), bias (1 x 4h)]`,
///   gate blocks ordered input, forget, candidate, output
/// - dropout: nothing
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    pub tensors: Vec<Array2<f64>>,
    ranges: Vec<Range<usize>>,
    pub adam: AdamState,
}

/// Gradients with the same layout as [`ParameterStore::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Array2<f64>>,
}

fn shapes(spec: &NetworkSpec) -> (Vec<(usize, usize)>, Vec<Range<usize>>) {
    let mut shapes = Vec::new();
    let mut ranges = Vec::new();
    for layer in &spec.layers {
        let start = shapes.len();
        match *layer {
            LayerSpec::Dense { input, output, .. } => {
                shapes.push((input, output));
                shapes.push((1, output));
            }
            LayerSpec::Lstm { input, hidden, .. } => {
                shapes.push((input, 4 * hidden));
                shapes.push((hidden, 4 * hidden));
                shapes.push((1, 4 * hidden));
            }
            LayerSpec::Dropout { .. } => {}
        }
        ranges.push(start..shapes.len());
    }
    (shapes, ranges)
}

impl ParameterStore {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let (shapes, ranges) = shapes(spec);
        let tensors: Vec<_> = shapes.iter().map(|&s| Array2::zeros(s)).collect();
        Self {
            adam: AdamState {
                first: tensors.clone(),
                second: tensors.clone(),
                step: 0,
            },
            tensors,
            ranges,
        }
    }

    /// Seeded uniform initialization. Dense weights use the He bound
    /// `sqrt(6 / fan_in)`; LSTM weights use `1 / sqrt(hidden)`. Biases are
    /// zero except the LSTM forget gate, which starts at 1.
    ///
    /// Every value depends only on `(seed, tensor, element)`, so re-initializing
    /// with the same seed reproduces the same network bit for bit.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut store = Self::zeros(spec);
        for (layer_idx, layer) in spec.layers.iter().enumerate() {
            let range = store.ranges[layer_idx].clone();
            match *layer {
                LayerSpec::Dense { input, .. } => {
                    let bound = (6.0 / input as f64).sqrt();
                    fill_uniform(&mut store.tensors[range.start], seed, range.start, bound);
                }
                LayerSpec::Lstm { hidden, .. } => {
                    let bound = 1.0 / (hidden as f64).sqrt();
                    fill_uniform(&mut store.tensors[range.start], seed, range.start, bound);
                    fill_uniform(&mut store.tensors[range.start + 1], seed, range.start + 1, bound);
                    let bias = &mut store.tensors[range.start + 2];
                    for j in hidden..2 * hidden {
                        bias[[0, j]] = 1.0;
                    }
                }
                LayerSpec::Dropout { .. } => {}
            }
        }
        store
    }

    /// Indices into `tensors` owned by layer `layer`.
    pub fn layer_range(&self, layer: usize) -> Range<usize> {
        self.ranges[layer].clone()
    }

    pub fn layer(&self, layer: usize) -> &[Array2<f64>] {
        &self.tensors[self.ranges[layer].clone()]
    }

    pub fn layer_mut(&mut self, layer: usize) -> &mut [Array2<f64>] {
        let r = self.ranges[layer].clone();
        &mut self.tensors[r]
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks that tensor shapes agree with `spec`.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        let (expected, _) = shapes(spec);
        if expected.len() != self.tensors.len() {
            return Err(Error::shape("parameter store", expected.len(), self.tensors.len()));
        }
        for (i, (&e, t)) in expected.iter().zip(&self.tensors).enumerate() {
            if t.dim() != e {
                return Err(Error::shape(
                    format!("parameter tensor {i}"),
                    format!("{e:?}"),
                    format!("{:?}", t.dim()),
                ));
            }
        }
        Ok(())
    }
}

fn fill_uniform(t: &mut Array2<f64>, seed: u64, tensor: usize, bound: f64) {
    for (k, v) in t.iter_mut().enumerate() {
        let u = rng::uniform(&[rng::domain::INIT, seed, tensor as u64, k as u64]);
        *v = (2.0 * u - 1.0) * bound;
    }
}

impl Gradients {
    pub fn zeros_like(params: &ParameterStore) -> Self {
        Self {
            tensors: params.tensors.iter().map(|t| Array2::zeros(t.dim())).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in &mut self.tensors {
            t.mapv_inplace(|v| v * s);
        }
    }
}
