#![allow(dead_code)]

use dbal_core::bayes::{sample_masks, DropoutMaskSet};
use dbal_core::nn::*;
use dbal_core::rng;
use dbal_core::Result;
use ndarray::{Array2, ArrayView2};

/// Initial parameters plus a small deterministic perturbation so that biases
/// and forget gates are not at their init values.
pub fn perturbed_params(spec: &NetworkSpec, seed: u64) -> ParameterStore {
    let mut p = ParameterStore::init(spec, seed);
    for (ti, t) in p.tensors.iter_mut().enumerate() {
        for (ei, v) in t.iter_mut().enumerate() {
            *v += 0.2 * (rng::uniform(&[99, seed, ti as u64, ei as u64]) - 0.5);
        }
    }
    p
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        2.0 * rng::uniform(&[98, seed, r as u64, c as u64]) - 1.0
    })
}

/// Masks with at least one dropped and one kept unit per slot.
pub fn nontrivial_masks(spec: &NetworkSpec, seed: u64) -> DropoutMaskSet {
    for pass in 0.. {
        let m = sample_masks(spec, seed, pass);
        if m.masks.iter().all(|v| v.sum() > 0.0 && v.sum() < v.len() as f64) {
            return m;
        }
    }
    unreachable!()
}

pub enum Objective {
    /// Class-weighted DICE over a frame batch.
    Dice { target: Array2<f64>, weights: Vec<f64> },
    /// Mean cross-entropy over a frame batch.
    CrossEntropy { target: Vec<usize> },
    /// Cross-entropy averaged over annotated frames of padded sequences.
    MaskedSequence { labels: Vec<Vec<Option<usize>>> },
}

pub struct Scenario {
    pub name: &'static str,
    pub spec: NetworkSpec,
    pub params: ParameterStore,
    pub batch: Batch,
    pub masks: DropoutMaskSet,
    pub objective: Objective,
}

impl Scenario {
    pub fn loss_and_grad(&self, params: &ParameterStore) -> Result<(f64, Array2<f64>, ForwardCache)> {
        let cache = forward_cached(&self.spec, params, &self.batch, &self.masks)?;
        let out = cache.output().clone();
        let (loss, d) = match &self.objective {
            Objective::Dice { target, weights } => dice_loss(&out, target, weights)?,
            Objective::CrossEntropy { target } => {
                let n = target.len() as f64;
                let mut d = Array2::zeros(out.raw_dim());
                let mut loss = 0.0;
                for (r, &c) in target.iter().enumerate() {
                    loss += cross_entropy(out.row(r), c)? / n;
                    for (k, g) in cross_entropy_grad(out.row(r), c)?.into_iter().enumerate() {
                        d[[r, k]] = g / n;
                    }
                }
                (loss, d)
            }
            Objective::MaskedSequence { labels } => {
                let mut costs = Vec::new();
                let mut mask = Vec::new();
                let mut rows = Vec::new();
                for (b, seq) in labels.iter().enumerate() {
                    for (t, l) in seq.iter().enumerate() {
                        let row = self.batch.row_index(t, b);
                        costs.push(match l {
                            Some(c) => cross_entropy(out.row(row), *c)?,
                            None => 0.0,
                        });
                        mask.push(l.is_some());
                        rows.push((row, *l));
                    }
                }
                let m = masked_sequence_loss(&costs, &AnnotationMask(mask))?;
                let mut d = Array2::zeros(out.raw_dim());
                for ((row, l), w) in rows.iter().zip(&m.frame_weights) {
                    if let Some(c) = l {
                        for (k, g) in cross_entropy_grad(out.row(*row), *c)?.into_iter().enumerate() {
                            d[[*row, k]] = w * g;
                        }
                    }
                }
                (m.value, d)
            }
        };
        Ok((loss, d, cache))
    }

    pub fn loss(&self, params: &ParameterStore) -> Result<f64> {
        self.loss_and_grad(params).map(|(l, _, _)| l)
    }

    pub fn gradients(&self, params: &ParameterStore) -> Result<Gradients> {
        let (_, d, cache) = self.loss_and_grad(params)?;
        backward(&self.spec, params, &cache, &d)
    }

    pub fn check(&self) -> Result<GradCheckReport> {
        let g = self.gradients(&self.params)?;
        check_gradients(&self.params, &g, 1e-5, |p| self.loss(p))
    }
}

fn dense(input: usize, output: usize, activation: Activation) -> LayerSpec {
    LayerSpec::Dense {
        input,
        output,
        activation,
    }
}

fn sequences(lengths: &[usize], features: usize, seed: u64) -> (Batch, Vec<Array2<f64>>) {
    let seqs: Vec<Array2<f64>> = lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| matrix(l, features, seed + i as u64))
        .collect();
    let views: Vec<ArrayView2<f64>> = seqs.iter().map(|s| s.view()).collect();
    (Batch::sequences(&views).unwrap(), seqs)
}

/// Dense, recurrent and dropout-masked networks (each at most 500 parameters)
/// paired with each of the three training losses.
pub fn gradient_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();

    let spec = NetworkSpec::new(
        4,
        vec![
            dense(4, 6, Activation::Tanh),
            LayerSpec::Dropout { p: 0.3 },
            dense(6, 3, Activation::Identity),
        ],
        Head::Sigmoid,
    )
    .unwrap();
    let target = Array2::from_shape_fn((5, 3), |(r, c)| f64::from((r + c) % 2 == 0));
    let weights = inverse_frequency_weights(&target);
    out.push(Scenario {
        name: "dense+dropout, dice",
        params: perturbed_params(&spec, 1),
        batch: Batch::frames(matrix(5, 4, 1)),
        masks: nontrivial_masks(&spec, 1),
        objective: Objective::Dice { target, weights },
        spec,
    });

    let spec = NetworkSpec::new(
        4,
        vec![
            dense(4, 8, Activation::Relu),
            LayerSpec::Dropout { p: 0.5 },
            dense(8, 5, Activation::Sigmoid),
            dense(5, 3, Activation::Identity),
        ],
        Head::Softmax,
    )
    .unwrap();
    out.push(Scenario {
        name: "dense relu/sigmoid+dropout, cross-entropy",
        params: perturbed_params(&spec, 2),
        batch: Batch::frames(matrix(6, 4, 2)),
        masks: nontrivial_masks(&spec, 2),
        objective: Objective::CrossEntropy {
            target: vec![0, 1, 2, 2, 1, 0],
        },
        spec,
    });

    let spec = NetworkSpec::new(
        3,
        vec![
            dense(3, 4, Activation::Tanh),
            LayerSpec::Dropout { p: 0.25 },
            LayerSpec::Lstm {
                input: 4,
                hidden: 5,
                recurrent_dropout: 0.4,
            },
            dense(5, 3, Activation::Identity),
        ],
        Head::Softmax,
    )
    .unwrap();
    let (batch, _) = sequences(&[5, 3], 3, 3);
    out.push(Scenario {
        name: "lstm+dropout, masked sequence cross-entropy",
        params: perturbed_params(&spec, 3),
        batch,
        masks: nontrivial_masks(&spec, 3),
        objective: Objective::MaskedSequence {
            labels: vec![
                vec![Some(0), None, Some(2), Some(1), None],
                vec![None, Some(1), Some(1)],
            ],
        },
        spec,
    });

    let spec = NetworkSpec::new(
        3,
        vec![
            LayerSpec::Lstm {
                input: 3,
                hidden: 4,
                recurrent_dropout: 0.0,
            },
            dense(4, 2, Activation::Identity),
        ],
        Head::Sigmoid,
    )
    .unwrap();
    let (batch, _) = sequences(&[4, 4], 3, 4);
    let target = Array2::from_shape_fn((8, 2), |(r, c)| f64::from((r * 3 + c) % 3 == 0));
    let weights = inverse_frequency_weights(&target);
    out.push(Scenario {
        name: "lstm, dice",
        params: perturbed_params(&spec, 4),
        batch,
        masks: DropoutMaskSet::ones(&spec),
        objective: Objective::Dice { target, weights },
        spec,
    });

    let spec = NetworkSpec::new(
        2,
        vec![
            LayerSpec::Lstm {
                input: 2,
                hidden: 3,
                recurrent_dropout: 0.5,
            },
            dense(3, 3, Activation::Identity),
        ],
        Head::Softmax,
    )
    .unwrap();
    let (batch, _) = sequences(&[6], 2, 5);
    out.push(Scenario {
        name: "lstm recurrent dropout, cross-entropy",
        params: perturbed_params(&spec, 5),
        batch,
        masks: nontrivial_masks(&spec, 5),
        objective: Objective::CrossEntropy {
            target: vec![0, 1, 2, 0, 1, 2],
        },
        spec,
    });

    out
}

/// Recurrent net used for the masked-loss isolation checks.
pub fn isolation_net() -> (NetworkSpec, ParameterStore) {
    let spec = NetworkSpec::sequence_classifier(3, 4, 0.2, Head::Softmax).unwrap();
    let params = perturbed_params(&spec, 11);
    (spec, params)
}

/// Masked cross-entropy loss and gradients of one sequence.
pub fn masked_loss(
    spec: &NetworkSpec,
    params: &ParameterStore,
    features: &Array2<f64>,
    labels: &[usize],
    mask: &AnnotationMask,
    masks: &DropoutMaskSet,
) -> Result<(f64, Gradients, Array2<f64>)> {
    let batch = Batch::sequence(features.clone());
    let cache = forward_cached(spec, params, &batch, masks)?;
    let out = cache.output().clone();
    let costs: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(t, &c)| cross_entropy(out.row(t), c))
        .collect::<Result<_>>()?;
    let m = masked_sequence_loss(&costs, mask)?;
    let mut d = Array2::zeros(out.raw_dim());
    for (t, &c) in labels.iter().enumerate() {
        for (k, g) in cross_entropy_grad(out.row(t), c)?.into_iter().enumerate() {
            d[[t, k]] = m.frame_weights[t] * g;
        }
    }
    let grads = backward(spec, params, &cache, &d)?;
    Ok((m.value, grads, out))
}
