//! Retrain-from-scratch training loops.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bayes::sample_masks;
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, backward, cross_entropy, cross_entropy_grad, dice_loss, forward_cached, inverse_frequency_weights,
    masked_sequence_loss, AdamConfig, AnnotationMask, Batch, NetworkSpec, ParameterStore,
};
use crate::rng::{self, domain};

/// How DICE class weights are derived from the training targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// Proportional to `1 / count`, normalized to sum 1.
    InverseFrequency,
    /// `1 / C` for every class.
    Uniform,
}

impl ClassWeighting {
    pub fn name(self) -> &'static str {
        match self {
            ClassWeighting::InverseFrequency => "inverse_frequency",
            ClassWeighting::Uniform => "uniform",
        }
    }

    pub fn weights(self, target: &Array2<f64>) -> Vec<f64> {
        match self {
            ClassWeighting::InverseFrequency => inverse_frequency_weights(target),
            ClassWeighting::Uniform => vec![1.0 / target.ncols() as f64; target.ncols()],
        }
    }
}

impl std::fmt::Display for ClassWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse_frequency" => Ok(ClassWeighting::InverseFrequency),
            "uniform" => Ok(ClassWeighting::Uniform),
            other => Err(Error::Config(format!("unknown class weighting '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Training stops once the mean per-example cost of an epoch falls below
    /// this value.
    pub cost_threshold: f64,
    /// Minibatch size in frames.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub init_seed: u64,
    pub class_weighting: ClassWeighting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CostThreshold,
    EpochCap,
    /// Nothing to train on; the initial parameters are returned.
    NoData,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParameterStore,
    pub epochs: usize,
    pub final_cost: f64,
    pub stop: StopReason,
}

fn dropout_seed(cfg: &TrainConfig) -> u64 {
    rng::hash_key(&[domain::TRAIN_DROPOUT, cfg.init_seed])
}

fn shuffled(n: usize, cfg: &TrainConfig, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(&[domain::SHUFFLE, cfg.init_seed, epoch as u64]));
    order
}

fn check_cost(cost: f64, epoch: usize, step: u64) -> Result<()> {
    if cost.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "training cost {cost} at epoch {epoch}, step {step}"
        )))
    }
}

/// Trains a frame classifier on `x` (`N x F`) against binary targets `y`
/// (`N x C`) with the class-weighted DICE loss, weights taken from `y`.
pub fn train_frames(spec: &NetworkSpec, x: &Array2<f64>, y: &Array2<f64>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if x.nrows() != y.nrows() {
        return Err(Error::shape("training targets", x.nrows(), y.nrows()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut params = ParameterStore::init(spec, cfg.init_seed);
    let n = x.nrows();
    if n == 0 {
        return Ok(TrainOutcome {
            params,
            epochs: 0,
            final_cost: f64::NAN,
            stop: StopReason::NoData,
        });
    }
    let weights = cfg.class_weighting.weights(y);
    let seed = dropout_seed(cfg);
    let mut step = 0u64;
    let mut cost = f64::NAN;
    for epoch in 0..cfg.epochs {
        let order = shuffled(n, cfg, epoch);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            let masks = sample_masks(spec, seed, step);
            let cache = forward_cached(spec, &params, &Batch::frames(xb), &masks)?;
            let (loss, grad) = dice_loss(cache.output(), &yb, &weights)?;
            check_cost(loss, epoch, step)?;
            let grads = backward(spec, &params, &cache, &grad)?;
            adam_step(&mut params, &grads, &cfg.adam)?;
            total += loss * chunk.len() as f64;
            step += 1;
        }
        cost = total / n as f64;
        if cost < cfg.cost_threshold {
            return Ok(TrainOutcome {
                params,
                epochs: epoch + 1,
                final_cost: cost,
                stop: StopReason::CostThreshold,
            });
        }
    }
    Ok(TrainOutcome {
        params,
        epochs: cfg.epochs,
        final_cost: cost,
        stop: StopReason::EpochCap,
    })
}

/// One partially annotated training sequence.
#[derive(Debug, Clone)]
pub struct LabeledSequence<'a> {
    pub features: ArrayView2<'a, f64>,
    /// Class index of each frame, `None` where the label is not revealed.
    pub labels: Vec<Option<usize>>,
}

/// Trains a sequence classifier with cross-entropy averaged over annotated
/// frames only. Sequences are packed into a minibatch until it holds at least
/// `batch_size` frames. Sequences without any annotated frame are skipped.
pub fn train_sequences(spec: &NetworkSpec, data: &[LabeledSequence<'_>], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    for s in data {
        if s.features.nrows() != s.labels.len() {
            return Err(Error::shape("sequence labels", s.features.nrows(), s.labels.len()));
        }
    }
    let mut params = ParameterStore::init(spec, cfg.init_seed);
    let usable: Vec<&LabeledSequence<'_>> = data.iter().filter(|s| s.labels.iter().any(Option::is_some)).collect();
    let annotated: usize = usable.iter().map(|s| s.labels.iter().flatten().count()).sum();
    if usable.is_empty() {
        return Ok(TrainOutcome {
            params,
            epochs: 0,
            final_cost: f64::NAN,
            stop: StopReason::NoData,
        });
    }
    let seed = dropout_seed(cfg);
    let classes = spec.classes();
    let mut step = 0u64;
    let mut cost = f64::NAN;
    for epoch in 0..cfg.epochs {
        let order = shuffled(usable.len(), cfg, epoch);
        let mut total = 0.0;
        let mut start = 0;
        while start < order.len() {
            let mut end = start;
            let mut frames = 0;
            while end < order.len() && frames < cfg.batch_size {
                frames += usable[order[end]].labels.len();
                end += 1;
            }
            let members: Vec<&LabeledSequence<'_>> = order[start..end].iter().map(|&i| usable[i]).collect();
            start = end;

            let views: Vec<ArrayView2<'_, f64>> = members.iter().map(|s| s.features).collect();
            let batch = Batch::sequences(&views)?;
            let masks = sample_masks(spec, seed, step);
            let cache = forward_cached(spec, &params, &batch, &masks)?;
            let out = cache.output();

            let mut rows = Vec::new();
            let mut costs = Vec::new();
            let mut mask = Vec::new();
            for (b, s) in members.iter().enumerate() {
                for (t, label) in s.labels.iter().enumerate() {
                    let row = batch.row_index(t, b);
                    rows.push((row, *label));
                    costs.push(match label {
                        Some(c) => cross_entropy(out.row(row), *c)?,
                        None => 0.0,
                    });
                    mask.push(label.is_some());
                }
            }
            let loss = masked_sequence_loss(&costs, &AnnotationMask(mask))?;
            check_cost(loss.value, epoch, step)?;
            let mut d_out = Array2::zeros(out.raw_dim());
            for ((row, label), w) in rows.iter().zip(&loss.frame_weights) {
                if let Some(c) = label {
                    let g = cross_entropy_grad(out.row(*row), *c)?;
                    for k in 0..classes {
                        d_out[[*row, k]] = w * g[k];
                    }
                }
            }
            let grads = backward(spec, &params, &cache, &d_out)?;
            adam_step(&mut params, &grads, &cfg.adam)?;
            let count = loss.frame_weights.iter().filter(|w| **w > 0.0).count();
            total += loss.value * count as f64;
            step += 1;
        }
        cost = total / annotated as f64;
        if cost < cfg.cost_threshold {
            return Ok(TrainOutcome {
                params,
                epochs: epoch + 1,
                final_cost: cost,
                stop: StopReason::CostThreshold,
            });
        }
    }
    Ok(TrainOutcome {
        params,
        epochs: cfg.epochs,
        final_cost: cost,
        stop: StopReason::EpochCap,
    })
}
