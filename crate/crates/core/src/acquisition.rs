//! Acquisition functions over Monte-Carlo posteriors and pool ranking.
//!
//! Softmax heads yield one distribution per pass. Sigmoid heads are treated
//! as `C` independent Bernoulli variables, so every metric becomes a
//! per-class vector that is reduced with [`aggregate`].

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::bayes::{posterior_mean, PosteriorSamples};
use crate::error::{Error, Result};
use crate::nn::Head;
use crate::pool::ItemId;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    Variance,
    VariationRatio,
    Entropy,
    MutualInformation,
    Random,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 5] = [
        AcquisitionKind::Variance,
        AcquisitionKind::VariationRatio,
        AcquisitionKind::Entropy,
        AcquisitionKind::MutualInformation,
        AcquisitionKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Variance => "variance",
            AcquisitionKind::VariationRatio => "variation_ratio",
            AcquisitionKind::Entropy => "entropy",
            AcquisitionKind::MutualInformation => "mutual_information",
            AcquisitionKind::Random => "random",
        }
    }
}

impl fmt::Display for AcquisitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "variance" | "var" => Ok(AcquisitionKind::Variance),
            "variation_ratio" | "vr" => Ok(AcquisitionKind::VariationRatio),
            "entropy" => Ok(AcquisitionKind::Entropy),
            "mutual_information" | "mi" => Ok(AcquisitionKind::MutualInformation),
            "random" => Ok(AcquisitionKind::Random),
            other => Err(Error::Config(format!("unknown acquisition kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationKind {
    Max,
    Mean,
}

impl AggregationKind {
    pub fn name(self) -> &'static str {
        match self {
            AggregationKind::Max => "max",
            AggregationKind::Mean => "mean",
        }
    }
}

impl fmt::Display for AggregationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(AggregationKind::Max),
            "mean" => Ok(AggregationKind::Mean),
            other => Err(Error::Config(format!("unknown aggregation kind '{other}'"))),
        }
    }
}

/// Output of an acquisition function: a scalar for softmax heads (where the
/// metric is defined on the whole distribution) or one value per class.
#[derive(Debug, Clone, PartialEq)]
pub enum Score {
    Scalar(f64),
    PerClass(Vec<f64>),
}

impl Score {
    pub fn reduce(&self, kind: AggregationKind) -> Result<f64> {
        match self {
            Score::Scalar(v) => Ok(*v),
            Score::PerClass(v) => aggregate(v, kind),
        }
    }

    pub fn per_class(&self) -> Option<&[f64]> {
        match self {
            Score::Scalar(_) => None,
            Score::PerClass(v) => Some(v),
        }
    }
}

/// `-p ln p` with `0 ln 0 = 0`.
#[inline]
fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

#[inline]
fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

fn distribution_entropy(p: ArrayView1<f64>) -> f64 {
    p.iter().map(|&v| plogp(v)).sum()
}

fn clamp_nonneg(v: f64) -> f64 {
    v.max(0.0)
}

/// Population variance (divide by T) of the T likelihoods of each class.
pub fn variance(samples: &PosteriorSamples) -> Vec<f64> {
    samples
        .samples
        .var_axis(Axis(0), 0.0)
        .iter()
        .map(|&v| clamp_nonneg(v))
        .collect()
}

/// `1 - f_m / T`, where `f_m` counts the passes that agree with the modal
/// prediction. Softmax: prediction is the argmax class (ties to the lowest
/// index). Sigmoid: per class, prediction is `p >= 0.5`.
pub fn variation_ratio(samples: &PosteriorSamples) -> Score {
    let t = samples.passes() as f64;
    match samples.head {
        Head::Softmax => {
            let mut counts = vec![0usize; samples.classes()];
            for row in samples.samples.rows() {
                counts[argmax(row)] += 1;
            }
            let mode = *counts.iter().max().expect("C >= 1");
            Score::Scalar(1.0 - mode as f64 / t)
        }
        Head::Sigmoid => Score::PerClass(
            samples
                .samples
                .columns()
                .into_iter()
                .map(|col| {
                    let on = col.iter().filter(|&&p| p >= 0.5).count();
                    let mode = on.max(samples.passes() - on);
                    1.0 - mode as f64 / t
                })
                .collect(),
        ),
    }
}

/// Predictive entropy of the posterior mean (natural log).
pub fn entropy(samples: &PosteriorSamples) -> Score {
    let mean = posterior_mean(samples);
    match samples.head {
        Head::Softmax => Score::Scalar(distribution_entropy(mean.view())),
        Head::Sigmoid => Score::PerClass(mean.iter().map(|&p| binary_entropy(p)).collect()),
    }
}

/// Entropy of the mean minus the mean of the per-pass entropies.
pub fn mutual_information(samples: &PosteriorSamples) -> Score {
    let mean = posterior_mean(samples);
    let t = samples.passes() as f64;
    match samples.head {
        Head::Softmax => {
            let expected: f64 = samples
                .samples
                .rows()
                .into_iter()
                .map(distribution_entropy)
                .sum::<f64>()
                / t;
            Score::Scalar(clamp_nonneg(distribution_entropy(mean.view()) - expected))
        }
        Head::Sigmoid => Score::PerClass(
            samples
                .samples
                .columns()
                .into_iter()
                .zip(mean.iter())
                .map(|(col, &m)| {
                    let expected = col.iter().map(|&p| binary_entropy(p)).sum::<f64>() / t;
                    clamp_nonneg(binary_entropy(m) - expected)
                })
                .collect(),
        ),
    }
}

/// Mean or max of a per-class score vector.
pub fn aggregate(scores: &[f64], kind: AggregationKind) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("cannot aggregate an empty score vector".into()));
    }
    Ok(match kind {
        AggregationKind::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
        AggregationKind::Max => scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Applies one acquisition function. `Random` scores every item 0; its
/// ordering comes from [`rank_pool`].
pub fn acquire(samples: &PosteriorSamples, kind: AcquisitionKind) -> Score {
    match kind {
        AcquisitionKind::Variance => Score::PerClass(variance(samples)),
        AcquisitionKind::VariationRatio => variation_ratio(samples),
        AcquisitionKind::Entropy => entropy(samples),
        AcquisitionKind::MutualInformation => mutual_information(samples),
        AcquisitionKind::Random => Score::Scalar(0.0),
    }
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// A pool item with its scalar acquisition score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub id: ItemId,
    pub score: f64,
    pub per_class: Option<Vec<f64>>,
}

/// Orders item ids by descending score, ties by ascending id. `Random`
/// ignores scores and returns a seeded uniform shuffle.
pub fn rank_pool(scored: &[ScoredItem], kind: AcquisitionKind, seed: u64) -> Vec<ItemId> {
    let mut items: Vec<&ScoredItem> = scored.iter().collect();
    items.sort_by_key(|s| s.id);
    if kind == AcquisitionKind::Random {
        let mut ids: Vec<ItemId> = items.iter().map(|s| s.id).collect();
        ids.shuffle(&mut rng::stream(&[rng::domain::RANDOM_ACQUISITION, seed]));
        return ids;
    }
    items.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
    items.into_iter().map(|s| s.id).collect()
}
