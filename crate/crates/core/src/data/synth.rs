//! Synthetic stand-ins for the instrument-presence and phase tasks.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, FrameLabel, TaskKind, Video};
use crate::error::{Error, Result};
use crate::rng;

/// Random unit-norm class signatures scaled to `norm`, rows linearly
/// independent (checked).
pub fn random_signatures(classes: usize, features: usize, norm: f64, seed: u64) -> Result<Array2<f64>> {
    let mut r = rng::stream(&[rng::domain::SYNTH, seed, 0x5167]);
    let mut s = Array2::zeros((classes, features));
    for mut row in s.rows_mut() {
        row.mapv_inplace(|_| r.sample::<f64, _>(StandardNormal));
        let n = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v * norm / n);
    }
    check_independent(&s)?;
    Ok(s)
}

fn check_independent(s: &Array2<f64>) -> Result<()> {
    // Gram-Schmidt; a residual norm near zero means a dependent row
    let mut basis: Vec<Array1<f64>> = Vec::new();
    for row in s.rows() {
        let mut v = row.to_owned();
        let scale = v.dot(&v).sqrt();
        for b in &basis {
            let proj = v.dot(b);
            v.scaled_add(-proj, b);
        }
        let n = v.dot(&v).sqrt();
        if scale == 0.0 || n <= 1e-9 * scale {
            return Err(Error::InvalidArgument("class signatures are linearly dependent".into()));
        }
        basis.push(v / n);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelTaskSpec {
    pub classes: usize,
    pub features: usize,
    /// Per-class Bernoulli presence probability, each in (0, 1).
    pub prevalence: Vec<f64>,
    /// `C x F` class signatures.
    pub signatures: Array2<f64>,
    /// Standard deviation of the additive Gaussian feature noise.
    pub noise: f64,
    pub videos: usize,
    pub frames_per_video: usize,
}

impl MultiLabelTaskSpec {
    /// Default desk-scale task: 7 classes, two of them rare (prevalence at
    /// most 0.05), 60 videos of 200 frames.
    pub fn desk_scale() -> Self {
        let classes = 7;
        let features = 16;
        Self {
            classes,
            features,
            prevalence: vec![0.6, 0.1, 0.5, 0.04, 0.03, 0.12, 0.08],
            signatures: random_signatures(classes, features, 1.0, 17).expect("default signatures"),
            noise: 0.35,
            videos: 60,
            frames_per_video: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.features == 0 || self.videos == 0 || self.frames_per_video == 0 {
            return Err(Error::InvalidArgument("task dimensions must be positive".into()));
        }
        if self.prevalence.len() != self.classes {
            return Err(Error::InvalidArgument(format!(
                "{} prevalences for {} classes",
                self.prevalence.len(),
                self.classes
            )));
        }
        if self.prevalence.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidArgument("prevalences must lie in (0, 1)".into()));
        }
        if self.signatures.dim() != (self.classes, self.features) {
            return Err(Error::InvalidArgument("signature matrix must be C x F".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument("noise must be finite and nonnegative".into()));
        }
        check_independent(&self.signatures)
    }
}

/// Frames with per-class Bernoulli labels and features
/// `Σ_c label_c * signature_c + N(0, noise²)`.
pub fn generate_multilabel(spec: &MultiLabelTaskSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let videos = (0..spec.videos)
        .map(|vid| {
            let mut r = rng::stream(&[rng::domain::SYNTH, seed, 1, vid as u64]);
            let mut features = Array2::zeros((spec.frames_per_video, spec.features));
            let mut labels = Vec::with_capacity(spec.frames_per_video);
            for i in 0..spec.frames_per_video {
                let bits: Vec<u8> = spec
                    .prevalence
                    .iter()
                    .map(|&p| u8::from(r.random::<f64>() < p))
                    .collect();
                let mut row = features.row_mut(i);
                for (c, &b) in bits.iter().enumerate() {
                    if b == 1 {
                        row += &spec.signatures.row(c);
                    }
                }
                for v in row.iter_mut() {
                    *v += spec.noise * r.sample::<f64, _>(StandardNormal);
                }
                labels.push(FrameLabel::Multi(bits));
            }
            Video {
                id: vid,
                features,
                labels,
            }
        })
        .collect();
    Ok(Dataset {
        task: TaskKind::MultiLabel,
        features: spec.features,
        classes: spec.classes,
        videos,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTaskSpec {
    pub phases: usize,
    pub features: usize,
    /// `C x (C + 1)` row-stochastic transition matrix; the last column is the
    /// probability of the video ending.
    pub transitions: Array2<f64>,
    /// Forces a move to the next phase (or the end) after this many frames
    /// in one phase.
    pub max_dwell: Option<usize>,
    pub signatures: Array2<f64>,
    pub noise: f64,
    pub videos: usize,
}

impl PhaseTaskSpec {
    /// Strictly forward chain where phase `k` stays with probability
    /// `1 - 1/dwell[k]` and otherwise advances; the last phase ends the video.
    pub fn forward_chain(dwell: &[f64]) -> Result<Array2<f64>> {
        let c = dwell.len();
        if dwell.iter().any(|&d| !(d >= 1.0)) {
            return Err(Error::InvalidArgument("mean dwell times must be >= 1".into()));
        }
        let mut t = Array2::zeros((c, c + 1));
        for (k, &d) in dwell.iter().enumerate() {
            let stay = 1.0 - 1.0 / d;
            t[[k, k]] = stay;
            t[[k, k + 1]] = 1.0 - stay;
        }
        Ok(t)
    }

    /// Default desk-scale task: 7 phases with mean dwell times summing to 200
    /// frames, 60 videos.
    pub fn desk_scale() -> Self {
        let dwell = [15.0, 60.0, 20.0, 50.0, 15.0, 25.0, 15.0];
        let phases = dwell.len();
        let features = 16;
        Self {
            phases,
            features,
            transitions: Self::forward_chain(&dwell).expect("default chain"),
            max_dwell: None,
            signatures: random_signatures(phases, features, 1.0, 29).expect("default signatures"),
            noise: 0.6,
            videos: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.phases;
        if c == 0 || self.features == 0 || self.videos == 0 {
            return Err(Error::InvalidArgument("task dimensions must be positive".into()));
        }
        if self.transitions.dim() != (c, c + 1) {
            return Err(Error::InvalidArgument("transition matrix must be C x (C + 1)".into()));
        }
        for (k, row) in self.transitions.rows().into_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) || (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "transition row {k} is not a distribution"
                )));
            }
        }
        if self.signatures.dim() != (c, self.features) {
            return Err(Error::InvalidArgument("signature matrix must be C x F".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidArgument("noise must be finite and nonnegative".into()));
        }
        if self.max_dwell == Some(0) {
            return Err(Error::InvalidArgument("max_dwell must be >= 1".into()));
        }
        // the end state must be reachable from every phase
        let forced = self.max_dwell.is_some();
        let mut reaches_end = vec![false; c];
        for _ in 0..c {
            for k in (0..c).rev() {
                if reaches_end[k] {
                    continue;
                }
                let row = self.transitions.row(k);
                let next_ok = |j: usize| if j == c { true } else { reaches_end[j] };
                let via_chain = (0..=c).any(|j| j != k && row[j] > 0.0 && next_ok(j));
                let via_force = forced && next_ok(k + 1);
                reaches_end[k] = via_chain || via_force;
            }
        }
        if !reaches_end[0] {
            return Err(Error::InvalidArgument(
                "the chain cannot reach the end from the first phase".into(),
            ));
        }
        check_independent(&self.signatures)
    }
}

/// Videos whose per-frame phases follow the Markov chain from phase 0, with
/// features `signature_phase + N(0, noise²)`.
pub fn generate_phases(spec: &PhaseTaskSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let c = spec.phases;
    let videos = (0..spec.videos)
        .map(|vid| {
            let mut r = rng::stream(&[rng::domain::SYNTH, seed, 2, vid as u64]);
            let mut path = Vec::new();
            let mut phase = 0usize;
            let mut dwell = 0usize;
            while phase < c {
                path.push(phase);
                dwell += 1;
                let next = if spec.max_dwell.is_some_and(|m| dwell >= m) {
                    phase + 1
                } else {
                    let u: f64 = r.random();
                    let row = spec.transitions.row(phase);
                    let mut acc = 0.0;
                    let mut chosen = c;
                    for (j, &p) in row.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            chosen = j;
                            break;
                        }
                    }
                    chosen
                };
                if next != phase {
                    dwell = 0;
                }
                phase = next;
            }
            let mut features = Array2::zeros((path.len(), spec.features));
            for (i, &p) in path.iter().enumerate() {
                let mut row = features.row_mut(i);
                row.assign(&spec.signatures.row(p));
                for v in row.iter_mut() {
                    *v += spec.noise * r.sample::<f64, _>(StandardNormal);
                }
            }
            Video {
                id: vid,
                features,
                labels: path.into_iter().map(FrameLabel::Phase).collect(),
            }
        })
        .collect();
    Ok(Dataset {
        task: TaskKind::Phase,
        features: spec.features,
        classes: c,
        videos,
    })
}
