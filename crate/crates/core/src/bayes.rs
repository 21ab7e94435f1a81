//! Monte-Carlo dropout: mask sampling and T-pass posterior sampling.
//!
//! Pass `t` of an MC run uses the mask set keyed by `(seed, t)` for every
//! item it scores, i.e. the same sampled weights `W_t` are applied to the
//! whole pool. Within a sequence the mask set is fixed for all time steps.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{forward, Batch, Head, NetworkSpec, ParameterStore};
use crate::rng;

/// Binary dropout masks, one per mask slot of a [`NetworkSpec`]
/// (see [`NetworkSpec::mask_slots`]). Entries are exactly 0.0 or 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMaskSet {
    pub masks: Vec<Array1<f64>>,
    pub seed: u64,
    pub pass: u64,
}

impl DropoutMaskSet {
    /// Keeps every unit. Kept units are still scaled by `1 / (1 - p)`, so
    /// this is the deterministic pass only for a spec with `p = 0`.
    pub fn ones(spec: &NetworkSpec) -> Self {
        Self {
            masks: spec.mask_slots().iter().map(|s| Array1::ones(s.width)).collect(),
            seed: 0,
            pass: 0,
        }
    }

    pub fn kept_fraction(&self) -> f64 {
        let total: usize = self.masks.iter().map(|m| m.len()).sum();
        if total == 0 {
            return 1.0;
        }
        self.masks.iter().map(|m| m.sum()).sum::<f64>() / total as f64
    }
}

/// Samples one mask set. Entry `e` of slot `s` is kept with probability
/// `1 - p_s`, drawn from the counter-based generator keyed by
/// `(seed, layer, pass, e)`.
pub fn sample_masks(spec: &NetworkSpec, seed: u64, pass: u64) -> DropoutMaskSet {
    let masks = spec
        .mask_slots()
        .iter()
        .map(|slot| {
            let keep = 1.0 - slot.p;
            Array1::from_iter((0..slot.width).map(|e| {
                let u = rng::uniform(&[rng::domain::DROPOUT, seed, slot.layer as u64, pass, e as u64]);
                if u < keep {
                    1.0
                } else {
                    0.0
                }
            }))
        })
        .collect();
    DropoutMaskSet { masks, seed, pass }
}

/// `T x C` head outputs for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub head: Head,
    pub samples: Array2<f64>,
}

impl PosteriorSamples {
    pub fn new(head: Head, samples: Array2<f64>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidArgument("posterior needs T >= 1 and C >= 1".into()));
        }
        Ok(Self { head, samples })
    }

    pub fn passes(&self) -> usize {
        self.samples.nrows()
    }

    pub fn classes(&self) -> usize {
        self.samples.ncols()
    }
}

/// `T x L x C` head outputs for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePosterior {
    pub head: Head,
    pub samples: Array3<f64>,
}

impl SequencePosterior {
    pub fn len(&self) -> usize {
        self.samples.len_of(Axis(1))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Posterior samples of the frame at step `step`.
    pub fn frame(&self, step: usize) -> PosteriorSamples {
        PosteriorSamples {
            head: self.head,
            samples: self.samples.index_axis(Axis(1), step).to_owned(),
        }
    }

    pub fn mean(&self) -> Array2<f64> {
        self.samples.mean_axis(Axis(0)).expect("T >= 1")
    }
}

fn check_passes(passes: usize) -> Result<()> {
    if passes == 0 {
        return Err(Error::InvalidArgument("MC dropout needs T >= 1".into()));
    }
    Ok(())
}

/// T stochastic passes over a set of independent frames (`N x F`). Returns
/// one posterior per frame. Passes run in parallel and are written back by
/// pass index.
pub fn mc_forward(
    spec: &NetworkSpec,
    params: &ParameterStore,
    frames: &Array2<f64>,
    passes: usize,
    seed: u64,
) -> Result<Vec<PosteriorSamples>> {
    check_passes(passes)?;
    let batch = Batch::frames(frames.clone());
    let outputs: Vec<Array2<f64>> = (0..passes)
        .into_par_iter()
        .map(|t| forward(spec, params, &batch, &sample_masks(spec, seed, t as u64)))
        .collect::<Result<_>>()?;
    let classes = spec.classes();
    Ok((0..frames.nrows())
        .map(|n| {
            let mut s = Array2::zeros((passes, classes));
            for (t, out) in outputs.iter().enumerate() {
                s.row_mut(t).assign(&out.row(n));
            }
            PosteriorSamples {
                head: spec.head,
                samples: s,
            }
        })
        .collect())
}

/// T stochastic passes over one sequence; masks are sampled once per pass
/// and reused at every time step, with state threaded from zero.
pub fn mc_forward_sequence(
    spec: &NetworkSpec,
    params: &ParameterStore,
    sequence: ArrayView2<f64>,
    passes: usize,
    seed: u64,
) -> Result<SequencePosterior> {
    mc_forward_sequences(spec, params, &[sequence], passes, seed).map(|mut v| v.remove(0))
}

/// Batched form of [`mc_forward_sequence`]: the sequences of one call share
/// the mask set of each pass.
pub fn mc_forward_sequences(
    spec: &NetworkSpec,
    params: &ParameterStore,
    sequences: &[ArrayView2<f64>],
    passes: usize,
    seed: u64,
) -> Result<Vec<SequencePosterior>> {
    check_passes(passes)?;
    let batch = Batch::sequences(sequences)?;
    let outputs: Vec<Array2<f64>> = (0..passes)
        .into_par_iter()
        .map(|t| forward(spec, params, &batch, &sample_masks(spec, seed, t as u64)))
        .collect::<Result<_>>()?;
    let classes = spec.classes();
    Ok(sequences
        .iter()
        .enumerate()
        .map(|(b, seq)| {
            let len = seq.nrows();
            let mut s = Array3::zeros((passes, len, classes));
            for (t, out) in outputs.iter().enumerate() {
                for step in 0..len {
                    s.slice_mut(ndarray::s![t, step, ..])
                        .assign(&out.row(batch.row_index(step, b)));
                }
            }
            SequencePosterior {
                head: spec.head,
                samples: s,
            }
        })
        .collect())
}

/// Arithmetic mean over the pass axis.
pub fn posterior_mean(samples: &PosteriorSamples) -> Array1<f64> {
    samples.samples.mean_axis(Axis(0)).expect("T >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn spec(p: f64) -> NetworkSpec {
        NetworkSpec::frame_classifier(6, 4, p, Head::Softmax).unwrap()
    }

    #[test]
    fn p_zero_and_one_masks() {
        let ones = sample_masks(&spec(0.0), 3, 0);
        assert!(ones.masks.iter().all(|m| m.iter().all(|&v| v == 1.0)));
        let zeros = sample_masks(&spec(1.0), 3, 0);
        assert!(zeros.masks.iter().all(|m| m.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn kept_fraction_within_binomial_bound() {
        // 10,000 entries at p = 0.5: sd of the kept fraction is 0.005
        let wide = NetworkSpec::new(
            1,
            vec![
                crate::nn::LayerSpec::Dense {
                    input: 1,
                    output: 10_000,
                    activation: crate::nn::Activation::Relu,
                },
                crate::nn::LayerSpec::Dropout { p: 0.5 },
            ],
            Head::Sigmoid,
        )
        .unwrap();
        let m = sample_masks(&wide, 42, 0);
        assert_eq!(m.masks[0].len(), 10_000);
        assert!((m.kept_fraction() - 0.5).abs() <= 3.0 * 0.005, "{}", m.kept_fraction());
    }

    #[test]
    fn masks_are_keyed_not_sequenced() {
        let s = spec(0.5);
        assert_eq!(sample_masks(&s, 9, 4), sample_masks(&s, 9, 4));
        assert_ne!(sample_masks(&s, 9, 4).masks, sample_masks(&s, 9, 5).masks);
        assert_ne!(sample_masks(&s, 9, 4).masks, sample_masks(&s, 10, 4).masks);
    }

    #[test]
    fn posterior_mean_examples() {
        let one = PosteriorSamples::new(Head::Softmax, array![[0.2, 0.8]]).unwrap();
        assert_eq!(posterior_mean(&one), array![0.2, 0.8]);
        let two = PosteriorSamples::new(Head::Softmax, array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(posterior_mean(&two), array![0.5, 0.5]);
    }

    #[test]
    fn empty_posterior_rejected() {
        assert!(PosteriorSamples::new(Head::Softmax, Array2::zeros((0, 3))).is_err());
    }

    #[test]
    fn zero_passes_rejected() {
        let s = spec(0.5);
        let p = ParameterStore::init(&s, 1);
        assert!(mc_forward(&s, &p, &Array2::zeros((1, 6)), 0, 1).is_err());
    }
}
