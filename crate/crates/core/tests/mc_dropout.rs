mod common;

use dbal_core::bayes::*;
use dbal_core::nn::*;
use ndarray::{s, Array1, Array2, Axis};

#[test]
fn inverted_dropout_expectation_of_linear_layer() {
    let spec = NetworkSpec::new(
        6,
        vec![
            LayerSpec::Dropout { p: 0.5 },
            LayerSpec::Dense {
                input: 6,
                output: 3,
                activation: Activation::Identity,
            },
        ],
        Head::Sigmoid,
    )
    .unwrap();
    let params = common::perturbed_params(&spec, 2);
    let batch = Batch::frames(common::matrix(1, 6, 2));
    let plain = spec.with_dropout(0.0).unwrap();
    let det = forward_cached(&plain, &params, &batch, &DropoutMaskSet::ones(&plain)).unwrap();
    let det = det.activations()[1].row(0).to_owned();
    let n = 10_000;
    let mut sum = Array1::<f64>::zeros(3);
    let mut sq = Array1::<f64>::zeros(3);
    for pass in 0..n {
        let c = forward_cached(&spec, &params, &batch, &sample_masks(&spec, 5, pass)).unwrap();
        let y = c.activations()[1].row(0).to_owned();
        sq += &(&y * &y);
        sum += &y;
    }
    let mean = &sum / n as f64;
    for k in 0..3 {
        let var = sq[k] / n as f64 - mean[k] * mean[k];
        let se = (var / n as f64).sqrt();
        assert!(
            (mean[k] - det[k]).abs() <= 3.0 * se,
            "unit {k}: {} vs {} (se {se})",
            mean[k],
            det[k]
        );
    }
}

#[test]
fn hundred_passes_agree_with_large_oracle_run() {
    let spec = NetworkSpec::frame_classifier(4, 3, 0.5, Head::Softmax).unwrap();
    let params = common::perturbed_params(&spec, 3);
    let x = common::matrix(1, 4, 3);
    let small = mc_forward(&spec, &params, &x, 100, 17).unwrap().remove(0);
    let oracle = mc_forward(&spec, &params, &x, 10_000, 9_999).unwrap().remove(0);
    let m100 = posterior_mean(&small);
    let mo = posterior_mean(&oracle);
    let sd = oracle.samples.std_axis(Axis(0), 0.0);
    for k in 0..3 {
        let se = sd[k] / 10.0;
        assert!(
            (m100[k] - mo[k]).abs() <= 3.0 * se,
            "class {k}: {} vs {} (se {se})",
            m100[k],
            mo[k]
        );
    }
}

#[test]
fn posterior_mean_is_elementwise_average() {
    let samples = common::matrix(5, 3, 4).mapv(|v| (v + 1.0) / 2.0);
    let post = PosteriorSamples::new(Head::Sigmoid, samples.clone()).unwrap();
    let mean = posterior_mean(&post);
    for c in 0..3 {
        let mut acc = 0.0;
        for t in 0..5 {
            acc += samples[[t, c]];
        }
        assert!((mean[c] - acc / 5.0).abs() < 1e-15);
    }
}

#[test]
fn zero_dropout_reproduces_deterministic_pass_bit_exactly() {
    let spec = NetworkSpec::frame_classifier(5, 4, 0.5, Head::Softmax)
        .unwrap()
        .with_dropout(0.0)
        .unwrap();
    let params = common::perturbed_params(&spec, 6);
    let x = common::matrix(7, 5, 6);
    let det = forward(&spec, &params, &Batch::frames(x.clone()), &DropoutMaskSet::ones(&spec)).unwrap();
    for (n, post) in mc_forward(&spec, &params, &x, 8, 1).unwrap().iter().enumerate() {
        for row in post.samples.rows() {
            assert_eq!(row, det.row(n));
        }
    }

    let rspec = NetworkSpec::sequence_classifier(5, 4, 0.5, Head::Softmax)
        .unwrap()
        .with_dropout(0.0)
        .unwrap();
    let rparams = common::perturbed_params(&rspec, 7);
    let seq = common::matrix(9, 5, 7);
    let det = forward(
        &rspec,
        &rparams,
        &Batch::sequence(seq.clone()),
        &DropoutMaskSet::ones(&rspec),
    )
    .unwrap();
    let post = mc_forward_sequence(&rspec, &rparams, seq.view(), 6, 2).unwrap();
    for t in 0..6 {
        assert_eq!(post.samples.slice(s![t, .., ..]), det);
    }
}

/// With no recurrent weights and a saturated-closed forget gate the state
/// cannot carry information, so a constant input gives identical outputs at
/// every step exactly when all steps share one mask set.
#[test]
fn constant_input_through_stateless_recurrent_net() {
    let spec = NetworkSpec::sequence_classifier(3, 4, 0.5, Head::Softmax).unwrap();
    let mut params = common::perturbed_params(&spec, 8);
    let lstm = spec
        .layers
        .iter()
        .position(|l| matches!(l, LayerSpec::Lstm { .. }))
        .unwrap();
    let range = params.layer_range(lstm);
    let hidden = params.tensors[range.start + 1].nrows();
    params.tensors[range.start + 1].fill(0.0);
    params.tensors[range.start]
        .slice_mut(s![.., hidden..2 * hidden])
        .fill(0.0);
    params.tensors[range.start + 2]
        .slice_mut(s![.., hidden..2 * hidden])
        .fill(-1e3);

    let row = common::matrix(1, 3, 8);
    let seq = row.broadcast((12, 3)).unwrap().to_owned();
    let post = mc_forward_sequence(&spec, &params, seq.view(), 10, 4).unwrap();
    let mut distinct_passes = false;
    for t in 0..10 {
        let pass = post.samples.slice(s![t, .., ..]);
        for step in 1..12 {
            assert_eq!(pass.row(step), pass.row(0), "pass {t} step {step}");
        }
        distinct_passes |= pass.row(0) != post.samples.slice(s![0, 0, ..]);
    }
    assert!(distinct_passes, "passes should use different masks");
}

/// Rebuilds pass `t` of a recurrent net step by step from the pass's single
/// mask set, including the recurrent mask on the previous hidden state.
#[test]
fn sequence_pass_equals_stepwise_replay_with_one_mask_set() {
    let p = 0.4;
    let spec = NetworkSpec::sequence_classifier(3, 4, p, Head::Softmax).unwrap();
    let params = common::perturbed_params(&spec, 9);
    let seq = common::matrix(7, 3, 9);
    let seed = 77;
    let post = mc_forward_sequence(&spec, &params, seq.view(), 3, seed).unwrap();
    let scale = 1.0 / (1.0 - p);
    for pass in 0..3u64 {
        let masks = sample_masks(&spec, seed, pass);
        let mut state: Option<LstmState> = None;
        for t in 0..7 {
            let mut x: Array2<f64> = seq.slice(s![t..t + 1, ..]).to_owned();
            let mut slot = 0;
            for (li, layer) in spec.layers.iter().enumerate() {
                let lp = params.layer(li);
                match *layer {
                    LayerSpec::Dense { activation, .. } => {
                        x = (x.dot(&lp[0]) + &lp[1]).mapv(|z| activation.apply(z));
                    }
                    LayerSpec::Dropout { .. } => {
                        x = &x * &(&masks.masks[slot] * scale);
                        slot += 1;
                    }
                    LayerSpec::Lstm { hidden, .. } => {
                        let st = state.take().unwrap_or_else(|| LstmState::zeros(1, hidden));
                        let rec = &masks.masks[slot] * scale;
                        slot += 1;
                        let (next, out) = lstm_step(lp, &st, x.view(), rec.view()).unwrap();
                        state = Some(next);
                        x = out;
                    }
                }
            }
            let m = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let e = x.mapv(|z| (z - m).exp());
            let prob = &e / e.sum();
            for k in 0..4 {
                let got = post.samples[[pass as usize, t, k]];
                assert!(
                    (got - prob[[0, k]]).abs() < 1e-14,
                    "pass {pass} step {t}: {got} vs {}",
                    prob[[0, k]]
                );
            }
        }
    }
}

#[test]
fn masks_are_shared_across_items_within_a_pass() {
    let spec = NetworkSpec::frame_classifier(3, 2, 0.5, Head::Sigmoid).unwrap();
    let params = common::perturbed_params(&spec, 10);
    let row = common::matrix(1, 3, 10);
    let x = row.broadcast((4, 3)).unwrap().to_owned();
    let post = mc_forward(&spec, &params, &x, 6, 3).unwrap();
    for item in &post[1..] {
        assert_eq!(item.samples, post[0].samples);
    }
}
