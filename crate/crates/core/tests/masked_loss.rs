mod common;

use dbal_core::bayes::sample_masks;
use dbal_core::nn::AnnotationMask;

const LEN: usize = 8;

fn setup() -> (AnnotationMask, Vec<usize>) {
    let mask = AnnotationMask(vec![true, false, false, true, false, true, true, false]);
    let labels = vec![0, 1, 2, 3, 0, 1, 2, 3];
    (mask, labels)
}

#[test]
fn labels_of_unannotated_frames_do_not_matter() {
    let (spec, params) = common::isolation_net();
    let features = common::matrix(LEN, 3, 31);
    let masks = sample_masks(&spec, 3, 0);
    let (mask, labels) = setup();
    let (loss, grads, _) = common::masked_loss(&spec, &params, &features, &labels, &mask, &masks).unwrap();
    for shift in 1..4 {
        let mut other = labels.clone();
        for (i, l) in other.iter_mut().enumerate() {
            if !mask.get(i) {
                *l = (*l + shift) % 4;
            }
        }
        let (loss2, grads2, _) = common::masked_loss(&spec, &params, &features, &other, &mask, &masks).unwrap();
        assert_eq!(loss2, loss);
        assert_eq!(grads2.tensors, grads.tensors);
    }
}

#[test]
fn features_of_unannotated_frames_still_drive_later_predictions() {
    let (spec, params) = common::isolation_net();
    let features = common::matrix(LEN, 3, 31);
    let masks = sample_masks(&spec, 3, 0);
    let (mask, labels) = setup();
    let (_, _, out) = common::masked_loss(&spec, &params, &features, &labels, &mask, &masks).unwrap();
    let mut changed = features.clone();
    changed.row_mut(1).mapv_inplace(|v| v + 1.0);
    assert!(!mask.get(1));
    let (loss2, _, out2) = common::masked_loss(&spec, &params, &changed, &labels, &mask, &masks).unwrap();
    assert_eq!(out.row(0), out2.row(0));
    for t in 1..LEN {
        let diff: f64 = (&out.row(t) - &out2.row(t)).iter().map(|d| d.abs()).sum();
        assert!(diff > 0.0, "frame {t} unaffected");
    }
    let (loss, _, _) = common::masked_loss(&spec, &params, &features, &labels, &mask, &masks).unwrap();
    assert_ne!(loss, loss2);
}
