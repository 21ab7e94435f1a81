//! Evaluation metrics over frame labels.

use serde::{Deserialize, Serialize};

use crate::data::FrameLabel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    /// Support-weighted mean of per-class F1 over classes with support > 0.
    pub weighted: f64,
    pub per_class: Vec<f64>,
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 || denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

fn check_aligned(pred: &[FrameLabel], truth: &[FrameLabel]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::shape("predictions vs labels", truth.len(), pred.len()));
    }
    for (p, t) in pred.iter().zip(truth) {
        match (p, t) {
            (FrameLabel::Phase(_), FrameLabel::Phase(_)) => {}
            (FrameLabel::Multi(a), FrameLabel::Multi(b)) if a.len() == b.len() => {}
            _ => return Err(Error::InvalidArgument("prediction and label kinds differ".into())),
        }
    }
    Ok(())
}

/// Per-class F1 averaged with weights equal to class support. For multilabel
/// frames each class is scored as an independent binary decision.
pub fn weighted_f1(pred: &[FrameLabel], truth: &[FrameLabel], classes: usize) -> Result<F1Report> {
    check_aligned(pred, truth)?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("weighted F1 of an empty set".into()));
    }
    let mut conf = vec![Confusion::default(); classes];
    let mut support = vec![0usize; classes];
    for (p, t) in pred.iter().zip(truth) {
        for c in 0..classes {
            match (p.has_class(c), t.has_class(c)) {
                (true, true) => conf[c].tp += 1,
                (true, false) => conf[c].fp += 1,
                (false, true) => conf[c].fn_ += 1,
                (false, false) => {}
            }
            if t.has_class(c) {
                support[c] += 1;
            }
        }
    }
    let per_class: Vec<f64> = conf.iter().map(Confusion::f1).collect();
    let total: usize = support.iter().sum();
    let weighted = if total == 0 {
        0.0
    } else {
        per_class.iter().zip(&support).map(|(f, &s)| f * s as f64).sum::<f64>() / total as f64
    };
    Ok(F1Report {
        weighted,
        per_class,
        support,
    })
}

/// Single-label: fraction of frames predicted exactly. Multilabel: fraction
/// of correct (frame, class) binary decisions.
pub fn accuracy(pred: &[FrameLabel], truth: &[FrameLabel]) -> Result<f64> {
    check_aligned(pred, truth)?;
    if truth.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty set".into()));
    }
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        match (p, t) {
            (FrameLabel::Phase(a), FrameLabel::Phase(b)) => {
                hit += usize::from(a == b);
                total += 1;
            }
            (FrameLabel::Multi(a), FrameLabel::Multi(b)) => {
                hit += a.iter().zip(b).filter(|(x, y)| x == y).count();
                total += a.len();
            }
            _ => unreachable!("checked by check_aligned"),
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}
