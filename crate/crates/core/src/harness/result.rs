//! Persisted results of active-learning runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::StopReason;
use super::wilcoxon::WilcoxonTest;
use crate::error::{Error, Result};

pub const RESULT_VERSION: u32 = 1;

/// One item revealed by the oracle. `video` is the dataset video id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedItem {
    pub item: usize,
    pub video: usize,
    pub start: usize,
    pub end: usize,
}

/// Per-class composition of the labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occurrence {
    /// Labeled frames containing each class.
    pub labeled_counts: Vec<usize>,
    /// Training-pool frames containing each class.
    pub total_counts: Vec<usize>,
    /// Percentage of labeled frames containing each class.
    pub share_pct: Vec<f64>,
    /// Percentage of a class's pool occurrences that are labeled.
    pub captured_pct: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub final_cost: Option<f64>,
    pub stop: StopReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub round: usize,
    /// Scheduled budget for this round.
    pub nominal_fraction: f64,
    pub annotated_fraction: f64,
    pub annotated_frames: usize,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub per_class_f1: Vec<f64>,
    /// Items revealed in this round, before training.
    pub selected: Vec<SelectedItem>,
    pub occurrence: Occurrence,
    pub training: TrainingSummary,
}

/// Random-baseline curve of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCurve {
    pub mc_seed: u64,
    pub weighted_f1: Vec<f64>,
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub method: String,
    /// Pairing unit of the test.
    pub pairing: String,
    pub nominal_fractions: Vec<f64>,
    pub method_f1: Vec<f64>,
    /// Per-checkpoint mean over the baseline repetitions.
    pub baseline_f1: Vec<f64>,
    pub baseline_accuracy: Vec<f64>,
    pub baseline_runs: Vec<BaselineCurve>,
    pub test: WilcoxonTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub version: u32,
    pub method: String,
    pub config: ExperimentConfig,
    pub checkpoints: Vec<Checkpoint>,
    /// The pool ran out before the final fraction was reached.
    pub exhausted: bool,
    pub significance: Option<SignificanceReport>,
    pub wall_clock_seconds: f64,
}

impl RunResult {
    pub fn f1_curve(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.weighted_f1).collect()
    }

    pub fn accuracy_curve(&self) -> Vec<f64> {
        self.checkpoints.iter().map(|c| c.accuracy).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunResult = serde_json::from_str(text)?;
        if r.version != RESULT_VERSION {
            return Err(Error::Data(format!(
                "unsupported result version {} (expected {RESULT_VERSION})",
                r.version
            )));
        }
        Ok(r)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
