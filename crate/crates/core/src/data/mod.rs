//! Datasets: synthetic task generators, the text file format, and the replay
//! oracle that stands in for an expert annotator.

mod io;
mod oracle;
mod synth;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_dataset, parse_dataset, save_dataset, write_dataset, FORMAT_MAGIC};
pub use oracle::{FrameRef, OracleReplay};
pub use synth::{generate_multilabel, generate_phases, MultiLabelTaskSpec, PhaseTaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Independent binary labels per frame (instrument presence).
    #[serde(rename = "multilabel")]
    MultiLabel,
    /// One of `C` ordered phases per frame.
    Phase,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::MultiLabel => "multilabel",
            TaskKind::Phase => "phase",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multilabel" => Ok(TaskKind::MultiLabel),
            "phase" => Ok(TaskKind::Phase),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Ground-truth label of one frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameLabel {
    Multi(Vec<u8>),
    Phase(usize),
}

impl FrameLabel {
    /// Whether class `c` is present in this label.
    pub fn has_class(&self, c: usize) -> bool {
        match self {
            FrameLabel::Multi(v) => v.get(c).is_some_and(|&b| b == 1),
            FrameLabel::Phase(p) => *p == c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: usize,
    /// `frames x F` feature matrix.
    pub features: Array2<f64>,
    pub labels: Vec<FrameLabel>,
}

impl Video {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: TaskKind,
    pub features: usize,
    pub classes: usize,
    pub videos: Vec<Video>,
}

impl Dataset {
    pub fn frame_count(&self) -> usize {
        self.videos.iter().map(Video::len).sum()
    }

    /// Splits videos 3:1 in id order into training and test sets.
    pub fn split(&self) -> (&[Video], &[Video]) {
        let n_train = (self.videos.len() * 3).div_ceil(4).min(self.videos.len());
        self.videos.split_at(n_train)
    }

    /// Checks internal consistency: shapes, label kinds and ranges.
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.classes == 0 {
            return Err(Error::Data("feature and class counts must be positive".into()));
        }
        for v in &self.videos {
            if v.features.nrows() != v.labels.len() {
                return Err(Error::Data(format!(
                    "video {}: {} feature rows but {} labels",
                    v.id,
                    v.features.nrows(),
                    v.labels.len()
                )));
            }
            if v.features.ncols() != self.features {
                return Err(Error::Data(format!(
                    "video {}: feature width {} != {}",
                    v.id,
                    v.features.ncols(),
                    self.features
                )));
            }
            for l in &v.labels {
                let ok = match (self.task, l) {
                    (TaskKind::MultiLabel, FrameLabel::Multi(bits)) => {
                        bits.len() == self.classes && bits.iter().all(|&b| b <= 1)
                    }
                    (TaskKind::Phase, FrameLabel::Phase(p)) => *p < self.classes,
                    _ => false,
                };
                if !ok {
                    return Err(Error::Data(format!(
                        "video {}: label {l:?} invalid for {} task",
                        v.id, self.task
                    )));
                }
            }
        }
        Ok(())
    }
}
