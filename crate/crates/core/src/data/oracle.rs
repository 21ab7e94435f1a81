use std::collections::HashMap;

use super::{Dataset, FrameLabel};
use crate::error::{Error, Result};

/// A frame addressed by video id and index within the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameRef {
    pub video: usize,
    pub index: usize,
}

/// Replays stored ground truth on request. Read-only after construction.
#[derive(Debug, Clone)]
pub struct OracleReplay {
    labels: HashMap<usize, Vec<FrameLabel>>,
}

impl OracleReplay {
    pub fn new(dataset: &Dataset) -> Self {
        Self {
            labels: dataset.videos.iter().map(|v| (v.id, v.labels.clone())).collect(),
        }
    }

    pub fn label(&self, frame: FrameRef) -> Result<&FrameLabel> {
        self.labels
            .get(&frame.video)
            .and_then(|v| v.get(frame.index))
            .ok_or_else(|| Error::UnknownItem(format!("frame {} of video {}", frame.index, frame.video)))
    }

    /// Labels for a batch of frames, in request order.
    pub fn oracle_label(&self, frames: &[FrameRef]) -> Result<Vec<FrameLabel>> {
        frames.iter().map(|&f| self.label(f).cloned()).collect()
    }

    /// Labels for frames `start..end` of one video.
    pub fn label_range(&self, video: usize, start: usize, end: usize) -> Result<Vec<FrameLabel>> {
        let labels = self
            .labels
            .get(&video)
            .ok_or_else(|| Error::UnknownItem(format!("video {video}")))?;
        labels
            .get(start..end)
            .map(<[FrameLabel]>::to_vec)
            .ok_or_else(|| Error::UnknownItem(format!("frames {start}..{end} of video {video}")))
    }
}
