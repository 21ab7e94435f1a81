//! Labeled/unlabeled bookkeeping for pool-based active learning.
//!
//! Items are contiguous frame ranges of training videos: single frames,
//! whole videos, or fixed-length segments. Budgets are always counted in
//! frames so that the granularities are comparable.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::{aggregate, AggregationKind};
use crate::data::FrameLabel;
use crate::error::{Error, Result};
use crate::nn::AnnotationMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemId(pub usize);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Frame,
    Video,
    Segment,
}

impl Granularity {
    pub fn name(self) -> &'static str {
        match self {
            Granularity::Frame => "frame",
            Granularity::Video => "video",
            Granularity::Segment => "segment",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" => Ok(Granularity::Frame),
            "video" => Ok(Granularity::Video),
            "segment" => Ok(Granularity::Segment),
            other => Err(Error::Config(format!("unknown granularity '{other}'"))),
        }
    }
}

/// Frames `start..end` of video `video` (an index into the pool's videos).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub video: usize,
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Cuts a video into consecutive segments of `segment_len` frames; a shorter
/// remainder becomes the last segment.
pub fn segment_video(video: usize, video_len: usize, segment_len: usize) -> Result<Vec<Segment>> {
    if segment_len == 0 {
        return Err(Error::InvalidArgument("segment length must be >= 1".into()));
    }
    if video_len == 0 {
        return Err(Error::InvalidArgument(format!("video {video} is empty")));
    }
    Ok((0..video_len)
        .step_by(segment_len)
        .map(|start| Segment {
            video,
            start,
            end: (start + segment_len).min(video_len),
        })
        .collect())
}

/// Mean or max of the per-frame scores of a video or segment.
pub fn score_group(frame_scores: &[f64], kind: AggregationKind) -> Result<f64> {
    if frame_scores.is_empty() {
        return Err(Error::InvalidArgument("cannot score an empty group".into()));
    }
    aggregate(frame_scores, kind)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolItem {
    pub id: ItemId,
    pub segment: Segment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub items: Vec<ItemId>,
    pub frames: usize,
    /// The pool ran out before the budget was met.
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct Pool {
    granularity: Granularity,
    items: Vec<PoolItem>,
    unlabeled: BTreeSet<ItemId>,
    labels: Vec<Vec<Option<FrameLabel>>>,
    annotated: usize,
    total: usize,
}

impl Pool {
    /// Builds an all-unlabeled pool over videos with the given lengths.
    pub fn new(video_lengths: &[usize], granularity: Granularity, segment_len: usize) -> Result<Self> {
        let mut items = Vec::new();
        for (v, &len) in video_lengths.iter().enumerate() {
            let segs = match granularity {
                Granularity::Frame => segment_video(v, len, 1)?,
                Granularity::Video => segment_video(v, len, len.max(1))?,
                Granularity::Segment => segment_video(v, len, segment_len)?,
            };
            for segment in segs {
                items.push(PoolItem {
                    id: ItemId(items.len()),
                    segment,
                });
            }
        }
        Ok(Self {
            granularity,
            unlabeled: items.iter().map(|i| i.id).collect(),
            items,
            labels: video_lengths.iter().map(|&l| vec![None; l]).collect(),
            annotated: 0,
            total: video_lengths.iter().sum(),
        })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn items(&self) -> &[PoolItem] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Result<&PoolItem> {
        self.items
            .get(id.0)
            .ok_or_else(|| Error::UnknownItem(format!("pool item {id}")))
    }

    pub fn is_unlabeled(&self, id: ItemId) -> bool {
        self.unlabeled.contains(&id)
    }

    /// The unlabeled set, ascending by id.
    pub fn unlabeled(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.unlabeled.iter().copied()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn labeled(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items
            .iter()
            .map(|i| i.id)
            .filter(|id| !self.unlabeled.contains(id))
    }

    pub fn annotated_frames(&self) -> usize {
        self.annotated
    }

    pub fn total_frames(&self) -> usize {
        self.total
    }

    pub fn annotated_fraction(&self) -> f64 {
        self.annotated as f64 / self.total as f64
    }

    pub fn video_count(&self) -> usize {
        self.labels.len()
    }

    pub fn mask(&self, video: usize) -> AnnotationMask {
        AnnotationMask(self.labels[video].iter().map(Option::is_some).collect())
    }

    /// Revealed labels of one video (`None` where not yet annotated).
    pub fn revealed(&self, video: usize) -> &[Option<FrameLabel>] {
        &self.labels[video]
    }

    pub fn video_fully_annotated(&self, video: usize) -> bool {
        self.labels[video].iter().all(Option::is_some)
    }

    /// Items whose frames all lie in the given videos.
    pub fn items_in_videos(&self, videos: &[usize]) -> Vec<ItemId> {
        self.items
            .iter()
            .filter(|i| videos.contains(&i.segment.video))
            .map(|i| i.id)
            .collect()
    }

    /// Takes items in rank order until at least `budget_frames` new frames
    /// are covered; the item that crosses the threshold is included.
    pub fn select_next(&self, ranked: &[ItemId], budget_frames: usize) -> Result<Selection> {
        if budget_frames == 0 {
            return Err(Error::InvalidArgument("budget step must be >= 1 frame".into()));
        }
        let mut items = Vec::new();
        let mut frames = 0;
        for &id in ranked {
            if !self.unlabeled.contains(&id) {
                return Err(Error::InvalidArgument(format!(
                    "ranked item {id} is not in the unlabeled pool"
                )));
            }
            if frames >= budget_frames {
                break;
            }
            items.push(id);
            frames += self.item(id)?.segment.len();
        }
        Ok(Selection {
            items,
            frames,
            exhausted: frames < budget_frames,
        })
    }

    /// Records oracle labels for `items` (one label list per item, covering
    /// its frames) and moves them out of the unlabeled set. Fails without
    /// changing anything if any frame is already annotated.
    pub fn apply_annotations(&mut self, items: &[ItemId], labels: Vec<Vec<FrameLabel>>) -> Result<()> {
        if items.len() != labels.len() {
            return Err(Error::shape("annotation batches", items.len(), labels.len()));
        }
        let mut seen = BTreeSet::new();
        for (&id, l) in items.iter().zip(&labels) {
            let seg = self.item(id)?.segment;
            if l.len() != seg.len() {
                return Err(Error::shape(format!("labels for item {id}"), seg.len(), l.len()));
            }
            for f in seg.start..seg.end {
                if self.labels[seg.video][f].is_some() || !seen.insert((seg.video, f)) {
                    return Err(Error::DoubleAnnotation {
                        video: seg.video,
                        frame: f,
                    });
                }
            }
        }
        for (&id, l) in items.iter().zip(labels) {
            let seg = self.items[id.0].segment;
            for (f, label) in (seg.start..seg.end).zip(l) {
                self.labels[seg.video][f] = Some(label);
            }
            self.annotated += seg.len();
            self.unlabeled.remove(&id);
        }
        Ok(())
    }
}
