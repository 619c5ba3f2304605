//! Domain types shared across the pipeline.
//!
//! Frame indices are 0-based and inclusive at both ends throughout the crate.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth moment as inclusive frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: usize,
    pub end: usize,
}

impl FrameSpan {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(format!("span start {start} > end {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One training/evaluation sample: a video's frame features, the query's
/// token features and the single annotated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub video_id: String,
    pub query: String,
    pub frame_features: Array2<f64>,
    pub token_features: Array2<f64>,
    pub point_frame: usize,
    pub ground_truth: Option<FrameSpan>,
    /// Video length in seconds, used for reporting predictions in seconds.
    pub duration_sec: f64,
}

impl FeatureBundle {
    /// Builds a bundle after checking every invariant.
    pub fn new(
        video_id: impl Into<String>,
        query: impl Into<String>,
        frame_features: Array2<f64>,
        token_features: Array2<f64>,
        point_frame: usize,
        ground_truth: Option<FrameSpan>,
        duration_sec: f64,
    ) -> Result<Self> {
        let bundle = Self {
            video_id: video_id.into(),
            query: query.into(),
            frame_features,
            token_features,
            point_frame,
            ground_truth,
            duration_sec,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn num_frames(&self) -> usize {
        self.frame_features.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let lv = self.num_frames();
        if lv == 0 || self.token_features.nrows() == 0 {
            return Err(Error::invalid(format!(
                "{}: empty frame or token features",
                self.video_id
            )));
        }
        if self.frame_features.ncols() != self.token_features.ncols() {
            return Err(Error::Shape {
                what: format!("{} feature width", self.video_id),
                expected: self.frame_features.ncols().to_string(),
                got: self.token_features.ncols().to_string(),
            });
        }
        if self.point_frame >= lv {
            return Err(Error::invalid(format!(
                "{}: point frame {} outside [0, {lv})",
                self.video_id, self.point_frame
            )));
        }
        if let Some(gt) = self.ground_truth {
            if gt.start > gt.end || gt.end >= lv || !gt.contains(self.point_frame) {
                return Err(Error::invalid(format!(
                    "{}: ground truth ({}, {}) must satisfy start <= point {} <= end < {lv}",
                    self.video_id, gt.start, gt.end, self.point_frame
                )));
            }
        }
        if !(self.duration_sec > 0.0 && self.duration_sec.is_finite()) {
            return Err(Error::invalid(format!(
                "{}: duration must be positive",
                self.video_id
            )));
        }
        check_finite(&format!("{} frame features", self.video_id), self.frame_features.iter())?;
        check_finite(&format!("{} token features", self.video_id), self.token_features.iter())?;
        Ok(())
    }
}

pub(crate) fn check_finite<'a>(what: &str, values: impl Iterator<Item = &'a f64>) -> Result<()> {
    for (index, v) in values.enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: what.to_string(),
                index,
            });
        }
    }
    Ok(())
}

/// A candidate interval produced by the sliding-window scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Proposal {
    pub start: usize,
    pub end: usize,
}

impl Proposal {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.start <= frame && frame <= self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn check(&self, num_frames: usize) -> Result<()> {
        if self.start > self.end || self.end >= num_frames {
            return Err(Error::invalid(format!(
                "proposal ({}, {}) invalid for {num_frames} frames",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Per-frame cosine saliency scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyTrack {
    pub scores: Array1<f64>,
}

impl SaliencyTrack {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// The two frame-axis masks used for cross-consistency guidance.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceMasks {
    /// Max-normalized softmax of the frame saliency.
    pub saliency: Array1<f64>,
    /// Softmax over the coverage count of the top-k proposals.
    pub semantic: Array1<f64>,
}

/// A predicted interval with its score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moment {
    pub start: usize,
    pub end: usize,
    pub score: f64,
    /// Set when no proposal contained the anchor frame.
    pub fallback: bool,
}
