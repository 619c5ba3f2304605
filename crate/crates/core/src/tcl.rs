//! Frame-level and segment-level consistency heads.
//!
//! Both heads score features against the pooled sentence vector with cosine
//! similarity: one score per frame for the saliency track, one per sliding
//! window proposal for the segment head.

use std::collections::BTreeSet;
use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Proposal, SaliencyTrack};

/// Proposals with their max-pooled features and cosine scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSet {
    pub proposals: Vec<Proposal>,
    pub features: Array2<f64>,
    pub scores: Array1<f64>,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }
}

fn norm_floor(norm: f64, eps: f64, what: &str) -> Result<f64> {
    if eps > 0.0 {
        Ok(norm.max(eps))
    } else if norm > 0.0 {
        Ok(norm)
    } else {
        Err(Error::ZeroNorm(what.to_string()))
    }
}

/// Cosine similarity of every row of `rows` with `query`.
///
/// Norms are floored at `eps`; with `eps = 0` a zero-norm vector is an error.
pub fn cosine_scores(rows: ArrayView2<f64>, query: ArrayView1<f64>, eps: f64) -> Result<Array1<f64>> {
    if rows.ncols() != query.len() {
        return Err(Error::Shape {
            what: "cosine operands".into(),
            expected: rows.ncols().to_string(),
            got: query.len().to_string(),
        });
    }
    let qn = norm_floor(query.dot(&query).sqrt(), eps, "sentence vector")?;
    let q = query.mapv(|v| v / qn);
    rows.rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let rn = norm_floor(r.dot(&r).sqrt(), eps, &format!("row {i}"))?;
            Ok(r.mapv(|v| v / rn).dot(&q).clamp(-1.0, 1.0))
        })
        .collect()
}

/// Per-frame saliency: cosine of each fused frame with the sentence vector.
pub fn frame_saliency(x: ArrayView2<f64>, sentence: ArrayView1<f64>, eps: f64) -> Result<SaliencyTrack> {
    Ok(SaliencyTrack {
        scores: cosine_scores(x, sentence, eps)?,
    })
}

/// Sliding-window proposals over `num_frames` frames.
///
/// Windows of length `w` start at multiples of `max(1, round(w * stride))`;
/// a final window ending at the last frame is always included. The result is
/// deduplicated and sorted by `(start, end)`.
pub fn generate_proposals(
    num_frames: usize,
    window_lengths: &[usize],
    stride_fraction: f64,
) -> Result<Vec<Proposal>> {
    if window_lengths.is_empty() {
        return Err(Error::invalid("window_lengths is empty"));
    }
    if !(stride_fraction > 0.0 && stride_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "stride fraction {stride_fraction} outside (0, 1]"
        )));
    }
    let mut set = BTreeSet::new();
    for &w in window_lengths {
        if w == 0 || w > num_frames {
            return Err(Error::invalid(format!(
                "window length {w} outside [1, {num_frames}]"
            )));
        }
        let stride = ((w as f64 * stride_fraction).round() as usize).max(1);
        let last_start = num_frames - w;
        let mut start = 0;
        while start <= last_start {
            set.insert(Proposal::new(start, start + w - 1));
            start += stride;
        }
        set.insert(Proposal::new(last_start, num_frames - 1));
    }
    Ok(set.into_iter().collect())
}

/// Row `i` is the columnwise max of frames `start_i..=end_i`.
pub fn pool_proposal_features(x: ArrayView2<f64>, proposals: &[Proposal]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((proposals.len(), x.ncols()));
    for (i, p) in proposals.iter().enumerate() {
        p.check(x.nrows())?;
        let mut row = out.row_mut(i);
        row.assign(&x.row(p.start));
        for r in p.start + 1..=p.end {
            row.zip_mut_with(&x.row(r), |a, &b| {
                if b > *a {
                    *a = b
                }
            });
        }
    }
    Ok(out)
}

/// Cosine score of each pooled proposal feature with the sentence vector.
pub fn proposal_scores(pooled: ArrayView2<f64>, sentence: ArrayView1<f64>, eps: f64) -> Result<Array1<f64>> {
    cosine_scores(pooled, sentence, eps)
}

/// Pools and scores `proposals` over `x` in one step.
pub fn score_proposals(
    x: ArrayView2<f64>,
    proposals: &[Proposal],
    sentence: ArrayView1<f64>,
    eps: f64,
) -> Result<ProposalSet> {
    if proposals.is_empty() {
        return Err(Error::invalid("empty proposal list"));
    }
    let features = pool_proposal_features(x, proposals)?;
    let scores = proposal_scores(features.view(), sentence, eps)?;
    Ok(ProposalSet {
        proposals: proposals.to_vec(),
        features,
        scores,
    })
}

#[derive(Serialize)]
struct ProposalLine<'a> {
    video_id: &'a str,
    s: usize,
    t: usize,
    score: f64,
}

/// Writes one `{video_id, s, t, score}` JSON object per proposal.
pub fn write_proposals_jsonl(out: &mut impl Write, video_id: &str, set: &ProposalSet) -> Result<()> {
    for (p, &score) in set.proposals.iter().zip(set.scores.iter()) {
        let line = ProposalLine {
            video_id,
            s: p.start,
            t: p.end,
            score,
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<proposal stream>", e))?;
    }
    Ok(())
}
