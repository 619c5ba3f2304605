//! Cross-consistency guidance between the two heads.
//!
//! Frame-level guidance turns the first-pass saliency into a mask that
//! re-weights frames before proposals are pooled again. Segment-level guidance
//! turns the first-pass top-k proposals into a coverage mask that re-weights
//! frames before saliency is recomputed. Both read first-pass outputs; there is
//! exactly one refinement round.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::config::{ExperimentConfig, ScgInput};
use crate::error::{Error, Result};
use crate::fusion::FusedState;
use crate::tcl::{frame_saliency, score_proposals, ProposalSet};
use crate::types::{GuidanceMasks, Proposal, SaliencyTrack};

pub(crate) fn softmax(v: ArrayView1<f64>) -> Array1<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = v.mapv(|x| (x - max).exp());
    let s = e.sum();
    e / s
}

/// `maxNorm(softmax(y))`: entries in `(0, 1]` with maximum exactly 1.
pub fn saliency_mask(saliency: ArrayView1<f64>) -> Array1<f64> {
    let p = softmax(saliency);
    let max = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    p / max
}

/// `X + X * M` with the per-frame mask broadcast across channels.
pub fn enhance_with_mask(x: ArrayView2<f64>, mask: ArrayView1<f64>) -> Result<Array2<f64>> {
    if x.nrows() != mask.len() {
        return Err(Error::Shape {
            what: "guidance mask".into(),
            expected: x.nrows().to_string(),
            got: mask.len().to_string(),
        });
    }
    let mut out = x.to_owned();
    for (mut row, &m) in out.rows_mut().into_iter().zip(mask.iter()) {
        row *= 1.0 + m;
    }
    Ok(out)
}

/// Indicator of the proposal interval over `num_frames` frames.
pub fn binary_vector_mapping(proposal: Proposal, num_frames: usize) -> Result<Array1<f64>> {
    proposal.check(num_frames)?;
    Ok(Array1::from_shape_fn(num_frames, |i| {
        if proposal.contains(i) {
            1.0
        } else {
            0.0
        }
    }))
}

/// Indices of the `k` best entries of `priority`, highest first; ties go to
/// the smaller start, then the smaller end.
pub fn top_k_by(priority: &[f64], proposals: &[Proposal], k: usize) -> Result<Vec<usize>> {
    if k < 1 || k > proposals.len() {
        return Err(Error::invalid(format!(
            "top-k needs 1 <= k <= {}, got {k}",
            proposals.len()
        )));
    }
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    order.sort_by(|&a, &b| {
        priority[b]
            .total_cmp(&priority[a])
            .then(proposals[a].cmp(&proposals[b]))
    });
    order.truncate(k);
    Ok(order)
}

/// Softmax of the summed indicator vectors of the top-`k` proposals.
pub fn semantic_mask(set: &ProposalSet, k: usize, num_frames: usize) -> Result<Array1<f64>> {
    let chosen = top_k_by(
        set.scores.as_slice().expect("contiguous scores"),
        &set.proposals,
        k,
    )?;
    let mut coverage = Array1::zeros(num_frames);
    for i in chosen {
        coverage += &binary_vector_mapping(set.proposals[i], num_frames)?;
    }
    Ok(softmax(coverage.view()))
}

/// Outputs of one guidance round.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceOutput {
    pub first_saliency: SaliencyTrack,
    pub first_proposals: ProposalSet,
    pub masks: GuidanceMasks,
    pub final_saliency: SaliencyTrack,
    pub final_proposals: ProposalSet,
}

/// Proposal scores derived from frame saliency (mean over each interval),
/// used when the segment head is disabled.
pub fn saliency_proposal_scores(saliency: ArrayView1<f64>, proposals: &[Proposal]) -> Array1<f64> {
    proposals
        .iter()
        .map(|p| saliency.slice(ndarray::s![p.start..=p.end]).mean().unwrap_or(0.0))
        .collect()
}

/// First pass, then frame-level and segment-level guidance in parallel.
pub fn cross_guidance_pass(
    state: &FusedState,
    proposals: &[Proposal],
    config: &ExperimentConfig,
) -> Result<GuidanceOutput> {
    let eps = config.cosine_eps;
    let lv = state.x.nrows();
    let q = state.sentence.view();
    let first_saliency = frame_saliency(state.x.view(), q, eps)?;
    let first_proposals = score_proposals(state.x.view(), proposals, q, eps)?;

    let saliency = saliency_mask(first_saliency.scores.view());
    let mut final_proposals = if config.fcg_active() {
        let xs = enhance_with_mask(state.x.view(), saliency.view())?;
        score_proposals(xs.view(), proposals, q, eps)?
    } else {
        first_proposals.clone()
    };

    let scg_source = match config.scg_input {
        ScgInput::FirstPass => &first_proposals,
        ScgInput::PostFcg => &final_proposals,
    };
    let semantic = semantic_mask(scg_source, config.top_k, lv)?;
    let final_saliency = if config.scg_active() {
        let xf = enhance_with_mask(state.x.view(), semantic.view())?;
        frame_saliency(xf.view(), q, eps)?
    } else {
        first_saliency.clone()
    };

    if config.disable_segment_tcl {
        final_proposals.scores = saliency_proposal_scores(final_saliency.scores.view(), proposals);
    }

    Ok(GuidanceOutput {
        first_saliency,
        first_proposals,
        masks: GuidanceMasks { saliency, semantic },
        final_saliency,
        final_proposals,
    })
}

/// Per-sample debug record of a guidance round, for plotting.
#[derive(Debug, Clone, Serialize)]
pub struct GuidanceTrace {
    pub video_id: String,
    pub first_saliency: Vec<f64>,
    pub first_proposal_scores: Vec<f64>,
    pub saliency_mask: Vec<f64>,
    pub semantic_mask: Vec<f64>,
    pub final_saliency: Vec<f64>,
    pub final_proposal_scores: Vec<f64>,
    pub proposals: Vec<(usize, usize)>,
}

impl GuidanceTrace {
    pub fn new(video_id: &str, out: &GuidanceOutput) -> Self {
        Self {
            video_id: video_id.to_string(),
            first_saliency: out.first_saliency.scores.to_vec(),
            first_proposal_scores: out.first_proposals.scores.to_vec(),
            saliency_mask: out.masks.saliency.to_vec(),
            semantic_mask: out.masks.semantic.to_vec(),
            final_saliency: out.final_saliency.scores.to_vec(),
            final_proposal_scores: out.final_proposals.scores.to_vec(),
            proposals: out
                .final_proposals
                .proposals
                .iter()
                .map(|p| (p.start, p.end))
                .collect(),
        }
    }
}
