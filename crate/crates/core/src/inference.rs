//! Attention-anchored prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusedState;
use crate::tcl::ProposalSet;
use crate::types::Moment;

/// Index of the largest attention value; ties go to the smallest index.
pub fn anchor_frame(attention: &[f64]) -> usize {
    let mut best = 0;
    for (i, &a) in attention.iter().enumerate() {
        if a > attention[best] {
            best = i;
        }
    }
    best
}

fn better(set: &ProposalSet, a: usize, b: usize) -> bool {
    let (sa, sb) = (set.scores[a], set.scores[b]);
    sa > sb || (sa == sb && set.proposals[a] < set.proposals[b])
}

/// Picks the best-scoring proposal among those containing the anchor frame,
/// falling back to the global best when none does.
pub fn predict(state: &FusedState, final_props: &ProposalSet) -> Result<Moment> {
    if final_props.is_empty() {
        return Err(Error::invalid("cannot predict from an empty proposal set"));
    }
    let attention = state.attention.as_slice().expect("contiguous attention");
    let anchor = anchor_frame(attention);
    let mut best: Option<usize> = None;
    for i in (0..final_props.len()).filter(|&i| final_props.proposals[i].contains(anchor)) {
        if best.is_none_or(|b| better(final_props, i, b)) {
            best = Some(i);
        }
    }
    let (index, fallback) = match best {
        Some(i) => (i, false),
        None => {
            let mut b = 0;
            for i in 1..final_props.len() {
                if better(final_props, i, b) {
                    b = i;
                }
            }
            (b, true)
        }
    };
    let p = final_props.proposals[index];
    Ok(Moment {
        start: p.start,
        end: p.end,
        score: final_props.scores[index],
        fallback,
    })
}

/// Maps frame index `i` to `i * duration / (L_v - 1)` seconds.
pub fn frames_to_seconds(moment: &Moment, num_frames: usize, duration_sec: f64) -> (f64, f64) {
    let scale = duration_sec / (num_frames as f64 - 1.0);
    (moment.start as f64 * scale, moment.end as f64 * scale)
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub query: String,
    pub s: usize,
    pub t: usize,
    pub start_sec: f64,
    pub end_sec: f64,
    pub score: f64,
    pub fallback: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Proposal;
    use ndarray::{Array1, Array2};

    fn state(attention: Vec<f64>) -> FusedState {
        FusedState {
            x: Array2::zeros((attention.len(), 2)),
            q_tilde: Array2::zeros((1, 2)),
            sentence: Array1::zeros(2),
            attention: Array1::from(attention),
        }
    }

    fn props(items: &[((usize, usize), f64)]) -> ProposalSet {
        ProposalSet {
            proposals: items.iter().map(|&((s, t), _)| Proposal::new(s, t)).collect(),
            features: Array2::zeros((items.len(), 2)),
            scores: items.iter().map(|&(_, v)| v).collect(),
        }
    }

    #[test]
    fn anchor_filters_candidates() {
        let s = state(vec![0.1, 0.1, 0.1, 0.4, 0.1, 0.1, 0.1]);
        let p = props(&[((0, 2), 0.9), ((2, 5), 0.5), ((4, 6), 0.7)]);
        let m = predict(&s, &p).unwrap();
        assert_eq!((m.start, m.end, m.fallback), (2, 5, false));
    }

    #[test]
    fn vacuous_filter_is_plain_argmax() {
        let s = state(vec![0.0, 0.0, 1.0, 0.0]);
        let p = props(&[((0, 3), 0.2), ((1, 2), 0.6), ((2, 3), 0.6)]);
        let m = predict(&s, &p).unwrap();
        assert_eq!((m.start, m.end), (1, 2));
    }

    #[test]
    fn fallback_when_anchor_uncovered() {
        let s = state(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let p = props(&[((0, 1), 0.2), ((1, 3), 0.8)]);
        let m = predict(&s, &p).unwrap();
        assert_eq!((m.start, m.end, m.fallback), (1, 3, true));
    }

    #[test]
    fn empty_set_errors() {
        let s = state(vec![1.0]);
        assert!(predict(&s, &props(&[])).is_err());
    }

    #[test]
    fn seconds_mapping() {
        let m = Moment { start: 0, end: 63, score: 0.0, fallback: false };
        assert_eq!(frames_to_seconds(&m, 64, 30.0), (0.0, 30.0));
        let m = Moment { start: 30, end: 31, score: 0.0, fallback: false };
        let (a, b) = frames_to_seconds(&m, 61, 30.0);
        assert!((a - 15.0).abs() < 1e-12 && (b - 15.5).abs() < 1e-12);
    }
}
