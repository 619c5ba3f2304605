//! Training objectives.
//!
//! Each loss exists in two forms: a graph builder that records onto a
//! [`Tape`] for training, and a plain function over arrays that builds a
//! throwaway tape and returns the value.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::Serialize;

use crate::autodiff::{Tape, Var};
use crate::config::{ExperimentConfig, ProposalFrameScore};
use crate::error::{Error, Result};
use crate::guidance::top_k_by;
use crate::tcl::ProposalSet;
use crate::types::Proposal;

/// Gaussian temporal prior centred on the annotated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrior {
    pub values: Array1<f64>,
    pub point: usize,
    pub sigma: f64,
}

impl GaussianPrior {
    pub fn num_frames(&self) -> usize {
        self.values.len()
    }

    /// Density at a possibly fractional frame position.
    pub fn at(&self, position: f64) -> f64 {
        gaussian_density(position, self.point, self.num_frames(), self.sigma)
    }

    /// The prior rescaled to sum to one.
    pub fn normalized(&self) -> Array1<f64> {
        &self.values / self.values.sum()
    }
}

fn gaussian_density(position: f64, point: usize, num_frames: usize, sigma: f64) -> f64 {
    let z = (position - point as f64) * 2.0 / (num_frames as f64 - 1.0);
    (-(z * z) / (2.0 * sigma * sigma)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma)
}

/// `G_i = exp(-((i - t_p) * 2 / (L_v - 1))^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)`.
pub fn gaussian_prior(point: usize, num_frames: usize, sigma: f64) -> Result<GaussianPrior> {
    if num_frames < 2 {
        return Err(Error::invalid("gaussian prior needs at least 2 frames"));
    }
    if point >= num_frames {
        return Err(Error::invalid(format!(
            "point {point} outside [0, {num_frames})"
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let values = Array1::from_shape_fn(num_frames, |i| {
        gaussian_density(i as f64, point, num_frames, sigma)
    });
    Ok(GaussianPrior {
        values,
        point,
        sigma,
    })
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("temperature must be > 0, got {tau}")))
    }
}

fn check_nonzero_rows(what: &str, m: ArrayView2<f64>) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        if row.dot(&row) == 0.0 {
            return Err(Error::ZeroNorm(format!("{what} row {i}")));
        }
    }
    Ok(())
}

/// Soft cross-entropy between the normalized prior and
/// `softmax(saliency / tau)`. `saliency` is an `L_v x 1` column.
pub fn frame_loss_graph(tape: &mut Tape, saliency: Var, target: &Array1<f64>, tau: f64) -> Var {
    let row = tape.transpose(saliency);
    let logits = tape.scale(row, 1.0 / tau);
    let logp = tape.log_softmax_rows(logits);
    let w = target.mapv(|g| -g).insert_axis(Axis(0));
    tape.dot_const(logp, w)
}

pub fn frame_loss(saliency: ArrayView1<f64>, prior: &GaussianPrior, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if saliency.len() != prior.num_frames() {
        return Err(Error::Shape {
            what: "frame loss saliency".into(),
            expected: prior.num_frames().to_string(),
            got: saliency.len().to_string(),
        });
    }
    let mut tape = Tape::new();
    let y = tape.leaf(saliency.to_owned().insert_axis(Axis(1)));
    let loss = frame_loss_graph(&mut tape, y, &prior.normalized(), tau);
    Ok(tape.scalar(loss))
}

/// Mean of the prior at a proposal's start, end and midpoint.
pub fn proposal_weight(proposal: Proposal, prior: &GaussianPrior) -> f64 {
    let mid = (proposal.start + proposal.end) as f64 / 2.0;
    (prior.at(proposal.start as f64) + prior.at(proposal.end as f64) + prior.at(mid)) / 3.0
}

/// Saliency attributed to a proposal: mean (or max) over its frames.
pub fn proposal_frame_term(saliency: ArrayView1<f64>, proposal: Proposal, mode: ProposalFrameScore) -> f64 {
    let span = saliency.slice(ndarray::s![proposal.start..=proposal.end]);
    match mode {
        ProposalFrameScore::Mean => span.mean().unwrap_or(0.0),
        ProposalFrameScore::Max => span.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Top-`k` proposals under the selection prior `h_i = w_i * y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveSet {
    pub indices: Vec<usize>,
    pub features: Array2<f64>,
    pub weights: Array1<f64>,
}

impl PositiveSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Selection prior and Gaussian weight for every proposal.
pub fn selection_prior(
    proposals: &[Proposal],
    saliency: ArrayView1<f64>,
    prior: &GaussianPrior,
    mode: ProposalFrameScore,
) -> (Vec<f64>, Vec<f64>) {
    proposals
        .iter()
        .map(|&p| {
            let w = proposal_weight(p, prior);
            (w * proposal_frame_term(saliency, p, mode), w)
        })
        .unzip()
}

pub fn select_positives(
    set: &ProposalSet,
    saliency: ArrayView1<f64>,
    prior: &GaussianPrior,
    k: usize,
    mode: ProposalFrameScore,
) -> Result<PositiveSet> {
    let (h, w) = selection_prior(&set.proposals, saliency, prior, mode);
    let indices = top_k_by(&h, &set.proposals, k)?;
    Ok(PositiveSet {
        features: set.features.select(Axis(0), &indices),
        weights: indices.iter().map(|&i| w[i]).collect(),
        indices,
    })
}

/// Proposals whose interval excludes the annotated frame.
pub fn negative_indices(proposals: &[Proposal], point: usize) -> Vec<usize> {
    (0..proposals.len())
        .filter(|&i| !proposals[i].contains(point))
        .collect()
}

/// Weighted InfoNCE of positives against the sentence, with the positives and
/// the in-video negatives in the denominator.
pub fn intra_loss_graph(
    tape: &mut Tape,
    positives: Var,
    negatives: Option<Var>,
    sentence: Var,
    weights: &[f64],
    tau: f64,
    eps: f64,
) -> Var {
    let k = weights.len();
    let rows = match negatives {
        Some(neg) => tape.concat_rows(&[positives, neg]),
        None => positives,
    };
    let n = tape.value(rows).nrows();
    let rows = tape.normalize_rows(rows, eps);
    let q = tape.normalize_rows(sentence, eps);
    let sims = tape.matmul_t(rows, q);
    let logits = tape.transpose(sims);
    let logits = tape.scale(logits, 1.0 / tau);
    let logp = tape.log_softmax_rows(logits);
    let mut coef = Array2::zeros((1, n));
    for (i, &w) in weights.iter().enumerate() {
        coef[[0, i]] = -w / k as f64;
    }
    tape.dot_const(logp, coef)
}

pub fn intra_loss(
    positives: &PositiveSet,
    negatives: ArrayView2<f64>,
    sentence: ArrayView1<f64>,
    tau: f64,
) -> Result<f64> {
    check_tau(tau)?;
    if positives.is_empty() {
        return Err(Error::invalid("intra loss needs at least one positive"));
    }
    check_nonzero_rows("positive", positives.features.view())?;
    check_nonzero_rows("negative", negatives)?;
    check_nonzero_rows("sentence", sentence.insert_axis(Axis(0)))?;
    let mut tape = Tape::new();
    let pos = tape.leaf(positives.features.clone());
    let neg = (negatives.nrows() > 0).then(|| tape.leaf(negatives.to_owned()));
    let q = tape.leaf(sentence.to_owned().insert_axis(Axis(0)));
    let w = positives.weights.to_vec();
    let loss = intra_loss_graph(&mut tape, pos, neg, q, &w, tau, 0.0);
    Ok(tape.scalar(loss))
}

/// One video of an inter-video batch on a tape.
#[derive(Debug, Clone)]
pub struct InterTerm<'a> {
    /// `k x d` positive proposal features.
    pub positives: Var,
    /// `1 x d` sentence vector.
    pub sentence: Var,
    pub weights: &'a [f64],
}

/// Inter-video contrastive loss over a mini-batch.
///
/// For positive `i` of video `b` the denominator holds every positive of `b`
/// against its own query, that positive against every other query, and every
/// other video's positives against query `b`. Averaged over `k * B`.
pub fn inter_loss_graph(tape: &mut Tape, batch: &[InterTerm<'_>], tau: f64, eps: f64) -> Var {
    let b_count = batch.len();
    let k = batch[0].weights.len();
    assert!(batch.iter().all(|t| t.weights.len() == k), "uneven positive counts");
    let pos_parts: Vec<Var> = batch.iter().map(|t| t.positives).collect();
    let q_parts: Vec<Var> = batch.iter().map(|t| t.sentence).collect();
    let all_pos = if b_count == 1 {
        pos_parts[0]
    } else {
        tape.concat_rows(&pos_parts)
    };
    let all_q = if b_count == 1 {
        q_parts[0]
    } else {
        tape.concat_rows(&q_parts)
    };
    let p = tape.normalize_rows(all_pos, eps);
    let q = tape.normalize_rows(all_q, eps);
    // sims[(b*k + i), j] = S(p_{b,i}, Q_j)
    let sims = tape.matmul_t(p, q);
    let width = k + (b_count - 1) + (b_count - 1) * k;
    let mut idx = Vec::with_capacity(b_count * k * width);
    let mut coef = Array2::zeros((b_count * k, width));
    for b in 0..b_count {
        for i in 0..k {
            let row = b * k + i;
            for i2 in 0..k {
                idx.push((b * k + i2, b));
            }
            for j in (0..b_count).filter(|&j| j != b) {
                idx.push((row, j));
            }
            for j in (0..b_count).filter(|&j| j != b) {
                for i2 in 0..k {
                    idx.push((j * k + i2, b));
                }
            }
            coef[[row, i]] = -batch[b].weights[i] / (k * b_count) as f64;
        }
    }
    let logits = tape.gather(sims, idx, b_count * k, width);
    let logits = tape.scale(logits, 1.0 / tau);
    let logp = tape.log_softmax_rows(logits);
    tape.dot_const(logp, coef)
}

/// Plain-array entry of an inter-video batch.
#[derive(Debug, Clone, Copy)]
pub struct InterItem<'a> {
    pub positives: &'a PositiveSet,
    pub sentence: ArrayView1<'a, f64>,
}

pub fn inter_loss(batch: &[InterItem<'_>], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if batch.is_empty() {
        return Err(Error::invalid("inter loss needs a non-empty batch"));
    }
    let k = batch[0].positives.len();
    if k == 0 || batch.iter().any(|b| b.positives.len() != k) {
        return Err(Error::invalid("every video needs the same non-zero number of positives"));
    }
    let mut tape = Tape::new();
    let mut weights = Vec::new();
    let mut vars = Vec::new();
    for item in batch {
        check_nonzero_rows("positive", item.positives.features.view())?;
        check_nonzero_rows("sentence", item.sentence.insert_axis(Axis(0)))?;
        let p = tape.leaf(item.positives.features.clone());
        let q = tape.leaf(item.sentence.to_owned().insert_axis(Axis(0)));
        vars.push((p, q));
        weights.push(item.positives.weights.to_vec());
    }
    let terms: Vec<InterTerm<'_>> = vars
        .iter()
        .zip(&weights)
        .map(|(&(p, q), w)| InterTerm {
            positives: p,
            sentence: q,
            weights: w,
        })
        .collect();
    let loss = inter_loss_graph(&mut tape, &terms, tau, 0.0);
    Ok(tape.scalar(loss))
}

/// `KL(G_hat || A)` with `A` a `1 x L_v` row, smoothed by `eps`.
pub fn kl_loss_graph(tape: &mut Tape, attention: Var, target: &Array1<f64>, eps: f64) -> Var {
    let entropy_term: f64 = target
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| g * g.ln())
        .sum();
    let log_a = tape.ln_eps(attention, eps);
    let cross = tape.dot_const(log_a, target.mapv(|g| -g).insert_axis(Axis(0)));
    tape.add_scalar(cross, entropy_term)
}

pub fn kl_loss(prior: &GaussianPrior, attention: ArrayView1<f64>, eps: f64) -> Result<f64> {
    if attention.len() != prior.num_frames() {
        return Err(Error::Shape {
            what: "attention distribution".into(),
            expected: prior.num_frames().to_string(),
            got: attention.len().to_string(),
        });
    }
    if let Some(i) = attention.iter().position(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::invalid(format!("attention entry {i} is not a probability")));
    }
    let target = prior.normalized();
    kl_divergence(target.view(), attention, eps)
}

/// `sum p log(p / (q + eps))` over entries with `p > 0`.
pub fn kl_divergence(p: ArrayView1<f64>, q: ArrayView1<f64>, eps: f64) -> Result<f64> {
    if eps == 0.0 {
        if let Some(i) = (0..p.len()).find(|&i| p[i] > 0.0 && q[i] == 0.0) {
            return Err(Error::ZeroAttention(i));
        }
    }
    let mut tape = Tape::new();
    let a = tape.leaf(q.to_owned().insert_axis(Axis(0)));
    let loss = kl_loss_graph(&mut tape, a, &p.to_owned(), eps);
    Ok(tape.scalar(loss))
}

/// The four loss components of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossComponents {
    pub frame: f64,
    pub intra: f64,
    pub inter: f64,
    pub kl: f64,
}

impl LossComponents {
    pub fn total(&self, config: &ExperimentConfig) -> f64 {
        total_loss(self, config)
    }
}

/// `L_frame + l_intra L_intra + l_inter L_inter + l_kl L_kl`.
pub fn total_loss(c: &LossComponents, config: &ExperimentConfig) -> f64 {
    c.frame + config.lambda_intra * c.intra + config.lambda_inter * c.inter + config.lambda_kl * c.kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

    #[test]
    fn prior_peak_and_symmetry() {
        let g = gaussian_prior(3, 8, 1.0).unwrap();
        assert!((g.values[3] - INV_SQRT_2PI).abs() < 1e-12);
        for d in 1..=3 {
            assert!((g.values[3 + d] - g.values[3 - d]).abs() < 1e-15);
        }
        let g = gaussian_prior(2, 5, 1.0).unwrap();
        assert!((g.values[4] - 0.24197).abs() < 1e-4);
        assert_eq!(g.values[0], g.values[4]);
    }

    #[test]
    fn prior_rejects_bad_input() {
        assert!(gaussian_prior(5, 5, 1.0).is_err());
        assert!(gaussian_prior(0, 1, 1.0).is_err());
        assert!(gaussian_prior(0, 5, 0.0).is_err());
    }

    #[test]
    fn frame_loss_cases() {
        let g = gaussian_prior(0, 2, 100.0).unwrap();
        let l = frame_loss(array![0.0, 0.0].view(), &g, 0.5).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-6);

        // logits tau * ln(G_hat) reproduce G_hat, so the loss is its entropy
        let g = gaussian_prior(2, 6, 0.7).unwrap();
        let target = g.normalized();
        let tau = 0.3;
        let y = target.mapv(|p| tau * p.ln());
        let l = frame_loss(y.view(), &g, tau).unwrap();
        let entropy: f64 = -target.iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((l - entropy).abs() < 1e-12);
        assert!(frame_loss(y.view(), &g, 0.0).is_err());
    }

    #[test]
    fn proposal_weight_cases() {
        let g = gaussian_prior(2, 5, 1.0).unwrap();
        assert_eq!(proposal_weight(Proposal::new(2, 2), &g), g.values[2]);
        let w = proposal_weight(Proposal::new(0, 4), &g);
        // Both ends sit at the scaled distance of the 0.24197 fixture above.
        assert!((w - (2.0 * 0.24197 + INV_SQRT_2PI) / 3.0).abs() < 1e-4, "{w}");
        let g = gaussian_prior(5, 11, 0.4).unwrap();
        let w = proposal_weight(Proposal::new(3, 7), &g);
        assert!((w - (2.0 * g.values[3] + g.values[5]) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hand_set_selection_prior() {
        let h: Vec<f64> = [(0.4, 0.5), (0.3, 0.9), (0.5, 0.2)]
            .iter()
            .map(|(w, y)| w * y)
            .collect();
        let props = [Proposal::new(0, 1), Proposal::new(1, 2), Proposal::new(2, 3)];
        assert_eq!(top_k_by(&h, &props, 1).unwrap(), vec![1]);
    }

    fn set_of(props: Vec<Proposal>, d: usize) -> ProposalSet {
        let n = props.len();
        ProposalSet {
            proposals: props,
            features: Array2::from_shape_fn((n, d), |(i, c)| (i * d + c) as f64 + 1.0),
            scores: Array1::zeros(n),
        }
    }

    #[test]
    fn exhaustive_and_uniform_selection() {
        let props = vec![Proposal::new(0, 1), Proposal::new(0, 4), Proposal::new(3, 5), Proposal::new(2, 2)];
        let set = set_of(props.clone(), 2);
        let g = gaussian_prior(2, 6, 0.5).unwrap();
        let y = Array1::from_elem(6, 0.4);
        let all = select_positives(&set, y.view(), &g, 4, ProposalFrameScore::Mean).unwrap();
        let mut idx = all.indices.clone();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);

        let top = select_positives(&set, y.view(), &g, 2, ProposalFrameScore::Mean).unwrap();
        let w: Vec<f64> = props.iter().map(|&p| proposal_weight(p, &g)).collect();
        let by_w = top_k_by(&w, &props, 2).unwrap();
        assert_eq!(top.indices, by_w);
        assert!(select_positives(&set, y.view(), &g, 5, ProposalFrameScore::Mean).is_err());
    }

    fn positives(features: Array2<f64>, weights: Vec<f64>) -> PositiveSet {
        PositiveSet {
            indices: (0..features.nrows()).collect(),
            features,
            weights: Array1::from(weights),
        }
    }

    #[test]
    fn intra_loss_cases() {
        let q = array![1.0, 0.0];
        let pos = positives(array![[1.0, 0.0]], vec![1.0]);
        let none = Array2::<f64>::zeros((0, 2));
        assert!(intra_loss(&pos, none.view(), q.view(), 0.5).unwrap().abs() < 1e-15);

        let neg = array![[-1.0, 0.0]];
        let l = intra_loss(&pos, neg.view(), q.view(), 0.5).unwrap();
        assert!((l - (1.0 + (-4f64).exp()).ln()).abs() < 1e-12);
        assert!((l - 0.01815).abs() < 1e-5);

        let pos2 = positives(array![[1.0, 0.0]], vec![2.0]);
        let l2 = intra_loss(&pos2, neg.view(), q.view(), 0.5).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-15);
        assert!(intra_loss(&pos, neg.view(), q.view(), 0.0).is_err());
    }

    #[test]
    fn inter_single_video_is_intra_without_negatives() {
        let q = array![0.3, -0.4, 1.0];
        let pos = positives(array![[1.0, 0.2, 0.1], [0.0, 1.0, 1.0]], vec![0.7, 0.4]);
        let inter = inter_loss(&[InterItem { positives: &pos, sentence: q.view() }], 0.5).unwrap();
        let none = Array2::<f64>::zeros((0, 3));
        let intra = intra_loss(&pos, none.view(), q.view(), 0.5).unwrap();
        assert!((inter - intra).abs() < 1e-14);
    }

    #[test]
    fn kl_cases() {
        let p = array![0.5, 0.5];
        assert!(kl_divergence(p.view(), p.view(), 0.0).unwrap().abs() < 1e-15);
        let l = kl_divergence(p.view(), array![0.25, 0.75].view(), 0.0).unwrap();
        assert!((l - 0.14384).abs() < 1e-5);
        assert!(matches!(
            kl_divergence(p.view(), array![1.0, 0.0].view(), 0.0),
            Err(Error::ZeroAttention(1))
        ));
        assert!(kl_divergence(p.view(), array![1.0, 0.0].view(), 1e-12).unwrap().is_finite());

        let g = gaussian_prior(1, 4, 0.5).unwrap();
        let a = g.normalized();
        assert!(kl_loss(&g, a.view(), 1e-12).unwrap().abs() < 1e-10);
    }

    #[test]
    fn total_loss_arithmetic() {
        let cfg = ExperimentConfig::default();
        let c = LossComponents { frame: 1.0, intra: 2.0, inter: 3.0, kl: 4.0 };
        assert!((total_loss(&c, &cfg) - 6.15).abs() < 1e-12);
        let mut zero = cfg.clone();
        zero.lambda_intra = 0.0;
        zero.lambda_inter = 0.0;
        zero.lambda_kl = 0.0;
        assert_eq!(total_loss(&c, &zero), 1.0);
    }

    proptest! {
        #[test]
        fn prior_strictly_decreases_away_from_point(lv in 2usize..40, seed in 0usize..1000, sigma in 0.05f64..3.0) {
            let tp = seed % lv;
            let g = gaussian_prior(tp, lv, sigma).unwrap();
            for i in tp + 1..lv {
                prop_assert!(g.values[i] < g.values[i - 1] || g.values[i] == 0.0);
            }
            for i in 0..tp {
                prop_assert!(g.values[i] < g.values[i + 1] || g.values[i] == 0.0);
            }
        }

        #[test]
        fn kl_is_non_negative(a in proptest::collection::vec(0.01f64..1.0, 6), b in proptest::collection::vec(0.01f64..1.0, 6)) {
            let p = Array1::from(a.clone()) / a.iter().sum::<f64>();
            let q = Array1::from(b.clone()) / b.iter().sum::<f64>();
            prop_assert!(kl_divergence(p.view(), q.view(), 0.0).unwrap() >= -1e-15);
        }

        #[test]
        fn contrastive_losses_drop_when_positive_aligns(
            a0 in 0.0f64..6.28, da in 0.01f64..1.0, qa in 0.0f64..6.28, w in 0.05f64..1.0,
            negs in proptest::collection::vec(-1.0f64..1.0, 8),
            other in proptest::collection::vec(-1.0f64..1.0, 4),
        ) {
            // positive and query live in the (e0, e1) plane; the other video
            // lives in (e2, e3), so every cross similarity stays zero while the
            // positive rotates toward its own query
            let q = array![qa.cos(), qa.sin(), 0.0, 0.0];
            let delta = (qa - a0 + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
            prop_assume!(delta.abs() > 1e-3);
            let a1 = a0 + delta.signum() * da.min(delta.abs());
            let far = positives(array![[a0.cos(), a0.sin(), 0.0, 0.0]], vec![w]);
            let near = positives(array![[a1.cos(), a1.sin(), 0.0, 0.0]], vec![w]);
            let neg = Array2::from_shape_vec((2, 4), negs).unwrap();
            prop_assume!(neg.rows().into_iter().all(|r| r.dot(&r) > 1e-6));
            let before = intra_loss(&far, neg.view(), q.view(), 0.5).unwrap();
            let after = intra_loss(&near, neg.view(), q.view(), 0.5).unwrap();
            prop_assert!(after < before);

            let q2 = array![0.0, 0.0, other[0], other[1]];
            let op = positives(array![[0.0, 0.0, other[2], other[3]]], vec![0.5]);
            prop_assume!(q2.dot(&q2) > 1e-6 && other[2].abs() + other[3].abs() > 1e-3);
            let b1 = inter_loss(&[InterItem { positives: &far, sentence: q.view() }, InterItem { positives: &op, sentence: q2.view() }], 0.5).unwrap();
            let b2 = inter_loss(&[InterItem { positives: &near, sentence: q.view() }, InterItem { positives: &op, sentence: q2.view() }], 0.5).unwrap();
            prop_assert!(b2 < b1);
        }
    }
}
