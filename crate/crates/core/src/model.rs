//! The full model: encoder, both heads, one guidance round, and the batch
//! objective as a differentiable graph.

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::config::{ExperimentConfig, ScgInput};
use crate::error::{Error, Result};
use crate::evaluation::{temporal_iou, EvaluationReport, Interval, SampleResult};
use crate::fusion::{encode, encode_graph, BoundParams, FusedState};
use crate::guidance::{cross_guidance_pass, semantic_mask, top_k_by, GuidanceOutput};
use crate::inference::{frames_to_seconds, predict, PredictionRecord};
use crate::losses::{
    frame_loss_graph, gaussian_prior, inter_loss_graph, intra_loss_graph, kl_loss_graph, negative_indices,
    selection_prior, InterTerm, LossComponents,
};
use crate::params::{load_checkpoint, save_checkpoint, ParamStore};
use crate::tcl::{generate_proposals, ProposalSet};
use crate::types::{FeatureBundle, Moment, Proposal};

/// Parameters plus the configuration and proposal grid they were built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ExperimentConfig,
    pub params: ParamStore,
    proposals: Vec<Proposal>,
}

/// Everything the inference path computes for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub state: FusedState,
    pub guidance: GuidanceOutput,
    pub moment: Moment,
}

impl Model {
    /// Fresh parameters drawn from a generator seeded with `config.seed`.
    pub fn init(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = ParamStore::init(&config, &mut rng);
        Self::from_parts(config, params)
    }

    pub fn from_parts(config: ExperimentConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        params.check_shapes(&config)?;
        let proposals = generate_proposals(config.num_frames, &config.window_lengths, config.window_stride_fraction)?;
        Ok(Self {
            config,
            params,
            proposals,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (config, params) = load_checkpoint(path)?;
        Self::from_parts(config, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_checkpoint(path, &self.config, &self.params)
    }

    pub fn proposals(&self) -> &[Proposal] {
        &self.proposals
    }

    fn check_bundle(&self, bundle: &FeatureBundle) -> Result<()> {
        if bundle.num_frames() != self.config.num_frames {
            return Err(Error::Shape {
                what: format!("{} frame count", bundle.video_id),
                expected: self.config.num_frames.to_string(),
                got: bundle.num_frames().to_string(),
            });
        }
        Ok(())
    }

    pub fn analyze(&self, bundle: &FeatureBundle) -> Result<Analysis> {
        self.check_bundle(bundle)?;
        let state = encode(bundle, &self.params, &self.config)?;
        let guidance = cross_guidance_pass(&state, &self.proposals, &self.config)?;
        let moment = predict(&state, &guidance.final_proposals)?;
        Ok(Analysis {
            state,
            guidance,
            moment,
        })
    }

    pub fn predict(&self, bundle: &FeatureBundle) -> Result<PredictionRecord> {
        let m = self.analyze(bundle)?.moment;
        let (start_sec, end_sec) = frames_to_seconds(&m, bundle.num_frames(), bundle.duration_sec);
        Ok(PredictionRecord {
            video_id: bundle.video_id.clone(),
            query: bundle.query.clone(),
            s: m.start,
            t: m.end,
            start_sec,
            end_sec,
            score: m.score,
            fallback: m.fallback,
        })
    }

    /// Scores predictions against each bundle's frame ground truth, mapped
    /// to seconds.
    pub fn evaluate(&self, bundles: &[FeatureBundle]) -> Result<EvaluationReport> {
        let mut samples = Vec::with_capacity(bundles.len());
        for b in bundles {
            let gt = b
                .ground_truth
                .ok_or_else(|| Error::Evaluation(format!("{} has no ground truth", b.video_id)))?;
            let p = self.predict(b)?;
            let gt_moment = Moment {
                start: gt.start,
                end: gt.end,
                score: 0.0,
                fallback: false,
            };
            let (gs, ge) = frames_to_seconds(&gt_moment, b.num_frames(), b.duration_sec);
            let gt = Interval::new(gs, ge);
            let pred = Interval::new(p.start_sec, p.end_sec);
            samples.push(SampleResult {
                video_id: b.video_id.clone(),
                query: b.query.clone(),
                gt,
                pred,
                iou: temporal_iou(pred, gt)?,
            });
        }
        EvaluationReport::from_samples(samples)
    }
}

/// Graph handles for one sample's forward pass.
#[derive(Debug, Clone)]
pub struct SampleGraph {
    /// Leaves holding the bundle's frame and token features.
    pub frames: Var,
    pub tokens: Var,
    pub sentence: Var,
    /// `1 x L_v` attention distribution.
    pub attention: Var,
    /// Final saliency, `L_v x 1`.
    pub saliency: Var,
    /// Final proposal features, `N x d`.
    pub proposal_features: Var,
    pub frame_loss: Option<Var>,
    pub intra_loss: Option<Var>,
    pub kl_loss: Var,
    /// `k x d` positives and their Gaussian weights, when the segment head
    /// is on.
    pub positives: Option<(Var, Vec<f64>)>,
}

fn cosine_column(tape: &mut Tape, rows: Var, sentence_unit: Var, eps: f64) -> Var {
    let r = tape.normalize_rows(rows, eps);
    tape.matmul_t(r, sentence_unit)
}

/// `x + x * m` with `m` an `L_v x 1` column.
fn enhance(tape: &mut Tape, x: Var, mask_col: Var) -> Var {
    let scaled = tape.scale_rows(x, mask_col);
    tape.add(x, scaled)
}

/// Records one sample's forward pass and per-sample losses.
pub fn sample_graph(
    tape: &mut Tape,
    params: &BoundParams,
    bundle: &FeatureBundle,
    proposals: &[Proposal],
    config: &ExperimentConfig,
) -> Result<SampleGraph> {
    let eps = config.cosine_eps;
    let lv = bundle.num_frames();
    let fused = encode_graph(tape, params, &bundle.frame_features, &bundle.token_features, config)?;
    let q_unit = tape.normalize_rows(fused.sentence, eps);
    let ranges: Vec<(usize, usize)> = proposals.iter().map(|p| (p.start, p.end)).collect();

    let first_saliency = cosine_column(tape, fused.x, q_unit, eps);
    let first_features = tape.max_pool_ranges(fused.x, &ranges);
    let first_scores = cosine_column(tape, first_features, q_unit, eps);

    let proposal_features = if config.fcg_active() {
        let row = tape.transpose(first_saliency);
        let p = tape.softmax_rows(row);
        let mask = tape.max_normalize(p);
        let mask_col = tape.transpose(mask);
        let xs = enhance(tape, fused.x, mask_col);
        tape.max_pool_ranges(xs, &ranges)
    } else {
        first_features
    };

    let saliency = if config.scg_active() {
        let source = match config.scg_input {
            ScgInput::FirstPass => first_scores,
            ScgInput::PostFcg => cosine_column(tape, proposal_features, q_unit, eps),
        };
        let set = ProposalSet {
            proposals: proposals.to_vec(),
            features: Array2::zeros((0, 0)),
            scores: tape.value(source).column(0).to_owned(),
        };
        let mask = semantic_mask(&set, config.top_k, lv)?;
        let mask_col = tape.leaf(mask.insert_axis(Axis(1)));
        let xf = enhance(tape, fused.x, mask_col);
        cosine_column(tape, xf, q_unit, eps)
    } else {
        first_saliency
    };

    let prior = gaussian_prior(bundle.point_frame, lv, config.sigma)?;
    let target = prior.normalized();
    let frame_loss =
        (!config.disable_frame_tcl).then(|| frame_loss_graph(tape, saliency, &target, config.tau));
    let kl_loss = kl_loss_graph(tape, fused.attention, &target, config.kl_eps);

    let (intra_loss, positives) = if config.disable_segment_tcl {
        (None, None)
    } else {
        let (h, w) = if config.disable_frame_tcl {
            let w: Vec<f64> = proposals.iter().map(|&p| crate::losses::proposal_weight(p, &prior)).collect();
            (w.clone(), w)
        } else {
            let y = tape.value(saliency).column(0).to_owned();
            selection_prior(proposals, y.view(), &prior, config.proposal_frame_score)
        };
        let chosen = top_k_by(&h, proposals, config.top_k)?;
        let weights: Vec<f64> = chosen.iter().map(|&i| w[i]).collect();
        let pos = tape.select_rows(proposal_features, &chosen);
        let neg_idx = negative_indices(proposals, bundle.point_frame);
        let neg = (!neg_idx.is_empty()).then(|| tape.select_rows(proposal_features, &neg_idx));
        let loss = intra_loss_graph(tape, pos, neg, fused.sentence, &weights, config.tau, eps);
        (Some(loss), Some((pos, weights)))
    };

    Ok(SampleGraph {
        frames: fused.frames,
        tokens: fused.tokens,
        sentence: fused.sentence,
        attention: fused.attention,
        saliency,
        proposal_features,
        frame_loss,
        intra_loss,
        kl_loss,
        positives,
    })
}

/// The batch objective on a tape, its weighted parts and their values.
#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub total: Var,
    pub components: LossComponents,
    /// Batch means of the per-sample losses, absent when their head is off.
    pub frame: Option<Var>,
    pub intra: Option<Var>,
    pub inter: Option<Var>,
    pub kl: Var,
    pub samples: Vec<SampleGraph>,
}

fn batch_mean(tape: &mut Tape, vars: &[Var]) -> Option<Var> {
    if vars.is_empty() {
        return None;
    }
    let w = 1.0 / vars.len() as f64;
    let terms: Vec<(Var, f64)> = vars.iter().map(|&v| (v, w)).collect();
    Some(tape.combine(&terms))
}

/// Mean per-sample frame, intra and KL losses plus the batch inter loss,
/// combined with the configured weights.
pub fn batch_loss_graph(
    tape: &mut Tape,
    params: &BoundParams,
    batch: &[&FeatureBundle],
    proposals: &[Proposal],
    config: &ExperimentConfig,
) -> Result<BatchLoss> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut samples = Vec::with_capacity(batch.len());
    for b in batch {
        samples.push(sample_graph(tape, params, b, proposals, config)?);
    }
    let frames: Vec<Var> = samples.iter().filter_map(|g| g.frame_loss).collect();
    let intras: Vec<Var> = samples.iter().filter_map(|g| g.intra_loss).collect();
    let kls: Vec<Var> = samples.iter().map(|g| g.kl_loss).collect();
    let frame = batch_mean(tape, &frames);
    let intra = batch_mean(tape, &intras);
    let kl = batch_mean(tape, &kls).expect("non-empty batch");
    let inter = (!config.disable_segment_tcl).then(|| {
        let terms: Vec<InterTerm<'_>> = samples
            .iter()
            .map(|g| {
                let (pos, w) = g.positives.as_ref().expect("segment head on");
                InterTerm {
                    positives: *pos,
                    sentence: g.sentence,
                    weights: w,
                }
            })
            .collect();
        inter_loss_graph(tape, &terms, config.tau, config.cosine_eps)
    });
    let value = |tape: &Tape, v: Option<Var>| v.map_or(0.0, |v| tape.scalar(v));
    let components = LossComponents {
        frame: value(tape, frame),
        intra: value(tape, intra),
        inter: value(tape, inter),
        kl: tape.scalar(kl),
    };
    let mut terms = vec![(kl, config.lambda_kl)];
    terms.extend(frame.map(|v| (v, 1.0)));
    terms.extend(intra.map(|v| (v, config.lambda_intra)));
    terms.extend(inter.map(|v| (v, config.lambda_inter)));
    let total = tape.combine(&terms);
    Ok(BatchLoss {
        total,
        components,
        frame,
        intra,
        inter,
        kl,
        samples,
    })
}

/// Loss components of a batch without recording gradients for reuse.
pub fn batch_loss(model: &Model, batch: &[&FeatureBundle]) -> Result<LossComponents> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, &model.params);
    Ok(batch_loss_graph(&mut tape, &bound, batch, &model.proposals, &model.config)?.components)
}

/// Mean attention per frame over a set of analyses; handy for plots.
pub fn mean_attention(analyses: &[Analysis]) -> Option<Array1<f64>> {
    let first = analyses.first()?;
    let mut acc = Array1::zeros(first.state.attention.len());
    for a in analyses {
        acc += &a.state.attention;
    }
    Some(acc / analyses.len() as f64)
}
