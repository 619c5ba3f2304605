//! Multi-modal interaction: projection, positional encoding, cross-attention
//! in both directions, per-modality self-attention and sentence max-pooling.
//!
//! Each attention block is a post-norm residual unit
//! `LayerNorm(query + MHA(query, kv, kv))`. The block where query tokens
//! attend over frames also yields the token-by-frame attention map; collapsing
//! it to one distribution over frames gives the attention vector used by the
//! KL objective and by anchor selection at inference.

use ndarray::{Array1, Array2};

use crate::autodiff::{Tape, Var};
use crate::config::{AttentionAggregation, ExperimentConfig};
use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::types::{check_finite, FeatureBundle};

/// Fused representations for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedState {
    /// Fused video features, `L_v x d`.
    pub x: Array2<f64>,
    /// Fused token features, `L_q x d`.
    pub q_tilde: Array2<f64>,
    /// Max-pooled sentence vector, length `d`.
    pub sentence: Array1<f64>,
    /// Distribution over frames from the token-to-frame cross-attention.
    pub attention: Array1<f64>,
}

/// Graph handles of a [`FusedState`].
#[derive(Debug, Clone, Copy)]
pub struct FusedVars {
    /// Input leaves, `L_v x d_in` and `L_q x d_in`.
    pub frames: Var,
    pub tokens: Var,
    pub x: Var,
    pub q_tilde: Var,
    /// `1 x d`
    pub sentence: Var,
    /// `1 x L_v`
    pub attention: Var,
}

impl FusedVars {
    pub fn to_state(&self, tape: &Tape) -> FusedState {
        FusedState {
            x: tape.value(self.x).clone(),
            q_tilde: tape.value(self.q_tilde).clone(),
            sentence: tape.value(self.sentence).row(0).to_owned(),
            attention: tape.value(self.attention).row(0).to_owned(),
        }
    }
}

/// Parameters placed on a tape as leaves.
#[derive(Debug, Clone)]
pub struct BoundParams {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, params: &ParamStore) -> Self {
        let mut names = Vec::with_capacity(params.len());
        let mut vars = Vec::with_capacity(params.len());
        for (name, value) in params.iter() {
            names.push(name.to_string());
            vars.push(tape.leaf(value.clone()));
        }
        Self { names, vars }
    }

    pub fn var(&self, name: &str) -> Var {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.vars[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.names.iter().map(String::as_str).zip(self.vars.iter().copied())
    }
}

/// Sinusoidal table: `sin(pos / 10000^(2j/d))` at column `2j`, cosine at `2j+1`.
pub fn positional_encoding(length: usize, d: usize) -> Result<Array2<f64>> {
    if d % 2 != 0 {
        return Err(Error::invalid(format!("positional encoding needs even d, got {d}")));
    }
    if length == 0 {
        return Err(Error::invalid("positional encoding length must be >= 1"));
    }
    Ok(Array2::from_shape_fn((length, d), |(pos, c)| {
        let j = (c / 2) as f64;
        let angle = pos as f64 / 10000f64.powf(2.0 * j / d as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

/// One residual multi-head attention block; returns the output and the
/// per-head attention maps (`rows(query) x rows(kv)`).
fn attention_block(
    tape: &mut Tape,
    params: &BoundParams,
    block: &str,
    query: Var,
    kv: Var,
    heads: usize,
) -> (Var, Vec<Var>) {
    let p = |name: &str| params.var(&format!("{block}.{name}"));
    let d = tape.value(query).ncols();
    let dh = d / heads;
    let q = tape.matmul(query, p("wq"));
    let q = tape.add_row(q, p("bq"));
    let k = tape.matmul(kv, p("wk"));
    let k = tape.add_row(k, p("bk"));
    let v = tape.matmul(kv, p("wv"));
    let v = tape.add_row(v, p("bv"));
    let scale = 1.0 / (dh as f64).sqrt();
    let mut outputs = Vec::with_capacity(heads);
    let mut maps = Vec::with_capacity(heads);
    for h in 0..heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let vh = tape.slice_cols(v, h * dh, dh);
        let scores = tape.matmul_t(qh, kh);
        let scores = tape.scale(scores, scale);
        let attn = tape.softmax_rows(scores);
        outputs.push(tape.matmul(attn, vh));
        maps.push(attn);
    }
    let merged = if heads == 1 {
        outputs[0]
    } else {
        tape.concat_cols(&outputs)
    };
    let o = tape.matmul(merged, p("wo"));
    let o = tape.add_row(o, p("bo"));
    let residual = tape.add(query, o);
    let normed = tape.standardize(residual);
    let scaled = tape.mul_row(normed, p("ln_gain"));
    (tape.add_row(scaled, p("ln_bias")), maps)
}

/// Index of the token contributing the most channels to the sentence max-pool
/// (ties to the smaller index).
fn dominant_token(q_tilde: &Array2<f64>) -> usize {
    let mut wins = vec![0usize; q_tilde.nrows()];
    for col in q_tilde.columns() {
        let mut best = 0;
        for (r, &v) in col.iter().enumerate() {
            if v > col[best] {
                best = r;
            }
        }
        wins[best] += 1;
    }
    let mut arg = 0;
    for (i, &w) in wins.iter().enumerate() {
        if w > wins[arg] {
            arg = i;
        }
    }
    arg
}

/// Builds the encoder graph for one sample.
pub fn encode_graph(
    tape: &mut Tape,
    params: &BoundParams,
    frames: &Array2<f64>,
    tokens: &Array2<f64>,
    config: &ExperimentConfig,
) -> Result<FusedVars> {
    let d = config.model_dim;
    if frames.ncols() != config.input_dim || tokens.ncols() != config.input_dim {
        return Err(Error::Shape {
            what: "input feature width".into(),
            expected: config.input_dim.to_string(),
            got: format!("{} / {}", frames.ncols(), tokens.ncols()),
        });
    }
    let heads = config.num_heads;
    let frames = tape.leaf(frames.clone());
    let tokens = tape.leaf(tokens.clone());
    let v = tape.matmul(frames, params.var("video_proj.weight"));
    let mut v = tape.add_row(v, params.var("video_proj.bias"));
    let q = tape.matmul(tokens, params.var("query_proj.weight"));
    let mut q = tape.add_row(q, params.var("query_proj.bias"));
    if config.positional_encoding {
        let pv = tape.leaf(positional_encoding(tape.value(v).nrows(), d)?);
        v = tape.add(v, pv);
        let pq = tape.leaf(positional_encoding(tape.value(q).nrows(), d)?);
        q = tape.add(q, pq);
    }
    // tokens attend over frames: the maps here define the frame attention
    let (q_hat, maps) = attention_block(tape, params, "cross_query", q, v, heads);
    let (v_hat, _) = attention_block(tape, params, "cross_video", v, q, heads);
    let (q_tilde, _) = attention_block(tape, params, "self_query", q_hat, q_hat, heads);
    let (x, _) = attention_block(tape, params, "self_video", v_hat, v_hat, heads);
    let lq = tape.value(q_tilde).nrows();
    let sentence = tape.max_pool_ranges(q_tilde, &[(0, lq - 1)]);

    let head_terms: Vec<(Var, f64)> = maps.iter().map(|&m| (m, 1.0 / heads as f64)).collect();
    let token_map = tape.combine(&head_terms);
    let attention = match config.attention_aggregation {
        AttentionAggregation::MeanOverTokens => tape.mean_rows(token_map),
        AttentionAggregation::PooledMaxToken => {
            let token = dominant_token(tape.value(q_tilde));
            tape.select_rows(token_map, &[token])
        }
    };

    let vars = FusedVars {
        frames,
        tokens,
        x,
        q_tilde,
        sentence,
        attention,
    };
    for (what, var) in [("fused video", x), ("fused query", q_tilde), ("attention", attention)] {
        check_finite(what, tape.value(var).iter())?;
    }
    Ok(vars)
}

/// Runs the encoder on one bundle without recording gradients for reuse.
pub fn encode(bundle: &FeatureBundle, params: &ParamStore, config: &ExperimentConfig) -> Result<FusedState> {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let vars = encode_graph(
        &mut tape,
        &bound,
        &bundle.frame_features,
        &bundle.token_features,
        config,
    )?;
    let mut state = vars.to_state(&tape);
    let total = state.attention.sum();
    state.attention.mapv_inplace(|a| a / total);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::FeatureBundle;
    use ndarray::Axis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_text(
            "model_dim = 8\ninput_dim = 5\nnum_heads = 2\nnum_frames = 4\nwindow_lengths = 2, 4\ntop_k = 1",
        )
        .unwrap()
    }

    fn bundle(rng: &mut ChaCha8Rng, lv: usize, lq: usize, din: usize) -> FeatureBundle {
        let frames = Array2::from_shape_fn((lv, din), |_| rng.random_range(-1.0..1.0));
        let tokens = Array2::from_shape_fn((lq, din), |_| rng.random_range(-1.0..1.0));
        FeatureBundle::new("v", "q", frames, tokens, 0, None, 1.0).unwrap()
    }

    #[test]
    fn positional_encoding_rows() {
        let pe = positional_encoding(1, 4).unwrap();
        assert_eq!(pe.row(0).to_vec(), vec![0.0, 1.0, 0.0, 1.0]);
        let pe = positional_encoding(2, 4).unwrap();
        assert!(pe.row(1).iter().all(|v| (-1.0..=1.0).contains(v)));
        let short = positional_encoding(8, 6).unwrap();
        let long = positional_encoding(16, 6).unwrap();
        for r in 0..4 {
            assert_eq!(short.row(r), long.row(r));
        }
        assert!(positional_encoding(3, 5).is_err());
    }

    #[test]
    fn shapes_and_normalization() {
        let cfg = config();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ParamStore::init(&cfg, &mut rng);
        let b = bundle(&mut rng, 4, 3, 5);
        let s = encode(&b, &params, &cfg).unwrap();
        assert_eq!(s.x.dim(), (4, 8));
        assert_eq!(s.q_tilde.dim(), (3, 8));
        assert_eq!(s.sentence.len(), 8);
        assert_eq!(s.attention.len(), 4);
        assert!((s.attention.sum() - 1.0).abs() < 1e-9);
        for row in s.q_tilde.rows() {
            for (a, b) in s.sentence.iter().zip(row.iter()) {
                assert!(a >= b);
            }
        }
    }

    #[test]
    fn identical_frames_give_uniform_attention() {
        let mut cfg = config();
        cfg.positional_encoding = false;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = ParamStore::init(&cfg, &mut rng);
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let frames = Array2::from_shape_fn((4, 5), |(_, c)| row[c]);
        let tokens = Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0));
        let b = FeatureBundle::new("v", "q", frames, tokens, 1, None, 1.0).unwrap();
        for agg in [AttentionAggregation::MeanOverTokens, AttentionAggregation::PooledMaxToken] {
            cfg.attention_aggregation = agg;
            let s = encode(&b, &params, &cfg).unwrap();
            for a in s.attention.iter() {
                assert!((a - 0.25).abs() < 1e-12, "{a}");
            }
        }
    }

    #[test]
    fn wrong_input_width_is_a_shape_error() {
        let cfg = config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = ParamStore::init(&cfg, &mut rng);
        let b = bundle(&mut rng, 4, 3, 6);
        assert!(matches!(encode(&b, &params, &cfg), Err(Error::Shape { .. })));
    }

    #[test]
    fn token_permutation_keeps_sentence_vector() {
        let mut cfg = config();
        cfg.positional_encoding = false;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ParamStore::init(&cfg, &mut rng);
        let b = bundle(&mut rng, 4, 3, 5);
        let s1 = encode(&b, &params, &cfg).unwrap();
        let mut permuted = b.clone();
        permuted.token_features = b.token_features.select(Axis(0), &[2, 0, 1]);
        let s2 = encode(&permuted, &params, &cfg).unwrap();
        for (a, c) in s1.sentence.iter().zip(s2.sentence.iter()) {
            assert!((a - c).abs() < 1e-12);
        }
        for (i, j) in [(0usize, 2usize), (1, 0), (2, 1)] {
            for (a, c) in s1.q_tilde.row(j).iter().zip(s2.q_tilde.row(i).iter()) {
                assert!((a - c).abs() < 1e-12);
            }
        }
    }
}
