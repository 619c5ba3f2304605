//! Experiment configuration and its flat `key = value` file format.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma separated (`window_lengths = 4, 8, 16`). Keys that are not
//! present keep their defaults; `window_lengths` defaults to a scheme derived
//! from `num_frames`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tcl::generate_proposals;

/// Which proposal scores feed the semantic-mask generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScgInput {
    FirstPass,
    PostFcg,
}

/// How the token-by-frame cross-attention map collapses into one
/// distribution over frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionAggregation {
    /// Average over heads and query tokens.
    MeanOverTokens,
    /// Average over heads, taking the row of the token that wins the most
    /// channels in the sentence max-pool.
    PooledMaxToken,
}

/// How per-frame saliency is attributed to a proposal in the selection prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProposalFrameScore {
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model_dim: usize,
    pub input_dim: usize,
    pub num_heads: usize,
    pub sigma: f64,
    pub tau: f64,
    pub top_k: usize,
    pub lambda_intra: f64,
    pub lambda_inter: f64,
    pub lambda_kl: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_patience: usize,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub grad_clip_norm: f64,
    pub epochs: usize,
    pub window_lengths: Vec<usize>,
    pub window_stride_fraction: f64,
    pub num_frames: usize,
    pub seed: u64,
    /// Floor on vector norms inside cosine similarity; `0` means exact cosine.
    pub cosine_eps: f64,
    /// Additive smoothing of the attention distribution inside the KL loss.
    pub kl_eps: f64,
    pub positional_encoding: bool,
    pub disable_fcg: bool,
    pub disable_scg: bool,
    pub disable_frame_tcl: bool,
    pub disable_segment_tcl: bool,
    pub scg_input: ScgInput,
    pub attention_aggregation: AttentionAggregation,
    pub proposal_frame_score: ProposalFrameScore,
}

/// Window lengths `{L/8, L/4, L/2, 3L/4}` rounded, clamped to `[1, L]`, deduplicated.
pub fn default_window_lengths(num_frames: usize) -> Vec<usize> {
    let l = num_frames as f64;
    let mut lengths: Vec<usize> = [l / 8.0, l / 4.0, l / 2.0, 3.0 * l / 4.0]
        .iter()
        .map(|w| (w.round() as usize).clamp(1, num_frames.max(1)))
        .collect();
    lengths.dedup();
    lengths
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let num_frames = 64;
        Self {
            model_dim: 512,
            input_dim: 1024,
            num_heads: 4,
            sigma: 0.2,
            tau: 0.5,
            top_k: 15,
            lambda_intra: 0.5,
            lambda_inter: 0.05,
            lambda_kl: 1.0,
            batch_size: 256,
            learning_rate: 1e-4,
            lr_decay_patience: 3,
            weight_decay: 0.01,
            grad_clip_norm: 1.0,
            epochs: 30,
            window_lengths: default_window_lengths(num_frames),
            window_stride_fraction: 0.25,
            num_frames,
            seed: 0,
            cosine_eps: 1e-8,
            kl_eps: 1e-12,
            positional_encoding: true,
            disable_fcg: false,
            disable_scg: false,
            disable_frame_tcl: false,
            disable_segment_tcl: false,
            scg_input: ScgInput::FirstPass,
            attention_aggregation: AttentionAggregation::MeanOverTokens,
            proposal_frame_score: ProposalFrameScore::Mean,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{raw}`")))
}

fn parse_bool(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::config(key, format!("cannot parse `{raw}` as a boolean"))),
    }
}

impl ExperimentConfig {
    /// Parses a config document. Keys not mentioned keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        let mut explicit_windows = false;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "assigned more than once"));
            }
            if key == "window_lengths" {
                explicit_windows = true;
            }
            cfg.set(key, value)?;
        }
        if !explicit_windows {
            cfg.window_lengths = default_window_lengths(cfg.num_frames);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model_dim" | "d" => self.model_dim = parse_value(key, value)?,
            "input_dim" => self.input_dim = parse_value(key, value)?,
            "num_heads" => self.num_heads = parse_value(key, value)?,
            "sigma" => self.sigma = parse_value(key, value)?,
            "tau" => self.tau = parse_value(key, value)?,
            "top_k" | "k" => self.top_k = parse_value(key, value)?,
            "lambda_intra" => self.lambda_intra = parse_value(key, value)?,
            "lambda_inter" => self.lambda_inter = parse_value(key, value)?,
            "lambda_kl" => self.lambda_kl = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "lr_decay_patience" => self.lr_decay_patience = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "grad_clip_norm" => self.grad_clip_norm = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "window_lengths" => {
                self.window_lengths = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_value(key, s))
                    .collect::<Result<_>>()?
            }
            "window_stride_fraction" => self.window_stride_fraction = parse_value(key, value)?,
            "num_frames" => self.num_frames = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "cosine_eps" => self.cosine_eps = parse_value(key, value)?,
            "kl_eps" => self.kl_eps = parse_value(key, value)?,
            "positional_encoding" => self.positional_encoding = parse_bool(key, value)?,
            "disable_fcg" => self.disable_fcg = parse_bool(key, value)?,
            "disable_scg" => self.disable_scg = parse_bool(key, value)?,
            "disable_frame_tcl" => self.disable_frame_tcl = parse_bool(key, value)?,
            "disable_segment_tcl" => self.disable_segment_tcl = parse_bool(key, value)?,
            "scg_input" => {
                self.scg_input = match value {
                    "first_pass" => ScgInput::FirstPass,
                    "post_fcg" => ScgInput::PostFcg,
                    _ => return Err(Error::config(key, format!("unknown value `{value}`"))),
                }
            }
            "attention_aggregation" => {
                self.attention_aggregation = match value {
                    "mean_over_tokens" => AttentionAggregation::MeanOverTokens,
                    "pooled_max_token" => AttentionAggregation::PooledMaxToken,
                    _ => return Err(Error::config(key, format!("unknown value `{value}`"))),
                }
            }
            "proposal_frame_score" => {
                self.proposal_frame_score = match value {
                    "mean" => ProposalFrameScore::Mean,
                    "max" => ProposalFrameScore::Max,
                    _ => return Err(Error::config(key, format!("unknown value `{value}`"))),
                }
            }
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// Applies a comma-separated list of ablation switches, e.g.
    /// `disable_fcg,disable_scg` or `no_intra,no_inter`.
    pub fn apply_ablations(&mut self, flags: &str) -> Result<()> {
        for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            match flag {
                "disable_fcg" | "no_fcg" => self.disable_fcg = true,
                "disable_scg" | "no_scg" => self.disable_scg = true,
                "disable_frame_tcl" => self.disable_frame_tcl = true,
                "disable_segment_tcl" => self.disable_segment_tcl = true,
                "no_intra" => self.lambda_intra = 0.0,
                "no_inter" => self.lambda_inter = 0.0,
                "no_kl" => self.lambda_kl = 0.0,
                _ => return Err(Error::config("ablation", format!("unknown flag `{flag}`"))),
            }
        }
        self.validate()
    }

    /// Checks every invariant; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let positive_usize = [
            ("model_dim", self.model_dim),
            ("input_dim", self.input_dim),
            ("num_heads", self.num_heads),
            ("top_k", self.top_k),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ];
        for (key, v) in positive_usize {
            if v == 0 {
                return Err(Error::config(key, "must be > 0"));
            }
        }
        let positive_real = [
            ("sigma", self.sigma),
            ("tau", self.tau),
            ("learning_rate", self.learning_rate),
        ];
        for (key, v) in positive_real {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("lambda_intra", self.lambda_intra),
            ("lambda_inter", self.lambda_inter),
            ("lambda_kl", self.lambda_kl),
            ("weight_decay", self.weight_decay),
            ("grad_clip_norm", self.grad_clip_norm),
            ("cosine_eps", self.cosine_eps),
            ("kl_eps", self.kl_eps),
        ];
        for (key, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("must be >= 0, got {v}")));
            }
        }
        if self.model_dim % 2 != 0 {
            return Err(Error::config("model_dim", "must be even for positional encoding"));
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(Error::config(
                "num_heads",
                format!("must divide model_dim {}", self.model_dim),
            ));
        }
        if self.num_frames < 2 {
            return Err(Error::config("num_frames", "must be >= 2"));
        }
        if !(self.window_stride_fraction > 0.0 && self.window_stride_fraction <= 1.0) {
            return Err(Error::config("window_stride_fraction", "must lie in (0, 1]"));
        }
        if self.window_lengths.is_empty() {
            return Err(Error::config("window_lengths", "must not be empty"));
        }
        if let Some(w) = self
            .window_lengths
            .iter()
            .find(|&&w| w == 0 || w > self.num_frames)
        {
            return Err(Error::config(
                "window_lengths",
                format!("length {w} outside [1, {}]", self.num_frames),
            ));
        }
        let n = self.num_proposals()?;
        if self.top_k > n {
            return Err(Error::config(
                "top_k",
                format!("{} exceeds the {n} proposals the window scheme yields", self.top_k),
            ));
        }
        if self.disable_frame_tcl && self.disable_segment_tcl {
            return Err(Error::config(
                "disable_segment_tcl",
                "cannot disable both frame-level and segment-level paths",
            ));
        }
        Ok(())
    }

    /// Number of proposals the window scheme produces for `num_frames`.
    pub fn num_proposals(&self) -> Result<usize> {
        Ok(generate_proposals(
            self.num_frames,
            &self.window_lengths,
            self.window_stride_fraction,
        )?
        .len())
    }

    /// Frame-level guidance is active only when both paths it connects are.
    pub fn fcg_active(&self) -> bool {
        !self.disable_fcg && !self.disable_frame_tcl && !self.disable_segment_tcl
    }

    pub fn scg_active(&self) -> bool {
        !self.disable_scg && !self.disable_frame_tcl && !self.disable_segment_tcl
    }

    /// Renders the full effective config; `from_text` reproduces it exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let b = |v: bool| if v { "true" } else { "false" };
        let lines: Vec<(&str, String)> = vec![
            ("model_dim", self.model_dim.to_string()),
            ("input_dim", self.input_dim.to_string()),
            ("num_heads", self.num_heads.to_string()),
            ("sigma", format!("{:?}", self.sigma)),
            ("tau", format!("{:?}", self.tau)),
            ("top_k", self.top_k.to_string()),
            ("lambda_intra", format!("{:?}", self.lambda_intra)),
            ("lambda_inter", format!("{:?}", self.lambda_inter)),
            ("lambda_kl", format!("{:?}", self.lambda_kl)),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", format!("{:?}", self.learning_rate)),
            ("lr_decay_patience", self.lr_decay_patience.to_string()),
            ("weight_decay", format!("{:?}", self.weight_decay)),
            ("grad_clip_norm", format!("{:?}", self.grad_clip_norm)),
            ("epochs", self.epochs.to_string()),
            (
                "window_lengths",
                self.window_lengths
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(", "),
            ),
            (
                "window_stride_fraction",
                format!("{:?}", self.window_stride_fraction),
            ),
            ("num_frames", self.num_frames.to_string()),
            ("seed", self.seed.to_string()),
            ("cosine_eps", format!("{:?}", self.cosine_eps)),
            ("kl_eps", format!("{:?}", self.kl_eps)),
            ("positional_encoding", b(self.positional_encoding).into()),
            ("disable_fcg", b(self.disable_fcg).into()),
            ("disable_scg", b(self.disable_scg).into()),
            ("disable_frame_tcl", b(self.disable_frame_tcl).into()),
            ("disable_segment_tcl", b(self.disable_segment_tcl).into()),
            (
                "scg_input",
                match self.scg_input {
                    ScgInput::FirstPass => "first_pass",
                    ScgInput::PostFcg => "post_fcg",
                }
                .into(),
            ),
            (
                "attention_aggregation",
                match self.attention_aggregation {
                    AttentionAggregation::MeanOverTokens => "mean_over_tokens",
                    AttentionAggregation::PooledMaxToken => "pooled_max_token",
                }
                .into(),
            ),
            (
                "proposal_frame_score",
                match self.proposal_frame_score {
                    ProposalFrameScore::Mean => "mean",
                    ProposalFrameScore::Max => "max",
                }
                .into(),
            ),
        ];
        for (k, v) in lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Reads, validates and logs a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg = ExperimentConfig::from_text(&text)?;
    for line in cfg.to_text().lines() {
        log::info!("config: {line}");
    }
    Ok(cfg)
}
