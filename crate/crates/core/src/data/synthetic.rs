//! Synthetic datasets with one planted moment per sample.
//!
//! Each sample picks a concept word from a small bank. Frames inside the
//! moment are the concept vector plus Gaussian noise, frames before and
//! after it come from two other concepts, and the query's token rows are
//! noisy copies of the concept. The query text repeats the concept word, so
//! embedding the text with the same [`TokenEmbedder`] recovers the noiseless
//! tokens.

use std::collections::HashSet;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::annotations::{write_annotations_jsonl, AnnotationRecord};
use super::embed::TokenEmbedder;
use super::features::{feature_path, write_feature_file};
use super::sampling::sample_point_annotation;
use crate::error::{Error, Result};
use crate::types::{FeatureBundle, FrameSpan};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_samples: usize,
    pub num_frames: usize,
    pub input_dim: usize,
    /// Moment length as a fraction of the video, `(low, high)`.
    pub moment_length_range: (f64, f64),
    pub noise_std: f64,
    pub seed: u64,
    pub num_concepts: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_samples: 200,
            num_frames: 32,
            input_dim: 32,
            moment_length_range: (0.2, 0.5),
            noise_std: 0.05,
            seed: 1,
            num_concepts: 16,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.moment_length_range;
        let checks: [(&str, bool, &str); 6] = [
            ("num_samples", self.num_samples > 0, "must be positive"),
            ("num_frames", self.num_frames >= 2, "must be at least 2"),
            ("input_dim", self.input_dim > 0, "must be positive"),
            ("moment_length_range", lo > 0.0 && hi < 1.0 && lo <= hi, "needs 0 < low <= high < 1"),
            ("noise_std", self.noise_std >= 0.0 && self.noise_std.is_finite(), "must be non-negative"),
            ("num_concepts", self.num_concepts >= 3, "must be at least 3"),
        ];
        for (key, ok, reason) in checks {
            if !ok {
                return Err(Error::config(key, reason));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; unmentioned keys keep their defaults.
    /// `moment_length_range` is written as `low, high`.
    pub fn from_text(text: &str) -> Result<Self> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
        }
        let mut spec = Self::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::config(k, "assigned more than once"));
            }
            match k {
                "num_samples" => spec.num_samples = num(k, v)?,
                "num_frames" => spec.num_frames = num(k, v)?,
                "input_dim" => spec.input_dim = num(k, v)?,
                "noise_std" => spec.noise_std = num(k, v)?,
                "seed" => spec.seed = num(k, v)?,
                "num_concepts" => spec.num_concepts = num(k, v)?,
                "moment_length_range" => {
                    let (a, b) = v
                        .split_once(',')
                        .ok_or_else(|| Error::config(k, "expected `low, high`"))?;
                    spec.moment_length_range = (num(k, a.trim())?, num(k, b.trim())?);
                }
                _ => return Err(Error::config(k, "unknown key")),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn embedder(&self) -> TokenEmbedder {
        TokenEmbedder::new(self.input_dim, self.seed)
    }
}

pub fn concept_word(index: usize) -> String {
    format!("concept{index:02}")
}

fn round_f32(v: f64) -> f64 {
    v as f32 as f64
}

/// The concept vector as stored (rounded to `f32`).
pub fn concept_vector(spec: &SyntheticSpec, index: usize) -> Array1<f64> {
    spec.embedder().embed_word(&concept_word(index)).mapv(round_f32)
}

fn noisy_row(center: &Array1<f64>, noise: &Normal<f64>, rng: &mut impl Rng) -> Array1<f64> {
    center.mapv(|c| round_f32(c + noise.sample(rng)))
}

/// Generates `spec.num_samples` bundles. Identical specs give identical
/// output. Video length in seconds is `num_frames - 1`, so frame `i` sits at
/// second `i`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<FeatureBundle>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let bank: Vec<Array1<f64>> = (0..spec.num_concepts).map(|i| concept_vector(spec, i)).collect();
    let lv = spec.num_frames;
    let (lo, hi) = spec.moment_length_range;
    let mut out = Vec::with_capacity(spec.num_samples);
    for n in 0..spec.num_samples {
        let concept = rng.random_range(0..spec.num_concepts);
        let pick_other = |rng: &mut ChaCha8Rng| loop {
            let c = rng.random_range(0..spec.num_concepts);
            if c != concept {
                break c;
            }
        };
        let before = pick_other(&mut rng);
        let after = pick_other(&mut rng);
        let frac = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let len = ((frac * lv as f64).round() as usize).clamp(2, lv);
        let start = rng.random_range(0..=lv - len);
        let gt = FrameSpan::new(start, start + len - 1)?;

        let mut frames = Array2::zeros((lv, spec.input_dim));
        for i in 0..lv {
            let center = if gt.contains(i) {
                &bank[concept]
            } else if i < gt.start {
                &bank[before]
            } else {
                &bank[after]
            };
            frames.row_mut(i).assign(&noisy_row(center, &noise, &mut rng));
        }
        let num_tokens = rng.random_range(5..=10);
        let mut tokens = Array2::zeros((num_tokens, spec.input_dim));
        for j in 0..num_tokens {
            tokens.row_mut(j).assign(&noisy_row(&bank[concept], &noise, &mut rng));
        }
        let point = sample_point_annotation(gt.start, gt.end, &mut rng)?;
        let query = vec![concept_word(concept); num_tokens].join(" ");
        out.push(FeatureBundle::new(
            format!("syn{n:05}"),
            query,
            frames,
            tokens,
            point,
            Some(gt),
            (lv - 1) as f64,
        )?);
    }
    Ok(out)
}

/// Annotation record for a bundle whose frame grid maps one frame to
/// `duration / (L_v - 1)` seconds.
pub fn bundle_record(b: &FeatureBundle) -> Result<AnnotationRecord> {
    let gt = b
        .ground_truth
        .ok_or_else(|| Error::invalid(format!("{} has no ground truth", b.video_id)))?;
    let scale = b.duration_sec / (b.num_frames() - 1) as f64;
    Ok(AnnotationRecord {
        video_id: b.video_id.clone(),
        query: b.query.clone(),
        start_sec: gt.start as f64 * scale,
        end_sec: gt.end as f64 * scale,
        duration_sec: b.duration_sec,
        point_sec: Some(b.point_frame as f64 * scale),
        token_file: Some(format!("{}.feat", b.video_id)),
    })
}

/// Writes a dataset directory: `annotations.jsonl`, `features/` and
/// `tokens/`, one feature file per sample in each.
pub fn persist_synthetic(bundles: &[FeatureBundle], dir: &Path) -> Result<()> {
    let features = dir.join("features");
    let tokens = dir.join("tokens");
    for d in [dir, &features, &tokens] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut records = Vec::with_capacity(bundles.len());
    for b in bundles {
        write_feature_file(&feature_path(&features, &b.video_id), &b.frame_features)?;
        write_feature_file(&feature_path(&tokens, &b.video_id), &b.token_features)?;
        records.push(bundle_record(b)?);
    }
    write_annotations_jsonl(&dir.join("annotations.jsonl"), &records)
}
