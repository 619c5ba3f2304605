//! Dataset directories.
//!
//! ```text
//! <dir>/annotations.jsonl       training split (JSON lines)
//! <dir>/annotations.txt         alternative: `vid start end##sentence`
//! <dir>/durations.txt           required with annotations.txt
//! <dir>/val_annotations.jsonl   optional validation split
//! <dir>/features/<vid>.feat     frame features per video
//! <dir>/tokens/<name>.feat      optional token features per query
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::annotations::{
    load_annotations, second_to_frame, seconds_to_frames, AnnotationFormat, AnnotationRecord, DurationTable,
};
use super::embed::TokenEmbedder;
use super::features::{load_features, read_feature_file, uniform_sample};
use super::sampling::sample_point_annotation;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::types::FeatureBundle;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<FeatureBundle>,
    pub validation: Option<Vec<FeatureBundle>>,
}

/// Locates the training annotation file and its format.
pub fn training_annotations(dir: &Path) -> Result<(PathBuf, AnnotationFormat)> {
    let jsonl = dir.join("annotations.jsonl");
    if jsonl.exists() {
        return Ok((jsonl, AnnotationFormat::JsonLines));
    }
    let txt = dir.join("annotations.txt");
    if txt.exists() {
        let durations = DurationTable::load(&dir.join("durations.txt"))?;
        return Ok((txt, AnnotationFormat::CharadesSta(durations)));
    }
    Err(Error::invalid(format!(
        "{} holds neither annotations.jsonl nor annotations.txt",
        dir.display()
    )))
}

/// Turns annotation records into bundles on the config's frame grid.
///
/// Points come from `point_sec` when present and are otherwise drawn from
/// the boundaries with a generator seeded by `config.seed`.
pub fn build_bundles(dir: &Path, records: &[AnnotationRecord], config: &ExperimentConfig) -> Result<Vec<FeatureBundle>> {
    let lv = config.num_frames;
    let embedder = TokenEmbedder::new(config.input_dim, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache: HashMap<&str, Array2<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if !cache.contains_key(rec.video_id.as_str()) {
            let raw = load_features(&dir.join("features"), &rec.video_id)?;
            cache.insert(&rec.video_id, uniform_sample(&raw, lv)?);
        }
        let frames = cache[rec.video_id.as_str()].clone();
        let tokens = match &rec.token_file {
            Some(name) => read_feature_file(&dir.join("tokens").join(name))?,
            None => embedder.embed_query(&rec.query)?,
        };
        let gt = seconds_to_frames(rec, lv);
        let point = match rec.point_sec {
            Some(p) => second_to_frame(p, rec.duration_sec, lv).clamp(gt.start, gt.end),
            None => sample_point_annotation(gt.start, gt.end, &mut rng)?,
        };
        out.push(FeatureBundle::new(
            rec.video_id.clone(),
            rec.query.clone(),
            frames,
            tokens,
            point,
            Some(gt),
            rec.duration_sec,
        )?);
    }
    Ok(out)
}

pub fn load_dataset(dir: &Path, config: &ExperimentConfig) -> Result<Dataset> {
    let (path, format) = training_annotations(dir)?;
    let records = load_annotations(&path, &format)?;
    let train = build_bundles(dir, &records, config)?;
    let val_path = dir.join("val_annotations.jsonl");
    let validation = if val_path.exists() {
        let recs = load_annotations(&val_path, &AnnotationFormat::JsonLines)?;
        Some(build_bundles(dir, &recs, config)?)
    } else {
        None
    };
    log::info!(
        "dataset {}: {} training samples, {} validation samples",
        dir.display(),
        train.len(),
        validation.as_ref().map_or(0, Vec::len)
    );
    Ok(Dataset { train, validation })
}
