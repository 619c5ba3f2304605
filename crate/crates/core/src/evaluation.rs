//! Temporal IoU, R@1 at IoU thresholds and mean IoU.
//!
//! A sample counts as a hit at threshold `m` only when its IoU is strictly
//! larger than `m`.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::annotations::{load_annotations, AnnotationFormat};
use crate::error::{Error, Result};
use crate::inference::PredictionRecord;

/// The IoU thresholds reported for R@1.
pub const THRESHOLDS: [f64; 3] = [0.3, 0.5, 0.7];

/// A closed interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }
}

/// Intersection over union; 0 when the union has zero length.
pub fn temporal_iou(a: Interval, b: Interval) -> Result<f64> {
    for (name, iv) in [("first", a), ("second", b)] {
        if !(iv.start <= iv.end) || !iv.start.is_finite() || !iv.end.is_finite() {
            return Err(Error::Evaluation(format!(
                "{name} interval [{}, {}] is malformed",
                iv.start, iv.end
            )));
        }
    }
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.end.max(b.end) - a.start.min(b.start);
    if union <= 0.0 {
        return Ok(0.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

fn per_sample_ious(predictions: &[Interval], gts: &[Interval]) -> Result<Vec<f64>> {
    if predictions.len() != gts.len() {
        return Err(Error::Evaluation(format!(
            "{} predictions for {} ground truths",
            predictions.len(),
            gts.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Evaluation("no samples".into()));
    }
    predictions
        .iter()
        .zip(gts)
        .map(|(&p, &g)| temporal_iou(p, g))
        .collect()
}

/// Fraction of samples whose IoU strictly exceeds `threshold`.
pub fn recall_at(predictions: &[Interval], gts: &[Interval], threshold: f64) -> Result<f64> {
    let ious = per_sample_ious(predictions, gts)?;
    Ok(recall_from_ious(&ious, threshold))
}

pub fn recall_from_ious(ious: &[f64], threshold: f64) -> f64 {
    ious.iter().filter(|&&v| v > threshold).count() as f64 / ious.len() as f64
}

pub fn mean_iou(predictions: &[Interval], gts: &[Interval]) -> Result<f64> {
    let ious = per_sample_ious(predictions, gts)?;
    Ok(mean(&ious))
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// R@1 at 0.3/0.5/0.7 and mIoU, all as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "R1@0.3")]
    pub r1_03: f64,
    #[serde(rename = "R1@0.5")]
    pub r1_05: f64,
    #[serde(rename = "R1@0.7")]
    pub r1_07: f64,
    #[serde(rename = "mIoU")]
    pub miou: f64,
}

impl Metrics {
    pub fn from_ious(ious: &[f64]) -> Self {
        Self {
            r1_03: 100.0 * recall_from_ious(ious, THRESHOLDS[0]),
            r1_05: 100.0 * recall_from_ious(ious, THRESHOLDS[1]),
            r1_07: 100.0 * recall_from_ious(ious, THRESHOLDS[2]),
            miou: 100.0 * mean(ious),
        }
    }

    /// Values rounded to two decimals, as reported.
    pub fn rounded(&self) -> Self {
        let r = |v: f64| (v * 100.0).round() / 100.0;
        Self {
            r1_03: r(self.r1_03),
            r1_05: r(self.r1_05),
            r1_07: r(self.r1_07),
            miou: r(self.miou),
        }
    }
}

impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "R1@0.3 {:.2} | R1@0.5 {:.2} | R1@0.7 {:.2} | mIoU {:.2}",
            self.r1_03, self.r1_05, self.r1_07, self.miou
        )
    }
}

/// One evaluated sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub video_id: String,
    pub query: String,
    pub gt: Interval,
    pub pred: Interval,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub metrics: Metrics,
    pub samples: Vec<SampleResult>,
}

impl EvaluationReport {
    pub fn from_samples(samples: Vec<SampleResult>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Evaluation("no samples".into()));
        }
        let ious: Vec<f64> = samples.iter().map(|s| s.iou).collect();
        Ok(Self {
            metrics: Metrics::from_ious(&ious),
            samples,
        })
    }

    /// `video_id,query,gt_start,gt_end,pred_start,pred_end,iou`
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "video_id,query,gt_start,gt_end,pred_start,pred_end,iou")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},\"{}\",{},{},{},{},{}",
                s.video_id,
                s.query.replace('"', "\"\""),
                s.gt.start,
                s.gt.end,
                s.pred.start,
                s.pred.end,
                s.iou
            )?;
        }
        Ok(())
    }

    /// Whitespace-separated timeline rows for gnuplot:
    /// `index gt_start gt_end pred_start pred_end iou`.
    pub fn write_timeline(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "# index gt_start gt_end pred_start pred_end iou")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(
                out,
                "{i} {} {} {} {} {}",
                s.gt.start, s.gt.end, s.pred.start, s.pred.end, s.iou
            )?;
        }
        Ok(())
    }

    /// Writes `metrics.json`, `per_sample.csv` and `timeline.dat` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let metrics_path = dir.join("metrics.json");
        std::fs::write(&metrics_path, serde_json::to_string_pretty(&self.metrics.rounded())?)
            .map_err(|e| Error::io(&metrics_path, e))?;
        let csv_path = dir.join("per_sample.csv");
        let mut f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(&mut f).map_err(|e| Error::io(&csv_path, e))?;
        let dat_path = dir.join("timeline.dat");
        let mut f = std::fs::File::create(&dat_path).map_err(|e| Error::io(&dat_path, e))?;
        self.write_timeline(&mut f).map_err(|e| Error::io(&dat_path, e))?;
        Ok(())
    }
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

/// Scores a predictions file against a JSON-lines annotation file.
///
/// Pairs are matched on `(video_id, query)`; repeated pairs match in file
/// order. Every annotation needs a prediction and vice versa.
pub fn evaluate_run(pred_file: &Path, annotation_file: &Path) -> Result<EvaluationReport> {
    let predictions = read_predictions(pred_file)?;
    let annotations = load_annotations(annotation_file, &AnnotationFormat::JsonLines)?;
    let mut pending: HashMap<(String, String), Vec<&PredictionRecord>> = HashMap::new();
    for p in predictions.iter().rev() {
        pending
            .entry((p.video_id.clone(), p.query.clone()))
            .or_default()
            .push(p);
    }
    let mut samples = Vec::with_capacity(annotations.len());
    for a in &annotations {
        let key = (a.video_id.clone(), a.query.clone());
        let p = pending.get_mut(&key).and_then(Vec::pop).ok_or_else(|| {
            Error::Evaluation(format!(
                "no prediction for video {} query {:?}",
                a.video_id, a.query
            ))
        })?;
        let gt = Interval::new(a.start_sec, a.end_sec);
        let pred = Interval::new(p.start_sec, p.end_sec);
        samples.push(SampleResult {
            video_id: a.video_id.clone(),
            query: a.query.clone(),
            gt,
            pred,
            iou: temporal_iou(pred, gt)?,
        });
    }
    if let Some(((vid, q), _)) = pending.iter().find(|(_, v)| !v.is_empty()) {
        return Err(Error::Evaluation(format!(
            "prediction for video {vid} query {q:?} has no annotation"
        )));
    }
    EvaluationReport::from_samples(samples)
}
