//! Mini-batch training with AdamW, plateau learning-rate halving and global
//! gradient-norm clipping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::Tape;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fusion::BoundParams;
use crate::losses::LossComponents;
use crate::model::{batch_loss_graph, Model};
use crate::types::FeatureBundle;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// A plateau epoch is one whose mean loss fails to beat the best so far by
/// this relative margin.
const PLATEAU_REL: f64 = 1e-4;

/// Decoupled-weight-decay Adam over every tensor of a [`ParamStore`].
///
/// [`ParamStore`]: crate::params::ParamStore
#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    decay: Vec<bool>,
}

/// Weight matrices decay; biases and normalization parameters do not.
fn decays(name: &str) -> bool {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    leaf == "weight" || leaf.starts_with('w')
}

impl AdamW {
    pub fn new(model: &Model) -> Self {
        let shapes: Vec<_> = model.params.iter().map(|(_, v)| v.raw_dim()).collect();
        Self {
            lr: model.config.learning_rate,
            weight_decay: model.config.weight_decay,
            step: 0,
            m: shapes.iter().map(|s| Array2::zeros(s.clone())).collect(),
            v: shapes.iter().map(|s| Array2::zeros(s.clone())).collect(),
            decay: model.params.iter().map(|(n, _)| decays(n)).collect(),
        }
    }

    /// Applies one update. `grads` is aligned with the parameter order.
    pub fn step(&mut self, model: &mut Model, grads: &[Array2<f64>]) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        for (i, p) in model.params.values_mut().enumerate() {
            let g = &grads[i];
            self.m[i].zip_mut_with(g, |m, &g| *m = BETA1 * *m + (1.0 - BETA1) * g);
            self.v[i].zip_mut_with(g, |v, &g| *v = BETA2 * *v + (1.0 - BETA2) * g * g);
            let wd = if self.decay[i] { self.weight_decay } else { 0.0 };
            let (lr, m, v) = (self.lr, &self.m[i], &self.v[i]);
            ndarray::Zip::from(p).and(m).and(v).for_each(|p, &m, &v| {
                let update = (m / bc1) / ((v / bc2).sqrt() + ADAM_EPS);
                *p -= lr * (update + wd * *p);
            });
        }
        model.params.round_to_f32();
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping. `max_norm <= 0` disables clipping.
pub fn clip_global_norm(grads: &mut [Array2<f64>], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|x| x * s);
        }
    }
    norm
}

/// Halves the learning rate after `patience` epochs without improvement.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    pub patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl PlateauSchedule {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    /// Records an epoch's loss; returns true when the rate should halve.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best * (1.0 - PLATEAU_REL) {
            self.best = loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.bad_epochs = 0;
            return true;
        }
        false
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean over the epoch's steps.
    pub components: LossComponents,
    pub total: f64,
    pub validation_miou: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub steps: usize,
    pub epochs: Vec<EpochStats>,
    /// Total loss of the very first step, before any update.
    pub initial_step_loss: f64,
}

impl TrainSummary {
    pub fn final_epoch_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.total)
    }
}

/// Where training writes its artifacts; `None` trains purely in memory.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    pub dir: Option<PathBuf>,
}

struct RunFiles {
    dir: PathBuf,
    csv: BufWriter<File>,
    log: BufWriter<File>,
}

impl RunFiles {
    fn open(dir: &Path, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let create = |name: &str| -> Result<BufWriter<File>> {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e))
        };
        let mut csv = create("losses.csv")?;
        let mut log = create("train.log")?;
        let io = |e| Error::io(dir, e);
        writeln!(csv, "step,L_frame,L_intra,L_inter,L_KL,total").map_err(io)?;
        writeln!(log, "# effective config").map_err(io)?;
        for line in config.to_text().lines() {
            writeln!(log, "# {line}").map_err(io)?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            log,
        })
    }

    fn io(&self, e: std::io::Error) -> Error {
        Error::io(&self.dir, e)
    }
}

fn dump_nonfinite(dir: Option<&Path>, step: usize, ids: &[&str], c: &LossComponents) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    #[derive(Serialize)]
    struct Dump<'a> {
        step: usize,
        video_ids: &'a [&'a str],
        components: &'a LossComponents,
    }
    let p = dir.join("nonfinite_batch.json");
    let text = serde_json::to_string_pretty(&Dump {
        step,
        video_ids: ids,
        components: c,
    })?;
    std::fs::write(&p, text).map_err(|e| Error::io(p, e))
}

/// Trains a freshly initialized model on `data`.
///
/// Batches follow a per-epoch shuffle drawn from a generator seeded by the
/// config, and the last partial batch is kept, so identical inputs give
/// bit-identical parameters. With an output directory, writes
/// `epoch_NNN.ckpt` every epoch, `model.ckpt` at the end, `best.ckpt` when
/// validation data is given, `losses.csv` and `train.log`.
pub fn train(
    config: &ExperimentConfig,
    data: &[FeatureBundle],
    validation: Option<&[FeatureBundle]>,
    outputs: &TrainOutputs,
) -> Result<(Model, TrainSummary)> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut model = Model::init(config.clone())?;
    let mut files = outputs.dir.as_deref().map(|d| RunFiles::open(d, config)).transpose()?;
    let mut opt = AdamW::new(&model);
    let mut schedule = PlateauSchedule::new(config.lr_decay_patience);
    let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut summary = TrainSummary {
        steps: 0,
        epochs: Vec::new(),
        initial_step_loss: f64::NAN,
    };
    let mut best_val = f64::NEG_INFINITY;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        let mut sum = LossComponents::default();
        let mut sum_total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&FeatureBundle> = chunk.iter().map(|&i| &data[i]).collect();
            let mut tape = Tape::new();
            let bound = BoundParams::bind(&mut tape, &model.params);
            let loss = batch_loss_graph(&mut tape, &bound, &batch, model.proposals(), config)?;
            let total = tape.scalar(loss.total);
            let c = loss.components;
            summary.steps += 1;
            let step = summary.steps;
            if !total.is_finite() {
                let ids: Vec<&str> = batch.iter().map(|b| b.video_id.as_str()).collect();
                dump_nonfinite(outputs.dir.as_deref(), step, &ids, &c)?;
                return Err(Error::Diverged {
                    step,
                    reason: format!("total loss is {total} (batch of {} samples)", batch.len()),
                });
            }
            if step == 1 {
                summary.initial_step_loss = total;
            }
            if let Some(f) = files.as_mut() {
                writeln!(f.csv, "{step},{},{},{},{},{total}", c.frame, c.intra, c.inter, c.kl).map_err(|e| f.io(e))?;
            }
            let grads = tape.backward(loss.total);
            let mut g: Vec<Array2<f64>> = bound
                .iter()
                .map(|(_, v)| {
                    grads
                        .get(v)
                        .cloned()
                        .unwrap_or_else(|| Array2::zeros(tape.value(v).raw_dim()))
                })
                .collect();
            clip_global_norm(&mut g, config.grad_clip_norm);
            opt.step(&mut model, &g);
            sum.frame += c.frame;
            sum.intra += c.intra;
            sum.inter += c.inter;
            sum.kl += c.kl;
            sum_total += total;
            batches += 1;
        }
        let n = batches as f64;
        let mean = LossComponents {
            frame: sum.frame / n,
            intra: sum.intra / n,
            inter: sum.inter / n,
            kl: sum.kl / n,
        };
        let epoch_total = sum_total / n;
        let validation_miou = validation
            .map(|v| model.evaluate(v).map(|r| r.metrics.miou))
            .transpose()?;
        let stats = EpochStats {
            epoch,
            learning_rate: opt.lr,
            components: mean,
            total: epoch_total,
            validation_miou,
        };
        let line = format!(
            "epoch {epoch} lr {:.3e} frame {:.5} intra {:.5} inter {:.5} kl {:.5} total {:.5}{}",
            opt.lr,
            mean.frame,
            mean.intra,
            mean.inter,
            mean.kl,
            epoch_total,
            validation_miou.map_or(String::new(), |m| format!(" val_mIoU {m:.2}"))
        );
        log::info!("{line}");
        if let Some(f) = files.as_mut() {
            writeln!(f.log, "{line}").map_err(|e| f.io(e))?;
            f.csv.flush().map_err(|e| f.io(e))?;
            f.log.flush().map_err(|e| f.io(e))?;
            model.save(f.dir.join(format!("epoch_{epoch:03}.ckpt")))?;
            if let Some(m) = validation_miou {
                if m > best_val {
                    best_val = m;
                    model.save(f.dir.join("best.ckpt"))?;
                }
            }
        }
        summary.epochs.push(stats);
        if schedule.observe(epoch_total) {
            opt.lr *= 0.5;
            log::info!("plateau: learning rate halved to {:.3e}", opt.lr);
        }
    }
    if let Some(f) = files.as_mut() {
        model.save(f.dir.join("model.ckpt"))?;
        f.log.flush().map_err(|e| f.io(e))?;
    }
    Ok((model, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_halves_after_patience() {
        let mut s = PlateauSchedule::new(3);
        assert!(!s.observe(1.0));
        assert!(!s.observe(0.5));
        assert!(!s.observe(0.6));
        assert!(!s.observe(0.5));
        assert!(s.observe(0.55));
        assert!(!s.observe(0.4));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![Array2::from_elem((1, 2), 3.0), Array2::from_elem((1, 1), 4.0)];
        let before = clip_global_norm(&mut g, 1.0);
        assert!((before - 34f64.sqrt()).abs() < 1e-12);
        let after = clip_global_norm(&mut g, 0.0);
        assert!((after - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decay_targets_weights_only() {
        assert!(decays("video_proj.weight"));
        assert!(decays("cross_query.wq"));
        assert!(!decays("cross_query.bq"));
        assert!(!decays("self_video.ln_gain"));
        assert!(!decays("query_proj.bias"));
    }
}
