//! Command-line front end: `train`, `eval`, `infer` and `synth`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use pointloc::data::annotations::write_annotations_jsonl;
use pointloc::data::dataset::{build_bundles, training_annotations};
use pointloc::data::{load_annotations, load_dataset, read_feature_file, uniform_sample, SyntheticSpec, TokenEmbedder};
use pointloc::evaluation::evaluate_run;
use pointloc::{load_config, train, FeatureBundle, Model, TrainOutputs};

#[derive(Parser)]
#[command(name = "pointloc", version, about = "Point-supervised moment localization in videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoints, losses and metrics to OUT.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated switches, e.g. `disable_fcg,disable_scg`.
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Predict every annotated query in a dataset and score the predictions.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Report directory; defaults to `eval/` next to the checkpoint.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Localize one query in one video's feature file.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        video_features: PathBuf,
        #[arg(long)]
        query: String,
        /// Video length in seconds; defaults to one second per feature row.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Generate a synthetic dataset directory from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn cmd_train(config: &Path, data: &Path, out: &Path, ablation: Option<&str>) -> Result<()> {
    let mut config = load_config(config)?;
    if let Some(flags) = ablation {
        config.apply_ablations(flags)?;
    }
    let dataset = load_dataset(data, &config)?;
    let outputs = TrainOutputs {
        dir: Some(out.to_path_buf()),
    };
    let (model, summary) = train(&config, &dataset.train, dataset.validation.as_deref(), &outputs)?;
    let eval_set = dataset.validation.as_deref().unwrap_or(&dataset.train);
    let report = model.evaluate(eval_set)?;
    report.write_all(&out.join("eval"))?;
    println!(
        "trained {} steps over {} epochs; final loss {:.4}; {} on {} samples",
        summary.steps,
        summary.epochs.len(),
        summary.final_epoch_loss(),
        report.metrics,
        report.samples.len()
    );
    Ok(())
}

fn cmd_eval(checkpoint: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let model = Model::load(checkpoint)?;
    let (ann_path, format) = training_annotations(data)?;
    let records = load_annotations(&ann_path, &format)?;
    let bundles = build_bundles(data, &records, &model.config)?;
    let out = match out {
        Some(o) => o.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join("eval"),
    };
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut lines = String::new();
    for b in &bundles {
        lines.push_str(&serde_json::to_string(&model.predict(b)?)?);
        lines.push('\n');
    }
    let pred_path = out.join("predictions.jsonl");
    std::fs::write(&pred_path, lines).with_context(|| format!("writing {}", pred_path.display()))?;
    let gt_path = out.join("annotations.jsonl");
    write_annotations_jsonl(&gt_path, &records)?;
    let report = evaluate_run(&pred_path, &gt_path)?;
    report.write_all(&out)?;
    println!("{} on {} samples; report in {}", report.metrics, report.samples.len(), out.display());
    Ok(())
}

fn cmd_infer(checkpoint: &Path, features: &Path, query: &str, duration: Option<f64>) -> Result<()> {
    let model = Model::load(checkpoint)?;
    let config = &model.config;
    let raw = read_feature_file(features)?;
    let duration = duration.unwrap_or((raw.nrows().max(2) - 1) as f64);
    if !(duration > 0.0 && duration.is_finite()) {
        bail!("--duration must be a positive number of seconds");
    }
    let frames = uniform_sample(&raw, config.num_frames)?;
    let tokens = TokenEmbedder::new(config.input_dim, config.seed).embed_query(query)?;
    let video_id = features
        .file_stem()
        .map_or_else(|| "video".to_string(), |s| s.to_string_lossy().into_owned());
    let bundle = FeatureBundle::new(video_id, query, frames, tokens, 0, None, duration)?;
    println!("{}", serde_json::to_string(&model.predict(&bundle)?)?);
    Ok(())
}

fn cmd_synth(spec: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec = SyntheticSpec::from_text(&text)?;
    let bundles = pointloc::data::generate_synthetic(&spec)?;
    pointloc::data::persist_synthetic(&bundles, out)?;
    println!("wrote {} samples to {}", bundles.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            data,
            out,
            ablation,
        } => cmd_train(&config, &data, &out, ablation.as_deref()),
        Command::Eval { checkpoint, data, out } => cmd_eval(&checkpoint, &data, out.as_deref()),
        Command::Infer {
            checkpoint,
            video_features,
            query,
            duration,
        } => cmd_infer(&checkpoint, &video_features, &query, duration),
        Command::Synth { spec, out } => cmd_synth(&spec, &out),
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn one_line(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out.replace('\n', " ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
