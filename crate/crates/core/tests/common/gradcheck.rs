//! Finite-difference checks through the whole model.

use ndarray::Array2;
use pointloc::autodiff::{Tape, Var};
use pointloc::fusion::BoundParams;
use pointloc::model::batch_loss_graph;
use pointloc::params::ParamStore;
use pointloc::{ExperimentConfig, FeatureBundle, Model, Proposal};

pub const STEP: f64 = 1e-4;
pub const LOSS_TOL: f64 = 1e-4;
pub const ATTENTION_TOL: f64 = 1e-3;
pub const FLOOR: f64 = 1e-2;

/// `max |a - n| / max(|n|_max, floor)`.
pub fn rel_error(analytic: &Array2<f64>, numeric: &Array2<f64>, floor: f64) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    let scale = numeric.iter().map(|n| n.abs()).fold(floor, f64::max);
    diff / scale
}

/// Checks every input of `f` against central differences.
/// Returns the worst relative error, or `Err` naming the first input above
/// [`LOSS_TOL`].
pub fn check_inputs(name: &str, inputs: &[Array2<f64>], f: impl Fn(&mut Tape, &[Var]) -> Var) -> Result<f64, String> {
    let run = |values: &[Array2<f64>]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone())).collect();
        let out = f(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, vars, out) = run(inputs);
    let grads = tape.backward(out);
    let mut worst: f64 = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads.get(vars[i]).cloned().unwrap_or_else(|| Array2::zeros(input.dim()));
        let mut numeric = Array2::zeros(input.dim());
        for idx in ndarray::indices(input.dim()) {
            let mut shifted = inputs.to_vec();
            shifted[i][idx] += STEP;
            let (t, _, o) = run(&shifted);
            let up = t.scalar(o);
            shifted[i][idx] -= 2.0 * STEP;
            let (t, _, o) = run(&shifted);
            numeric[idx] = (up - t.scalar(o)) / (2.0 * STEP);
        }
        let err = rel_error(&analytic, &numeric, FLOOR);
        if err > LOSS_TOL {
            return Err(format!("{name}: input {i} relative error {err:e}"));
        }
        worst = worst.max(err);
    }
    Ok(worst)
}

pub const PARTS: [&str; 5] = ["frame", "intra", "inter", "kl", "total"];

fn part_values(params: &ParamStore, batch: &[FeatureBundle], config: &ExperimentConfig, proposals: &[Proposal]) -> [f64; 5] {
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, params);
    let refs: Vec<&FeatureBundle> = batch.iter().collect();
    let loss = batch_loss_graph(&mut tape, &bound, &refs, proposals, config).unwrap();
    let c = loss.components;
    [c.frame, c.intra, c.inter, c.kl, tape.scalar(loss.total)]
}

fn nudge(b: &mut FeatureBundle, which: &str, idx: (usize, usize), delta: f64) {
    match which {
        "frames" => b.frame_features[idx] += delta,
        _ => b.token_features[idx] += delta,
    }
}

/// Worst relative error per loss part over all parameters and input
/// features; `Err` names the first tensor above [`ATTENTION_TOL`].
pub fn model_gradient_errors(config: &ExperimentConfig, batch: &[FeatureBundle]) -> Result<[f64; 5], String> {
    let model = Model::init(config.clone()).unwrap();
    let proposals = model.proposals().to_vec();
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, &model.params);
    let refs: Vec<&FeatureBundle> = batch.iter().collect();
    let loss = batch_loss_graph(&mut tape, &bound, &refs, &proposals, config).unwrap();
    let outputs = [loss.frame, loss.intra, loss.inter, Some(loss.kl), Some(loss.total)];
    let grads: Vec<_> = outputs.iter().map(|o| o.map(|v| tape.backward(v))).collect();
    let analytic = |part: usize, v: Var, dim: (usize, usize)| -> Array2<f64> {
        grads[part]
            .as_ref()
            .and_then(|g| g.get(v).cloned())
            .unwrap_or_else(|| Array2::zeros(dim))
    };

    let mut worst = [0.0f64; 5];
    let mut failure = None;
    let mut record = |numeric: Vec<Array2<f64>>, analytic: Vec<Array2<f64>>, what: &str| {
        for part in 0..5 {
            if outputs[part].is_none() {
                continue;
            }
            let err = rel_error(&analytic[part], &numeric[part], FLOOR);
            if err > ATTENTION_TOL && failure.is_none() {
                failure = Some(format!("{} w.r.t. {what}: relative error {err:e}", PARTS[part]));
            }
            worst[part] = worst[part].max(err);
        }
    };

    for (name, var) in bound.iter() {
        let value = model.params.get(name).unwrap().clone();
        let mut numeric = vec![Array2::zeros(value.dim()); 5];
        for idx in ndarray::indices(value.dim()) {
            let mut p = model.params.clone();
            let mut shifted = value.clone();
            shifted[idx] += STEP;
            p.insert(name, shifted.clone());
            let up = part_values(&p, batch, config, &proposals);
            shifted[idx] -= 2.0 * STEP;
            p.insert(name, shifted);
            let down = part_values(&p, batch, config, &proposals);
            for part in 0..5 {
                numeric[part][idx] = (up[part] - down[part]) / (2.0 * STEP);
            }
        }
        let a = (0..5).map(|part| analytic(part, var, value.dim())).collect();
        record(numeric, a, name);
    }

    for (s, graph) in loss.samples.iter().enumerate() {
        for (which, var) in [("frames", graph.frames), ("tokens", graph.tokens)] {
            let value = tape.value(var).clone();
            let mut numeric = vec![Array2::zeros(value.dim()); 5];
            for idx in ndarray::indices(value.dim()) {
                let mut shifted = batch.to_vec();
                nudge(&mut shifted[s], which, idx, STEP);
                let up = part_values(&model.params, &shifted, config, &proposals);
                nudge(&mut shifted[s], which, idx, -2.0 * STEP);
                let down = part_values(&model.params, &shifted, config, &proposals);
                for part in 0..5 {
                    numeric[part][idx] = (up[part] - down[part]) / (2.0 * STEP);
                }
            }
            let a = (0..5).map(|part| analytic(part, var, value.dim())).collect();
            record(numeric, a, &format!("sample {s} {which}"));
        }
    }
    match failure {
        Some(f) => Err(f),
        None => Ok(worst),
    }
}
