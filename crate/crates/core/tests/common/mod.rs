#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use ndarray::Array2;
use pointloc::data::synthetic::{generate_synthetic, SyntheticSpec};
use pointloc::{ExperimentConfig, FeatureBundle};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// d=8, L_v=16, ten proposals, k=3.
pub fn small_config() -> ExperimentConfig {
    let config = ExperimentConfig {
        model_dim: 8,
        input_dim: 6,
        num_heads: 2,
        num_frames: 16,
        top_k: 3,
        sigma: 1.0,
        window_lengths: vec![4, 8],
        window_stride_fraction: 0.5,
        batch_size: 3,
        learning_rate: 1e-3,
        seed: 3,
        ..ExperimentConfig::default()
    };
    config.validate().unwrap();
    assert_eq!(config.num_proposals().unwrap(), 10);
    config
}

pub fn small_data(config: &ExperimentConfig, n: usize, seed: u64) -> Vec<FeatureBundle> {
    generate_synthetic(&SyntheticSpec {
        num_samples: n,
        num_frames: config.num_frames,
        input_dim: config.input_dim,
        noise_std: 0.1,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

/// Entries uniform in `[-1, 1)`.
pub fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}
