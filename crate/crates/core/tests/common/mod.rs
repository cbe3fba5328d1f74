#![allow(dead_code)]

use std::path::Path;

use ecgseg::dataset::write_dataset;
use ecgseg::nnet::{Activation, Architecture, LayerSpec};
use ecgseg::pipeline::{RunConfig, TrainSettings};
use ecgseg::synth::{synth_dataset, SynthConfig};

pub fn small_arch() -> Architecture {
    Architecture::new(vec![
        LayerSpec::new(1, 8, 9, Activation::Relu),
        LayerSpec::new(8, 8, 9, Activation::Relu),
        LayerSpec::new(8, 4, 1, Activation::None),
    ])
    .unwrap()
}

/// Writes a 200-patient synthetic dataset into `dir`.
pub fn write_synthetic_dataset(dir: &Path, seed: u64) {
    let records = synth_dataset(200, seed, &SynthConfig::default());
    write_dataset(dir, &records, seed).unwrap();
}

/// A run small enough for a test: short windows, few steps, small network.
pub fn small_run(dataset: &Path, output: &Path) -> RunConfig {
    let mut config = RunConfig {
        dataset_dir: dataset.to_path_buf(),
        output_dir: output.to_path_buf(),
        seed: 5,
        deterministic: true,
        train: TrainSettings {
            window_seconds: 2.0,
            batch_size: 4,
            epochs: 2,
            steps_per_epoch: 10,
            optimizer: ecgseg::nnet::RmsPropConfig {
                learning_rate: 0.01,
                ..Default::default()
            },
            architecture: small_arch(),
            ..TrainSettings::default()
        },
        ..RunConfig::default()
    };
    // The small network never reaches the default screening threshold.
    config.ensemble.threshold = 0.65;
    config.ensemble.retry_limit = 1;
    config.ensemble.iteration_cap = 3;
    config
}
