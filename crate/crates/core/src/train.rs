//! Target rasterization, window sampling and the mini-batch training loop.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{lead_signal, EcgRecord, Lead, WaveAnnotation, WaveType, SAMPLING_RATE};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::nnet::{
    Architecture, Checkpoint, Model, RmsProp, RmsPropConfig, Tensor1d, BACKGROUND, OUTPUT_CHANNELS,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lead: Lead,
    pub window_seconds: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub seed: u64,
    pub optimizer: RmsPropConfig,
    pub architecture: Architecture,
    /// Multiplier on the initial weights; 1.0 is plain Glorot-uniform.
    pub init_scale: f64,
    pub deterministic: bool,
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lead: Lead::DEFAULT,
            window_seconds: 6.0,
            batch_size: 8,
            epochs: 50,
            // ⌈134 / 8⌉ · 4
            steps_per_epoch: 68,
            seed: 0,
            optimizer: RmsPropConfig::default(),
            architecture: Architecture::default(),
            init_scale: 1.0,
            deterministic: false,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_seconds * f64::from(SAMPLING_RATE)).round() as usize
    }

    pub fn validate(&self, record_len: usize) -> Result<()> {
        let window = self.window_samples();
        if window == 0 || window > record_len {
            return Err(Error::Config(format!(
                "window of {} s ({window} samples) must fit in {record_len} samples",
                self.window_seconds
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Config(
                "batch_size, epochs and steps_per_epoch must be at least 1".into(),
            ));
        }
        if !(self.optimizer.learning_rate >= 0.0 && (0.0..1.0).contains(&self.optimizer.rho)) {
            return Err(Error::Config(
                "learning rate must be ≥ 0 and rho in [0, 1)".into(),
            ));
        }
        self.architecture.validate()
    }
}

/// One-hot `4 × length` target: each wave's channel is hot on `[onset, offset]`
/// and background everywhere else.
///
/// Where waves of different types collide, QRS wins over P and P over T.
pub fn rasterize_targets(annotations: &[WaveAnnotation], length: usize) -> Result<Tensor1d> {
    const NONE: u8 = u8::MAX;
    let mut owner = vec![NONE; length];
    let mut collisions = 0usize;
    // Paint lowest precedence first so later passes overwrite.
    for wave_type in [WaveType::T, WaveType::P, WaveType::Qrs] {
        for w in annotations.iter().filter(|w| w.wave_type == wave_type) {
            if w.onset > w.offset || w.offset >= length {
                return Err(Error::Target(format!(
                    "{} wave [{}, {}] does not fit in {length} samples",
                    wave_type.name(),
                    w.onset,
                    w.offset
                )));
            }
            for slot in &mut owner[w.onset..=w.offset] {
                if *slot != NONE && *slot != wave_type.channel() as u8 {
                    collisions += 1;
                }
                *slot = wave_type.channel() as u8;
            }
        }
    }
    if collisions > 0 {
        warn!("{collisions} samples covered by overlapping waves; resolved as QRS > P > T");
    }
    let mut target = Tensor1d::zeros(OUTPUT_CHANNELS, length);
    for (t, &c) in owner.iter().enumerate() {
        let channel = if c == NONE { BACKGROUND } else { c as usize };
        target.set(channel, t, 1.0);
    }
    Ok(target)
}

/// Uniform start index in `[0, length − window]`.
pub fn sample_window<R: Rng + ?Sized>(length: usize, window: usize, rng: &mut R) -> Result<usize> {
    if window > length {
        return Err(Error::Config(format!(
            "window {window} longer than record {length}"
        )));
    }
    Ok(rng.random_range(0..=length - window))
}

/// A lead signal with its rasterized expert target.
#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub patient_id: String,
    pub signal: Tensor1d,
    pub target: Tensor1d,
}

impl TrainingExample {
    pub fn from_record(record: &EcgRecord, lead: Lead) -> Result<Self> {
        let signal = lead_signal(record, lead)?;
        Ok(TrainingExample {
            patient_id: record.patient_id.clone(),
            signal: Tensor1d::from_signal(signal)?,
            target: rasterize_targets(&record.annotations_for(lead), signal.len())?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub optimizer: RmsProp,
    /// Mean loss per step, in step order.
    pub step_losses: Vec<f64>,
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub seed: u64,
}

impl TrainOutcome {
    pub fn checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new(
            &self.model,
            Some(&self.optimizer),
            self.seed,
            self.step_losses.len(),
        );
        ckpt.step_losses = self.step_losses.clone();
        ckpt
    }
}

/// Trains a fresh network on `records`.
///
/// Each step draws `batch_size` windows, each from a patient picked uniformly
/// with replacement at a uniform offset, and applies one RMSProp update on
/// their mean cross-entropy loss.
///
/// With `config.checkpoint` set, progress is saved after every epoch and an
/// existing checkpoint from the same run is continued instead of starting
/// over; a finished checkpoint is returned without further training.
pub fn train_base(records: &[&EcgRecord], config: &TrainConfig) -> Result<TrainOutcome> {
    let examples = records
        .iter()
        .map(|r| TrainingExample::from_record(r, config.lead))
        .collect::<Result<Vec<_>>>()?;
    if let Some(path) = config.checkpoint.as_ref().filter(|p| p.exists()) {
        let ckpt = Checkpoint::load(path)?;
        info!("continuing from {} after {} steps", path.display(), ckpt.steps);
        return resume_training(&examples, &ckpt, config);
    }
    let model = Model::init_scaled(
        &config.architecture,
        derive_seed(config.seed, "init"),
        config.init_scale,
    )?;
    train_examples(&examples, model, config)
}

/// Training loop over prepared examples, starting from `model`.
pub fn train_examples(
    examples: &[TrainingExample],
    model: Model,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let optimizer = RmsProp::new(config.optimizer, &model);
    run_loop(examples, model, optimizer, Vec::new(), config)
}

/// Continues the run that wrote `checkpoint`, replaying its window draws so
/// the result equals an uninterrupted run.
pub fn resume_training(
    examples: &[TrainingExample],
    checkpoint: &Checkpoint,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let model = checkpoint.model()?;
    let stale = |why: &str| Error::Config(format!("checkpoint does not belong to this run: {why}"));
    if checkpoint.seed != config.seed {
        return Err(stale("different seed"));
    }
    if model.architecture() != config.architecture {
        return Err(stale("different architecture"));
    }
    if checkpoint.steps != checkpoint.step_losses.len()
        || !checkpoint.steps.is_multiple_of(config.steps_per_epoch)
    {
        return Err(stale("step count is not a whole number of epochs"));
    }
    if checkpoint.steps > config.epochs * config.steps_per_epoch {
        return Err(stale("more steps than configured"));
    }
    let optimizer = checkpoint
        .optimizer(&model)?
        .ok_or_else(|| stale("no optimizer state"))?;
    if optimizer.config != config.optimizer {
        return Err(stale("different optimizer constants"));
    }
    run_loop(examples, model, optimizer, checkpoint.step_losses.clone(), config)
}

/// `(example, start)` pairs for one mini-batch.
fn draw_batch(
    rng: &mut ChaCha8Rng,
    examples: &[TrainingExample],
    window: usize,
    batch_size: usize,
) -> Result<Vec<(usize, usize)>> {
    (0..batch_size)
        .map(|_| {
            let ex = rng.random_range(0..examples.len());
            Ok((ex, sample_window(examples[ex].signal.len(), window, rng)?))
        })
        .collect()
}

fn run_loop(
    examples: &[TrainingExample],
    mut model: Model,
    mut optimizer: RmsProp,
    mut step_losses: Vec<f64>,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if examples.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let min_len = examples.iter().map(|e| e.signal.len()).min().unwrap_or(0);
    config.validate(min_len)?;
    let window = config.window_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "windows"));
    for _ in 0..step_losses.len() {
        draw_batch(&mut rng, examples, window, config.batch_size)?;
    }
    let mut epoch_losses: Vec<f64> = step_losses
        .chunks(config.steps_per_epoch)
        .map(|c| c.iter().sum::<f64>() / config.steps_per_epoch as f64)
        .collect();

    for epoch in epoch_losses.len()..config.epochs {
        let mut epoch_sum = 0.0;
        for _ in 0..config.steps_per_epoch {
            let batch = draw_batch(&mut rng, examples, window, config.batch_size)?
                .into_iter()
                .map(|(ex, start)| {
                    let ex = &examples[ex];
                    Ok((ex.signal.window(start, window)?, ex.target.window(start, window)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = model.batch_backward(&batch, config.deterministic)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: step_losses.len(),
                });
            }
            optimizer.step(&mut model, &grads)?;
            step_losses.push(loss);
            epoch_sum += loss;
        }
        let mean = epoch_sum / config.steps_per_epoch as f64;
        info!("epoch {}/{}: mean loss {mean:.5}", epoch + 1, config.epochs);
        epoch_losses.push(mean);
        if let Some(path) = &config.checkpoint {
            let mut ckpt = Checkpoint::new(&model, Some(&optimizer), config.seed, step_losses.len());
            ckpt.step_losses = step_losses.clone();
            ckpt.save(path)?;
        }
    }

    Ok(TrainOutcome {
        model,
        optimizer,
        step_losses,
        epoch_losses,
        seed: config.seed,
    })
}

/// Renders the per-epoch loss log as `epoch,mean_loss` lines.
pub fn loss_log_csv(epoch_losses: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (epoch, loss) in epoch_losses.iter().enumerate() {
        let _ = writeln!(out, "{},{loss}", epoch + 1);
    }
    out
}

pub fn write_loss_log(path: impl AsRef<Path>, epoch_losses: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, loss_log_csv(epoch_losses)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qrs(onset: usize, offset: usize) -> WaveAnnotation {
        WaveAnnotation::new(WaveType::Qrs, onset, (onset + offset) / 2, offset)
    }

    fn assert_one_hot(t: &Tensor1d) {
        for step in 0..t.len() {
            assert_eq!(t.column(step).iter().sum::<f64>(), 1.0, "step {step}");
        }
    }

    #[test]
    fn empty_annotations_are_background() {
        let t = rasterize_targets(&[], 50);
        let t = t.unwrap();
        assert!(t.channel(BACKGROUND).iter().all(|&v| v == 1.0));
        assert_one_hot(&t);
    }

    #[test]
    fn single_qrs_is_painted_inclusive() {
        let t = rasterize_targets(&[qrs(100, 140)], 5000).unwrap();
        for step in 0..5000 {
            let inside = (100..=140).contains(&step);
            assert_eq!(t.get(1, step), if inside { 1.0 } else { 0.0 });
            assert_eq!(t.get(BACKGROUND, step), if inside { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn adjacent_waves_stay_one_hot() {
        let p = WaveAnnotation::new(WaveType::P, 90, 95, 99);
        let t = rasterize_targets(&[p, qrs(100, 140)], 300).unwrap();
        assert_one_hot(&t);
        assert!((90..=99).all(|s| t.get(0, s) == 1.0));
        assert!((100..=140).all(|s| t.get(1, s) == 1.0));
    }

    #[test]
    fn collisions_follow_precedence() {
        let waves = [
            WaveAnnotation::new(WaveType::T, 10, 15, 30),
            WaveAnnotation::new(WaveType::P, 25, 30, 40),
            qrs(35, 50),
        ];
        let t = rasterize_targets(&waves, 60).unwrap();
        assert_one_hot(&t);
        assert_eq!(t.get(2, 20), 1.0);
        assert_eq!(t.get(0, 28), 1.0);
        assert_eq!(t.get(1, 37), 1.0);
        assert!(rasterize_targets(&[qrs(50, 70)], 60).is_err());
    }

    #[test]
    fn window_sampling_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(sample_window(3000, 3000, &mut rng).unwrap(), 0);
        }
        assert!(sample_window(100, 101, &mut rng).is_err());
        let a: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..20)
                .map(|_| sample_window(5000, 3000, &mut r).unwrap())
                .collect()
        };
        let b: Vec<usize> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..20)
                .map(|_| sample_window(5000, 3000, &mut r).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    /// χ² goodness of fit over 2001 equiprobable starts.
    #[test]
    fn window_starts_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = 100_000;
        let mut counts = vec![0u32; 2001];
        for _ in 0..draws {
            counts[sample_window(5000, 3000, &mut rng).unwrap()] += 1;
        }
        let expected = draws as f64 / 2001.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (f64::from(c) - expected).powi(2) / expected)
            .sum();
        // Upper 0.001 critical value of χ² with 2000 degrees of freedom via the
        // Wilson–Hilferty approximation (exact quantile: 2201.16).
        let dof = 2000.0f64;
        let z = 3.090_232;
        let critical = dof * (1.0 - 2.0 / (9.0 * dof) + z * (2.0 / (9.0 * dof)).sqrt()).powi(3);
        assert!((critical - 2201.16).abs() < 0.1);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }

    #[test]
    fn loss_log_format() {
        assert_eq!(loss_log_csv(&[1.5, 0.25]), "epoch,mean_loss\n1,1.5\n2,0.25\n");
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate(5000).is_ok());
        cfg.window_seconds = 11.0;
        assert!(cfg.validate(5000).is_err());
        cfg.window_seconds = 6.0;
        cfg.batch_size = 0;
        assert!(cfg.validate(5000).is_err());
    }
}
