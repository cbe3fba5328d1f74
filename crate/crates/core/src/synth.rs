//! Synthetic annotated records for tests, demos and smoke runs.
//!
//! Each beat is a sum of Gaussian bumps (P, Q, R, S, T) around an R peak.
//! Annotation boundaries sit three standard deviations from the bump
//! centres, so the expert marks and the waveform agree by construction.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::{EcgRecord, Lead, WaveAnnotation, WaveType, RECORD_LEN, SAMPLING_RATE};
use crate::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub heart_rate_bpm: (f64, f64),
    /// Standard deviation of white noise, mV.
    pub noise_mv: f64,
    /// Peak amplitude of the sinusoidal baseline drift, mV.
    pub wander_mv: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            heart_rate_bpm: (50.0, 90.0),
            noise_mv: 0.01,
            wander_mv: 0.2,
        }
    }
}

// Offsets from the R peak in ms.
const P_WAVE: (f64, f64, f64) = (-200.0, -160.0, -120.0);
const QRS_WAVE: (f64, f64, f64) = (-40.0, 0.0, 40.0);
const T_WAVE: (f64, f64, f64) = (140.0, 260.0, 380.0);

/// Per-lead gains for (P, QRS, T).
fn lead_gains(lead: Lead) -> (f64, f64, f64) {
    match lead {
        Lead::I => (0.6, 0.7, 0.6),
        Lead::Ii => (1.0, 1.0, 1.0),
        Lead::Iii => (0.4, 0.5, 0.4),
        Lead::Avr => (-0.8, -0.85, -0.8),
        Lead::Avl => (0.2, 0.3, 0.2),
        Lead::Avf => (0.7, 0.75, 0.7),
        Lead::V1 => (0.4, -0.6, -0.3),
        Lead::V2 => (0.5, 0.6, 0.9),
        Lead::V3 => (0.5, 0.9, 1.0),
        Lead::V4 => (0.5, 1.3, 1.0),
        Lead::V5 => (0.5, 1.2, 0.8),
        Lead::V6 => (0.5, 0.9, 0.6),
    }
}

fn ms_to_samples(ms: f64) -> f64 {
    ms * f64::from(SAMPLING_RATE) / 1000.0
}

fn gaussian(t: f64, centre: f64, sigma: f64) -> f64 {
    let z = (t - centre) / sigma;
    (-0.5 * z * z).exp()
}

fn quantize(mv: f64) -> f64 {
    (mv * 1000.0).round() / 1000.0
}

/// One synthetic patient; every lead carries the same annotations.
pub fn synth_record(patient_id: &str, seed: u64, config: &SynthConfig) -> EcgRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hr = rng.random_range(config.heart_rate_bpm.0..=config.heart_rate_bpm.1);
    let rr = ms_to_samples(60_000.0 / hr);
    let scale = rng.random_range(0.7..1.3);
    let p_amp = 0.15 * rng.random_range(0.6..1.4);
    let t_amp = 0.3 * rng.random_range(0.6..1.4);

    let mut peaks = Vec::new();
    let mut r = ms_to_samples(250.0) + rng.random_range(0.0..rr);
    while r < RECORD_LEN as f64 + ms_to_samples(200.0) {
        peaks.push(r);
        r += rr * rng.random_range(0.98..1.02);
    }

    let mut annotations = Vec::new();
    for &c in &peaks {
        for (wave_type, (on, pk, off)) in [
            (WaveType::P, P_WAVE),
            (WaveType::Qrs, QRS_WAVE),
            (WaveType::T, T_WAVE),
        ] {
            let onset = (c + ms_to_samples(on)).round();
            let offset = (c + ms_to_samples(off)).round();
            if onset >= 0.0 && offset < RECORD_LEN as f64 {
                let peak = (c + ms_to_samples(pk)).round();
                annotations.push(WaveAnnotation::new(
                    wave_type,
                    onset as usize,
                    peak as usize,
                    offset as usize,
                ));
            }
        }
    }
    annotations.sort_by_key(|a| a.onset);

    let wander_freq = rng.random_range(0.15..0.4);
    let wander_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let noise = Normal::new(0.0, config.noise_mv).expect("finite noise level");
    let sigma_p = ms_to_samples(40.0 / 3.0);
    let sigma_t = ms_to_samples(40.0);

    let mut leads = BTreeMap::new();
    for lead in Lead::ALL {
        let (gp, gq, gt) = lead_gains(lead);
        let signal = (0..RECORD_LEN)
            .map(|t| {
                let t = t as f64;
                let mut v = 0.0;
                for &c in &peaks {
                    if (t - c).abs() > ms_to_samples(500.0) {
                        continue;
                    }
                    v += gp * p_amp * gaussian(t, c + ms_to_samples(P_WAVE.1), sigma_p);
                    v += gq
                        * scale
                        * (-0.1 * gaussian(t, c - ms_to_samples(18.0), ms_to_samples(6.0))
                            + gaussian(t, c, ms_to_samples(9.0))
                            - 0.25 * gaussian(t, c + ms_to_samples(18.0), ms_to_samples(6.0)));
                    v += gt * t_amp * gaussian(t, c + ms_to_samples(T_WAVE.1), sigma_t);
                }
                let secs = t / f64::from(SAMPLING_RATE);
                v += config.wander_mv * (std::f64::consts::TAU * wander_freq * secs + wander_phase).sin();
                if config.noise_mv > 0.0 {
                    v += noise.sample(&mut rng);
                }
                quantize(v)
            })
            .collect();
        leads.insert(lead, signal);
    }

    EcgRecord {
        patient_id: patient_id.to_string(),
        sampling_rate: SAMPLING_RATE,
        leads,
        annotations: Lead::ALL.iter().map(|&l| (l, annotations.clone())).collect(),
    }
}

/// `count` patients with ids `"1"..="count"`.
pub fn synth_dataset(count: usize, seed: u64, config: &SynthConfig) -> Vec<EcgRecord> {
    (1..=count)
        .map(|i| {
            let id = i.to_string();
            synth_record(&id, derive_seed(seed, &id), config)
        })
        .collect()
}

/// Unit-height rectangular pulses annotated as QRS complexes, 50 ms wide
/// every `period_ms`; zero elsewhere.
pub fn square_wave_record(patient_id: &str, period_ms: f64) -> EcgRecord {
    let half = ms_to_samples(25.0).round() as usize;
    let period = ms_to_samples(period_ms).round() as usize;
    let mut signal = vec![0.0; RECORD_LEN];
    let mut annotations = Vec::new();
    let mut centre = period / 2;
    while centre + half < RECORD_LEN {
        let (onset, offset) = (centre - half, centre + half);
        signal[onset..=offset].fill(1.0);
        annotations.push(WaveAnnotation::new(WaveType::Qrs, onset, centre, offset));
        centre += period;
    }
    EcgRecord {
        patient_id: patient_id.to_string(),
        sampling_rate: SAMPLING_RATE,
        leads: Lead::ALL.iter().map(|&l| (l, signal.clone())).collect(),
        annotations: Lead::ALL.iter().map(|&l| (l, annotations.clone())).collect(),
    }
}
