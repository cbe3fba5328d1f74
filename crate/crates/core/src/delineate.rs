//! From network probabilities to wave boundaries: winner mask, run extraction,
//! and inference for single models or ensembles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{lead_signal, EcgRecord, Lead, WaveAnnotation, WaveType};
use crate::error::{Error, Result};
use crate::nnet::{Model, Tensor1d, OUTPUT_CHANNELS};

/// Per-step winning channel; stored as one index per step, so exactly one
/// channel is set everywhere by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WinnerMask {
    winners: Vec<u8>,
}

impl WinnerMask {
    pub fn len(&self) -> usize {
        self.winners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.winners.is_empty()
    }

    pub fn winner(&self, t: usize) -> usize {
        usize::from(self.winners[t])
    }

    pub fn is_set(&self, channel: usize, t: usize) -> bool {
        self.winner(t) == channel
    }

    /// Binary mask of one channel.
    pub fn channel(&self, channel: usize) -> Vec<u8> {
        self.winners
            .iter()
            .map(|&w| u8::from(usize::from(w) == channel))
            .collect()
    }
}

/// Picks the largest channel at every step. Ties go to the lowest index
/// (P, then QRS, then T, then background).
pub fn winner_mask(probs: &Tensor1d) -> WinnerMask {
    let winners = (0..probs.len())
        .map(|t| {
            let mut best = 0;
            for c in 1..probs.channels() {
                if probs.get(c, t) > probs.get(best, t) {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    WinnerMask { winners }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub onset: usize,
    pub offset: usize,
}

impl Segment {
    /// Length in samples, both ends included.
    pub fn duration(&self) -> usize {
        self.offset - self.onset + 1
    }
}

/// Predicted waves per type, each list ordered by onset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredictedPoints {
    pub waves: [Vec<Segment>; 3],
}

impl PredictedPoints {
    pub fn segments(&self, wave: WaveType) -> &[Segment] {
        &self.waves[wave.channel()]
    }

    pub fn onsets(&self, wave: WaveType) -> Vec<usize> {
        self.segments(wave).iter().map(|s| s.onset).collect()
    }

    pub fn offsets(&self, wave: WaveType) -> Vec<usize> {
        self.segments(wave).iter().map(|s| s.offset).collect()
    }

    /// Boundaries of expert annotations, for scoring references the same way as predictions.
    pub fn from_annotations(annotations: &[WaveAnnotation]) -> Self {
        let mut points = PredictedPoints::default();
        for a in annotations {
            points.waves[a.wave_type.channel()].push(Segment {
                onset: a.onset,
                offset: a.offset,
            });
        }
        for list in &mut points.waves {
            list.sort_by_key(|s| s.onset);
        }
        points
    }

    /// Converts runs to annotations; each peak is the step of highest probability
    /// for that wave inside the run.
    pub fn to_annotations(&self, probs: &Tensor1d) -> Vec<WaveAnnotation> {
        let mut out = Vec::new();
        for wave in WaveType::ALL {
            let channel = probs.channel(wave.channel());
            for s in self.segments(wave) {
                let mut peak = s.onset;
                for t in s.onset..=s.offset {
                    if channel[t] > channel[peak] {
                        peak = t;
                    }
                }
                out.push(WaveAnnotation::new(wave, s.onset, peak, s.offset));
            }
        }
        out.sort_by_key(|a| (a.onset, a.wave_type));
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DelineationConfig {
    /// Shortest run, in samples, kept as a wave. 10 samples is 20 ms at 500 Hz;
    /// 1 keeps every run.
    pub min_run: usize,
}

impl Default for DelineationConfig {
    fn default() -> Self {
        DelineationConfig { min_run: 10 }
    }
}

/// Every maximal run of a wave channel at least `min_run` long becomes one
/// `(onset, offset)` pair; shorter runs are dropped.
pub fn extract_points(mask: &WinnerMask, min_run: usize) -> PredictedPoints {
    let mut points = PredictedPoints::default();
    let mut t = 0;
    while t < mask.len() {
        let w = mask.winner(t);
        let start = t;
        while t < mask.len() && mask.winner(t) == w {
            t += 1;
        }
        if w < WaveType::ALL.len() && t - start >= min_run.max(1) {
            points.waves[w].push(Segment {
                onset: start,
                offset: t - 1,
            });
        }
    }
    points
}

/// Anything that maps a single-lead signal to `4 × T` per-step probabilities.
pub trait Segmenter: Sync {
    fn probabilities(&self, signal: &Tensor1d) -> Result<Tensor1d>;
}

impl Segmenter for Model {
    fn probabilities(&self, signal: &Tensor1d) -> Result<Tensor1d> {
        self.forward(signal)
    }
}

/// Elementwise mean of several probability maps.
pub fn average_probabilities(outputs: &[Tensor1d]) -> Result<Tensor1d> {
    let first = outputs.first().ok_or(Error::EmptyEnsemble)?;
    let mut sum = vec![0.0; first.data().len()];
    for out in outputs {
        if out.channels() != first.channels() || out.len() != first.len() {
            return Err(Error::Shape("ensemble members disagree on output shape".into()));
        }
        for (s, v) in sum.iter_mut().zip(out.data()) {
            *s += v;
        }
    }
    let n = outputs.len() as f64;
    Tensor1d::new(
        first.channels(),
        first.len(),
        sum.into_iter().map(|s| s / n).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct Inference {
    pub probs: Tensor1d,
    pub mask: WinnerMask,
    pub points: PredictedPoints,
}

/// Probabilities, winner mask and boundary points for one signal. Nothing is
/// smoothed between the network output and the mask.
pub fn infer_signal(
    signal: &[f64],
    segmenter: &dyn Segmenter,
    config: &DelineationConfig,
) -> Result<Inference> {
    let probs = segmenter.probabilities(&Tensor1d::from_signal(signal)?)?;
    if probs.channels() != OUTPUT_CHANNELS {
        return Err(Error::Shape(format!(
            "segmenter emitted {} channels",
            probs.channels()
        )));
    }
    let mask = winner_mask(&probs);
    let points = extract_points(&mask, config.min_run);
    Ok(Inference { probs, mask, points })
}

pub fn infer(
    record: &EcgRecord,
    lead: Lead,
    segmenter: &dyn Segmenter,
    config: &DelineationConfig,
) -> Result<Inference> {
    infer_signal(lead_signal(record, lead)?, segmenter, config)
}

/// Predicted annotations as a partial interchange document
/// (`patient_id` and `annotations` only).
pub fn predictions_json(patient_id: &str, lead: Lead, annotations: &[WaveAnnotation]) -> Result<String> {
    #[derive(Serialize)]
    struct Doc<'a> {
        patient_id: &'a str,
        annotations: BTreeMap<Lead, &'a [WaveAnnotation]>,
    }
    let doc = Doc {
        patient_id,
        annotations: BTreeMap::from([(lead, annotations)]),
    };
    serde_json::to_string(&doc).map_err(|source| Error::Json {
        context: format!("serializing predictions for {patient_id}"),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::rasterize_targets;
    use proptest::prelude::*;

    fn probs_from_columns(cols: &[[f64; 4]]) -> Tensor1d {
        let mut t = Tensor1d::zeros(4, cols.len());
        for (step, col) in cols.iter().enumerate() {
            for (c, &v) in col.iter().enumerate() {
                t.set(c, step, v);
            }
        }
        t
    }

    fn mask_with_runs(len: usize, channel: usize, runs: &[(usize, usize)]) -> WinnerMask {
        let mut winners = vec![3u8; len];
        for &(a, b) in runs {
            winners[a..=b].fill(channel as u8);
        }
        WinnerMask { winners }
    }

    #[test]
    fn strict_maximum_wins() {
        let m = winner_mask(&probs_from_columns(&[[0.1, 0.7, 0.1, 0.1]]));
        assert_eq!(m.winner(0), 1);
    }

    #[test]
    fn ties_go_to_lowest_channel() {
        let m = winner_mask(&probs_from_columns(&[[0.25; 4], [0.1, 0.4, 0.4, 0.1]]));
        assert_eq!(m.winner(0), 0);
        assert_eq!(m.winner(1), 1);
    }

    #[test]
    fn single_run() {
        let p = extract_points(&mask_with_runs(300, 1, &[(100, 140)]), 10);
        assert_eq!(p.onsets(WaveType::Qrs), vec![100]);
        assert_eq!(p.offsets(WaveType::Qrs), vec![140]);
        assert!(p.segments(WaveType::P).is_empty());
    }

    #[test]
    fn short_run_is_discarded() {
        let mask = mask_with_runs(50, 0, &[(10, 11)]);
        assert!(extract_points(&mask, 3).segments(WaveType::P).is_empty());
        assert_eq!(extract_points(&mask, 1).onsets(WaveType::P), vec![10]);
    }

    #[test]
    fn two_runs_in_order() {
        let mask = mask_with_runs(100, 2, &[(10, 20), (50, 60)]);
        let p = extract_points(&mask, 1);
        // Run-length oracle: scan for 0→1 and 1→0 edges of the binary channel.
        let bits = mask.channel(2);
        let mut onsets = vec![];
        let mut offsets = vec![];
        for t in 0..bits.len() {
            if bits[t] == 1 && (t == 0 || bits[t - 1] == 0) {
                onsets.push(t);
            }
            if bits[t] == 1 && (t + 1 == bits.len() || bits[t + 1] == 0) {
                offsets.push(t);
            }
        }
        assert_eq!(onsets, vec![10, 50]);
        assert_eq!(p.onsets(WaveType::T), onsets);
        assert_eq!(p.offsets(WaveType::T), offsets);
    }

    #[test]
    fn runs_touching_the_edges() {
        let mask = mask_with_runs(30, 1, &[(0, 4), (25, 29)]);
        let p = extract_points(&mask, 1);
        assert_eq!(p.onsets(WaveType::Qrs), vec![0, 25]);
        assert_eq!(p.offsets(WaveType::Qrs), vec![4, 29]);
    }

    #[test]
    fn averaging() {
        let a = probs_from_columns(&[[0.7, 0.1, 0.1, 0.1], [0.25; 4]]);
        let b = probs_from_columns(&[[0.1, 0.5, 0.2, 0.2], [0.1, 0.2, 0.3, 0.4]]);
        let mean = average_probabilities(&[a.clone(), b]).unwrap();
        let expected = [[0.4, 0.3, 0.15, 0.15], [0.175, 0.225, 0.275, 0.325]];
        for (t, col) in expected.iter().enumerate() {
            for (c, v) in col.iter().enumerate() {
                assert!((mean.get(c, t) - v).abs() < 1e-15);
            }
        }
        assert_eq!(average_probabilities(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(average_probabilities(&[a.clone(), a.clone()]).unwrap(), a);
        assert!(matches!(average_probabilities(&[]), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn peaks_follow_probability() {
        let mut probs = Tensor1d::zeros(4, 10);
        for t in 0..10 {
            probs.set(3, t, 0.5);
        }
        for (t, v) in [(3, 0.6), (4, 0.9), (5, 0.7)] {
            probs.set(1, t, v);
            probs.set(3, t, 1.0 - v);
        }
        let mask = winner_mask(&probs);
        let anns = extract_points(&mask, 1).to_annotations(&probs);
        assert_eq!(anns, vec![WaveAnnotation::new(WaveType::Qrs, 3, 4, 5)]);
        let json = predictions_json("7", Lead::Ii, &anns).unwrap();
        assert_eq!(json, r#"{"patient_id":"7","annotations":{"ii":[["qrs",3,4,5]]}}"#);
    }

    fn annotation_strategy() -> impl Strategy<Value = Vec<WaveAnnotation>> {
        // Back-to-back beats of random widths, so types never overlap.
        prop::collection::vec((1usize..30, 1usize..30, 1usize..30, 0usize..20), 1..8).prop_map(|beats| {
            let mut t = 5;
            let mut out = vec![];
            for (p, q, tw, gap) in beats {
                for (ty, w) in [(WaveType::P, p), (WaveType::Qrs, q), (WaveType::T, tw)] {
                    out.push(WaveAnnotation::new(ty, t, t, t + w - 1));
                    t += w + gap;
                }
            }
            out
        })
    }

    proptest! {
        #[test]
        fn exactly_one_winner_per_step(cols in prop::collection::vec(prop::array::uniform4(0.0f64..1.0), 1..50)) {
            let m = winner_mask(&probs_from_columns(&cols));
            for t in 0..m.len() {
                let set: usize = (0..4).map(|c| usize::from(m.channel(c)[t])).sum();
                prop_assert_eq!(set, 1);
                let max = cols[t].iter().cloned().fold(f64::MIN, f64::max);
                prop_assert_eq!(cols[t][m.winner(t)], max);
            }
        }

        #[test]
        fn argmax_survives_monotone_maps(cols in prop::collection::vec(prop::array::uniform4(0.01f64..1.0), 1..40)) {
            let p = probs_from_columns(&cols);
            let mapped: Vec<[f64; 4]> = cols.iter().map(|c| c.map(|v| v.ln() * 3.0 + 1.0)).collect();
            prop_assert_eq!(winner_mask(&p), winner_mask(&probs_from_columns(&mapped)));
        }

        #[test]
        fn rasterized_truth_is_recovered(anns in annotation_strategy()) {
            let len = anns.iter().map(|a| a.offset).max().unwrap() + 10;
            let target = rasterize_targets(&anns, len).unwrap();
            let points = extract_points(&winner_mask(&target), 1);
            let truth = PredictedPoints::from_annotations(&anns);
            prop_assert_eq!(points, truth);
        }
    }
}
