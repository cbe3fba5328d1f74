//! Point matching with a heart-rate-adaptive tolerance, and the Se / PPV /
//! mean / standard-deviation / F metrics built on it.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::dataset::{EcgRecord, Lead, WaveAnnotation, WaveType};
use crate::delineate::{infer, DelineationConfig, PredictedPoints, Segmenter};
use crate::error::Result;

/// Radius at the reference heart rate.
pub const BASE_RADIUS_MS: f64 = 150.0;
pub const REFERENCE_HEART_RATE: f64 = 70.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointType {
    PBegin,
    PEnd,
    QrsBegin,
    QrsEnd,
    TBegin,
    TEnd,
}

impl PointType {
    pub const ALL: [PointType; 6] = [
        PointType::PBegin,
        PointType::PEnd,
        PointType::QrsBegin,
        PointType::QrsEnd,
        PointType::TBegin,
        PointType::TEnd,
    ];

    pub fn wave(self) -> WaveType {
        match self {
            PointType::PBegin | PointType::PEnd => WaveType::P,
            PointType::QrsBegin | PointType::QrsEnd => WaveType::Qrs,
            PointType::TBegin | PointType::TEnd => WaveType::T,
        }
    }

    pub fn is_begin(self) -> bool {
        matches!(self, PointType::PBegin | PointType::QrsBegin | PointType::TBegin)
    }

    pub fn label(self) -> &'static str {
        match self {
            PointType::PBegin => "p_begin",
            PointType::PEnd => "p_end",
            PointType::QrsBegin => "qrs_begin",
            PointType::QrsEnd => "qrs_end",
            PointType::TBegin => "t_begin",
            PointType::TEnd => "t_end",
        }
    }

    pub fn from_label(label: &str) -> Option<PointType> {
        PointType::ALL.into_iter().find(|p| p.label() == label)
    }

    /// Boundary positions of this type from a set of segments.
    pub fn positions(self, points: &PredictedPoints) -> Vec<usize> {
        if self.is_begin() {
            points.onsets(self.wave())
        } else {
            points.offsets(self.wave())
        }
    }
}

impl fmt::Display for PointType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Matching radius from the expert QRS onsets of one record.
///
/// Heart rate comes from the mean onset-to-onset interval. The radius is
/// 150 ms at 70 bpm and shrinks in proportion to the cycle length above that;
/// it never grows past 150 ms. Fewer than two onsets fall back to 150 ms.
pub fn tolerance_radius(qrs_onsets: &[usize], fs: u32) -> f64 {
    if qrs_onsets.len() < 2 {
        warn!("fewer than two reference QRS onsets; using a {BASE_RADIUS_MS} ms radius");
        return BASE_RADIUS_MS;
    }
    let mut sorted = qrs_onsets.to_vec();
    sorted.sort_unstable();
    let span = (sorted[sorted.len() - 1] - sorted[0]) as f64;
    let mean_interval_ms = span / (sorted.len() - 1) as f64 * 1000.0 / f64::from(fs);
    if mean_interval_ms <= 0.0 {
        return BASE_RADIUS_MS;
    }
    let heart_rate = 60_000.0 / mean_interval_ms;
    radius_for_heart_rate(heart_rate)
}

/// `min(150, 150 · 70 / hr)` ms.
pub fn radius_for_heart_rate(heart_rate: f64) -> f64 {
    BASE_RADIUS_MS.min(BASE_RADIUS_MS * REFERENCE_HEART_RATE / heart_rate)
}

/// Outcome of matching one point type on one or more records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointMatch {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Signed errors (predicted − reference) in ms, one per true positive.
    pub errors_ms: Vec<f64>,
}

impl PointMatch {
    pub fn merge(&mut self, other: &PointMatch) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.errors_ms.extend_from_slice(&other.errors_ms);
    }
}

/// One-to-one matching of reference to predicted points within `radius_ms`.
///
/// Both lists are taken in ascending order and aligned like two sequences:
/// the result has the largest possible number of matched pairs and, among
/// those, the smallest total absolute error. A reference point left over is a
/// false negative, a predicted point left over a false positive.
///
/// Plain nearest-first greedy matching in reference order can lose a match
/// (reference `[0, 8]`, predicted `[-5, 3]`, radius 5: the first reference
/// grabs 3 and the second is left with nothing), so the alignment is solved
/// exactly instead. With equal radii an optimal matching never needs crossing
/// pairs, which is what makes the in-order alignment sufficient.
pub fn match_points(reference: &[usize], predicted: &[usize], radius_ms: f64, fs: u32) -> PointMatch {
    let mut r = reference.to_vec();
    r.sort_unstable();
    let mut p = predicted.to_vec();
    p.sort_unstable();
    let ms_per_sample = 1000.0 / f64::from(fs);
    let within = |a: usize, b: usize| (a.abs_diff(b) as f64) * ms_per_sample <= radius_ms + 1e-9;

    let (n, m) = (r.len(), p.len());
    // best[i][j]: (matches, −total |error| in samples) for suffixes r[i..], p[j..].
    let width = m + 1;
    let mut best = vec![(0usize, 0i64); (n + 1) * width];
    let better = |a: (usize, i64), b: (usize, i64)| a.0 > b.0 || (a.0 == b.0 && a.1 > b.1);
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            let mut cell = best[(i + 1) * width + j];
            let skip_pred = best[i * width + j + 1];
            if better(skip_pred, cell) {
                cell = skip_pred;
            }
            if within(r[i], p[j]) {
                let next = best[(i + 1) * width + j + 1];
                let take = (next.0 + 1, next.1 - r[i].abs_diff(p[j]) as i64);
                if !better(cell, take) {
                    cell = take;
                }
            }
            best[i * width + j] = cell;
        }
    }

    let mut out = PointMatch::default();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        let here = best[i * width + j];
        if within(r[i], p[j]) {
            let next = best[(i + 1) * width + j + 1];
            if (next.0 + 1, next.1 - r[i].abs_diff(p[j]) as i64) == here {
                out.tp += 1;
                out.errors_ms.push((p[j] as f64 - r[i] as f64) * ms_per_sample);
                i += 1;
                j += 1;
                continue;
            }
        }
        if best[i * width + j + 1] == here {
            out.fp += 1;
            j += 1;
        } else {
            out.fn_ += 1;
            i += 1;
        }
    }
    out.fn_ += n - i;
    out.fp += m - j;
    out
}

/// Per-point-type matches, indexed in [`PointType::ALL`] order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub per_type: [PointMatch; 6],
}

impl MatchResult {
    pub fn get(&self, point: PointType) -> &PointMatch {
        &self.per_type[point as usize]
    }

    pub fn merge(&mut self, other: &MatchResult) {
        for (a, b) in self.per_type.iter_mut().zip(&other.per_type) {
            a.merge(b);
        }
    }

    /// Counts pooled over the six point types.
    pub fn pooled(&self) -> (usize, usize, usize) {
        self.per_type
            .iter()
            .fold((0, 0, 0), |(tp, fp, fn_), m| (tp + m.tp, fp + m.fp, fn_ + m.fn_))
    }

    /// Micro-averaged F1 over all six types, `2TP / (2TP + FP + FN)`.
    /// A record with nothing to find and nothing found scores 1.
    pub fn f_score(&self) -> f64 {
        let (tp, fp, fn_) = self.pooled();
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            1.0
        } else {
            (2 * tp) as f64 / denom as f64
        }
    }
}

/// Scores one record's predictions against its expert annotation.
pub fn evaluate_patient(reference: &[WaveAnnotation], predicted: &PredictedPoints, fs: u32) -> MatchResult {
    let truth = PredictedPoints::from_annotations(reference);
    let radius = tolerance_radius(&truth.onsets(WaveType::Qrs), fs);
    let mut result = MatchResult::default();
    for point in PointType::ALL {
        result.per_type[point as usize] =
            match_points(&point.positions(&truth), &point.positions(predicted), radius, fs);
    }
    result
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub point: PointType,
    /// Sensitivity in percent; `None` when there were no reference points.
    pub se: Option<f64>,
    /// Positive predictive value in percent; `None` when nothing was predicted.
    pub ppv: Option<f64>,
    /// Mean signed error in ms.
    pub mean_error: Option<f64>,
    /// Population standard deviation of the signed error in ms.
    pub std_error: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<PointMetrics>,
}

impl MetricsReport {
    pub fn get(&self, point: PointType) -> &PointMetrics {
        &self.rows[point as usize]
    }
}

fn percent(num: usize, denom: usize) -> Option<f64> {
    (denom > 0).then(|| 100.0 * num as f64 / denom as f64)
}

pub fn compute_metrics(result: &MatchResult) -> MetricsReport {
    let rows = PointType::ALL
        .into_iter()
        .map(|point| {
            let m = result.get(point);
            let n = m.errors_ms.len() as f64;
            let mean = (!m.errors_ms.is_empty()).then(|| m.errors_ms.iter().sum::<f64>() / n);
            let std = mean.map(|mu| (m.errors_ms.iter().map(|e| (e - mu).powi(2)).sum::<f64>() / n).sqrt());
            PointMetrics {
                point,
                se: percent(m.tp, m.tp + m.fn_),
                ppv: percent(m.tp, m.tp + m.fp),
                mean_error: mean,
                std_error: std,
                tp: m.tp,
                fp: m.fp,
                fn_: m.fn_,
            }
        })
        .collect();
    MetricsReport { rows }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientScore {
    pub patient_id: String,
    pub f: f64,
}

pub fn patient_f_score(patient_id: &str, result: &MatchResult) -> PatientScore {
    PatientScore {
        patient_id: patient_id.to_string(),
        f: result.f_score(),
    }
}

/// Runs a segmenter over records and scores each against its expert annotation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    pub lead: Lead,
    pub delineation: DelineationConfig,
}

impl Scorer {
    pub fn new(lead: Lead, delineation: DelineationConfig) -> Self {
        Scorer { lead, delineation }
    }

    pub fn match_record(&self, segmenter: &dyn Segmenter, record: &EcgRecord) -> Result<MatchResult> {
        let inference = infer(record, self.lead, segmenter, &self.delineation)?;
        Ok(evaluate_patient(
            &record.annotations_for(self.lead),
            &inference.points,
            record.sampling_rate,
        ))
    }

    /// Per-record matches, in input order. Records are scored in parallel.
    pub fn match_records(
        &self,
        segmenter: &dyn Segmenter,
        records: &[&EcgRecord],
    ) -> Result<Vec<MatchResult>> {
        records
            .par_iter()
            .map(|r| self.match_record(segmenter, r))
            .collect()
    }

    pub fn f_scores(&self, segmenter: &dyn Segmenter, records: &[&EcgRecord]) -> Result<Vec<PatientScore>> {
        Ok(self
            .match_records(segmenter, records)?
            .iter()
            .zip(records)
            .map(|(m, r)| patient_f_score(&r.patient_id, m))
            .collect())
    }
}

/// Sum of several per-record results.
pub fn pool(results: &[MatchResult]) -> MatchResult {
    let mut total = MatchResult::default();
    for r in results {
        total.merge(r);
    }
    total
}
