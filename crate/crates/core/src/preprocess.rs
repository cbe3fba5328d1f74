//! Baseline wander removal with two cascaded median filters.
//!
//! The first, short filter erases the QRS complex and P wave; the second,
//! longer one erases the T wave. What survives both is the slow baseline,
//! which is then subtracted from the input.

use serde::{Deserialize, Serialize};

use crate::dataset::{EcgRecord, SAMPLING_RATE};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    #[default]
    Replicate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterSpec {
    pub window_1_ms: f64,
    pub window_2_ms: f64,
    pub edge_mode: EdgeMode,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            window_1_ms: 200.0,
            window_2_ms: 600.0,
            edge_mode: EdgeMode::Replicate,
        }
    }
}

impl FilterSpec {
    /// Window lengths in samples at `fs`, rounded to the nearest count and bumped to odd.
    pub fn window_samples(&self, fs: u32) -> Result<(usize, usize)> {
        let w1 = ms_to_odd_samples(self.window_1_ms, fs)?;
        let w2 = ms_to_odd_samples(self.window_2_ms, fs)?;
        if w1 >= w2 {
            return Err(Error::Filter(format!(
                "first window ({w1} samples) must be shorter than the second ({w2} samples)"
            )));
        }
        Ok((w1, w2))
    }
}

fn ms_to_odd_samples(ms: f64, fs: u32) -> Result<usize> {
    if !(ms.is_finite() && ms > 0.0) {
        return Err(Error::Filter(format!("window duration {ms} ms must be positive")));
    }
    let n = (ms * f64::from(fs) / 1000.0).round() as usize;
    Ok(if n.is_multiple_of(2) { n + 1 } else { n })
}

/// Running median over an odd `window` with replicate padding at both ends.
///
/// Keeps the current window as a sorted buffer and slides it one sample at a
/// time, so the cost is O(n·window) memory moves rather than a sort per sample.
pub fn median_filter(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) {
        return Err(Error::Filter(format!("window {window} must be odd")));
    }
    if window > x.len() {
        return Err(Error::Filter(format!(
            "window {window} exceeds signal length {}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Filter(format!("sample {i} is not finite")));
    }
    let half = (window - 1) / 2;
    let n = x.len();
    let padded = |i: isize| -> f64 { x[i.clamp(0, n as isize - 1) as usize] };

    let mut sorted: Vec<f64> = (-(half as isize)..=half as isize).map(padded).collect();
    sorted.sort_by(f64::total_cmp);

    let mut out = Vec::with_capacity(n);
    out.push(sorted[half]);
    for t in 1..n {
        let leaving = padded(t as isize - 1 - half as isize);
        let entering = padded(t as isize + half as isize);
        let pos = sorted.partition_point(|v| v.total_cmp(&leaving).is_lt());
        sorted.remove(pos);
        let pos = sorted.partition_point(|v| v.total_cmp(&entering).is_lt());
        sorted.insert(pos, entering);
        out.push(sorted[half]);
    }
    Ok(out)
}

/// Estimated baseline: the median cascade itself.
pub fn baseline(x: &[f64], spec: &FilterSpec, fs: u32) -> Result<Vec<f64>> {
    let (w1, w2) = spec.window_samples(fs)?;
    if x.len() < w2 {
        return Err(Error::Filter(format!(
            "signal of {} samples is shorter than the {w2}-sample window",
            x.len()
        )));
    }
    median_filter(&median_filter(x, w1)?, w2)
}

/// `x` minus its median-cascade baseline, at the standard 500 Hz.
pub fn remove_baseline(x: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    let base = baseline(x, spec, SAMPLING_RATE)?;
    Ok(x.iter().zip(&base).map(|(v, b)| v - b).collect())
}

/// Baseline-corrects every lead of a record. High-frequency noise is left alone.
pub fn preprocess_record(record: &EcgRecord, spec: &FilterSpec) -> Result<EcgRecord> {
    record.map_leads(|samples| remove_baseline(samples, spec))
}
