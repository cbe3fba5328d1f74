//! Stub segmenters keyed on the exact input signal.

use std::collections::HashMap;

use crate::dataset::{EcgRecord, Lead, WaveType};
use crate::delineate::Segmenter;
use crate::ensemble::MemberTrainer;
use crate::error::Result;
use crate::nnet::{Tensor1d, BACKGROUND};
use crate::synth::{synth_dataset, SynthConfig};
use crate::train::rasterize_targets;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Knowledge {
    Full,
    /// Every wave except T.
    WithoutT,
}

/// Emits the rasterized truth for patients it knows and pure background
/// for everyone else.
#[derive(Clone)]
pub struct OracleStub {
    truth: HashMap<Vec<u64>, (String, Tensor1d, Tensor1d)>,
    known: HashMap<String, Knowledge>,
}

fn key(signal: &[f64]) -> Vec<u64> {
    signal.iter().map(|v| v.to_bits()).collect()
}

impl OracleStub {
    pub fn new(records: &[EcgRecord], known: impl IntoIterator<Item = (String, Knowledge)>) -> Self {
        let truth = records
            .iter()
            .map(|r| {
                let anns = r.annotations_for(Lead::Ii);
                let full = rasterize_targets(&anns, r.leads[&Lead::Ii].len()).unwrap();
                let no_t: Vec<_> = anns
                    .iter()
                    .copied()
                    .filter(|a| a.wave_type != WaveType::T)
                    .collect();
                let partial = rasterize_targets(&no_t, r.leads[&Lead::Ii].len()).unwrap();
                (key(&r.leads[&Lead::Ii]), (r.patient_id.clone(), full, partial))
            })
            .collect();
        OracleStub {
            truth,
            known: known.into_iter().collect(),
        }
    }

    pub fn knowing<'a>(records: &[EcgRecord], ids: impl IntoIterator<Item = &'a str>) -> Self {
        OracleStub::new(
            records,
            ids.into_iter().map(|id| (id.to_string(), Knowledge::Full)),
        )
    }
}

impl Segmenter for OracleStub {
    fn probabilities(&self, signal: &Tensor1d) -> Result<Tensor1d> {
        let found = self.truth.get(&key(signal.channel(0)));
        match found.and_then(|(id, full, partial)| self.known.get(id).map(|k| (k, full, partial))) {
            Some((Knowledge::Full, full, _)) => Ok(full.clone()),
            Some((Knowledge::WithoutT, _, partial)) => Ok(partial.clone()),
            None => {
                let mut out = Tensor1d::zeros(4, signal.len());
                out.channel_mut(BACKGROUND).fill(1.0);
                Ok(out)
            }
        }
    }
}

/// Trains stubs that learn `fraction` of their subset (rounded up), in subset order.
pub struct FractionTrainer {
    pub records: Vec<EcgRecord>,
    pub fraction: f64,
    pub calls: usize,
}

impl MemberTrainer for FractionTrainer {
    type Model = OracleStub;

    fn train(&mut self, records: &[&EcgRecord], _seed: u64) -> Result<OracleStub> {
        self.calls += 1;
        let take = (records.len() as f64 * self.fraction).ceil() as usize;
        Ok(OracleStub::knowing(
            &self.records,
            records.iter().take(take).map(|r| r.patient_id.as_str()),
        ))
    }
}

pub fn clean_records(count: usize) -> Vec<EcgRecord> {
    let config = SynthConfig {
        noise_mv: 0.0,
        wander_mv: 0.0,
        ..SynthConfig::default()
    };
    synth_dataset(count, 5, &config)
}
