//! Patient records, the per-patient interchange file, and the train/test split.
//!
//! A record file is a JSON document:
//!
//! ```json
//! {
//!   "patient_id": "17",
//!   "fs": 500,
//!   "leads": { "i": [0.012, ...], "ii": [...], ... },
//!   "annotations": { "ii": [["p", 90, 101, 112], ["qrs", 140, 152, 180], ...] }
//! }
//! ```
//!
//! Every lead holds exactly [`RECORD_LEN`] millivolt samples. Annotation
//! entries are `[type, onset, peak, offset]` with `type` one of `"p"`, `"qrs"`,
//! `"t"`. A dataset directory also holds a `manifest.json` listing the record
//! files and the split seed.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SAMPLING_RATE: u32 = 500;
/// Ten seconds at 500 Hz.
pub const RECORD_LEN: usize = 5000;
pub const DATASET_SIZE: usize = 200;
pub const TRAIN_SIZE: usize = 134;
pub const TEST_SIZE: usize = 66;
pub const MANIFEST_FILE: &str = "manifest.json";

/// The twelve standard leads, in conventional order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lead {
    I,
    Ii,
    Iii,
    Avr,
    Avl,
    Avf,
    V1,
    V2,
    V3,
    V4,
    V5,
    V6,
}

impl Lead {
    pub const ALL: [Lead; 12] = [
        Lead::I,
        Lead::Ii,
        Lead::Iii,
        Lead::Avr,
        Lead::Avl,
        Lead::Avf,
        Lead::V1,
        Lead::V2,
        Lead::V3,
        Lead::V4,
        Lead::V5,
        Lead::V6,
    ];

    /// Lead used for training and scoring unless configured otherwise.
    pub const DEFAULT: Lead = Lead::Ii;

    pub fn name(self) -> &'static str {
        match self {
            Lead::I => "i",
            Lead::Ii => "ii",
            Lead::Iii => "iii",
            Lead::Avr => "avr",
            Lead::Avl => "avl",
            Lead::Avf => "avf",
            Lead::V1 => "v1",
            Lead::V2 => "v2",
            Lead::V3 => "v3",
            Lead::V4 => "v4",
            Lead::V5 => "v5",
            Lead::V6 => "v6",
        }
    }
}

impl fmt::Display for Lead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Lead::ALL
            .into_iter()
            .find(|lead| lead.name() == lower)
            .ok_or_else(|| Error::UnknownLead(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveType {
    P,
    Qrs,
    T,
}

impl WaveType {
    pub const ALL: [WaveType; 3] = [WaveType::P, WaveType::Qrs, WaveType::T];

    pub fn name(self) -> &'static str {
        match self {
            WaveType::P => "p",
            WaveType::Qrs => "qrs",
            WaveType::T => "t",
        }
    }

    /// Output channel of the segmentation network carrying this wave.
    pub fn channel(self) -> usize {
        match self {
            WaveType::P => 0,
            WaveType::Qrs => 1,
            WaveType::T => 2,
        }
    }
}

impl FromStr for WaveType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(WaveType::P),
            "qrs" => Ok(WaveType::Qrs),
            "t" => Ok(WaveType::T),
            other => Err(Error::parse(
                "annotations",
                format!("unknown wave type `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    from = "(WaveType, usize, usize, usize)",
    into = "(WaveType, usize, usize, usize)"
)]
pub struct WaveAnnotation {
    pub wave_type: WaveType,
    pub onset: usize,
    pub peak: usize,
    pub offset: usize,
}

impl WaveAnnotation {
    pub fn new(wave_type: WaveType, onset: usize, peak: usize, offset: usize) -> Self {
        WaveAnnotation {
            wave_type,
            onset,
            peak,
            offset,
        }
    }
}

impl From<(WaveType, usize, usize, usize)> for WaveAnnotation {
    fn from((wave_type, onset, peak, offset): (WaveType, usize, usize, usize)) -> Self {
        WaveAnnotation::new(wave_type, onset, peak, offset)
    }
}

impl From<WaveAnnotation> for (WaveType, usize, usize, usize) {
    fn from(a: WaveAnnotation) -> Self {
        (a.wave_type, a.onset, a.peak, a.offset)
    }
}

/// One patient: twelve leads of millivolt samples plus per-lead expert annotations.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EcgRecord {
    pub patient_id: String,
    #[serde(rename = "fs")]
    pub sampling_rate: u32,
    pub leads: BTreeMap<Lead, Vec<f64>>,
    pub annotations: BTreeMap<Lead, Vec<WaveAnnotation>>,
}

impl EcgRecord {
    /// Checks every record invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        if self.sampling_rate != SAMPLING_RATE {
            violations.push(format!("sampling rate {} != {SAMPLING_RATE}", self.sampling_rate));
        }
        for lead in Lead::ALL {
            match self.leads.get(&lead) {
                None => violations.push(format!("missing lead {lead}")),
                Some(samples) => {
                    if samples.len() != RECORD_LEN {
                        violations.push(format!(
                            "lead length: lead {lead} has {} samples, expected {RECORD_LEN}",
                            samples.len()
                        ));
                    }
                    if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
                        violations.push(format!("lead {lead} sample {i} is not finite"));
                    }
                }
            }
        }
        for (lead, waves) in &self.annotations {
            for w in waves {
                let name = w.wave_type.name();
                if w.onset >= RECORD_LEN || w.peak >= RECORD_LEN || w.offset >= RECORD_LEN {
                    violations.push(format!(
                        "lead {lead} {name} wave [{}, {}, {}] out of range [0, {RECORD_LEN})",
                        w.onset, w.peak, w.offset
                    ));
                }
                if w.onset > w.peak {
                    violations.push(format!(
                        "lead {lead} {name} wave violates onset ≤ peak (onset {}, peak {})",
                        w.onset, w.peak
                    ));
                }
                if w.peak > w.offset {
                    violations.push(format!(
                        "lead {lead} {name} wave violates peak ≤ offset (peak {}, offset {})",
                        w.peak, w.offset
                    ));
                }
            }
            for wave_type in WaveType::ALL {
                let mut spans: Vec<_> = waves
                    .iter()
                    .filter(|w| w.wave_type == wave_type)
                    .map(|w| (w.onset, w.offset))
                    .collect();
                spans.sort_unstable();
                for pair in spans.windows(2) {
                    if pair[1].0 <= pair[0].1 {
                        violations.push(format!(
                            "lead {lead} {} waves overlap: [{}, {}] and [{}, {}]",
                            wave_type.name(),
                            pair[0].0,
                            pair[0].1,
                            pair[1].0,
                            pair[1].1
                        ));
                    }
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation {
                patient_id: self.patient_id.clone(),
                violations,
            })
        }
    }

    /// Expert annotations for `lead`, sorted by onset. Empty if the lead is unannotated.
    pub fn annotations_for(&self, lead: Lead) -> Vec<WaveAnnotation> {
        let mut waves = self.annotations.get(&lead).cloned().unwrap_or_default();
        waves.sort_by_key(|w| (w.onset, w.wave_type));
        waves
    }

    /// Applies `f` to every lead, keeping annotations.
    pub fn map_leads<F>(&self, f: F) -> Result<EcgRecord>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
    {
        use rayon::prelude::*;
        let leads = self
            .leads
            .par_iter()
            .map(|(lead, samples)| Ok((*lead, f(samples)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(EcgRecord {
            patient_id: self.patient_id.clone(),
            sampling_rate: self.sampling_rate,
            leads,
            annotations: self.annotations.clone(),
        })
    }
}

/// Returns the 5000-sample signal of `lead`.
pub fn select_lead<'a>(record: &'a EcgRecord, lead: &str) -> Result<&'a [f64]> {
    let lead: Lead = lead.parse()?;
    lead_signal(record, lead)
}

pub fn lead_signal(record: &EcgRecord, lead: Lead) -> Result<&[f64]> {
    record
        .leads
        .get(&lead)
        .map(Vec::as_slice)
        .ok_or_else(|| Error::UnknownLead(lead.name().to_string()))
}

/// Signal of the default training lead.
pub fn select_default_lead(record: &EcgRecord) -> Result<&[f64]> {
    lead_signal(record, Lead::DEFAULT)
}

fn field<'a>(obj: &'a serde_json::Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::parse(name, "missing field"))
}

fn index_value(v: &Value, field: &str) -> Result<usize> {
    v.as_u64()
        .map(|i| i as usize)
        .ok_or_else(|| Error::parse(field, format!("expected a non-negative integer, got {v}")))
}

/// Parses a record from interchange text and validates it.
pub fn parse_record_str(text: &str) -> Result<EcgRecord> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::parse("<document>", e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::parse("<document>", "expected a JSON object"))?;

    let patient_id = match field(obj, "patient_id")? {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        other => {
            return Err(Error::parse(
                "patient_id",
                format!("expected a string, got {other}"),
            ))
        }
    };
    let sampling_rate = field(obj, "fs")?
        .as_u64()
        .and_then(|v| u32::try_from(v).ok())
        .ok_or_else(|| Error::parse("fs", "expected a positive integer"))?;

    let leads_obj = field(obj, "leads")?
        .as_object()
        .ok_or_else(|| Error::parse("leads", "expected an object of lead arrays"))?;
    let mut leads = BTreeMap::new();
    for (name, samples) in leads_obj {
        let lead: Lead = name
            .parse()
            .map_err(|_| Error::parse(format!("leads.{name}"), "unknown lead name"))?;
        let arr = samples
            .as_array()
            .ok_or_else(|| Error::parse(format!("leads.{name}"), "expected an array"))?;
        let values = arr
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.as_f64()
                    .ok_or_else(|| Error::parse(format!("leads.{name}[{i}]"), "expected a number"))
            })
            .collect::<Result<Vec<f64>>>()?;
        leads.insert(lead, values);
    }

    let mut annotations = BTreeMap::new();
    if let Some(ann) = obj.get("annotations") {
        let ann_obj = ann
            .as_object()
            .ok_or_else(|| Error::parse("annotations", "expected an object keyed by lead"))?;
        for (name, waves) in ann_obj {
            let path = format!("annotations.{name}");
            let lead: Lead = name
                .parse()
                .map_err(|_| Error::parse(&path, "unknown lead name"))?;
            let arr = waves
                .as_array()
                .ok_or_else(|| Error::parse(&path, "expected an array"))?;
            let mut parsed = Vec::with_capacity(arr.len());
            for (i, entry) in arr.iter().enumerate() {
                let entry_path = format!("{path}[{i}]");
                let items = entry
                    .as_array()
                    .filter(|a| a.len() == 4)
                    .ok_or_else(|| Error::parse(&entry_path, "expected [type, onset, peak, offset]"))?;
                let wave_type: WaveType = items[0]
                    .as_str()
                    .ok_or_else(|| Error::parse(&entry_path, "wave type must be a string"))?
                    .parse()
                    .map_err(|_| Error::parse(&entry_path, format!("unknown wave type {}", items[0])))?;
                parsed.push(WaveAnnotation::new(
                    wave_type,
                    index_value(&items[1], &entry_path)?,
                    index_value(&items[2], &entry_path)?,
                    index_value(&items[3], &entry_path)?,
                ));
            }
            annotations.insert(lead, parsed);
        }
    }

    let record = EcgRecord {
        patient_id,
        sampling_rate,
        leads,
        annotations,
    };
    record.validate()?;
    Ok(record)
}

pub fn parse_record(path: impl AsRef<Path>) -> Result<EcgRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_record_str(&text)
}

pub fn record_to_string(record: &EcgRecord) -> Result<String> {
    serde_json::to_string(record).map_err(|source| Error::Json {
        context: format!("serializing record {}", record.patient_id),
        source,
    })
}

/// Writes `record` in the interchange format. The record is validated first.
pub fn write_record(record: &EcgRecord, path: impl AsRef<Path>) -> Result<()> {
    record.validate()?;
    let path = path.as_ref();
    fs::write(path, record_to_string(record)?).map_err(|e| Error::io(path, e))
}

/// File name used for a patient inside a dataset directory.
pub fn record_file_name(patient_id: &str) -> String {
    format!("{patient_id}.json")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    /// Record files relative to the manifest's directory.
    pub records: Vec<String>,
}

impl DatasetManifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing manifest".into(),
            source,
        })?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// Reads every record a dataset manifest lists, in manifest order.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<EcgRecord>)> {
    use rayon::prelude::*;
    let dir = dir.as_ref();
    let manifest = DatasetManifest::load(dir)?;
    let records = manifest
        .records
        .par_iter()
        .map(|file| parse_record(dir.join(file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, records))
}

/// Writes records plus a manifest into `dir`, returning the written paths.
pub fn write_dataset(dir: impl AsRef<Path>, records: &[EcgRecord], seed: u64) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::with_capacity(records.len());
    let mut paths = Vec::with_capacity(records.len());
    for record in records {
        let name = record_file_name(&record.patient_id);
        let path = dir.join(&name);
        write_record(record, &path)?;
        files.push(name);
        paths.push(path);
    }
    DatasetManifest { seed, records: files }.save(dir)?;
    Ok(paths)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

impl DatasetSplit {
    pub fn is_train(&self, id: &str) -> bool {
        self.train_ids.iter().any(|t| t == id)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            context: "serializing split".into(),
            source,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            context: format!("parsing {}", path.display()),
            source,
        })
    }
}

/// Partitions 200 distinct patients into 134 train / 66 test, deterministically in `seed`.
///
/// The result depends only on the set of ids, not their order.
pub fn split_dataset(ids: &[String], seed: u64) -> Result<DatasetSplit> {
    let unique: BTreeSet<&String> = ids.iter().collect();
    if ids.len() != DATASET_SIZE || unique.len() != ids.len() {
        return Err(Error::SplitSize {
            expected: DATASET_SIZE,
            actual: unique.len().min(ids.len()),
        });
    }
    let mut shuffled: Vec<String> = unique.into_iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let mut test_ids = shuffled.split_off(TRAIN_SIZE);
    let mut train_ids = shuffled;
    train_ids.sort_by(|a, b| natural_cmp(a, b));
    test_ids.sort_by(|a, b| natural_cmp(a, b));
    Ok(DatasetSplit {
        train_ids,
        test_ids,
        seed,
    })
}

/// Orders numeric ids numerically ("2" < "10"), everything else lexically.
pub fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Records whose id appears in `ids`, in `ids` order.
pub fn subset<'a, R: Borrow<EcgRecord>>(records: &'a [R], ids: &[String]) -> Vec<&'a EcgRecord> {
    let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
    let mut picked: Vec<&EcgRecord> = records
        .iter()
        .map(Borrow::borrow)
        .filter(|r| wanted.contains(r.patient_id.as_str()))
        .collect();
    let order: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    picked.sort_by_key(|r| order[r.patient_id.as_str()]);
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flat_record(id: &str) -> EcgRecord {
        let leads = Lead::ALL
            .into_iter()
            .map(|l| (l, vec![0.0; RECORD_LEN]))
            .collect();
        let mut annotations = BTreeMap::new();
        annotations.insert(
            Lead::Ii,
            vec![
                WaveAnnotation::new(WaveType::P, 90, 95, 99),
                WaveAnnotation::new(WaveType::Qrs, 100, 120, 140),
                WaveAnnotation::new(WaveType::T, 200, 240, 280),
            ],
        );
        EcgRecord {
            patient_id: id.to_string(),
            sampling_rate: SAMPLING_RATE,
            leads,
            annotations,
        }
    }

    #[test]
    fn well_formed_record_parses() {
        let rec = flat_record("1");
        let text = record_to_string(&rec).unwrap();
        let parsed = parse_record_str(&text).unwrap();
        assert_eq!(parsed.leads.len(), 12);
        assert_eq!(parsed, rec);
    }

    #[test]
    fn short_lead_is_rejected() {
        let mut rec = flat_record("1");
        rec.leads.get_mut(&Lead::Ii).unwrap().pop();
        let text = record_to_string(&rec).unwrap();
        let err = parse_record_str(&text).unwrap_err();
        assert!(err.to_string().contains("lead length"), "{err}");
    }

    #[test]
    fn onset_after_peak_is_rejected() {
        let mut rec = flat_record("1");
        rec.annotations
            .insert(Lead::Ii, vec![WaveAnnotation::new(WaveType::P, 120, 100, 130)]);
        let err = parse_record_str(&record_to_string(&rec).unwrap()).unwrap_err();
        assert!(err.to_string().contains("onset ≤ peak"), "{err}");
    }

    #[test]
    fn all_violations_are_listed() {
        let mut rec = flat_record("9");
        rec.sampling_rate = 250;
        rec.leads.remove(&Lead::V6);
        rec.annotations.insert(
            Lead::Ii,
            vec![
                WaveAnnotation::new(WaveType::T, 10, 20, 30),
                WaveAnnotation::new(WaveType::T, 25, 27, 40),
                WaveAnnotation::new(WaveType::Qrs, 4990, 4995, 5000),
            ],
        );
        match rec.validate().unwrap_err() {
            Error::Validation { violations, .. } => {
                assert_eq!(violations.len(), 4, "{violations:?}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_fields_are_named() {
        let err = parse_record_str(r#"{"patient_id": "1", "leads": {}}"#).unwrap_err();
        assert!(
            matches!(err, Error::Parse { ref field, .. } if field == "fs"),
            "{err}"
        );

        let err =
            parse_record_str(r#"{"patient_id": "1", "fs": 500, "leads": {"ii": [1, "x"]}}"#).unwrap_err();
        assert!(
            matches!(err, Error::Parse { ref field, .. } if field == "leads.ii[1]"),
            "{err}"
        );

        let err = parse_record_str(
            r#"{"patient_id": "1", "fs": 500, "leads": {}, "annotations": {"ii": [["u", 1, 2, 3]]}}"#,
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Parse { ref field, .. } if field == "annotations.ii[0]"),
            "{err}"
        );
    }

    #[test]
    fn lead_lookup() {
        let rec = flat_record("1");
        assert_eq!(select_lead(&rec, "ii").unwrap().len(), RECORD_LEN);
        assert!(matches!(select_lead(&rec, "v9"), Err(Error::UnknownLead(_))));
        assert_eq!(
            select_default_lead(&rec).unwrap(),
            select_lead(&rec, "ii").unwrap()
        );
        assert_eq!("AVR".parse::<Lead>().unwrap(), Lead::Avr);
    }

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| i.to_string()).collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let all = ids(200);
        let split = split_dataset(&all, 0).unwrap();
        assert_eq!(split.train_ids.len(), 134);
        assert_eq!(split.test_ids.len(), 66);
        assert_eq!(split, split_dataset(&all, 0).unwrap());

        let mut reversed = all.clone();
        reversed.reverse();
        assert_eq!(split, split_dataset(&reversed, 0).unwrap());
        assert_ne!(split.train_ids, split_dataset(&all, 1).unwrap().train_ids);

        let union: BTreeSet<_> = split.train_ids.iter().chain(&split.test_ids).collect();
        assert_eq!(union.len(), 200);
    }

    #[test]
    fn split_rejects_wrong_population() {
        assert!(matches!(
            split_dataset(&ids(199), 0),
            Err(Error::SplitSize { .. })
        ));
        let mut dup = ids(200);
        dup[5] = "1".into();
        assert!(split_dataset(&dup, 0).is_err());
    }

    #[test]
    fn dataset_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![flat_record("2"), flat_record("10")];
        write_dataset(dir.path(), &recs, 7).unwrap();
        let (manifest, loaded) = load_dataset(dir.path()).unwrap();
        assert_eq!(manifest.seed, 7);
        assert_eq!(loaded, recs);
    }
}
