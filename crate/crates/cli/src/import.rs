//! `import`: converts the upstream distribution (or already converted
//! files) into a validated interchange directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use ecgseg::dataset::{
    natural_cmp, parse_record, write_dataset, DatasetManifest, EcgRecord, Lead, WaveAnnotation, WaveType,
    MANIFEST_FILE,
};
use log::{debug, info};

use crate::wfdb::{self, Annotation};

/// Pairs `(` wave `)` triples into annotations; incomplete triples are dropped.
pub fn assemble_waves(annotations: &[Annotation]) -> Vec<WaveAnnotation> {
    let mut out = Vec::new();
    let mut onset = None;
    let mut peak: Option<(WaveType, usize)> = None;
    for a in annotations {
        match a.code {
            wfdb::WAVE_ON => {
                onset = Some(a.sample);
                peak = None;
            }
            wfdb::WAVE_OFF => {
                if let (Some(on), Some((wave_type, pk))) = (onset, peak) {
                    out.push(WaveAnnotation::new(wave_type, on, pk, a.sample));
                } else {
                    debug!("unpaired wave boundary at sample {}", a.sample);
                }
                onset = None;
                peak = None;
            }
            code => {
                let wave_type = match code {
                    wfdb::P_WAVE => WaveType::P,
                    wfdb::T_WAVE => WaveType::T,
                    c if wfdb::is_qrs(c) => WaveType::Qrs,
                    _ => continue,
                };
                if onset.is_some() {
                    peak = Some((wave_type, a.sample));
                }
            }
        }
    }
    out
}

/// Reads one upstream record from its header path.
pub fn read_wfdb_record(header_path: &Path) -> Result<EcgRecord> {
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let text =
        fs::read_to_string(header_path).with_context(|| format!("reading {}", header_path.display()))?;
    let header = wfdb::parse_header(&text)?;
    ensure!(
        header.sampling_rate.fract() == 0.0 && header.sampling_rate > 0.0,
        "sampling rate {} is not a whole number",
        header.sampling_rate
    );
    let signals = wfdb::read_signals(&header, dir)?;
    let mut leads = BTreeMap::new();
    for (spec, samples) in header.signals.iter().zip(signals) {
        let lead: Lead = spec.description.parse()?;
        leads.insert(lead, samples);
    }
    let mut annotations = BTreeMap::new();
    for &lead in leads.keys() {
        let path = dir.join(format!("{}.{}", header.record, lead.name()));
        if !path.exists() {
            continue;
        }
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let raw = wfdb::parse_annotations(&bytes).with_context(|| format!("decoding {}", path.display()))?;
        annotations.insert(lead, assemble_waves(&raw));
    }
    Ok(EcgRecord {
        patient_id: header.record.clone(),
        sampling_rate: header.sampling_rate as u32,
        leads,
        annotations,
    })
}

enum Source {
    Manifest(DatasetManifest),
    Wfdb(Vec<PathBuf>),
    Converted(Vec<PathBuf>),
}

fn files_with_extension(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
        .filter(|p| p.file_name().is_some_and(|n| n != MANIFEST_FILE))
        .collect();
    out.sort_by(|a, b| natural_cmp(&a.to_string_lossy(), &b.to_string_lossy()));
    Ok(out)
}

fn detect(src: &Path) -> Result<Source> {
    if src.join(MANIFEST_FILE).is_file() {
        return Ok(Source::Manifest(DatasetManifest::load(src)?));
    }
    let headers = files_with_extension(src, "hea")?;
    if !headers.is_empty() {
        return Ok(Source::Wfdb(headers));
    }
    Ok(Source::Converted(files_with_extension(src, "json")?))
}

/// Converts and validates every record in `src`, then writes them with a
/// manifest to `dst`. Returns the number of records written.
pub fn import(src: &Path, dst: &Path, seed: u64) -> Result<usize> {
    ensure!(src.is_dir(), "{} is not a directory", src.display());
    let attempts: Vec<(String, Result<EcgRecord>)> = match detect(src)? {
        Source::Manifest(manifest) => manifest
            .records
            .iter()
            .map(|f| (f.clone(), parse_record(src.join(f)).map_err(Into::into)))
            .collect(),
        Source::Wfdb(headers) => headers
            .iter()
            .map(|h| {
                let name = h.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                (name, read_wfdb_record(h))
            })
            .collect(),
        Source::Converted(files) => files
            .iter()
            .map(|f| (f.display().to_string(), parse_record(f).map_err(Into::into)))
            .collect(),
    };
    if attempts.is_empty() {
        bail!("no records in {}", src.display());
    }

    let mut records = Vec::with_capacity(attempts.len());
    let mut failures = Vec::new();
    for (name, attempt) in attempts {
        match attempt.and_then(|r| r.validate().map(|()| r).map_err(Into::into)) {
            Ok(r) => records.push(r),
            Err(e) => failures.push(format!("  {name}: {e:#}")),
        }
    }
    if !failures.is_empty() {
        return Err(anyhow!(
            "{} of {} records are invalid:\n{}",
            failures.len(),
            failures.len() + records.len(),
            failures.join("\n")
        ));
    }
    let mut ids: Vec<&str> = records.iter().map(|r| r.patient_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(dup) = ids.windows(2).find(|w| w[0] == w[1]) {
        bail!("patient id {} appears twice", dup[0]);
    }
    write_dataset(dst, &records, seed)?;
    info!("imported {} records into {}", records.len(), dst.display());
    Ok(records.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfdb::tests::encode;
    use crate::wfdb::{P_WAVE, T_WAVE, WAVE_OFF, WAVE_ON};

    #[test]
    fn triples_become_waves() {
        let anns: Vec<Annotation> = [
            (3, 1u8),
            (4, WAVE_OFF),
            (10, WAVE_ON),
            (20, P_WAVE),
            (30, WAVE_OFF),
            (40, WAVE_ON),
            (50, 1),
            (60, WAVE_OFF),
            (70, WAVE_ON),
            (90, T_WAVE),
        ]
        .iter()
        .map(|&(sample, code)| Annotation { sample, code })
        .collect();
        assert_eq!(
            assemble_waves(&anns),
            vec![
                WaveAnnotation::new(WaveType::P, 10, 20, 30),
                WaveAnnotation::new(WaveType::Qrs, 40, 50, 60),
            ]
        );
    }

    /// Writes a 12-lead upstream-style record whose lead ii carries one of each wave.
    pub(crate) fn write_upstream(dir: &Path, name: &str, samples: usize) {
        let mut header = format!("{name} 12 500 {samples}\n");
        for lead in Lead::ALL {
            header.push_str(&format!("{name}.dat 16 1000(0)/mV 16 0 0 0 0 {}\n", lead.name()));
        }
        fs::write(dir.join(format!("{name}.hea")), header).unwrap();
        let data: Vec<u8> = (0..samples)
            .flat_map(|t| (0..12).flat_map(move |s| ((t % 100) as i16 + s as i16).to_le_bytes()))
            .collect();
        fs::write(dir.join(format!("{name}.dat")), data).unwrap();
        let anns = encode(&[
            (100, WAVE_ON),
            (120, P_WAVE),
            (140, WAVE_OFF),
            (200, WAVE_ON),
            (220, 1),
            (240, WAVE_OFF),
            (300, WAVE_ON),
            (360, T_WAVE),
            (420, WAVE_OFF),
        ]);
        fs::write(dir.join(format!("{name}.ii")), anns).unwrap();
    }

    #[test]
    fn upstream_record_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_upstream(dir.path(), "17", 5000);
        let rec = read_wfdb_record(&dir.path().join("17.hea")).unwrap();
        rec.validate().unwrap();
        assert_eq!(rec.patient_id, "17");
        assert_eq!(rec.leads[&Lead::V1][103], (3.0 + 6.0) / 1000.0);
        assert_eq!(rec.annotations_for(Lead::Ii).len(), 3);
        assert!(rec.annotations_for(Lead::I).is_empty());

        let out = dir.path().join("out");
        assert_eq!(import(dir.path(), &out, 0).unwrap(), 1);
        assert_eq!(ecgseg::dataset::load_dataset(&out).unwrap().1, vec![rec]);
    }

    #[test]
    fn invalid_records_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        write_upstream(dir.path(), "1", 5000);
        write_upstream(dir.path(), "2", 4999);
        write_upstream(dir.path(), "3", 4000);
        let err = import(dir.path(), &dir.path().join("out"), 0)
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("2 of 3 records are invalid"), "{err}");
        assert!(err.contains("  2: ") && err.contains("  3: "), "{err}");
        assert!(!dir.path().join("out").exists());
    }

    #[test]
    fn empty_source_has_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let err = import(dir.path(), &dir.path().join("out"), 0).unwrap_err();
        assert!(err.to_string().starts_with("no records"), "{err}");
    }
}
