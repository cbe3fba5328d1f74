//! Minimal reader for the WFDB files of the upstream distribution: text
//! headers, format-16 signal files and MIT-format annotation files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub file: String,
    pub format: u16,
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub description: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub record: String,
    pub sampling_rate: f64,
    pub samples: usize,
    pub signals: Vec<SignalSpec>,
}

fn field<'a>(fields: &[&'a str], i: usize, what: &str) -> Result<&'a str> {
    fields.get(i).copied().ok_or_else(|| anyhow!("missing {what}"))
}

pub fn parse_header(text: &str) -> Result<Header> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let record_line = lines.next().ok_or_else(|| anyhow!("empty header"))?;
    let fields: Vec<&str> = record_line.split_whitespace().collect();
    let record = field(&fields, 0, "record name")?
        .split('/')
        .next()
        .unwrap_or_default()
        .to_string();
    let nsig: usize = field(&fields, 1, "signal count")?
        .parse()
        .context("signal count")?;
    let fs_field = fields.get(2).copied().unwrap_or("250");
    let sampling_rate: f64 = fs_field
        .split(['/', '('])
        .next()
        .unwrap_or_default()
        .parse()
        .with_context(|| format!("sampling frequency `{fs_field}`"))?;
    let samples: usize = field(&fields, 3, "sample count")?
        .parse()
        .context("sample count")?;

    let mut signals = Vec::with_capacity(nsig);
    for (i, line) in lines.take(nsig).enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let ctx = || format!("signal line {}", i + 1);
        let file = field(&f, 0, "file name").with_context(ctx)?.to_string();
        let format_field = field(&f, 1, "format").with_context(ctx)?;
        let format: u16 = format_field
            .split(|c: char| !c.is_ascii_digit())
            .next()
            .unwrap_or_default()
            .parse()
            .with_context(|| format!("format `{format_field}`"))?;
        // gain[(baseline)][/units]
        let gain_field = f.get(2).copied().unwrap_or("200");
        let (gain_part, units) = match gain_field.split_once('/') {
            Some((g, u)) => (g, u.to_string()),
            None => (gain_field, "mV".to_string()),
        };
        let (gain_str, baseline) = match gain_part.split_once('(') {
            Some((g, b)) => (
                g,
                Some(b.trim_end_matches(')').parse::<i32>().context("baseline")?),
            ),
            None => (gain_part, None),
        };
        let mut gain: f64 = gain_str.parse().with_context(|| format!("gain `{gain_field}`"))?;
        if gain == 0.0 {
            gain = 200.0;
        }
        let adc_zero: i32 = f
            .get(4)
            .map(|z| z.parse())
            .transpose()
            .context("adc zero")?
            .unwrap_or(0);
        let description = if f.len() > 8 {
            f[8..].join(" ")
        } else {
            String::new()
        };
        signals.push(SignalSpec {
            file,
            format,
            gain,
            baseline: baseline.unwrap_or(adc_zero),
            units,
            description,
        });
    }
    ensure!(
        signals.len() == nsig,
        "header lists {nsig} signals but describes {}",
        signals.len()
    );
    Ok(Header {
        record,
        sampling_rate,
        samples,
        signals,
    })
}

fn unit_scale(units: &str) -> Result<f64> {
    match units.to_ascii_lowercase().as_str() {
        "mv" => Ok(1.0),
        "uv" | "µv" => Ok(1e-3),
        "v" => Ok(1e3),
        other => bail!("unsupported units `{other}`"),
    }
}

/// Physical signals in mV, one vector per header signal.
pub fn read_signals(header: &Header, dir: &Path) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); header.signals.len()];
    let mut by_file: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in header.signals.iter().enumerate() {
        ensure!(
            s.format == 16,
            "signal {} uses format {}, only 16 is supported",
            i + 1,
            s.format
        );
        by_file.entry(&s.file).or_default().push(i);
    }
    for (file, idx) in by_file {
        let path = dir.join(file);
        let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
        let frame = 2 * idx.len();
        ensure!(
            bytes.len() >= frame * header.samples,
            "{} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            frame * header.samples
        );
        for (slot, &sig) in idx.iter().enumerate() {
            let spec = &header.signals[sig];
            let scale = unit_scale(&spec.units)?;
            out[sig] = (0..header.samples)
                .map(|t| {
                    let at = t * frame + 2 * slot;
                    let digital = i16::from_le_bytes([bytes[at], bytes[at + 1]]);
                    (f64::from(digital) - f64::from(spec.baseline)) / spec.gain * scale
                })
                .collect();
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub sample: usize,
    pub code: u8,
}

const SKIP: u16 = 59;
const NUM: u16 = 60;
const SUB: u16 = 61;
const CHN: u16 = 62;
const AUX: u16 = 63;

/// Decodes an MIT-format annotation file.
pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<Annotation>> {
    let word = |at: usize| -> Result<u16> {
        let pair = bytes
            .get(at..at + 2)
            .ok_or_else(|| anyhow!("annotation file truncated at byte {at}"))?;
        Ok(u16::from_le_bytes([pair[0], pair[1]]))
    };
    let mut out = Vec::new();
    let mut time: i64 = 0;
    let mut at = 0;
    while at + 1 < bytes.len() {
        let w = word(at)?;
        at += 2;
        if w == 0 {
            break;
        }
        let (code, value) = (w >> 10, w & 0x3ff);
        match code {
            SKIP => {
                let high = u32::from(word(at)?);
                let low = u32::from(word(at + 2)?);
                at += 4;
                time += i64::from(((high << 16) | low) as i32);
            }
            NUM | SUB | CHN => {}
            AUX => at += usize::from(value) + usize::from(value) % 2,
            _ => {
                time += i64::from(value);
                let sample = usize::try_from(time).map_err(|_| anyhow!("negative annotation time {time}"))?;
                out.push(Annotation {
                    sample,
                    code: code as u8,
                });
            }
        }
    }
    Ok(out)
}

pub const WAVE_ON: u8 = 39;
pub const WAVE_OFF: u8 = 40;
pub const P_WAVE: u8 = 24;
pub const T_WAVE: u8 = 27;

/// Beat labels that mark a QRS complex.
pub fn is_qrs(code: u8) -> bool {
    matches!(code, 1..=13 | 25 | 30 | 34 | 35 | 38)
}
