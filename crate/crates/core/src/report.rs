//! CSV report files and SVG renderings.
//!
//! Every CSV has a fixed header and is read back by the matching `read_*`
//! function. Undefined values (a ratio with a zero denominator) are empty
//! fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ensemble::{DistillationReport, EnsembleManifest, ProbeRow, ScatterRow, Split, SplitSummary};
use crate::error::{Error, Result};
use crate::evaluate::{MetricsReport, PatientScore, PointMetrics, PointType};

fn csv_err(context: &str) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        context: context.to_string(),
        source,
    }
}

/// Serializes rows with a header line, even when there are no rows.
pub fn to_csv_string<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    writer.write_record(header).map_err(csv_err("writing header"))?;
    for row in rows {
        writer.serialize(row).map_err(csv_err("writing row"))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Csv {
        context: "flushing".into(),
        source: e.into_error().into(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn from_csv_str<T: DeserializeOwned>(header: &[&str], text: &str) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let found = reader.headers().map_err(csv_err("reading header"))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            field: "header".into(),
            message: format!(
                "expected {}, found {}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    reader
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err("reading row"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub const METRICS_HEADER: [&str; 8] = ["point", "se", "ppv", "m", "sigma", "tp", "fp", "fn"];

#[derive(Serialize, Deserialize)]
struct MetricsRow {
    point: PointType,
    se: Option<f64>,
    ppv: Option<f64>,
    m: Option<f64>,
    sigma: Option<f64>,
    tp: usize,
    fp: usize,
    #[serde(rename = "fn")]
    fn_: usize,
}

pub fn metrics_csv(report: &MetricsReport) -> Result<String> {
    let rows: Vec<MetricsRow> = report
        .rows
        .iter()
        .map(|r| MetricsRow {
            point: r.point,
            se: r.se,
            ppv: r.ppv,
            m: r.mean_error,
            sigma: r.std_error,
            tp: r.tp,
            fp: r.fp,
            fn_: r.fn_,
        })
        .collect();
    to_csv_string(&METRICS_HEADER, &rows)
}

pub fn parse_metrics_csv(text: &str) -> Result<MetricsReport> {
    let rows: Vec<MetricsRow> = from_csv_str(&METRICS_HEADER, text)?;
    let order: Vec<PointType> = rows.iter().map(|r| r.point).collect();
    if order != PointType::ALL {
        return Err(Error::Parse {
            field: "point".into(),
            message: "expected one row per point type in canonical order".into(),
        });
    }
    Ok(MetricsReport {
        rows: rows
            .into_iter()
            .map(|r| PointMetrics {
                point: r.point,
                se: r.se,
                ppv: r.ppv,
                mean_error: r.m,
                std_error: r.sigma,
                tp: r.tp,
                fp: r.fp,
                fn_: r.fn_,
            })
            .collect(),
    })
}

pub fn write_metrics(path: impl AsRef<Path>, report: &MetricsReport) -> Result<()> {
    write_file(path.as_ref(), &metrics_csv(report)?)
}

pub fn read_metrics(path: impl AsRef<Path>) -> Result<MetricsReport> {
    parse_metrics_csv(&read_file(path.as_ref())?)
}

pub const PATIENTS_HEADER: [&str; 3] = ["patient_id", "split", "f"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRow {
    pub patient_id: String,
    pub split: Split,
    pub f: f64,
}

pub fn patient_rows(split: Split, scores: &[PatientScore]) -> Vec<PatientRow> {
    scores
        .iter()
        .map(|s| PatientRow {
            patient_id: s.patient_id.clone(),
            split,
            f: s.f,
        })
        .collect()
}

pub fn write_patients(path: impl AsRef<Path>, rows: &[PatientRow]) -> Result<()> {
    write_file(path.as_ref(), &to_csv_string(&PATIENTS_HEADER, rows)?)
}

pub fn read_patients(path: impl AsRef<Path>) -> Result<Vec<PatientRow>> {
    from_csv_str(&PATIENTS_HEADER, &read_file(path.as_ref())?)
}

pub const SCATTER_HEADER: [&str; 4] = ["patient_id", "split", "f_base", "f_ensemble"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterCsvRow {
    pub patient_id: String,
    pub split: Split,
    pub f_base: f64,
    pub f_ensemble: f64,
}

pub fn scattergram_csv(report: &DistillationReport) -> Result<String> {
    let rows: Vec<ScatterCsvRow> = report
        .rows
        .iter()
        .map(|r: &ScatterRow| ScatterCsvRow {
            patient_id: r.patient_id.clone(),
            split: r.split,
            f_base: r.f_base,
            f_ensemble: r.f_ensemble,
        })
        .collect();
    to_csv_string(&SCATTER_HEADER, &rows)
}

pub fn read_scattergram(path: impl AsRef<Path>) -> Result<Vec<ScatterCsvRow>> {
    from_csv_str(&SCATTER_HEADER, &read_file(path.as_ref())?)
}

pub const SUMMARY_HEADER: [&str; 6] = [
    "split",
    "patients",
    "overall_f_base",
    "overall_f_ensemble",
    "outliers_base",
    "outliers_ensemble",
];

pub fn summary_csv(summary: &[SplitSummary]) -> Result<String> {
    to_csv_string(&SUMMARY_HEADER, summary)
}

pub fn read_summary(path: impl AsRef<Path>) -> Result<Vec<SplitSummary>> {
    from_csv_str(&SUMMARY_HEADER, &read_file(path.as_ref())?)
}

pub const STAGE_HEADER: [&str; 3] = ["iteration", "subset_size", "retrains"];

/// Row `k` is the subset left after `k` accepted members and the fruitless
/// retrains spent on it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRow {
    pub iteration: usize,
    pub subset_size: usize,
    pub retrains: usize,
}

pub fn stage_rows(manifest: &EnsembleManifest) -> Vec<StageRow> {
    manifest
        .history
        .iter()
        .zip(manifest.stage_retrains())
        .enumerate()
        .map(|(iteration, (&subset_size, retrains))| StageRow {
            iteration,
            subset_size,
            retrains,
        })
        .collect()
}

pub fn write_stage_history(path: impl AsRef<Path>, manifest: &EnsembleManifest) -> Result<()> {
    write_file(
        path.as_ref(),
        &to_csv_string(&STAGE_HEADER, &stage_rows(manifest))?,
    )
}

pub fn read_stage_history(path: impl AsRef<Path>) -> Result<Vec<StageRow>> {
    from_csv_str(&STAGE_HEADER, &read_file(path.as_ref())?)
}

pub const PROBE_HEADER: [&str; 5] = ["member", "subset_size", "own_good", "unseen_size", "unseen_good"];

pub fn write_probe(path: impl AsRef<Path>, rows: &[ProbeRow]) -> Result<()> {
    write_file(path.as_ref(), &to_csv_string(&PROBE_HEADER, rows)?)
}

pub fn read_probe(path: impl AsRef<Path>) -> Result<Vec<ProbeRow>> {
    from_csv_str(&PROBE_HEADER, &read_file(path.as_ref())?)
}

pub fn write_distillation(dir: impl AsRef<Path>, report: &DistillationReport) -> Result<()> {
    let dir = dir.as_ref();
    write_file(&dir.join("scattergram.csv"), &scattergram_csv(report)?)?;
    write_file(&dir.join("summary.csv"), &summary_csv(&report.summary)?)?;
    write_file(&dir.join("scattergram.svg"), &scattergram_svg(report))
}

const SIZE: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn svg_open(out: &mut String, width: f64, height: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

/// Base-network F against ensemble F, one panel per split.
pub fn scattergram_svg(report: &DistillationReport) -> String {
    let panel = SIZE + 2.0 * MARGIN;
    let mut out = String::new();
    svg_open(&mut out, 2.0 * panel, panel);
    for (i, split) in [Split::Train, Split::Test].into_iter().enumerate() {
        let x0 = i as f64 * panel + MARGIN;
        let y0 = MARGIN;
        let px = |f: f64| x0 + f.clamp(0.0, 1.0) * SIZE;
        let py = |f: f64| y0 + (1.0 - f.clamp(0.0, 1.0)) * SIZE;
        let _ = writeln!(out, r#"<g id="{}">"#, split.name());
        let _ = writeln!(
            out,
            r#"<rect x="{x0}" y="{y0}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 3"/>"##,
            px(0.0),
            py(0.0),
            px(1.0),
            py(1.0)
        );
        let t = report.outlier_threshold;
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c33" stroke-width="0.5"/>"##,
            px(t),
            py(0.0),
            px(t),
            py(1.0)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#c33" stroke-width="0.5"/>"##,
            px(0.0),
            py(t),
            px(1.0),
            py(t)
        );
        for row in report.rows.iter().filter(|r| r.split == split) {
            let colour = if row.outlier_ensemble { "#c33" } else { "#246" };
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}" fill-opacity="0.6"><title>{} {:.4} {:.4}</title></circle>"#,
                px(row.f_base),
                py(row.f_ensemble),
                xml_escape(&row.patient_id),
                row.f_base,
                row.f_ensemble
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">{} F, base network</text>"#,
            x0 + SIZE / 2.0,
            y0 + SIZE + 32.0,
            split.name()
        );
        let _ = writeln!(
            out,
            r#"<text transform="translate({} {}) rotate(-90)" text-anchor="middle">F, ensemble</text>"#,
            x0 - 30.0,
            y0 + SIZE / 2.0
        );
        for tick in [0.0, 0.5, 1.0] {
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="middle">{tick}</text>"#,
                px(tick),
                y0 + SIZE + 14.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#,
                x0 - 4.0,
                py(tick) + 4.0
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Subset size after each accepted member, as a step plot.
pub fn stage_history_svg(rows: &[StageRow]) -> String {
    let width = SIZE + 2.0 * MARGIN;
    let mut out = String::new();
    svg_open(&mut out, width, width);
    let max_size = rows.iter().map(|r| r.subset_size).max().unwrap_or(0).max(1) as f64;
    let steps = rows.len().saturating_sub(1).max(1) as f64;
    let px = |i: usize| MARGIN + i as f64 / steps * SIZE;
    let py = |n: usize| MARGIN + (1.0 - n as f64 / max_size) * SIZE;
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let points: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.2},{:.2}", px(r.iteration), py(r.subset_size)))
        .collect();
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#246" stroke-width="1.5"/>"##,
        points.join(" ")
    );
    for r in rows {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="#246"><title>{}: {} ({} retrains)</title></circle>"##,
            px(r.iteration),
            py(r.subset_size),
            r.iteration,
            r.subset_size,
            r.retrains
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">accepted members</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE + 32.0
    );
    let _ = writeln!(
        out,
        r#"<text transform="translate({} {}) rotate(-90)" text-anchor="middle">patients remaining (max {})</text>"#,
        MARGIN - 20.0,
        MARGIN + SIZE / 2.0,
        max_size
    );
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
