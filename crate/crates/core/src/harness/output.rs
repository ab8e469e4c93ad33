//! CSV and JSON result files.
//!
//! CSV: fixed header, one row per trial, then a single footer line
//! `#summary,key=value,...` whose values are JSON scalars. JSON:
//! `{"trials": [...], "summary": {...}}`.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::experiment::{ExperimentReport, Summary, TrialRecord};
use super::HarnessError;

pub const CSV_HEADER: &[&str] = &[
    "trial",
    "true_az_deg",
    "true_el_deg",
    "true_d_ur_m",
    "est_az_deg",
    "est_el_deg",
    "est_d_ur_m",
    "angle_error_deg",
    "range_error_m",
    "position_error_m",
    "ambiguous",
    "best_rssi_dbm",
    "p_connected_dbm",
    "p_bs_dbm",
    "sweep_evaluations",
    "trace_ref",
    "error",
];

pub const SUMMARY_PREFIX: &str = "#summary";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(HarnessError::Config(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonDocument {
    trials: Vec<TrialRecord>,
    summary: Summary,
}

fn fmt_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Format(e.to_string())
}

pub fn write_csv(records: &[TrialRecord], summary: &Summary, out: &mut impl Write) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(fmt_err)?;
    for r in records {
        w.serialize(r).map_err(fmt_err)?;
    }
    let mut bytes = w.into_inner().map_err(fmt_err)?;

    let Value::Object(fields) = serde_json::to_value(summary).map_err(fmt_err)? else {
        unreachable!("summary is a struct");
    };
    let mut footer = String::from(SUMMARY_PREFIX);
    for (k, v) in fields {
        footer.push_str(&format!(",{k}={v}"));
    }
    footer.push('\n');
    bytes.extend_from_slice(footer.as_bytes());
    out.write_all(&bytes).map_err(fmt_err)
}

pub fn write_json(records: &[TrialRecord], summary: &Summary, out: &mut impl Write) -> Result<(), HarnessError> {
    let doc = JsonDocument { trials: records.to_vec(), summary: summary.clone() };
    let mut text = serde_json::to_string_pretty(&doc).map_err(fmt_err)?;
    text.push('\n');
    out.write_all(text.as_bytes()).map_err(fmt_err)
}

pub fn parse_csv(text: &str) -> Result<(Vec<TrialRecord>, Summary), HarnessError> {
    let mut body = String::new();
    let mut footer = None;
    for line in text.lines() {
        match line.strip_prefix(SUMMARY_PREFIX) {
            Some(rest) => footer = Some(rest.to_string()),
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers().map_err(fmt_err)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(HarnessError::Format(format!("unexpected CSV header {header:?}")));
    }
    let records = reader.deserialize().collect::<Result<Vec<TrialRecord>, _>>().map_err(fmt_err)?;

    let footer = footer.ok_or_else(|| HarnessError::Format("missing #summary footer".into()))?;
    let mut fields = Map::new();
    for pair in footer.split(',').filter(|p| !p.is_empty()) {
        let (k, v) = pair.split_once('=').ok_or_else(|| HarnessError::Format(format!("bad summary field `{pair}`")))?;
        fields.insert(k.to_string(), serde_json::from_str(v).map_err(fmt_err)?);
    }
    let summary = serde_json::from_value(Value::Object(fields)).map_err(fmt_err)?;
    Ok((records, summary))
}

pub fn parse_json(text: &str) -> Result<(Vec<TrialRecord>, Summary), HarnessError> {
    let doc: JsonDocument = serde_json::from_str(text).map_err(fmt_err)?;
    Ok((doc.trials, doc.summary))
}

pub fn read_csv(path: &Path) -> Result<(Vec<TrialRecord>, Summary), HarnessError> {
    parse_csv(&fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?)
}

pub fn read_json(path: &Path) -> Result<(Vec<TrialRecord>, Summary), HarnessError> {
    parse_json(&fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?)
}

pub fn emit_results(report: &ExperimentReport, format: OutputFormat, path: &Path) -> Result<(), HarnessError> {
    if report.records.is_empty() {
        return Err(HarnessError::Format("no trial records to write".into()));
    }
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(&report.records, &report.summary, &mut buf)?,
        OutputFormat::Json => write_json(&report.records, &report.summary, &mut buf)?,
    }
    fs::write(path, buf).map_err(|e| HarnessError::io(path, e))
}
