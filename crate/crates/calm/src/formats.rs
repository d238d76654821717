//! On-disk formats: query pools, intensity shapes, traces and result CSVs.
//!
//! All files are UTF-8 with LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use calm_core::stats::{RequestRecord, RunSummary};
use calm_core::workload::TraceEntry;
use serde::{Deserialize, Serialize};

use crate::Error;

pub const TRACE_HEADER: &str = "# calm-trace v1";

pub const RECORD_COLUMNS: [&str; 11] = [
    "request_id",
    "arrival_s",
    "domain",
    "selected_model",
    "queue_wait_s",
    "service_s",
    "end_to_end_s",
    "energy_j",
    "rating",
    "cold_start",
    "cache_hit",
];

/// One query per non-blank line.
pub fn read_query_pool(path: &Path) -> Result<Vec<String>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// One non-negative intensity per line; blank lines and `#` comments skipped.
pub fn read_shape(path: &Path) -> Result<Vec<f64>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_shape(&text).map_err(|msg| Error::Format {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn parse_shape(text: &str) -> Result<Vec<f64>, String> {
    text.lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| format!("line {}: {e}", i + 1))
                .and_then(|v| {
                    if v >= 0.0 && v.is_finite() {
                        Ok(v)
                    } else {
                        Err(format!("line {}: intensity must be non-negative", i + 1))
                    }
                })
        })
        .collect()
}

pub fn encode_trace(trace: &[TraceEntry]) -> Result<String, String> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for (i, e) in trace.iter().enumerate() {
        for (field, v) in [("domain", &e.domain), ("query_text", &e.query_text)] {
            if v.contains(['\t', '\n', '\r']) {
                return Err(format!("entry {i}: {field} contains a tab or newline"));
            }
        }
        writeln!(out, "{}\t{}\t{}\t{}", e.arrival_s, e.domain, e.max_tokens, e.query_text)
            .expect("write to string");
    }
    Ok(out)
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceEntry>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == TRACE_HEADER => {}
        _ => return Err(format!("missing `{TRACE_HEADER}` header")),
    }
    let mut out = Vec::new();
    let mut last = 0.0f64;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, '\t');
        let (Some(a), Some(d), Some(m), Some(q)) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("line {lineno}: expected 4 tab-separated fields"));
        };
        let arrival_s: f64 = a.parse().map_err(|e| format!("line {lineno}: arrival_s: {e}"))?;
        let max_tokens: u32 = m.parse().map_err(|e| format!("line {lineno}: max_tokens: {e}"))?;
        if !(arrival_s >= last) || !arrival_s.is_finite() {
            return Err(format!("line {lineno}: arrival times must be non-decreasing"));
        }
        if max_tokens == 0 {
            return Err(format!("line {lineno}: max_tokens must be positive"));
        }
        last = arrival_s;
        out.push(TraceEntry {
            arrival_s,
            domain: d.to_string(),
            query_text: q.to_string(),
            max_tokens,
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceEntry>, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text).map_err(|msg| Error::Format {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<(), Error> {
    let text = encode_trace(trace).map_err(|msg| Error::Format {
        path: path.to_path_buf(),
        msg,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn records_to_csv(records: &[RequestRecord]) -> Result<Vec<u8>, Error> {
    let mut w = csv_writer(Vec::new());
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn records_from_csv(bytes: &[u8]) -> Result<Vec<RequestRecord>, Error> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != RECORD_COLUMNS {
        return Err(Error::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {header:?}"),
        ))));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub const SUMMARY_COLUMNS: [&str; 13] = [
    "grid_point",
    "requests",
    "mean_latency_s",
    "latency_variance_s2",
    "p50_latency_s",
    "p90_latency_s",
    "p95_latency_s",
    "p99_latency_s",
    "mean_confidence",
    "total_energy_kj",
    "cache_hit_rate",
    "cold_starts",
    "peak_footprint_mb",
];

/// A row of a sweep comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_point: String,
    pub requests: usize,
    pub mean_latency_s: f64,
    pub latency_variance_s2: f64,
    pub p50_latency_s: f64,
    pub p90_latency_s: f64,
    pub p95_latency_s: f64,
    pub p99_latency_s: f64,
    pub mean_confidence: f64,
    pub total_energy_kj: f64,
    pub cache_hit_rate: f64,
    pub cold_starts: usize,
    pub peak_footprint_mb: f64,
}

impl SummaryRow {
    pub fn new(grid_point: impl Into<String>, s: &RunSummary) -> Self {
        Self {
            grid_point: grid_point.into(),
            requests: s.requests,
            mean_latency_s: s.mean_latency_s,
            latency_variance_s2: s.latency_variance_s2,
            p50_latency_s: s.p50_latency_s,
            p90_latency_s: s.p90_latency_s,
            p95_latency_s: s.p95_latency_s,
            p99_latency_s: s.p99_latency_s,
            mean_confidence: s.mean_confidence,
            total_energy_kj: s.total_energy_kj,
            cache_hit_rate: s.cache_hit_rate,
            cold_starts: s.cold_starts,
            peak_footprint_mb: s.peak_footprint_mb,
        }
    }
}

pub fn summaries_to_csv(rows: &[SummaryRow]) -> Result<Vec<u8>, Error> {
    let mut w = csv_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn summaries_from_csv(bytes: &[u8]) -> Result<Vec<SummaryRow>, Error> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
