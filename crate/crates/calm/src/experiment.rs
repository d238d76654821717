//! Runs experiments and parameter sweeps, and writes their results.

use std::fs;
use std::path::Path;
use std::time::Instant;

use calm_core::engine::{simulate, Orchestrator};
use calm_core::stats::{RequestRecord, RunSummary};
use calm_core::workload::{generate_trace, TraceEntry};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{ArrivalConfig, ClockMode, FleetConfig};
use crate::formats::{self, SummaryRow};
use crate::wire;
use crate::Error;

pub const REQUESTS_CSV: &str = "requests.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const TRACE_FILE: &str = "trace.tsv";
pub const SWEEP_CSV: &str = "sweep.csv";

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<RequestRecord>,
    pub summary: RunSummary,
    pub trace: Vec<TraceEntry>,
    /// Wall-clock routing overhead per request, in milliseconds.
    pub decision_times_ms: Vec<f64>,
}

impl ExperimentOutput {
    pub fn csv(&self) -> Result<Vec<u8>, Error> {
        formats::records_to_csv(&self.records)
    }

    pub fn mean_decision_ms(&self) -> f64 {
        if self.decision_times_ms.is_empty() {
            0.0
        } else {
            self.decision_times_ms.iter().sum::<f64>() / self.decision_times_ms.len() as f64
        }
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join(REQUESTS_CSV);
        fs::write(&p, self.csv()?).map_err(|e| Error::io(&p, e))?;
        let p = dir.join(SUMMARY_JSON);
        let mut json = serde_json::to_string_pretty(&self.summary)?;
        json.push('\n');
        fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
        formats::write_trace(&dir.join(TRACE_FILE), &self.trace)
    }
}

/// Builds the orchestrator for a config: profiles first, then models in
/// config order (which becomes fleet order).
pub fn build_orchestrator(config: &FleetConfig) -> Result<Orchestrator, Error> {
    let mut o = Orchestrator::new(config.engine_config())?;
    for p in &config.profiles {
        o.add_profile(p.clone())?;
    }
    for m in &config.models {
        o.register(m.clone())?;
    }
    Ok(o)
}

pub fn load_trace(config: &FleetConfig) -> Result<Vec<TraceEntry>, Error> {
    if let ArrivalConfig::Trace { path } = &config.workload.arrival {
        return formats::read_trace(&config.resolve(path));
    }
    let spec = config
        .workload_spec()?
        .expect("non-trace arrival has a workload spec");
    Ok(generate_trace(&spec, &config.load_pools()?)?)
}

pub fn run_experiment(config: &FleetConfig) -> Result<ExperimentOutput, Error> {
    config.validate()?;
    let trace = load_trace(config)?;
    run_with_trace(config, trace)
}

pub fn run_with_trace(config: &FleetConfig, trace: Vec<TraceEntry>) -> Result<ExperimentOutput, Error> {
    match config.clock {
        ClockMode::Virtual => {
            let mut o = build_orchestrator(config)?;
            let epoch = Instant::now();
            let now_ms = move || epoch.elapsed().as_secs_f64() * 1e3;
            let out = simulate(&mut o, &trace, &now_ms)?;
            Ok(ExperimentOutput {
                decision_times_ms: out.decisions.iter().map(|d| d.decision_time_ms).collect(),
                records: out.records,
                summary: out.summary,
                trace,
            })
        }
        ClockMode::Wall => wire::run_loopback(config, trace),
    }
}

/// Parameter grid: dotted config paths mapped to candidate values. Points are
/// the cartesian product, varying the last key fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grid(pub serde_json::Map<String, Value>);

impl Grid {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let grid: Grid = serde_json::from_str(text)?;
        for (k, v) in &grid.0 {
            if !v.is_array() {
                return Err(Error::Config(vec![format!("grid.{k}: expected a list of values")]));
            }
        }
        Ok(grid)
    }

    pub fn points(&self) -> Vec<Vec<(String, Value)>> {
        if self.0.is_empty() || self.0.values().any(|v| v.as_array().is_none_or(Vec::is_empty)) {
            return Vec::new();
        }
        let mut points: Vec<Vec<(String, Value)>> = vec![Vec::new()];
        for (key, values) in &self.0 {
            let values = values.as_array().expect("checked");
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

pub fn point_label(point: &[(String, Value)]) -> String {
    point
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            v => format!("{k}={v}"),
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Applies dotted-path overrides such as `objective.lambda` or `cache.k`.
pub fn apply_overrides(base: &FleetConfig, point: &[(String, Value)]) -> Result<FleetConfig, Error> {
    let mut doc = serde_json::to_value(base)?;
    for (path, value) in point {
        let mut slot = &mut doc;
        for part in path.split('.') {
            let obj = slot
                .as_object_mut()
                .ok_or_else(|| Error::Config(vec![format!("grid key `{path}`: `{part}` is not inside an object")]))?;
            slot = obj.entry(part.to_string()).or_insert(Value::Null);
        }
        *slot = value.clone();
    }
    let mut cfg: FleetConfig =
        serde_json::from_value(doc).map_err(|e| Error::Config(vec![format!("{}: {e}", point_label(point))]))?;
    cfg.base_dir = base.base_dir.clone();
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SummaryRow>,
    /// Set when a grid point failed; rows hold the points finished before it.
    pub failure: Option<(String, Error)>,
}

/// Runs every grid point in order with the base seed. Stops at the first
/// failing point and keeps what finished.
pub fn sweep(base: &FleetConfig, grid: &Grid) -> SweepOutcome {
    let mut rows = Vec::new();
    for point in grid.points() {
        let label = point_label(&point);
        let result = apply_overrides(base, &point).and_then(|cfg| run_experiment(&cfg));
        match result {
            Ok(out) => rows.push(SummaryRow::new(label, &out.summary)),
            Err(e) => {
                return SweepOutcome {
                    rows,
                    failure: Some((label, e)),
                }
            }
        }
    }
    SweepOutcome { rows, failure: None }
}

pub fn write_sweep(dir: &Path, rows: &[SummaryRow]) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = dir.join(SWEEP_CSV);
    fs::write(&p, formats::summaries_to_csv(rows)?).map_err(|e| Error::io(&p, e))
}

/// Recomputes a run's summary from its per-request CSV. Peak footprint comes
/// from `summary.json` when present.
pub fn summarize_dir(dir: &Path) -> Result<RunSummary, Error> {
    let p = dir.join(REQUESTS_CSV);
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    let records = formats::records_from_csv(&bytes)?;
    let sp = dir.join(SUMMARY_JSON);
    let peak = match fs::read_to_string(&sp) {
        Ok(text) => serde_json::from_str::<RunSummary>(&text)?.peak_footprint_mb,
        Err(_) => 0.0,
    };
    Ok(RunSummary::from_records(&records, peak)?)
}

pub fn format_summary(s: &RunSummary) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k:<22} {v}\n"));
    line("requests", s.requests.to_string());
    line("mean latency (s)", format!("{:.3}", s.mean_latency_s));
    line("latency stddev (s)", format!("{:.3}", s.latency_stddev_s()));
    line(
        "p50/p90/p95/p99 (s)",
        format!(
            "{:.3} / {:.3} / {:.3} / {:.3}",
            s.p50_latency_s, s.p90_latency_s, s.p95_latency_s, s.p99_latency_s
        ),
    );
    line("mean confidence", format!("{:.3}", s.mean_confidence));
    line("total energy (kJ)", format!("{:.3}", s.total_energy_kj));
    line("cache hit rate", format!("{:.1}%", s.cache_hit_rate * 100.0));
    line("cold starts", s.cold_starts.to_string());
    line("peak footprint (MB)", format!("{:.0}", s.peak_footprint_mb));
    for (m, n) in &s.per_model_requests {
        line(&format!("  {m}"), n.to_string());
    }
    out
}
