//! Line-delimited JSON over TCP.

pub mod client;
pub mod codec;
pub mod server;

use calm_core::stats::{RequestRecord, RunSummary};
use calm_core::workload::TraceEntry;

pub use client::{replay, Client, ReplayEntry, ReplayError, ReplayOptions};
pub use codec::{decode, encode, DecodeError, ErrorReason, ServerStats, WireMessage};
pub use server::{spawn, ServerHandle, ServerOptions};

use crate::config::FleetConfig;
use crate::experiment::{build_orchestrator, ExperimentOutput};
use crate::Error;

pub fn server_options(config: &FleetConfig) -> ServerOptions {
    ServerOptions {
        clock: config.clock,
        time_scale: config.time_scale,
    }
}

/// Serves `config` on a loopback port and replays `trace` against it.
pub fn run_loopback(config: &FleetConfig, trace: Vec<TraceEntry>) -> Result<ExperimentOutput, Error> {
    let server = spawn(build_orchestrator(config)?, "127.0.0.1:0", server_options(config))?;
    let opts = ReplayOptions {
        connections: config.connections,
        clock: config.clock,
        time_scale: config.time_scale,
        seed: config.seed,
    };
    let replayed = replay(server.addr(), &trace, opts);
    let stats = server.shutdown();
    let entries = replayed.map_err(|e| e.error)?;
    let records: Vec<RequestRecord> = entries.iter().map(to_record).collect();
    let summary = RunSummary::from_records(&records, stats.peak_footprint_mb)?;
    Ok(ExperimentOutput {
        records,
        summary,
        trace,
        decision_times_ms: Vec::new(),
    })
}

pub fn to_record(e: &ReplayEntry) -> RequestRecord {
    RequestRecord {
        request_id: e.request_id.clone(),
        arrival_s: e.arrival_s,
        domain: e.domain.clone(),
        selected_model: e.model.clone(),
        queue_wait_s: e.queue_wait_s,
        service_s: e.service_s,
        end_to_end_s: e.latency_s,
        energy_j: e.energy_j,
        rating: e.rating,
        cold_start: e.cold_start,
        cache_hit: e.cache_hit,
    }
}
