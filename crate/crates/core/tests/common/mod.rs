#![allow(dead_code)]

use std::collections::BTreeMap;

use calm_core::backend::{BackendProfile, EnergyCoupling, GaussianLaw, Interval, FALLBACK_DOMAIN};
use calm_core::engine::{EngineConfig, Orchestrator};
use calm_core::registry::{Endpoint, ModelRecord};
use calm_core::workload::{ArrivalProcess, QueryPool, WorkloadSpec};

pub const DOMAINS: [&str; 3] = ["medical", "finance", "legal"];

pub fn law(mean: f64, stddev: f64) -> GaussianLaw {
    GaussianLaw { mean, stddev }
}

pub fn profile(id: &str, domain: &str, tps: f64, quality: f64, footprint_mb: f64) -> BackendProfile {
    let mut q = BTreeMap::new();
    q.insert(FALLBACK_DOMAIN.to_string(), law(2.5, 0.3));
    q.insert(domain.to_string(), law(quality, 0.3));
    BackendProfile {
        profile_id: id.into(),
        domain_tag: domain.into(),
        load_time_s: Interval { lo: 1.5, hi: 2.0 },
        tokens_per_second: tps,
        base_latency_s: 0.2,
        energy_per_token_j: 400.0 / tps,
        energy_per_load_j: footprint_mb / 20.0,
        footprint_mb,
        quality: q,
        token_count_law: law(0.5, 0.15),
        energy_coupling: EnergyCoupling::Coupled,
    }
}

pub fn record(id: &str, description: &str, port: u32) -> ModelRecord {
    ModelRecord {
        model_id: id.into(),
        description: description.into(),
        endpoint: Endpoint {
            host: "127.0.0.1".into(),
            port,
        },
        display_name: id.into(),
        profile_ref: id.into(),
    }
}

/// Six models, a slow strong one and a fast weak one per domain.
pub fn fleet() -> Vec<(BackendProfile, ModelRecord)> {
    let words = [
        ("medical", "doctor symptoms treatment", "diagnosis pathology chronic", "cold headache first aid"),
        ("finance", "money tax savings", "portfolio derivatives hedging", "budget debt bills"),
        ("legal", "court rights lawyer", "litigation patent arbitration", "landlord ticket refund"),
    ];
    let mut out = Vec::new();
    let mut port = 9100;
    for (domain, shared, strong, light) in words {
        let p = &domain[..3];
        out.push((
            profile(&format!("{p}-strong"), domain, 60.0, 4.5, 7800.0),
            record(&format!("{p}-strong"), &format!("{shared} {strong}"), port),
        ));
        out.push((
            profile(&format!("{p}-light"), domain, 180.0, 3.0, 2600.0),
            record(&format!("{p}-light"), &format!("{shared} {light}"), port + 1),
        ));
        port += 2;
    }
    out
}

pub fn orchestrator(config: EngineConfig) -> Orchestrator {
    let mut o = Orchestrator::new(config).unwrap();
    for (p, r) in fleet() {
        o.add_profile(p).unwrap();
        o.register(r).unwrap();
    }
    o
}

pub fn pool() -> QueryPool {
    let q = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mut pool = QueryPool::new();
    pool.insert(
        "medical".into(),
        q(&["doctor says chronic pathology", "headache and a cold", "symptoms treatment", "first aid for burns"]),
    );
    pool.insert(
        "finance".into(),
        q(&["portfolio hedging with derivatives", "monthly budget and bills", "tax on savings", "debt money"]),
    );
    pool.insert(
        "legal".into(),
        q(&["patent litigation", "landlord refund", "my rights in court", "arbitration lawyer"]),
    );
    pool
}

pub fn spec(n: usize, seed: u64, arrival: ArrivalProcess) -> WorkloadSpec {
    WorkloadSpec {
        total_requests: n,
        duration_minutes: 20.0,
        max_tokens: 256,
        domain_mix: DOMAINS.iter().map(|d| (d.to_string(), 1.0 / 3.0)).collect(),
        arrival,
        seed,
    }
}
