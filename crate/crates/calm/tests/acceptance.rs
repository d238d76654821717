//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits non-zero if any fail.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::thread;
use std::time::Instant;

use calm::config::FleetConfig;
use calm::experiment::{apply_overrides, build_orchestrator, run_experiment};
use calm::wire::codec::ModelStats;
use calm::wire::{decode, encode, spawn, Client, ErrorReason, ServerOptions, ServerStats, WireMessage};
use calm_core::backend::{BackendProfile, FALLBACK_DOMAIN};
use calm_core::cache::{Cache, CacheOutcome, EvictionPolicy};
use calm_core::registry::{Endpoint, ModelRecord};
use calm_core::rng::{stream, Stream};
use calm_core::router::{ObjectiveConfig, Policy, Router};
use calm_core::scheduler::{ClientMeta, RequestEnvelope, RequestQueue, SchedulingPolicy};
use calm_core::similarity::{Embedder, EmbeddingVector, SimilarityMethod};
use calm_core::stats::{percentile, RunSummary};
use calm_core::telemetry::{adjust_weights, spearman_correlation, Knowledge, MetricKind, MetricPair};
use common::{load, CONFIGS};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::{json, Value};

const SEEDS: [u64; 5] = [42, 1, 2, 3, 4];

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Suite {
    failed: usize,
    summaries: Vec<RunSummary>,
}

impl Suite {
    fn check(&mut self, name: &str, f: impl FnOnce(&mut Suite) -> Check) {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| f(self)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name:<32} {detail} [{secs:.2}s]"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {name:<32} {detail} [{secs:.2}s]");
            }
        }
    }

    fn run(&mut self, base: &FleetConfig, seed: u64, overrides: &[(&str, Value)]) -> RunSummary {
        let mut point: Vec<(String, Value)> = overrides.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        point.push(("seed".into(), json!(seed)));
        let cfg = apply_overrides(base, &point).expect("override");
        let summary = run_experiment(&cfg).expect("run").summary;
        self.summaries.push(summary.clone());
        summary
    }
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default()
}

// ---------------------------------------------------------------- routing

/// Query "q" embeds to (1, 0); description `s<bits>` embeds at cosine
/// `f64::from_bits(bits)` from it.
struct AngleEmbedder;

impl Embedder for AngleEmbedder {
    fn dimension(&self) -> usize {
        2
    }

    fn embed(&self, text: &str) -> EmbeddingVector {
        match text.strip_prefix('s').and_then(|b| b.parse::<u64>().ok()) {
            Some(bits) => {
                let s = f64::from_bits(bits);
                EmbeddingVector::from_unit(vec![s, (1.0 - s * s).sqrt()])
            }
            None => EmbeddingVector::from_unit(vec![1.0, 0.0]),
        }
    }

    fn embed_tokens(&self, tokens: &[String]) -> EmbeddingVector {
        self.embed(&tokens.join(" "))
    }
}

#[derive(Clone, Debug)]
struct Model {
    sim: f64,
    latency: Option<f64>,
    energy: Option<f64>,
    confidence: Option<f64>,
    resident: bool,
}

#[derive(Clone, Debug)]
struct State {
    models: Vec<Model>,
    policy: Policy,
    lambda: f64,
}

const POLICIES: [Policy; 5] = [
    Policy::SimilarityOnly,
    Policy::ProLatency,
    Policy::ProEnergy,
    Policy::ProConfidence,
    Policy::ProCache,
];

fn random_state(rng: &mut Stream) -> State {
    let n = rng.random_range(2..=8);
    let models = (0..n)
        .map(|_| Model {
            // coarse values make ties common
            sim: if rng.random_bool(0.3) { f64::from(rng.random_range(0..5u8)) / 4.0 } else { rng.random() },
            latency: rng.random_bool(0.8).then(|| rng.random_range(0.0..20.0)),
            energy: rng.random_bool(0.8).then(|| rng.random_range(0.0..5000.0)),
            confidence: rng.random_bool(0.8).then(|| rng.random_range(1.0..=5.0)),
            resident: rng.random(),
        })
        .collect();
    State {
        models,
        policy: *POLICIES.choose(rng).unwrap(),
        lambda: if rng.random_bool(0.2) { 0.0 } else { rng.random() },
    }
}

fn route(s: &State) -> usize {
    let mut router = Router::new(AngleEmbedder, SimilarityMethod::Cosine);
    let mut knowledge = Knowledge::new(16);
    let fleet: Vec<ModelRecord> = (0..s.models.len())
        .map(|i| ModelRecord {
            model_id: format!("m{i}"),
            description: format!("s{}", s.models[i].sim.to_bits()),
            endpoint: Endpoint { host: "h".into(), port: 1 },
            display_name: format!("m{i}"),
            profile_ref: "p".into(),
        })
        .collect();
    for (r, m) in fleet.iter().zip(&s.models) {
        router.index_model(r);
        knowledge.add_model(&r.model_id);
        for (metric, v) in [
            (MetricKind::LatencySeconds, m.latency),
            (MetricKind::EnergyJoules, m.energy),
            (MetricKind::ConfidenceRaw, m.confidence),
        ] {
            if let Some(v) = v {
                knowledge.record_observation(&r.model_id, metric, v).unwrap();
            }
        }
    }
    let resident = |id: &str| s.models[id[1..].parse::<usize>().unwrap()].resident;
    let d = router
        .route("r", "q", &ObjectiveConfig::new(s.policy, s.lambda), &fleet, &knowledge, &resident, &|| 0.0)
        .unwrap();
    d.selected[1..].parse().unwrap()
}

fn brute_force(s: &State) -> usize {
    let max = |f: fn(&Model) -> Option<f64>| s.models.iter().map(|m| f(m).unwrap_or(0.0)).fold(0.0, f64::max);
    let (lat_max, en_max) = (max(|m| m.latency), max(|m| m.energy));
    let scaled = |v: Option<f64>, mx: f64| if mx == 0.0 { 0.0 } else { v.unwrap_or(0.0) / mx };
    let score = |m: &Model| match s.policy {
        Policy::SimilarityOnly => m.sim,
        Policy::ProLatency => 1.0 - m.sim + s.lambda * scaled(m.latency, lat_max),
        Policy::ProEnergy => 1.0 - m.sim + s.lambda * scaled(m.energy, en_max),
        Policy::ProConfidence => m.sim + s.lambda * m.confidence.unwrap_or(5.0) / 5.0,
        Policy::ProCache => m.sim + if m.resident { s.lambda } else { 0.0 },
    };
    let minimize = matches!(s.policy, Policy::ProLatency | Policy::ProEnergy);
    let mut best = 0;
    for i in 1..s.models.len() {
        let (a, b) = (score(&s.models[i]), score(&s.models[best]));
        if (minimize && a < b) || (!minimize && a > b) {
            best = i;
        }
    }
    best
}

fn routing_oracle(_: &mut Suite) -> Check {
    let mut rng = stream(1, "acceptance/routing");
    for case in 0..1000 {
        let s = random_state(&mut rng);
        let (got, want) = (route(&s), brute_force(&s));
        ensure(got == want, || format!("case {case}: routed m{got}, oracle m{want}: {s:?}"))?;
    }
    Ok("1000/1000 states agree".into())
}

fn scale_invariance(_: &mut Suite) -> Check {
    let mut rng = stream(4, "acceptance/scale");
    let mut changed_metrics = 0;
    for case in 0..500 {
        let s = random_state(&mut rng);
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let energy = rng.random_bool(0.5);
        let mut t = s.clone();
        for m in &mut t.models {
            let slot = if energy { &mut m.energy } else { &mut m.latency };
            *slot = slot.map(|v| v * c);
            changed_metrics += usize::from(slot.is_some());
        }
        ensure(route(&s) == route(&t), || format!("case {case}: c = {c} changed the selection: {s:?}"))?;
    }
    Ok(format!("500 states, {changed_metrics} rescaled averages (latency/energy)"))
}

// ------------------------------------------------------------ telemetry

fn weight_formula(_: &mut Suite) -> Check {
    let mut rng = stream(2, "acceptance/weights");
    let keys = [0u8, 1, 2];
    for case in 0..1000 {
        let lambdas: BTreeMap<u8, f64> = keys.iter().map(|&k| (k, rng.random())).collect();
        let mut rho = BTreeMap::new();
        for (a, b) in [(0u8, 1u8), (0, 2), (1, 2)] {
            let r: f64 = match case % 4 {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random_range(-1.0..=1.0),
            };
            if case % 4 == 1 && (a, b) != (0, 1) {
                continue;
            }
            rho.insert(MetricPair::new(a, b), r);
        }
        let got = adjust_weights(&lambdas, &rho).map_err(|e| e.to_string())?;
        for &k in &keys {
            let sum: f64 = rho.iter().filter(|(p, _)| p.contains(k)).map(|(_, r)| r.abs()).sum();
            let want = lambdas[&k] / (1.0 + sum);
            ensure((got[&k] - want).abs() <= 1e-12, || format!("case {case} key {k}: {} vs {want}", got[&k]))?;
            if case % 4 == 0 {
                ensure(got[&k] == lambdas[&k], || format!("case {case}: rho = 0 is not the identity"))?;
            }
            if case % 4 == 1 && k < 2 {
                ensure((got[&k] - lambdas[&k] / 2.0).abs() <= 1e-12, || format!("case {case}: rho = 1 did not halve"))?;
            }
        }
    }
    Ok("1000 inputs within 1e-12".into())
}

fn rank_pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let ranks = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|x| {
                let below = v.iter().filter(|y| *y < x).count() as f64;
                let equal = v.iter().filter(|y| *y == x).count() as f64;
                below + (equal + 1.0) / 2.0
            })
            .collect()
    };
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn spearman_exactness(_: &mut Suite) -> Check {
    let mut rng = stream(3, "acceptance/spearman");
    let mut tied = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..40);
        let xs: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8))).collect();
        let ys: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8u8))).collect();
        let mut distinct = xs.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        tied += usize::from(distinct.len() < n);
        let got = spearman_correlation(&xs, &ys).map_err(|e| e.to_string())?;
        let want = rank_pearson(&xs, &ys);
        ensure((got - want).abs() <= 1e-9, || format!("case {case}: {got} vs {want}"))?;

        let up: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
        let f: Vec<f64> = up.iter().map(|x| x.powi(3) + 1.0).collect();
        let down: Vec<f64> = up.iter().map(|x| -x.exp()).collect();
        let a = spearman_correlation(&up, &f).map_err(|e| e.to_string())?;
        let b = spearman_correlation(&up, &down).map_err(|e| e.to_string())?;
        ensure(a == 1.0 && b == -1.0, || format!("case {case}: monotone gave {a}, {b}"))?;
    }
    Ok(format!("1000 sequences within 1e-9 ({tied} with ties), monotone exactly +-1"))
}

// ------------------------------------------------------------- trends

fn trend_by_seed(
    suite: &mut Suite,
    base: &FleetConfig,
    policy: &str,
    lambdas: &[f64],
    metric: fn(&RunSummary) -> f64,
) -> Vec<(u64, Vec<f64>)> {
    SEEDS
        .iter()
        .map(|&seed| {
            let v = lambdas
                .iter()
                .map(|l| metric(&suite.run(base, seed, &[("objective.policy", json!(policy)), ("objective.lambda", json!(l))])))
                .collect();
            (seed, v)
        })
        .collect()
}

fn fmt_series(v: &[f64], digits: usize) -> String {
    v.iter().map(|x| format!("{x:.digits$}")).collect::<Vec<_>>().join(" > ")
}

fn pro_latency(suite: &mut Suite) -> Check {
    let base = load("reference.json");
    let runs = trend_by_seed(suite, &base, "pro_latency", &[0.0, 0.1, 0.2, 0.3], |s| s.mean_latency_s);
    let ok: Vec<bool> = runs
        .iter()
        .map(|(_, v)| v.windows(2).all(|w| w[1] < w[0]) && v[3] <= 0.8 * v[0])
        .collect();
    let passing = ok.iter().filter(|b| **b).count();
    let (_, first) = &runs[0];
    let detail = format!(
        "{passing}/5 seeds; seed 42 mean latency {} s (ratio {:.2})",
        fmt_series(first, 2),
        first[3] / first[0]
    );
    ensure(passing >= 4, || detail.clone())?;
    Ok(detail)
}

fn pro_confidence(suite: &mut Suite) -> Check {
    let base = load("reference.json");
    let runs = trend_by_seed(suite, &base, "pro_confidence", &[0.0, 0.1, 0.2, 0.3], |s| s.mean_confidence);
    let passing = runs
        .iter()
        .filter(|(_, v)| v.windows(2).all(|w| w[1] >= w[0]) && v[3] - v[0] >= 0.1)
        .count();
    let (_, first) = &runs[0];
    let detail = format!(
        "{passing}/5 seeds; seed 42 mean rating {}",
        first.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" <= ")
    );
    ensure(passing >= 4, || detail.clone())?;
    Ok(detail)
}

fn pro_cache(suite: &mut Suite) -> Check {
    let base = load("reference.json");
    let lambdas = [0.0, 0.02, 0.03, 0.05];
    let mut per_seed = Vec::new();
    for seed in SEEDS {
        let runs: Vec<RunSummary> = lambdas
            .iter()
            .map(|l| {
                suite.run(
                    &base,
                    seed,
                    &[
                        ("objective.policy", json!("pro_cache")),
                        ("objective.lambda", json!(l)),
                        ("cache.enabled", json!(true)),
                        ("cache.k", json!(3)),
                    ],
                )
            })
            .collect();
        per_seed.push((seed, runs));
    }
    let holds = |runs: &[RunSummary]| {
        runs.windows(2).all(|w| w[1].cache_hit_rate >= w[0].cache_hit_rate && w[1].cold_starts < w[0].cold_starts)
            && runs[3].cache_hit_rate - runs[0].cache_hit_rate >= 0.10
    };
    let others = per_seed[1..].iter().filter(|(_, r)| holds(r)).count();
    let (_, reference) = &per_seed[0];
    let detail = format!(
        "seed 42 hit rate {} %, cold starts {}; other seeds {others}/4",
        reference.iter().map(|r| format!("{:.1}", r.cache_hit_rate * 100.0)).collect::<Vec<_>>().join(" <= "),
        reference.iter().map(|r| r.cold_starts.to_string()).collect::<Vec<_>>().join(" > "),
    );
    ensure(holds(reference), || detail.clone())?;
    Ok(detail)
}

fn cache_size(suite: &mut Suite) -> Check {
    let base = load("reference.json");
    let mut first = String::new();
    for seed in SEEDS {
        let runs: Vec<RunSummary> = [1, 3, 6]
            .iter()
            .map(|k| {
                suite.run(
                    &base,
                    seed,
                    &[
                        ("objective.policy", json!("similarity_only")),
                        ("cache.enabled", json!(true)),
                        ("cache.k", json!(k)),
                    ],
                )
            })
            .collect();
        let peaks: Vec<f64> = runs.iter().map(|r| r.peak_footprint_mb).collect();
        let lat: Vec<f64> = runs.iter().map(|r| r.mean_latency_s).collect();
        let detail = format!("peak {} MB, mean latency {} s", fmt_series(&peaks, 0).replace('>', "<"), fmt_series(&lat, 2));
        ensure(
            peaks.windows(2).all(|w| w[1] > w[0]) && lat.windows(2).all(|w| w[1] < w[0]),
            || format!("seed {seed}: {detail}"),
        )?;
        if first.is_empty() {
            first = format!("5/5 seeds; seed 42 {detail}");
        }
    }
    Ok(first)
}

/// A slow-model request behind one fast request and ahead of ten more;
/// returns its 1-based service position.
fn slow_request_position(policy: SchedulingPolicy) -> usize {
    let mut knowledge = Knowledge::new(10);
    for (m, t) in [("fast", 0.5), ("slow", 8.0)] {
        knowledge.add_model(m);
        knowledge.record_observation(m, MetricKind::LatencySeconds, t).unwrap();
    }
    let mut q = RequestQueue::new();
    let models = ["fast", "slow"].into_iter().chain(std::iter::repeat_n("fast", 10));
    for (i, m) in models.enumerate() {
        q.enqueue(RequestEnvelope {
            request_id: format!("r{i}"),
            query_text: String::new(),
            selected_model: m.into(),
            client: ClientMeta::default(),
            enqueue_time: i as f64 * 0.1,
            max_tokens: 64,
            domain_tag: None,
        })
        .unwrap();
    }
    let mut order = Vec::new();
    while let Some(e) = q.next(policy, &knowledge) {
        order.push(e.selected_model);
    }
    order.iter().position(|m| m == "slow").unwrap() + 1
}

fn scheduler_contrast(suite: &mut Suite) -> Check {
    let base = load("bursty.json");
    let mut passing = 0;
    let mut first = String::new();
    for seed in SEEDS {
        let fifo = suite.run(&base, seed, &[("scheduler", json!("fifo"))]);
        let stcf = suite.run(&base, seed, &[("scheduler", json!("stcf"))]);
        if stcf.mean_latency_s <= fifo.mean_latency_s && stcf.latency_variance_s2 >= fifo.latency_variance_s2 {
            passing += 1;
        }
        if first.is_empty() {
            first = format!(
                "seed 42 mean {:.2} -> {:.2} s, variance {:.0} -> {:.0} s^2",
                fifo.mean_latency_s, stcf.mean_latency_s, fifo.latency_variance_s2, stcf.latency_variance_s2
            );
        }
    }
    let (f, s) = (slow_request_position(SchedulingPolicy::Fifo), slow_request_position(SchedulingPolicy::Stcf));
    let detail = format!("{passing}/5 seeds; {first}; slow request at position {f} under FIFO, {s} under STCF");
    ensure(passing >= 4 && f == 2 && s == 12, || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------ cache, stats

fn lru_reference(_: &mut Suite) -> Check {
    let mut rng = stream(10, "acceptance/lru");
    let mut evictions = 0;
    for k in 1..=3usize {
        let mut cache = Cache::new(k, EvictionPolicy::Lru).map_err(|e| e.to_string())?;
        let mut recency: Vec<usize> = Vec::new();
        for step in 0..10_000 {
            let m: usize = rng.random_range(0..6);
            let want = if let Some(i) = recency.iter().position(|&r| r == m) {
                recency.remove(i);
                None
            } else if recency.len() == k {
                Some(Some(recency.remove(0)))
            } else {
                Some(None)
            };
            recency.push(m);
            let access = cache.ensure_resident(&format!("m{m}"), m, 1.0, || Ok(1.0)).map_err(|e| e.to_string())?;
            let got = match access.outcome {
                CacheOutcome::Hit => None,
                CacheOutcome::MissLoaded { evicted } => Some(evicted.map(|e| e[1..].parse::<usize>().unwrap())),
            };
            evictions += usize::from(matches!(got, Some(Some(_))));
            ensure(got == want, || format!("k = {k}, step {step}: {got:?} vs {want:?}"))?;
        }
    }
    Ok(format!("3 x 10000 accesses identical, {evictions} evictions"))
}

fn percentiles(suite: &mut Suite) -> Check {
    let mut rng = stream(11, "acceptance/percentile");
    for case in 0..1000 {
        let n = rng.random_range(1..300);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
        let p: f64 = *[50.0, 90.0, 95.0, 99.0, 100.0].choose(&mut rng).unwrap();
        let p = if rng.random_bool(0.5) { p } else { rng.random_range(0.01..=100.0) };
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let rank = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
        let got = percentile(&v, p).map_err(|e| e.to_string())?;
        ensure(got == sorted[rank - 1], || format!("case {case}: p{p} of {n} values"))?;
    }
    for name in CONFIGS {
        let s = run_experiment(&load(name)).map_err(|e| e.to_string())?.summary;
        suite.summaries.push(s);
    }
    for (i, s) in suite.summaries.iter().enumerate() {
        ensure(
            s.p50_latency_s <= s.p90_latency_s && s.p90_latency_s <= s.p95_latency_s && s.p95_latency_s <= s.p99_latency_s,
            || format!("summary {i} out of order: {s:?}"),
        )?;
    }
    Ok(format!("1000 random inputs exact; {} run summaries ordered", suite.summaries.len()))
}

fn determinism(_: &mut Suite) -> Check {
    for name in CONFIGS {
        let cfg = load(name);
        let a = run_experiment(&cfg).map_err(|e| e.to_string())?.csv().map_err(|e| e.to_string())?;
        let b = run_experiment(&cfg).map_err(|e| e.to_string())?.csv().map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{name}: CSV differs between runs"))?;
    }
    Ok(format!("{} configs byte-identical", CONFIGS.len()))
}

// ------------------------------------------------------------------ wire

fn random_text(rng: &mut Stream) -> String {
    let alphabet = ['a', 'Z', '0', ' ', '"', '\\', '\n', '\t', 'é', '中', '{', '}', '😀', '\u{0}'];
    (0..rng.random_range(0..12)).map(|_| *alphabet.choose(rng).unwrap()).collect()
}

fn random_message(kind: usize, rng: &mut Stream) -> WireMessage {
    let id = random_text(rng);
    let f = |rng: &mut Stream| rng.random_range(0.0..1e4) * if rng.random_bool(0.1) { 1e-9 } else { 1.0 };
    match kind {
        0 => WireMessage::Register {
            id,
            model_id: random_text(rng),
            description: random_text(rng),
            host: random_text(rng),
            port: rng.random(),
            display_name: random_text(rng),
            profile: random_text(rng),
        },
        1 => WireMessage::RegisterAck { id, model_id: random_text(rng), fleet_size: rng.random_range(0..100) },
        2 => WireMessage::Query {
            id,
            text: random_text(rng),
            max_tokens: rng.random_range(1..4096),
            domain_hint: rng.random_bool(0.5).then(|| random_text(rng)),
            arrival_s: rng.random_bool(0.5).then(|| f(rng)),
        },
        3 => WireMessage::Response {
            id,
            request_id: random_text(rng),
            model: random_text(rng),
            payload: random_text(rng),
            latency_s: f(rng),
            queue_wait_s: f(rng),
            service_s: f(rng),
            energy_j: f(rng),
            latent_quality: rng.random_range(1.0..=5.0),
            cold_start: rng.random(),
            cache_hit: rng.random(),
        },
        4 => WireMessage::Feedback { id, rating: rng.random_range(1..=5) },
        5 => WireMessage::FeedbackAck { id, model: random_text(rng) },
        6 => WireMessage::StatsRequest { id },
        7 => WireMessage::StatsResponse {
            id,
            stats: ServerStats {
                served: rng.random_range(0..1000),
                queued: rng.random_range(0..1000),
                cache_hits: rng.random(),
                cache_misses: rng.random(),
                peak_footprint_mb: f(rng),
                models: (0..rng.random_range(0..4))
                    .map(|_| {
                        (
                            random_text(rng),
                            ModelStats {
                                requests: rng.random_range(0..100),
                                mean_latency_s: f(rng),
                                mean_energy_j: f(rng),
                                mean_confidence: rng.random_range(1.0..=5.0),
                                resident: rng.random(),
                            },
                        )
                    })
                    .collect(),
            },
        },
        _ => WireMessage::Error {
            id,
            reason: *[
                ErrorReason::Parse,
                ErrorReason::MissingField,
                ErrorReason::UnknownType,
                ErrorReason::Invalid,
                ErrorReason::UnknownRequest,
                ErrorReason::RoutingUnavailable,
                ErrorReason::Registration,
                ErrorReason::ShuttingDown,
            ]
            .choose(rng)
            .unwrap(),
            detail: random_text(rng),
        },
    }
}

fn wire_conformance(_: &mut Suite) -> Check {
    let mut rng = stream(13, "acceptance/codec");
    let mut kinds = BTreeSet::new();
    for case in 0..2700 {
        let msg = random_message(case % 9, &mut rng);
        let line = encode(&msg);
        ensure(line.ends_with('\n') && line.matches('\n').count() == 1, || format!("case {case}: not one line"))?;
        let back = decode(line.as_bytes()).map_err(|e| format!("case {case}: {e}"))?;
        ensure(back == msg, || format!("case {case}: {msg:?} came back as {back:?}"))?;
        let tag: Value = serde_json::from_str(&line).map_err(|e| e.to_string())?;
        kinds.insert(tag["type"].as_str().unwrap_or_default().to_string());
    }

    let cfg = load("reference.json");
    let server = spawn(build_orchestrator(&cfg).map_err(|e| e.to_string())?, "127.0.0.1:0", ServerOptions::default())
        .map_err(|e| e.to_string())?;
    let addr = server.addr();
    let clients: Vec<_> = (0..50)
        .map(|c| {
            thread::spawn(move || -> Result<usize, String> {
                let mut client = Client::connect(addr).map_err(|e| e.to_string())?;
                let mine: BTreeSet<String> = (0..6).map(|j| format!("client{c}/q{j}")).collect();
                for id in &mine {
                    let q = WireMessage::Query {
                        id: id.clone(),
                        text: "tenant rights and a contract dispute".into(),
                        max_tokens: 64,
                        domain_hint: Some("legal".into()),
                        arrival_s: None,
                    };
                    client.send(&q).map_err(|e| e.to_string())?;
                }
                let mut got = BTreeSet::new();
                while got.len() < mine.len() {
                    match client.recv().map_err(|e| e.to_string())? {
                        WireMessage::Response { id, .. } if mine.contains(&id) && got.insert(id.clone()) => {}
                        other => return Err(format!("client {c} got {other:?}")),
                    }
                }
                Ok(got.len())
            })
        })
        .collect();
    let mut replies = 0;
    for h in clients {
        replies += h.join().map_err(|p| panic_text(&p))??;
    }
    let stats = server.shutdown();
    ensure(replies == 300 && stats.served == 300, || format!("{replies} replies, {} served", stats.served))?;
    Ok(format!("{} message types round-trip over 2700 cases; 50 clients x 6 replies, no cross-talk", kinds.len()))
}

fn decision_overhead(_: &mut Suite) -> Check {
    let cfg = load("reference.json");
    let mut orch = build_orchestrator(&cfg).map_err(|e| e.to_string())?;
    let llm: &BackendProfile = cfg.profiles.iter().find(|p| p.profile_id == "llm").ok_or("no llm profile")?;
    assert!(llm.quality.contains_key(FALLBACK_DOMAIN));
    for (id, desc) in [
        ("generalist-a", "General assistant for everyday questions about health, money and law."),
        ("generalist-b", "Broad knowledge model: science, history, writing, planning, advice."),
    ] {
        orch.register(ModelRecord {
            model_id: id.into(),
            description: desc.into(),
            endpoint: Endpoint { host: "127.0.0.1".into(), port: 9200 },
            display_name: id.into(),
            profile_ref: "llm".into(),
        })
        .map_err(|e| e.to_string())?;
    }
    let fleet = orch.registry().len();
    let queries: Vec<String> = cfg.load_pools().map_err(|e| e.to_string())?.into_values().flatten().collect();
    let mut total_ms = 0.0;
    for i in 0..1000 {
        let q = &queries[i % queries.len()];
        let t = Instant::now();
        orch.route(&format!("d{i}"), q, &|| 0.0).map_err(|e| e.to_string())?;
        total_ms += t.elapsed().as_secs_f64() * 1e3;
    }
    let mean = total_ms / 1000.0;
    let detail = format!("{fleet}-model fleet, mean {mean:.4} ms over 1000 queries");
    ensure(fleet == 8 && mean <= 50.0, || detail.clone())?;
    Ok(detail)
}

fn main() {
    let mut suite = Suite { failed: 0, summaries: Vec::new() };
    suite.check("routing-oracle-equivalence", routing_oracle);
    suite.check("weight-attenuation-exactness", weight_formula);
    suite.check("spearman-exactness", spearman_exactness);
    suite.check("scale-invariance", scale_invariance);
    suite.check("pro-latency-trend", pro_latency);
    suite.check("pro-confidence-trend", pro_confidence);
    suite.check("pro-cache-trend", pro_cache);
    suite.check("cache-size-sweep", cache_size);
    suite.check("scheduler-contrast", scheduler_contrast);
    suite.check("lru-reference-equivalence", lru_reference);
    suite.check("tail-percentile-monotonicity", percentiles);
    suite.check("determinism", determinism);
    suite.check("wire-conformance", wire_conformance);
    suite.check("decision-overhead", decision_overhead);
    println!("{} of 14 acceptance checks passed", 14 - suite.failed);
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
