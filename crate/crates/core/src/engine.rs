//! The orchestrator: registry, router, knowledge, queue, cache and simulated
//! backends behind one handle, plus a discrete-event driver that replays a
//! trace on a virtual clock.
//!
//! The orchestrator itself never reads a clock. Callers pass times in, which
//! lets the same code serve a virtual-clock simulation and a wall-clock
//! server.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::backend::{self, BackendProfile, InferenceResult, FEEDBACK_NOISE_SD};
use crate::cache::{Access, Cache, EvictionPolicy};
use crate::registry::{ModelRecord, Registration, Registry};
use crate::rng::{stream, Stream};
use crate::router::{ObjectiveConfig, Router, RoutingDecision};
use crate::scheduler::{ClientMeta, RequestEnvelope, RequestQueue, SchedulingPolicy};
use crate::similarity::{HashingEmbedder, SimilarityMethod};
use crate::stats::{RequestRecord, RunSummary};
use crate::telemetry::{Knowledge, MetricKind};
use crate::workload::TraceEntry;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CacheConfig {
    pub enabled: bool,
    pub k: usize,
    pub policy: EvictionPolicy,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            k: 3,
            policy: EvictionPolicy::Lru,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub objective: ObjectiveConfig,
    pub scheduler: SchedulingPolicy,
    pub cache: CacheConfig,
    pub similarity: SimilarityMethod,
    pub seed: u64,
    pub feedback_noise_sd: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            objective: ObjectiveConfig::default(),
            scheduler: SchedulingPolicy::Fifo,
            cache: CacheConfig::default(),
            similarity: SimilarityMethod::Cosine,
            seed: 0,
            feedback_noise_sd: FEEDBACK_NOISE_SD,
        }
    }
}

/// A request taken off the queue and run on its model.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub envelope: RequestEnvelope,
    pub access: Access,
    pub result: InferenceResult,
    pub start_s: f64,
}

impl Execution {
    pub fn queue_wait_s(&self) -> f64 {
        self.start_s - self.envelope.enqueue_time
    }

    /// Load plus inference.
    pub fn busy_s(&self) -> f64 {
        self.access.load_duration + self.result.service_time_s
    }

    pub fn finish_s(&self) -> f64 {
        self.start_s + self.busy_s()
    }

    pub fn end_to_end_s(&self) -> f64 {
        self.finish_s() - self.envelope.enqueue_time
    }
}

pub struct Orchestrator {
    config: EngineConfig,
    registry: Registry,
    router: Router<HashingEmbedder>,
    knowledge: Knowledge,
    cache: Cache,
    queue: RequestQueue,
    profiles: BTreeMap<String, BackendProfile>,
    backend_streams: BTreeMap<String, Stream>,
    feedback_streams: BTreeMap<String, Stream>,
    awaiting_feedback: BTreeMap<String, String>,
}

impl Orchestrator {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.objective.validate()?;
        let cache = if config.cache.enabled {
            Cache::new(config.cache.k, config.cache.policy)?
        } else {
            Cache::unbounded()
        };
        Ok(Self {
            router: Router::new(HashingEmbedder::default(), config.similarity),
            knowledge: Knowledge::new(config.objective.window),
            registry: Registry::new(),
            cache,
            queue: RequestQueue::new(),
            profiles: BTreeMap::new(),
            backend_streams: BTreeMap::new(),
            feedback_streams: BTreeMap::new(),
            awaiting_feedback: BTreeMap::new(),
            config,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn add_profile(&mut self, profile: BackendProfile) -> Result<()> {
        profile.validate()?;
        self.profiles.insert(profile.profile_id.clone(), profile);
        Ok(())
    }

    pub fn profile(&self, profile_id: &str) -> Option<&BackendProfile> {
        self.profiles.get(profile_id)
    }

    /// Adds a model to the fleet with cold telemetry and its own random
    /// streams.
    pub fn register(&mut self, record: ModelRecord) -> Result<Registration> {
        if !self.profiles.contains_key(&record.profile_ref) {
            return Err(Error::UnknownProfile(record.profile_ref));
        }
        let id = record.model_id.clone();
        self.router.index_model(&record);
        let ack = match self.registry.register(record) {
            Ok(ack) => ack,
            Err(e) => {
                if let Some(existing) = self.registry.get(&id) {
                    let existing = existing.clone();
                    self.router.index_model(&existing);
                } else {
                    self.router.forget_model(&id);
                }
                return Err(e);
            }
        };
        self.knowledge.add_model(&id);
        self.backend_streams
            .insert(id.clone(), stream(self.config.seed, &format!("backend/{id}")));
        self.feedback_streams
            .insert(id.clone(), stream(self.config.seed, &format!("feedback/{id}")));
        Ok(ack)
    }

    /// Removes a model. Queued requests for it are failed and returned; the
    /// model is evicted if resident.
    pub fn deregister(&mut self, model_id: &str) -> Result<Vec<RequestEnvelope>> {
        self.registry.deregister(model_id)?;
        self.router.forget_model(model_id);
        self.knowledge.remove_model(model_id);
        self.cache.remove(model_id);
        self.backend_streams.remove(model_id);
        self.feedback_streams.remove(model_id);
        self.awaiting_feedback.retain(|_, m| m != model_id);
        Ok(self.queue.fail_model(model_id))
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn router(&self) -> &Router<HashingEmbedder> {
        &self.router
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    pub fn queue(&self) -> &RequestQueue {
        &self.queue
    }

    pub fn route(&self, request_id: &str, query: &str, now_ms: &dyn Fn() -> f64) -> Result<RoutingDecision> {
        let cache = &self.cache;
        self.router.route(
            request_id,
            query,
            &self.config.objective,
            self.registry.list(),
            &self.knowledge,
            &|m| cache.is_resident(m),
            now_ms,
        )
    }

    pub fn admit(&mut self, envelope: RequestEnvelope) -> Result<usize> {
        if !self.registry.contains(&envelope.selected_model) {
            return Err(Error::RoutingUnavailable(envelope.request_id));
        }
        self.queue.enqueue(envelope)
    }

    /// Takes the next request per the scheduling policy and runs it at
    /// `now_s`. Returns `None` on an empty queue.
    pub fn dispatch(&mut self, now_s: f64) -> Option<Result<Execution>> {
        let envelope = self.queue.next(self.config.scheduler, &self.knowledge)?;
        Some(self.execute(envelope, now_s))
    }

    fn execute(&mut self, envelope: RequestEnvelope, now_s: f64) -> Result<Execution> {
        let model_id = envelope.selected_model.clone();
        let rank = self
            .registry
            .position(&model_id)
            .ok_or_else(|| Error::RoutingUnavailable(envelope.request_id.clone()))?;
        let profile_ref = &self.registry.list()[rank].profile_ref;
        let profile = self
            .profiles
            .get(profile_ref)
            .ok_or_else(|| Error::UnknownProfile(profile_ref.clone()))?;
        let rng = self
            .backend_streams
            .get_mut(&model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.clone()))?;
        let access = self
            .cache
            .ensure_resident(&model_id, rank, profile.footprint_mb, || Ok(backend::load(profile, rng)))?;
        let result = backend::infer(
            profile,
            envelope.max_tokens,
            envelope.domain_tag.as_deref(),
            rng,
            !access.is_hit(),
        )?;
        Ok(Execution {
            envelope,
            access,
            result,
            start_s: now_s,
        })
    }

    /// Feeds a finished execution back into the knowledge store.
    pub fn complete(&mut self, execution: &Execution) -> Result<()> {
        let model = &execution.envelope.selected_model;
        let id = &execution.envelope.request_id;
        if !self.registry.contains(model) {
            // deregistered while running; nothing to learn
            return Ok(());
        }
        let r = &execution.result;
        self.knowledge
            .record_observation(model, MetricKind::LatencySeconds, r.service_time_s)?;
        self.knowledge
            .record_observation(model, MetricKind::EnergyJoules, r.energy_j)?;
        self.knowledge
            .record_request(id, Some(r.service_time_s), Some(r.energy_j), None);
        self.awaiting_feedback.insert(id.clone(), model.clone());
        Ok(())
    }

    /// Records a client's 1..=5 rating for a served request and returns the
    /// rated model.
    pub fn record_feedback(&mut self, request_id: &str, rating: u8) -> Result<String> {
        if !(1..=5).contains(&rating) {
            return Err(Error::InvalidRating(rating));
        }
        let model = self
            .awaiting_feedback
            .remove(request_id)
            .ok_or_else(|| Error::UnknownRequest(request_id.into()))?;
        let value = f64::from(rating);
        self.knowledge
            .record_observation(&model, MetricKind::ConfidenceRaw, value)?;
        self.knowledge
            .complete_request(request_id, MetricKind::ConfidenceRaw, value);
        Ok(model)
    }

    /// Simulated client rating for a response from `model_id`.
    pub fn simulate_rating(&mut self, model_id: &str, latent_quality: f64) -> u8 {
        let noise = self.config.feedback_noise_sd;
        match self.feedback_streams.get_mut(model_id) {
            Some(rng) => backend::feedback_rating(latent_quality, noise, rng),
            None => backend::feedback_rating(latent_quality, 0.0, &mut stream(0, "")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutcome {
    /// One row per request, in arrival order.
    pub records: Vec<RequestRecord>,
    pub decisions: Vec<RoutingDecision>,
    pub peak_footprint_mb: f64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub summary: RunSummary,
}

pub fn request_id(index: usize) -> String {
    format!("r{index:05}")
}

/// Replays `trace` against `orchestrator` on a virtual clock with a single
/// executor. Routing happens at arrival; telemetry and feedback land at
/// completion. When a completion and an arrival coincide, the completion is
/// processed first.
pub fn simulate(
    orchestrator: &mut Orchestrator,
    trace: &[TraceEntry],
    now_ms: &dyn Fn() -> f64,
) -> Result<SimulationOutcome> {
    let mut rows: Vec<Option<RequestRecord>> = alloc::vec![None; trace.len()];
    let mut decisions = Vec::with_capacity(trace.len());
    let mut index_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut in_service: Option<Execution> = None;
    let mut next = 0usize;
    let mut now = 0.0f64;

    loop {
        let next_arrival = trace.get(next).map(|e| e.arrival_s.max(now));
        let next_finish = in_service.as_ref().map(Execution::finish_s);
        let take_finish = match (next_finish, next_arrival) {
            (Some(f), Some(a)) => f <= a,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };

        if take_finish {
            let exec = in_service.take().expect("finish scheduled");
            now = exec.finish_s();
            orchestrator.complete(&exec)?;
            let model = exec.envelope.selected_model.clone();
            let rating = orchestrator.simulate_rating(&model, exec.result.latent_quality);
            orchestrator.record_feedback(&exec.envelope.request_id, rating)?;
            let i = index_of[&exec.envelope.request_id];
            rows[i] = Some(RequestRecord {
                request_id: exec.envelope.request_id.clone(),
                arrival_s: exec.envelope.enqueue_time,
                domain: trace[i].domain.clone(),
                selected_model: model,
                queue_wait_s: exec.queue_wait_s(),
                service_s: exec.busy_s(),
                end_to_end_s: exec.end_to_end_s(),
                energy_j: exec.result.energy_j,
                rating,
                cold_start: exec.result.cold_start,
                cache_hit: exec.access.is_hit(),
            });
        } else {
            let entry = &trace[next];
            now = next_arrival.expect("arrival scheduled");
            let id = request_id(next);
            let decision = orchestrator.route(&id, &entry.query_text, now_ms)?;
            orchestrator.admit(RequestEnvelope {
                request_id: id.clone(),
                query_text: entry.query_text.clone(),
                selected_model: decision.selected.clone(),
                client: ClientMeta {
                    client_id: String::from("sim"),
                    reply_to: String::new(),
                },
                enqueue_time: now,
                max_tokens: entry.max_tokens,
                domain_tag: Some(entry.domain.clone()),
            })?;
            decisions.push(decision);
            index_of.insert(id, next);
            next += 1;
        }

        if in_service.is_none() {
            if let Some(exec) = orchestrator.dispatch(now) {
                in_service = Some(exec?);
            }
        }
    }

    let records: Vec<RequestRecord> = rows.into_iter().flatten().collect();
    let peak = orchestrator.cache().peak_footprint_mb();
    let summary = RunSummary::from_records(&records, peak)?;
    Ok(SimulationOutcome {
        records,
        decisions,
        peak_footprint_mb: peak,
        cache_hits: orchestrator.cache().hits(),
        cache_misses: orchestrator.cache().misses(),
        summary,
    })
}
