//! Scoring, ranking and selection of the model that serves a query.
//!
//! A score combines a transformed static similarity with weighted dynamic
//! terms:
//!
//! ```text
//! score(q, m) = g(sim(q, d_m)) + Σ_l λ_l · dynamic_l(m)
//! ```
//!
//! where `g` is the identity for maximizing objectives and `1 - ·` for
//! minimizing ones. Each [`Policy`] maps to one such plan.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::registry::ModelRecord;
use crate::similarity::{
    static_score, DescriptionIndex, Embedder, HashingEmbedder, QueryIndex, SimilarityMethod,
};
use crate::telemetry::{adjust_weights, normalize_values, Knowledge, MetricKind, DEFAULT_WINDOW};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Policy {
    #[default]
    SimilarityOnly,
    ProLatency,
    ProEnergy,
    ProConfidence,
    ProCache,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ObjectiveConfig {
    pub policy: Policy,
    pub lambda: f64,
    pub correlation_adjust: bool,
    pub window: usize,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            policy: Policy::SimilarityOnly,
            lambda: 0.0,
            correlation_adjust: false,
            window: DEFAULT_WINDOW,
        }
    }
}

impl ObjectiveConfig {
    pub fn new(policy: Policy, lambda: f64) -> Self {
        Self {
            policy,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: self.lambda,
            });
        }
        if self.window == 0 {
            return Err(Error::OutOfRange {
                what: "window",
                value: 0.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// The `g` applied to the static similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityTransform {
    Identity,
    Complement,
}

impl SimilarityTransform {
    pub fn apply(self, sim: f64) -> f64 {
        match self {
            SimilarityTransform::Identity => sim,
            SimilarityTransform::Complement => 1.0 - sim,
        }
    }
}

/// A dynamic input to the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Signal {
    /// Fleet-normalized rolling average of a metric.
    Metric(MetricKind),
    /// 1 for cache-resident models, 0 otherwise.
    CacheResidency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoringPlan {
    pub direction: Direction,
    pub transform: SimilarityTransform,
    pub terms: Vec<(Signal, f64)>,
}

impl ScoringPlan {
    pub fn metrics(&self) -> impl Iterator<Item = MetricKind> + '_ {
        self.terms.iter().filter_map(|(s, _)| match s {
            Signal::Metric(m) => Some(*m),
            Signal::CacheResidency => None,
        })
    }

    fn better(&self, a: f64, b: f64) -> Ordering {
        match self.direction {
            Direction::Minimize => a.total_cmp(&b),
            Direction::Maximize => b.total_cmp(&a),
        }
    }
}

/// Plan phase: turns the configured objective into a scoring plan.
pub fn plan_parameters(objective: &ObjectiveConfig) -> ScoringPlan {
    use Direction::*;
    use SimilarityTransform::*;
    let lambda = objective.lambda;
    let (direction, transform, terms) = match objective.policy {
        Policy::SimilarityOnly => (Maximize, Identity, vec![]),
        Policy::ProLatency => (
            Minimize,
            Complement,
            vec![(Signal::Metric(MetricKind::LatencySeconds), lambda)],
        ),
        Policy::ProEnergy => (
            Minimize,
            Complement,
            vec![(Signal::Metric(MetricKind::EnergyJoules), lambda)],
        ),
        Policy::ProConfidence => (
            Maximize,
            Identity,
            vec![(Signal::Metric(MetricKind::ConfidenceRaw), lambda)],
        ),
        Policy::ProCache => (Maximize, Identity, vec![(Signal::CacheResidency, lambda)]),
    };
    ScoringPlan {
        direction,
        transform,
        terms,
    }
}

/// Everything the ranking needs to know about one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub model_id: String,
    pub static_score: f64,
    pub signals: BTreeMap<Signal, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub model_id: String,
    pub static_score: f64,
    pub dynamic_component: f64,
    pub total_score: f64,
}

/// Scores candidates and orders them best-first. The sort is stable, so
/// equal scores keep fleet order.
pub fn rank(plan: &ScoringPlan, candidates: &[Candidate]) -> Vec<ScoredCandidate> {
    let mut scored: Vec<ScoredCandidate> = candidates
        .iter()
        .map(|c| {
            let dynamic: f64 = plan
                .terms
                .iter()
                .map(|(signal, weight)| weight * c.signals.get(signal).copied().unwrap_or(0.0))
                .sum();
            ScoredCandidate {
                model_id: c.model_id.clone(),
                static_score: c.static_score,
                dynamic_component: dynamic,
                total_score: plan.transform.apply(c.static_score) + dynamic,
            }
        })
        .collect();
    scored.sort_by(|a, b| plan.better(a.total_score, b.total_score));
    scored
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingDecision {
    pub request_id: String,
    /// Every registered model, best first.
    pub scored: Vec<ScoredCandidate>,
    pub selected: String,
    pub decision_time_ms: f64,
}

/// Stateless apart from the cached description embeddings.
#[derive(Debug, Clone)]
pub struct Router<E = HashingEmbedder> {
    embedder: E,
    method: SimilarityMethod,
    descriptions: BTreeMap<String, DescriptionIndex>,
}

impl Default for Router<HashingEmbedder> {
    fn default() -> Self {
        Self::new(HashingEmbedder::default(), SimilarityMethod::Cosine)
    }
}

impl<E: Embedder> Router<E> {
    pub fn new(embedder: E, method: SimilarityMethod) -> Self {
        Self {
            embedder,
            method,
            descriptions: BTreeMap::new(),
        }
    }

    pub fn method(&self) -> SimilarityMethod {
        self.method
    }

    pub fn embedder(&self) -> &E {
        &self.embedder
    }

    pub fn index_model(&mut self, record: &ModelRecord) {
        let idx = DescriptionIndex::new(&self.embedder, &record.description);
        self.descriptions.insert(record.model_id.clone(), idx);
    }

    pub fn forget_model(&mut self, model_id: &str) {
        self.descriptions.remove(model_id);
    }

    pub fn static_score(&self, query: &str, model: &ModelRecord) -> Result<f64> {
        let q = QueryIndex::new(&self.embedder, query);
        match self.descriptions.get(&model.model_id) {
            Some(d) => static_score(&self.embedder, self.method, &q, d),
            None => {
                let d = DescriptionIndex::new(&self.embedder, &model.description);
                static_score(&self.embedder, self.method, &q, &d)
            }
        }
    }

    /// Builds the candidate list for `query` over `fleet` (in fleet order).
    pub fn candidates(
        &self,
        query: &str,
        fleet: &[ModelRecord],
        plan: &ScoringPlan,
        knowledge: &Knowledge,
        is_resident: &dyn Fn(&str) -> bool,
    ) -> Result<Vec<Candidate>> {
        let q = QueryIndex::new(&self.embedder, query);
        let mut normalized: BTreeMap<MetricKind, Vec<f64>> = BTreeMap::new();
        for metric in plan.metrics() {
            let averages = fleet
                .iter()
                .map(|m| knowledge.rolling_average(&m.model_id, metric))
                .collect::<Result<Vec<_>>>()?;
            normalized.insert(metric, normalize_values(metric, &averages));
        }
        fleet
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let sim = match self.descriptions.get(&m.model_id) {
                    Some(d) => static_score(&self.embedder, self.method, &q, d)?,
                    None => {
                        let d = DescriptionIndex::new(&self.embedder, &m.description);
                        static_score(&self.embedder, self.method, &q, &d)?
                    }
                };
                let mut signals = BTreeMap::new();
                for (signal, _) in &plan.terms {
                    let v = match signal {
                        Signal::Metric(metric) => normalized[metric][i],
                        Signal::CacheResidency => {
                            if is_resident(&m.model_id) {
                                1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    signals.insert(*signal, v);
                }
                Ok(Candidate {
                    model_id: m.model_id.clone(),
                    static_score: sim,
                    signals,
                })
            })
            .collect()
    }

    /// Analyze, plan and select for a single query.
    ///
    /// `now_ms` is a monotonic millisecond clock used only to report the
    /// decision time.
    #[allow(clippy::too_many_arguments)]
    pub fn route(
        &self,
        request_id: &str,
        query: &str,
        objective: &ObjectiveConfig,
        fleet: &[ModelRecord],
        knowledge: &Knowledge,
        is_resident: &dyn Fn(&str) -> bool,
        now_ms: &dyn Fn() -> f64,
    ) -> Result<RoutingDecision> {
        let started = now_ms();
        if fleet.is_empty() {
            return Err(Error::EmptyFleet);
        }
        objective.validate()?;
        let plan = effective_plan(objective, knowledge)?;
        let candidates = self.candidates(query, fleet, &plan, knowledge, is_resident)?;
        let scored = rank(&plan, &candidates);
        let selected = scored[0].model_id.clone();
        Ok(RoutingDecision {
            request_id: request_id.into(),
            scored,
            selected,
            decision_time_ms: (now_ms() - started).max(0.0),
        })
    }
}

/// The plan for `objective`, with metric weights attenuated by their
/// observed correlations when `correlation_adjust` is on.
pub fn effective_plan(objective: &ObjectiveConfig, knowledge: &Knowledge) -> Result<ScoringPlan> {
    let mut plan = plan_parameters(objective);
    if objective.correlation_adjust && plan.metrics().next().is_some() {
        let lambdas: BTreeMap<MetricKind, f64> = plan
            .terms
            .iter()
            .filter_map(|(s, w)| match s {
                Signal::Metric(m) => Some((*m, *w)),
                Signal::CacheResidency => None,
            })
            .collect();
        let adjusted = adjust_weights(&lambdas, &knowledge.correlations())?;
        for (signal, weight) in &mut plan.terms {
            if let Signal::Metric(m) = signal {
                *weight = adjusted[m];
            }
        }
    }
    Ok(plan)
}
