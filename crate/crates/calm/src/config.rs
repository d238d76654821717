//! Experiment definition file (JSON).
//!
//! Relative paths inside a config (query pools, shape and trace files) are
//! resolved against the directory holding the config.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use calm_core::backend::BackendProfile;
use calm_core::engine::{CacheConfig, EngineConfig};
use calm_core::registry::ModelRecord;
use calm_core::router::ObjectiveConfig;
use calm_core::scheduler::SchedulingPolicy;
use calm_core::similarity::SimilarityMethod;
use calm_core::workload::{ArrivalProcess, QueryPool, WorkloadSpec};
use serde::{Deserialize, Serialize};

use crate::formats;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Virtual,
    Wall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalConfig {
    Poisson,
    /// Per-minute intensity shape, inline or from a file (one number per line).
    Bursty {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        shape_file: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        intensity: Option<Vec<f64>>,
    },
    /// Replay a recorded trace file verbatim.
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    #[serde(default = "default_total")]
    pub total_requests: usize,
    pub duration_minutes: f64,
    pub max_tokens: u32,
    pub domain_mix: BTreeMap<String, f64>,
    pub arrival: ArrivalConfig,
    /// Domain name → query file (one query per line).
    pub query_pools: BTreeMap<String, PathBuf>,
}

fn default_total() -> usize {
    500
}

fn default_time_scale() -> f64 {
    1.0
}

fn default_connections() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    pub seed: u64,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default)]
    pub objective: ObjectiveConfig,
    #[serde(default)]
    pub scheduler: SchedulingPolicy,
    #[serde(default)]
    pub cache: CacheConfig,
    #[serde(default)]
    pub similarity: SimilarityMethod,
    pub profiles: Vec<BackendProfile>,
    pub models: Vec<ModelRecord>,
    pub workload: WorkloadConfig,
    /// Address for `serve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Real seconds per simulated second on the wall clock.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    /// Client connections used when replaying over TCP.
    #[serde(default = "default_connections")]
    pub connections: usize,
    /// Directory relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl FleetConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: FleetConfig = serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), Error> {
        let mut problems = Vec::new();
        if let Err(e) = self.objective.validate() {
            problems.push(format!("objective: {e}"));
        }
        if self.cache.enabled && self.cache.k == 0 {
            problems.push("cache.k: must be >= 1 when the cache is enabled".into());
        }
        if !(self.time_scale > 0.0 && self.time_scale.is_finite()) {
            problems.push("time_scale: must be positive".into());
        }
        if self.connections == 0 {
            problems.push("connections: must be >= 1".into());
        }
        let mut profile_ids = std::collections::BTreeSet::new();
        for p in &self.profiles {
            if !profile_ids.insert(p.profile_id.as_str()) {
                problems.push(format!("profiles: duplicate profile_id `{}`", p.profile_id));
            }
            if let Err(e) = p.validate() {
                problems.push(format!("profiles[{}]: {e}", p.profile_id));
            }
        }
        if self.models.is_empty() {
            problems.push("models: at least one model is required".into());
        }
        let mut model_ids = std::collections::BTreeSet::new();
        for m in &self.models {
            if !model_ids.insert(m.model_id.as_str()) {
                problems.push(format!("models: duplicate model_id `{}`", m.model_id));
            }
            if let Err(e) = m.validate() {
                problems.push(format!("models[{}]: {e}", m.model_id));
            }
            if !profile_ids.contains(m.profile_ref.as_str()) {
                problems.push(format!(
                    "models[{}].profile_ref: unknown profile `{}`",
                    m.model_id, m.profile_ref
                ));
            }
        }
        let w = &self.workload;
        if w.total_requests == 0 {
            problems.push("workload.total_requests: must be positive".into());
        }
        if !(w.duration_minutes > 0.0) {
            problems.push("workload.duration_minutes: must be positive".into());
        }
        if w.max_tokens == 0 {
            problems.push("workload.max_tokens: must be positive".into());
        }
        let sum: f64 = w.domain_mix.values().sum();
        if (sum - 1.0).abs() > 1e-9 || w.domain_mix.values().any(|v| *v < 0.0) {
            problems.push(format!("workload.domain_mix: weights must be non-negative and sum to 1 (got {sum})"));
        }
        for (d, weight) in &w.domain_mix {
            if *weight > 0.0 && !w.query_pools.contains_key(d) {
                problems.push(format!("workload.query_pools: missing pool for domain `{d}`"));
            }
        }
        if let ArrivalConfig::Bursty { shape_file, intensity } = &w.arrival {
            if shape_file.is_some() == intensity.is_some() {
                problems.push("workload.arrival: bursty needs exactly one of shape_file or intensity".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            objective: self.objective,
            scheduler: self.scheduler,
            cache: self.cache,
            similarity: self.similarity,
            seed: self.seed,
            ..EngineConfig::default()
        }
    }

    pub fn load_pools(&self) -> Result<QueryPool, Error> {
        self.workload
            .query_pools
            .iter()
            .map(|(d, p)| Ok((d.clone(), formats::read_query_pool(&self.resolve(p))?)))
            .collect()
    }

    /// The core workload spec; `None` when the arrival mode replays a trace.
    pub fn workload_spec(&self) -> Result<Option<WorkloadSpec>, Error> {
        let w = &self.workload;
        let arrival = match &w.arrival {
            ArrivalConfig::Poisson => ArrivalProcess::Poisson,
            ArrivalConfig::Bursty { shape_file, intensity } => {
                let intensity = match (shape_file, intensity) {
                    (Some(f), _) => formats::read_shape(&self.resolve(f))?,
                    (None, Some(v)) => v.clone(),
                    (None, None) => Vec::new(),
                };
                ArrivalProcess::Bursty { intensity }
            }
            ArrivalConfig::Trace { .. } => return Ok(None),
        };
        Ok(Some(WorkloadSpec {
            total_requests: w.total_requests,
            duration_minutes: w.duration_minutes,
            max_tokens: w.max_tokens,
            domain_mix: w.domain_mix.clone(),
            arrival,
            seed: self.seed,
        }))
    }
}
