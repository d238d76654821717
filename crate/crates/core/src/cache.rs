//! Capacity-bounded set of resident (loaded) models.
//!
//! Capacity counts models, not bytes. Footprints are tracked only to report
//! the resident memory and its peak.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EvictionPolicy {
    /// Evict the model whose last access is oldest.
    #[default]
    Lru,
    /// Evict the model with the fewest lifetime accesses.
    Lfu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidentEntry {
    pub model_id: String,
    /// Logical access tick; larger is more recent.
    pub last_access: u64,
    pub access_count: u64,
    pub footprint_mb: f64,
    /// Fleet-order rank used to break ties.
    pub fleet_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    MissLoaded { evicted: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Access {
    pub outcome: CacheOutcome,
    /// Seconds spent loading; zero on a hit.
    pub load_duration: f64,
}

impl Access {
    pub fn is_hit(&self) -> bool {
        self.outcome == CacheOutcome::Hit
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    capacity: usize,
    policy: EvictionPolicy,
    resident: Vec<ResidentEntry>,
    lifetime_counts: BTreeMap<String, u64>,
    hits: u64,
    misses: u64,
    tick: u64,
    peak_footprint_mb: f64,
}

impl Cache {
    pub fn new(capacity: usize, policy: EvictionPolicy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::OutOfRange {
                what: "cache capacity",
                value: 0.0,
            });
        }
        Ok(Self {
            capacity,
            policy,
            resident: Vec::new(),
            lifetime_counts: BTreeMap::new(),
            hits: 0,
            misses: 0,
            tick: 0,
            peak_footprint_mb: 0.0,
        })
    }

    /// A cache that never evicts: every model loads once and stays.
    pub fn unbounded() -> Self {
        Self::new(usize::MAX, EvictionPolicy::Lru).expect("non-zero capacity")
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn policy(&self) -> EvictionPolicy {
        self.policy
    }

    /// Makes `model_id` resident, loading it on a miss.
    ///
    /// `loader` runs exactly once per miss, after any eviction, and returns
    /// the load duration in seconds. If it fails the miss is still counted
    /// and the model stays out of the cache.
    pub fn ensure_resident<F>(
        &mut self,
        model_id: &str,
        fleet_rank: usize,
        footprint_mb: f64,
        loader: F,
    ) -> Result<Access>
    where
        F: FnOnce() -> Result<f64>,
    {
        self.tick += 1;
        *self.lifetime_counts.entry(model_id.into()).or_insert(0) += 1;
        let count = self.lifetime_counts[model_id];

        if let Some(e) = self.resident.iter_mut().find(|e| e.model_id == model_id) {
            e.last_access = self.tick;
            e.access_count = count;
            self.hits += 1;
            return Ok(Access {
                outcome: CacheOutcome::Hit,
                load_duration: 0.0,
            });
        }

        self.misses += 1;
        let evicted = if self.resident.len() >= self.capacity {
            let victim = self.victim().expect("full cache has a victim");
            Some(self.resident.remove(victim).model_id)
        } else {
            None
        };
        let load_duration = loader()?;
        self.resident.push(ResidentEntry {
            model_id: model_id.into(),
            last_access: self.tick,
            access_count: count,
            footprint_mb,
            fleet_rank,
        });
        self.peak_footprint_mb = self.peak_footprint_mb.max(self.resident_footprint_mb());
        Ok(Access {
            outcome: CacheOutcome::MissLoaded { evicted },
            load_duration,
        })
    }

    fn victim(&self) -> Option<usize> {
        let key = |e: &ResidentEntry| match self.policy {
            EvictionPolicy::Lru => (e.last_access, e.fleet_rank),
            EvictionPolicy::Lfu => (e.access_count, e.fleet_rank),
        };
        self.resident
            .iter()
            .enumerate()
            .min_by_key(|(_, e)| key(e))
            .map(|(i, _)| i)
    }

    /// Drops a model from the resident set; returns whether it was resident.
    pub fn remove(&mut self, model_id: &str) -> bool {
        self.lifetime_counts.remove(model_id);
        let before = self.resident.len();
        self.resident.retain(|e| e.model_id != model_id);
        before != self.resident.len()
    }

    pub fn is_resident(&self, model_id: &str) -> bool {
        self.resident.iter().any(|e| e.model_id == model_id)
    }

    pub fn resident(&self) -> &[ResidentEntry] {
        &self.resident
    }

    pub fn resident_footprint_mb(&self) -> f64 {
        self.resident.iter().map(|e| e.footprint_mb).sum()
    }

    pub fn peak_footprint_mb(&self) -> f64 {
        self.peak_footprint_mb
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_rate(&self) -> Result<f64> {
        let total = self.hits + self.misses;
        if total == 0 {
            return Err(Error::NoAccesses);
        }
        Ok(self.hits as f64 / total as f64)
    }
}
