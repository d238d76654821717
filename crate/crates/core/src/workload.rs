//! Synthetic request traces.
//!
//! A trace holds exactly `total_requests` arrivals inside the horizon
//! `[0, duration_minutes * 60]`. Poisson traces are built from exponential
//! inter-arrival gaps rescaled to the horizon, which is the Poisson process
//! conditioned on its count. Bursty traces follow a per-minute intensity shape.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::rng::stream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum ArrivalProcess {
    #[default]
    Poisson,
    /// Relative per-minute intensities, stretched over the horizon.
    Bursty { intensity: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WorkloadSpec {
    pub total_requests: usize,
    pub duration_minutes: f64,
    pub max_tokens: u32,
    pub domain_mix: BTreeMap<String, f64>,
    pub arrival: ArrivalProcess,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn horizon_s(&self) -> f64 {
        self.duration_minutes * 60.0
    }

    /// Mean offered load in requests per minute.
    pub fn mean_rate_rpm(&self) -> f64 {
        self.total_requests as f64 / self.duration_minutes
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidWorkload(m));
        if self.total_requests == 0 {
            return bad("total_requests must be positive".into());
        }
        if !(self.duration_minutes > 0.0) || !self.duration_minutes.is_finite() {
            return bad(format!("duration_minutes must be positive, got {}", self.duration_minutes));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive".into());
        }
        if self.domain_mix.is_empty() {
            return bad("domain_mix is empty".into());
        }
        if self.domain_mix.values().any(|w| !(*w >= 0.0)) {
            return bad("domain weights must be non-negative".into());
        }
        let sum: f64 = self.domain_mix.values().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("domain weights sum to {sum}, expected 1"));
        }
        if let ArrivalProcess::Bursty { intensity } = &self.arrival {
            if intensity.is_empty() || intensity.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return bad("intensity shape must be non-empty and non-negative".into());
            }
            if intensity.iter().sum::<f64>() <= 0.0 {
                return bad("intensity shape is all zero".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub arrival_s: f64,
    pub domain: String,
    pub query_text: String,
    pub max_tokens: u32,
}

pub type QueryPool = BTreeMap<String, Vec<String>>;

pub fn generate_trace(spec: &WorkloadSpec, pool: &QueryPool) -> Result<Vec<TraceEntry>> {
    spec.validate()?;
    let domains: Vec<(&String, f64)> = spec
        .domain_mix
        .iter()
        .filter(|(_, w)| **w > 0.0)
        .map(|(d, w)| (d, *w))
        .collect();
    for (d, _) in &domains {
        if pool.get(*d).is_none_or(|q| q.is_empty()) {
            return Err(Error::InvalidWorkload(format!("query pool for `{d}` is empty")));
        }
    }

    let mut arrival_rng = stream(spec.seed, "workload/arrivals");
    let arrivals = match &spec.arrival {
        ArrivalProcess::Poisson => poisson_arrivals(spec.total_requests, spec.horizon_s(), &mut arrival_rng),
        ArrivalProcess::Bursty { intensity } => {
            shaped_arrivals(spec.total_requests, spec.horizon_s(), intensity, &mut arrival_rng)?
        }
    };

    let picker = WeightedIndex::new(domains.iter().map(|(_, w)| *w))
        .map_err(|e| Error::InvalidWorkload(format!("{e}")))?;
    let mut mix_rng = stream(spec.seed, "workload/domains");
    Ok(arrivals
        .into_iter()
        .map(|arrival_s| {
            let domain = domains[picker.sample(&mut mix_rng)].0;
            let queries = &pool[domain];
            let query_text = queries[mix_rng.random_range(0..queries.len())].clone();
            TraceEntry {
                arrival_s,
                domain: domain.clone(),
                query_text,
                max_tokens: spec.max_tokens,
            }
        })
        .collect())
}

/// `n` arrivals of a Poisson process conditioned to land in `[0, horizon]`.
pub fn poisson_arrivals<R: Rng + ?Sized>(n: usize, horizon: f64, rng: &mut R) -> Vec<f64> {
    let gaps: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = gaps.iter().sum();
    let mut acc = 0.0;
    gaps[..n]
        .iter()
        .map(|g| {
            acc += g;
            (horizon * acc / total).min(horizon)
        })
        .collect()
}

/// `n` arrivals from a piecewise-constant intensity over one-minute bins.
pub fn shaped_arrivals<R: Rng + ?Sized>(
    n: usize,
    horizon: f64,
    shape: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    let bins = libm::ceil(horizon / 60.0).max(1.0) as usize;
    let mut starts = Vec::with_capacity(bins);
    let mut widths = Vec::with_capacity(bins);
    let mut weights = Vec::with_capacity(bins);
    for m in 0..bins {
        let start = m as f64 * 60.0;
        let width = (horizon - start).clamp(0.0, 60.0);
        let level = shape[m * shape.len() / bins];
        starts.push(start);
        widths.push(width);
        weights.push(level * width / 60.0);
    }
    let picker = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidWorkload(format!("intensity shape: {e}")))?;
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let b = picker.sample(rng);
            starts[b] + widths[b] * rng.random::<f64>()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}
