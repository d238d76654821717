//! Per-request records and run summaries.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Nearest-rank percentile: the element at 1-based rank `ceil(p/100 * n)`
/// of the ascending sort. `p` must lie in `(0, 100]`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::OutOfRange {
            what: "percentile",
            value: p,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(p, sorted.len()) - 1])
}

fn nearest_rank(p: f64, n: usize) -> usize {
    let rank = libm::ceil(p * n as f64 / 100.0) as usize;
    rank.clamp(1, n)
}

/// One served request, as written to the per-request CSV.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RequestRecord {
    pub request_id: String,
    pub arrival_s: f64,
    pub domain: String,
    pub selected_model: String,
    pub queue_wait_s: f64,
    /// Time on the executor: model load (if any) plus inference.
    pub service_s: f64,
    pub end_to_end_s: f64,
    pub energy_j: f64,
    pub rating: u8,
    pub cold_start: bool,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunSummary {
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
    pub per_model_requests: BTreeMap<String, usize>,
}

impl RunSummary {
    /// Summarizes the rows of one run. Peak footprint is not recoverable from
    /// the rows and is passed in.
    pub fn from_records(records: &[RequestRecord], peak_footprint_mb: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n = records.len() as f64;
        let latencies: Vec<f64> = records.iter().map(|r| r.end_to_end_s).collect();
        let mean = latencies.iter().sum::<f64>() / n;
        let var = latencies.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
        let mut per_model = BTreeMap::new();
        for r in records {
            *per_model.entry(r.selected_model.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            requests: records.len(),
            mean_latency_s: mean,
            latency_variance_s2: var,
            p50_latency_s: percentile(&latencies, 50.0)?,
            p90_latency_s: percentile(&latencies, 90.0)?,
            p95_latency_s: percentile(&latencies, 95.0)?,
            p99_latency_s: percentile(&latencies, 99.0)?,
            mean_confidence: records.iter().map(|r| f64::from(r.rating)).sum::<f64>() / n,
            total_energy_kj: records.iter().map(|r| r.energy_j).sum::<f64>() / 1000.0,
            cache_hit_rate: records.iter().filter(|r| r.cache_hit).count() as f64 / n,
            cold_starts: records.iter().filter(|r| r.cold_start).count(),
            peak_footprint_mb,
            per_model_requests: per_model,
        })
    }

    pub fn latency_stddev_s(&self) -> f64 {
        libm::sqrt(self.latency_variance_s2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn nearest_rank_examples() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(percentile(&v, 90.0).unwrap(), 9.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 10.0);
        assert_eq!(percentile(&v, 0.1).unwrap(), 1.0);
        assert_eq!(percentile(&[7.5], 37.0).unwrap(), 7.5);
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 50.0).unwrap(), 2.0);
        assert_eq!(percentile(&[], 50.0), Err(Error::EmptyInput));
        assert!(percentile(&[1.0], 0.0).is_err());
        assert!(percentile(&[1.0], 100.5).is_err());
    }

    fn rec(id: &str, model: &str, latency: f64, rating: u8, hit: bool) -> RequestRecord {
        RequestRecord {
            request_id: id.into(),
            arrival_s: 0.0,
            domain: "d".into(),
            selected_model: model.into(),
            queue_wait_s: 0.0,
            service_s: latency,
            end_to_end_s: latency,
            energy_j: 500.0,
            rating,
            cold_start: !hit,
            cache_hit: hit,
        }
    }

    #[test]
    fn summary_fields() {
        let rows = vec![
            rec("1", "a", 1.0, 5, false),
            rec("2", "a", 3.0, 3, true),
            rec("3", "b", 2.0, 4, true),
            rec("4", "a", 2.0, 4, true),
        ];
        let s = RunSummary::from_records(&rows, 42.0).unwrap();
        assert_eq!(s.requests, 4);
        assert_eq!(s.mean_latency_s, 2.0);
        assert_eq!(s.latency_variance_s2, 0.5);
        assert_eq!(s.p50_latency_s, 2.0);
        assert_eq!(s.p99_latency_s, 3.0);
        assert_eq!(s.mean_confidence, 4.0);
        assert_eq!(s.total_energy_kj, 2.0);
        assert_eq!(s.cache_hit_rate, 0.75);
        assert_eq!(s.cold_starts, 1);
        assert_eq!(s.per_model_requests["a"], 3);
        assert!(RunSummary::from_records(&[], 0.0).is_err());
    }
}
