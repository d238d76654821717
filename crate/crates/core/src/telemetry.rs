//! Monitor and knowledge side of the adaptation loop.
//!
//! Each registered model owns one rolling window per [`MetricKind`]. A global
//! window of per-request rows feeds the rank correlations used to attenuate
//! redundant metric weights.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

pub const DEFAULT_WINDOW: usize = 100;
pub const CONFIDENCE_SCALE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MetricKind {
    LatencySeconds,
    EnergyJoules,
    /// Feedback rating on the 0..=5 scale.
    ConfidenceRaw,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [
        MetricKind::LatencySeconds,
        MetricKind::EnergyJoules,
        MetricKind::ConfidenceRaw,
    ];

    /// Value assumed before any observation exists. Latency and energy start
    /// at zero and confidence at the top of the scale, so early decisions are
    /// driven by similarity and every model gets explored.
    pub fn cold_start_default(self) -> f64 {
        match self {
            MetricKind::LatencySeconds | MetricKind::EnergyJoules => 0.0,
            MetricKind::ConfidenceRaw => CONFIDENCE_SCALE,
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn check(self, value: f64) -> Result<()> {
        let ok = value.is_finite()
            && match self {
                MetricKind::ConfidenceRaw => (0.0..=CONFIDENCE_SCALE).contains(&value),
                _ => value >= 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                what: self.name(),
                value,
            })
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::LatencySeconds => "latency_seconds",
            MetricKind::EnergyJoules => "energy_joules",
            MetricKind::ConfidenceRaw => "confidence_raw",
        }
    }
}

/// Bounded FIFO of observations with an O(1) mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RollingWindow {
    capacity: usize,
    observations: VecDeque<f64>,
    sum: f64,
    evictions_since_resum: usize,
}

impl RollingWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be at least 1");
        Self {
            capacity,
            observations: VecDeque::with_capacity(capacity),
            sum: 0.0,
            evictions_since_resum: 0,
        }
    }

    pub fn push(&mut self, value: f64) {
        if self.observations.len() == self.capacity {
            if let Some(old) = self.observations.pop_front() {
                self.sum -= old;
                self.evictions_since_resum += 1;
            }
        }
        self.observations.push_back(value);
        self.sum += value;
        // Subtractive updates drift; re-anchor once per full turnover.
        if self.evictions_since_resum >= self.capacity {
            self.sum = self.observations.iter().sum();
            self.evictions_since_resum = 0;
        }
    }

    pub fn mean(&self) -> Option<f64> {
        if self.observations.is_empty() {
            None
        } else {
            Some(self.sum / self.observations.len() as f64)
        }
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations.iter().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowState {
    pub len: usize,
    pub average: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelTelemetry {
    pub model_id: String,
    windows: [RollingWindow; 3],
}

impl ModelTelemetry {
    pub fn window(&self, metric: MetricKind) -> &RollingWindow {
        &self.windows[metric.index()]
    }

    pub fn average(&self, metric: MetricKind) -> f64 {
        self.window(metric)
            .mean()
            .unwrap_or_else(|| metric.cold_start_default())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct RequestRow {
    request_id: String,
    values: [Option<f64>; 3],
}

/// Unordered pair of metrics, stored with the smaller kind first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MetricPair<K>(K, K);

impl<K: Ord + Copy> MetricPair<K> {
    pub fn new(a: K, b: K) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn contains(&self, k: K) -> bool {
        self.0 == k || self.1 == k
    }

    /// The member that is not `k`, if `k` is in the pair and the pair is
    /// not degenerate.
    pub fn other(&self, k: K) -> Option<K> {
        if self.0 == self.1 {
            None
        } else if self.0 == k {
            Some(self.1)
        } else if self.1 == k {
            Some(self.0)
        } else {
            None
        }
    }
}

/// The knowledge store: per-model windows plus the global request window.
/// Cloning it yields a consistent point-in-time snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Knowledge {
    window: usize,
    models: Vec<ModelTelemetry>,
    global: VecDeque<RequestRow>,
}

impl Knowledge {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window must be at least 1");
        Self {
            window,
            models: Vec::new(),
            global: VecDeque::new(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Starts tracking a model with empty (cold) windows. Re-adding a known
    /// model is a no-op.
    pub fn add_model(&mut self, model_id: &str) {
        if self.position(model_id).is_none() {
            let w = RollingWindow::new(self.window);
            self.models.push(ModelTelemetry {
                model_id: model_id.into(),
                windows: [w.clone(), w.clone(), w],
            });
        }
    }

    pub fn remove_model(&mut self, model_id: &str) {
        self.models.retain(|m| m.model_id != model_id);
    }

    pub fn models(&self) -> &[ModelTelemetry] {
        &self.models
    }

    pub fn model(&self, model_id: &str) -> Result<&ModelTelemetry> {
        self.models
            .iter()
            .find(|m| m.model_id == model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.into()))
    }

    fn position(&self, model_id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.model_id == model_id)
    }

    pub fn record_observation(
        &mut self,
        model_id: &str,
        metric: MetricKind,
        value: f64,
    ) -> Result<WindowState> {
        let idx = self
            .position(model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.into()))?;
        metric.check(value)?;
        let w = &mut self.models[idx].windows[metric.index()];
        w.push(value);
        Ok(WindowState {
            len: w.len(),
            average: w.mean().unwrap_or(value),
        })
    }

    pub fn rolling_average(&self, model_id: &str, metric: MetricKind) -> Result<f64> {
        Ok(self.model(model_id)?.average(metric))
    }

    /// Each model's rolling average scaled into `[0, 1]`. Latency and energy
    /// are divided by the fleet maximum (all zero when the maximum is zero);
    /// confidence is divided by the fixed scale of 5.
    pub fn normalize_across_fleet(&self, metric: MetricKind) -> Result<Vec<(String, f64)>> {
        if self.models.is_empty() {
            return Err(Error::EmptyFleet);
        }
        let averages: Vec<f64> = self.models.iter().map(|m| m.average(metric)).collect();
        Ok(self
            .models
            .iter()
            .zip(normalize_values(metric, &averages))
            .map(|(m, v)| (m.model_id.clone(), v))
            .collect())
    }

    /// Appends a per-request row to the global window. Missing metrics may be
    /// filled in later with [`Knowledge::complete_request`].
    pub fn record_request(
        &mut self,
        request_id: &str,
        latency: Option<f64>,
        energy: Option<f64>,
        confidence: Option<f64>,
    ) {
        if self.global.len() == self.window {
            self.global.pop_front();
        }
        self.global.push_back(RequestRow {
            request_id: request_id.into(),
            values: [latency, energy, confidence],
        });
    }

    /// Fills one metric of a row still held in the global window. Returns
    /// false when the row has already been evicted.
    pub fn complete_request(&mut self, request_id: &str, metric: MetricKind, value: f64) -> bool {
        match self.global.iter_mut().rev().find(|r| r.request_id == request_id) {
            Some(row) => {
                row.values[metric.index()] = Some(value);
                true
            }
            None => false,
        }
    }

    /// Spearman correlation for every metric pair, over the rows of the
    /// global window where both metrics are present. Pairs with fewer than two
    /// complete rows are reported as 0.
    pub fn correlations(&self) -> BTreeMap<MetricPair<MetricKind>, f64> {
        let mut out = BTreeMap::new();
        for (i, &a) in MetricKind::ALL.iter().enumerate() {
            for &b in &MetricKind::ALL[i + 1..] {
                let (xs, ys): (Vec<f64>, Vec<f64>) = self
                    .global
                    .iter()
                    .filter_map(|r| Some((r.values[a.index()]?, r.values[b.index()]?)))
                    .unzip();
                let rho = spearman_correlation(&xs, &ys).unwrap_or(0.0);
                out.insert(MetricPair::new(a, b), rho);
            }
        }
        out
    }
}

/// Normalization rule applied to raw rolling averages listed in fleet order.
pub fn normalize_values(metric: MetricKind, averages: &[f64]) -> Vec<f64> {
    match metric {
        MetricKind::ConfidenceRaw => averages.iter().map(|a| a / CONFIDENCE_SCALE).collect(),
        _ => {
            let max = averages.iter().copied().fold(0.0f64, f64::max);
            if max > 0.0 {
                averages.iter().map(|a| a / max).collect()
            } else {
                averages.iter().map(|_| 0.0).collect()
            }
        }
    }
}

/// Fractional ranks (1-based); tied values share the mean of their ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling. A constant
/// sequence carries no signal and yields 0.
pub fn spearman_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::BadSequences {
            left: xs.len(),
            right: ys.len(),
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Attenuates each weight by its total absolute correlation with the other
/// metrics: `λ'_l = λ_l / (1 + Σ_{l' ≠ l} |ρ(l, l')|)`.
pub fn adjust_weights<K: Ord + Copy>(
    lambdas: &BTreeMap<K, f64>,
    correlations: &BTreeMap<MetricPair<K>, f64>,
) -> Result<BTreeMap<K, f64>> {
    for (&_, &rho) in correlations {
        if !(rho.abs() <= 1.0) {
            return Err(Error::OutOfRange {
                what: "correlation",
                value: rho,
            });
        }
    }
    for &lambda in lambdas.values() {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::OutOfRange {
                what: "lambda",
                value: lambda,
            });
        }
    }
    Ok(lambdas
        .iter()
        .map(|(&metric, &lambda)| {
            let spread: f64 = correlations
                .iter()
                .filter(|(pair, _)| pair.other(metric).is_some())
                .map(|(_, rho)| rho.abs())
                .sum();
            (metric, lambda / (1.0 + spread))
        })
        .collect())
}
