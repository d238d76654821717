//! The global request queue and its dequeue disciplines.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::telemetry::{Knowledge, MetricKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SchedulingPolicy {
    #[default]
    Fifo,
    /// Shortest time to completion first, by the selected model's rolling
    /// average inference time.
    Stcf,
}

/// Who asked, and where the answer goes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClientMeta {
    pub client_id: String,
    pub reply_to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RequestEnvelope {
    pub request_id: String,
    pub query_text: String,
    pub selected_model: String,
    pub client: ClientMeta,
    /// Admission time in seconds on the executor's clock.
    pub enqueue_time: f64,
    pub max_tokens: u32,
    /// Domain the query belongs to, when known. Drives simulated quality.
    pub domain_tag: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RequestQueue {
    items: VecDeque<RequestEnvelope>,
    ids: BTreeSet<String>,
    last_enqueue: f64,
}

impl RequestQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends and returns the queue position (0 = head).
    pub fn enqueue(&mut self, envelope: RequestEnvelope) -> Result<usize> {
        if self.ids.contains(&envelope.request_id) {
            return Err(Error::DuplicateRequest(envelope.request_id));
        }
        if envelope.max_tokens == 0 {
            return Err(Error::OutOfRange {
                what: "max_tokens",
                value: 0.0,
            });
        }
        if !envelope.enqueue_time.is_finite() || envelope.enqueue_time < self.last_enqueue {
            return Err(Error::OutOfRange {
                what: "enqueue_time",
                value: envelope.enqueue_time,
            });
        }
        self.last_enqueue = envelope.enqueue_time;
        self.ids.insert(envelope.request_id.clone());
        self.items.push_back(envelope);
        Ok(self.items.len() - 1)
    }

    pub fn next_fifo(&mut self) -> Option<RequestEnvelope> {
        let env = self.items.pop_front()?;
        self.ids.remove(&env.request_id);
        Some(env)
    }

    /// Removes the request with the smallest expected inference time; ties go
    /// to the earliest arrival. Expected times are read once per call.
    pub fn next_stcf(&mut self, knowledge: &Knowledge) -> Option<RequestEnvelope> {
        self.next_by_expected_time(|model| {
            knowledge
                .rolling_average(model, MetricKind::LatencySeconds)
                .unwrap_or_else(|_| MetricKind::LatencySeconds.cold_start_default())
        })
    }

    pub fn next_by_expected_time(
        &mut self,
        mut expected: impl FnMut(&str) -> f64,
    ) -> Option<RequestEnvelope> {
        let mut best: Option<(usize, f64)> = None;
        let mut snapshot: Vec<(&str, f64)> = Vec::new();
        for (i, env) in self.items.iter().enumerate() {
            let model = env.selected_model.as_str();
            let t = match snapshot.iter().find(|(m, _)| *m == model) {
                Some(&(_, t)) => t,
                None => {
                    let t = expected(model);
                    snapshot.push((model, t));
                    t
                }
            };
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((i, t));
            }
        }
        let env = self.items.remove(best?.0)?;
        self.ids.remove(&env.request_id);
        Some(env)
    }

    pub fn next(&mut self, policy: SchedulingPolicy, knowledge: &Knowledge) -> Option<RequestEnvelope> {
        match policy {
            SchedulingPolicy::Fifo => self.next_fifo(),
            SchedulingPolicy::Stcf => self.next_stcf(knowledge),
        }
    }

    /// Removes every queued request targeting `model_id`, in arrival order.
    pub fn fail_model(&mut self, model_id: &str) -> Vec<RequestEnvelope> {
        let (failed, kept): (VecDeque<_>, VecDeque<_>) =
            self.items.drain(..).partition(|e| e.selected_model == model_id);
        self.items = kept;
        for e in &failed {
            self.ids.remove(&e.request_id);
        }
        failed.into()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RequestEnvelope> {
        self.items.iter()
    }
}

#[cfg(test)]
pub(crate) fn envelope(id: &str, model: &str, t: f64) -> RequestEnvelope {
    RequestEnvelope {
        request_id: id.into(),
        query_text: alloc::format!("query {id}"),
        selected_model: model.into(),
        client: ClientMeta::default(),
        enqueue_time: t,
        max_tokens: 256,
        domain_tag: None,
    }
}
