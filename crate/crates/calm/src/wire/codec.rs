//! Newline-delimited JSON messages. Every message carries a `type` tag and an
//! `id`; replies echo the id of the message they answer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    Register {
        id: String,
        model_id: String,
        description: String,
        host: String,
        port: u32,
        display_name: String,
        profile: String,
    },
    RegisterAck {
        id: String,
        model_id: String,
        fleet_size: usize,
    },
    Query {
        id: String,
        text: String,
        max_tokens: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain_hint: Option<String>,
        /// Arrival time on the server's virtual clock. Ignored on wall clock.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        arrival_s: Option<f64>,
    },
    Response {
        id: String,
        request_id: String,
        model: String,
        payload: String,
        latency_s: f64,
        queue_wait_s: f64,
        service_s: f64,
        energy_j: f64,
        latent_quality: f64,
        cold_start: bool,
        cache_hit: bool,
    },
    /// `id` is the `request_id` of the response being rated.
    Feedback { id: String, rating: u8 },
    FeedbackAck { id: String, model: String },
    StatsRequest { id: String },
    StatsResponse { id: String, stats: ServerStats },
    Error {
        id: String,
        reason: ErrorReason,
        detail: String,
    },
}

impl WireMessage {
    pub fn id(&self) -> &str {
        match self {
            WireMessage::Register { id, .. }
            | WireMessage::RegisterAck { id, .. }
            | WireMessage::Query { id, .. }
            | WireMessage::Response { id, .. }
            | WireMessage::Feedback { id, .. }
            | WireMessage::FeedbackAck { id, .. }
            | WireMessage::StatsRequest { id }
            | WireMessage::StatsResponse { id, .. }
            | WireMessage::Error { id, .. } => id,
        }
    }

    pub fn error(id: impl Into<String>, reason: ErrorReason, detail: impl Into<String>) -> Self {
        WireMessage::Error {
            id: id.into(),
            reason,
            detail: detail.into(),
        }
    }
}

const TYPES: [&str; 9] = [
    "register",
    "register_ack",
    "query",
    "response",
    "feedback",
    "feedback_ack",
    "stats_request",
    "stats_response",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorReason {
    Parse,
    MissingField,
    UnknownType,
    Invalid,
    UnknownRequest,
    RoutingUnavailable,
    Registration,
    ShuttingDown,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub requests: usize,
    pub mean_latency_s: f64,
    pub mean_energy_j: f64,
    pub mean_confidence: f64,
    pub resident: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ServerStats {
    pub served: usize,
    pub queued: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub peak_footprint_mb: f64,
    pub models: BTreeMap<String, ModelStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeError {
    pub reason: ErrorReason,
    /// The message id, when it could be recovered.
    pub id: Option<String>,
    pub detail: String,
}

impl DecodeError {
    fn new(reason: ErrorReason, id: Option<String>, detail: impl Into<String>) -> Self {
        Self {
            reason,
            id,
            detail: detail.into(),
        }
    }

    pub fn into_reply(self) -> WireMessage {
        WireMessage::error(self.id.unwrap_or_default(), self.reason, self.detail)
    }
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.reason, self.detail)
    }
}

impl std::error::Error for DecodeError {}

/// Serializes to a single line, newline included.
pub fn encode(msg: &WireMessage) -> String {
    let mut s = serde_json::to_string(msg).expect("wire messages always serialize");
    s.push('\n');
    s
}

pub fn decode(line: &[u8]) -> Result<WireMessage, DecodeError> {
    let text = std::str::from_utf8(line).map_err(|e| DecodeError::new(ErrorReason::Parse, None, e.to_string()))?;
    let text = text.trim_end_matches(['\n', '\r']);
    if text.trim().is_empty() {
        return Err(DecodeError::new(ErrorReason::Parse, None, "empty line"));
    }
    let value: Value =
        serde_json::from_str(text).map_err(|e| DecodeError::new(ErrorReason::Parse, None, e.to_string()))?;
    let Value::Object(obj) = &value else {
        return Err(DecodeError::new(ErrorReason::Parse, None, "expected a JSON object"));
    };
    let id = obj.get("id").and_then(Value::as_str).map(String::from);
    let Some(kind) = obj.get("type") else {
        return Err(DecodeError::new(ErrorReason::MissingField, id, "missing `type`"));
    };
    let Some(kind) = kind.as_str() else {
        return Err(DecodeError::new(ErrorReason::Invalid, id, "`type` must be a string"));
    };
    if !TYPES.contains(&kind) {
        return Err(DecodeError::new(ErrorReason::UnknownType, id, format!("unknown type `{kind}`")));
    }
    if id.is_none() {
        let reason = if obj.contains_key("id") {
            ErrorReason::Invalid
        } else {
            ErrorReason::MissingField
        };
        return Err(DecodeError::new(reason, None, "`id` must be a string"));
    }
    let msg: WireMessage =
        serde_json::from_value(value).map_err(|e| {
            let detail = e.to_string();
            let reason = if detail.starts_with("missing field") {
                ErrorReason::MissingField
            } else {
                ErrorReason::Invalid
            };
            DecodeError::new(reason, id.clone(), detail)
        })?;
    if let WireMessage::Feedback { rating, .. } = &msg {
        if !(1..=5).contains(rating) {
            return Err(DecodeError::new(ErrorReason::Invalid, id, format!("rating {rating} outside 1..=5")));
        }
    }
    if let WireMessage::Query { max_tokens: 0, .. } = &msg {
        return Err(DecodeError::new(ErrorReason::Invalid, id, "max_tokens must be positive"));
    }
    Ok(msg)
}
