//! Registered models and their metadata.
//!
//! Registration order is the canonical fleet order. Every tie-break in the
//! router, scheduler and cache resolves toward the earlier-registered model.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Where a backend can be reached.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Endpoint {
    pub host: String,
    pub port: u32,
}

/// One entry of the fleet: the task description used for routing plus
/// operational metadata.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelRecord {
    pub model_id: String,
    pub description: String,
    pub endpoint: Endpoint,
    pub display_name: String,
    /// Identifier of the simulated backend profile serving this model.
    pub profile_ref: String,
}

impl ModelRecord {
    pub fn validate(&self) -> Result<()> {
        if self.description.trim().is_empty() {
            return Err(Error::EmptyDescription);
        }
        if !(1..=65535).contains(&self.endpoint.port) {
            return Err(Error::InvalidPort(self.endpoint.port));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Registration {
    /// Position of the model in fleet order.
    pub index: usize,
    pub fleet_size: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Registry {
    models: Vec<ModelRecord>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, record: ModelRecord) -> Result<Registration> {
        record.validate()?;
        if self.position(&record.model_id).is_some() {
            return Err(Error::DuplicateModel(record.model_id));
        }
        self.models.push(record);
        Ok(Registration {
            index: self.models.len() - 1,
            fleet_size: self.models.len(),
        })
    }

    pub fn deregister(&mut self, model_id: &str) -> Result<ModelRecord> {
        let idx = self
            .position(model_id)
            .ok_or_else(|| Error::UnknownModel(model_id.into()))?;
        Ok(self.models.remove(idx))
    }

    /// All records in registration order.
    pub fn list(&self) -> &[ModelRecord] {
        &self.models
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelRecord> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    /// Fleet-order rank of a model; lower means registered earlier.
    pub fn position(&self, model_id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.model_id == model_id)
    }

    pub fn contains(&self, model_id: &str) -> bool {
        self.position(model_id).is_some()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

#[cfg(test)]
pub(crate) fn record(id: &str, description: &str) -> ModelRecord {
    ModelRecord {
        model_id: id.into(),
        description: description.into(),
        endpoint: Endpoint {
            host: "127.0.0.1".into(),
            port: 9000,
        },
        display_name: id.into(),
        profile_ref: "default".into(),
    }
}
