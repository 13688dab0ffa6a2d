//! The generation contract and its implementations.
//!
//! A backend turns prompt texts into generated texts, one per prompt and in
//! request order. Tokenization is private to the backend.

mod oracle;
mod remote;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

pub use oracle::{oracle_generate, CorruptionConfig, CorruptionScope, OracleBackend};
pub use remote::{RemoteBackend, RemoteConfig};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decode {
    #[default]
    Greedy,
}

/// Body of `POST /generate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompts: Vec<String>,
    pub max_new_tokens: usize,
    pub decode: Decode,
}

impl GenerationRequest {
    pub fn new(prompts: Vec<String>, max_new_tokens: usize) -> Self {
        Self {
            prompts,
            max_new_tokens,
            decode: Decode::Greedy,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompts.is_empty() {
            return Err(BackendError::EmptyRequest);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub text: String,
    /// Probability of the answer emitted into each slot, keyed by surface.
    pub slot_scores: Option<BTreeMap<String, f64>>,
}

/// Body of a `200` response to `POST /generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub outputs: Vec<Generation>,
}

/// Body of `GET /health`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub model: String,
}

/// Implementations must be usable from several threads at once and must
/// return outputs in request order.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<Generation>, BackendError>;
}
