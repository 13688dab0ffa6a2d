use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, Generation, GenerationRequest, GenerationResponse, HealthResponse};
use crate::error::BackendError;

type BatchResult = Result<Vec<Generation>, BackendError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL of the generation service, e.g. `http://127.0.0.1:8080`.
    pub url: String,
    /// Prompts per HTTP request.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Requests allowed in flight at once.
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Extra attempts after a 503 or a transport failure.
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Upper bound on any single Retry-After wait.
    #[serde(default = "default_backoff")]
    pub max_backoff_secs: u64,
    /// Client-side prompt budget in whitespace tokens.
    #[serde(default)]
    pub max_prompt_tokens: Option<usize>,
}

fn default_batch() -> usize {
    16
}
fn default_in_flight() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_timeout() -> u64 {
    120
}
fn default_backoff() -> u64 {
    10
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            batch_size: default_batch(),
            max_in_flight: default_in_flight(),
            max_retries: default_retries(),
            timeout_secs: default_timeout(),
            max_backoff_secs: default_backoff(),
            max_prompt_tokens: None,
        }
    }
}

/// Client for the HTTP generation service.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

enum Attempt {
    Done(Vec<Generation>),
    Retry(Duration, BackendError),
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}{}", self.config.url.trim_end_matches('/'), path)
    }

    fn transport(&self, e: impl std::fmt::Display) -> BackendError {
        BackendError::Transport {
            url: self.config.url.clone(),
            message: e.to_string(),
        }
    }

    pub fn health(&self) -> Result<HealthResponse, BackendError> {
        let mut resp = self.agent.get(&self.endpoint("/health")).call().map_err(|e| self.transport(e))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Status { status, body });
        }
        resp.body_mut().read_json().map_err(|e| self.transport(e))
    }

    fn attempt(&self, request: &GenerationRequest) -> Result<Attempt, BackendError> {
        let mut resp = match self.agent.post(&self.endpoint("/generate")).send_json(request) {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Retry(Duration::from_millis(200), self.transport(e))),
        };
        let status = resp.status().as_u16();
        match status {
            200 => {
                let body: GenerationResponse = resp.body_mut().read_json().map_err(|e| self.transport(e))?;
                if body.outputs.len() != request.prompts.len() {
                    return Err(BackendError::CountMismatch {
                        expected: request.prompts.len(),
                        got: body.outputs.len(),
                    });
                }
                Ok(Attempt::Done(body.outputs))
            }
            503 => {
                let wait = resp
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .unwrap_or(1)
                    .min(self.config.max_backoff_secs);
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                Ok(Attempt::Retry(Duration::from_secs(wait), BackendError::Status { status, body }))
            }
            _ => {
                let body = resp.body_mut().read_to_string().unwrap_or_default();
                Err(BackendError::Status { status, body })
            }
        }
    }

    fn send(&self, request: &GenerationRequest) -> Result<Vec<Generation>, BackendError> {
        let mut tries = 0;
        loop {
            match self.attempt(request)? {
                Attempt::Done(out) => return Ok(out),
                Attempt::Retry(wait, err) => {
                    if tries >= self.config.max_retries {
                        return Err(err);
                    }
                    tries += 1;
                    log::debug!("retrying generate after {wait:?}: {err}");
                    thread::sleep(wait);
                }
            }
        }
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        "remote"
    }

    /// Splits the prompts into batches, sends up to `max_in_flight` of them
    /// concurrently and reassembles outputs by position.
    fn generate(&self, request: &GenerationRequest) -> Result<Vec<Generation>, BackendError> {
        request.validate()?;
        if let Some(budget) = self.config.max_prompt_tokens {
            if let Some(index) = request.prompts.iter().position(|p| p.split_whitespace().count() > budget) {
                return Err(BackendError::LengthOverflow { index });
            }
        }
        let batches: Vec<GenerationRequest> = request
            .prompts
            .chunks(self.config.batch_size.max(1))
            .map(|c| GenerationRequest {
                prompts: c.to_vec(),
                max_new_tokens: request.max_new_tokens,
                decode: request.decode,
            })
            .collect();
        let results: Mutex<Vec<Option<BatchResult>>> =
            Mutex::new((0..batches.len()).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.clamp(1, batches.len());
        thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(batch) = batches.get(i) else { break };
                    let r = self.send(batch);
                    let failed = r.is_err();
                    results.lock().expect("results lock")[i] = Some(r);
                    if failed {
                        // Let the other workers drain without starting new batches.
                        next.store(batches.len(), Ordering::SeqCst);
                    }
                });
            }
        });
        let mut out = Vec::with_capacity(request.prompts.len());
        for r in results.into_inner().expect("results lock").into_iter().flatten() {
            out.extend(r?);
        }
        if out.len() != request.prompts.len() {
            return Err(BackendError::CountMismatch {
                expected: request.prompts.len(),
                got: out.len(),
            });
        }
        Ok(out)
    }
}
