//! Model gateway: dispatches (system prompt, user prompt) pairs to
//! provider adapters, extracts code from responses, and records every
//! completion in a content-addressed cache so runs replay offline,
//! deterministically, and without credentials.

pub mod cache;
pub mod limit;
pub mod providers;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::prompt::SystemPrompt;

pub use cache::ResponseCache;
pub use limit::{Semaphore, TokenBucket};
pub use providers::{
    ChatHttpProvider, CompletionRequest, MockProvider, Provider, ProviderRegistry,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for DecodingParams {
    /// Temperature 0 for determinism; generous but bounded output budget.
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_tokens: 2048,
        }
    }
}

impl DecodingParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) || !self.temperature.is_finite() {
            return Err(GatewayError::Config(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::Config("max_output_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub provider_id: String,
    pub model_name: String,
    #[serde(default)]
    pub params: DecodingParams,
}

impl ModelSpec {
    pub fn new(provider_id: &str, model_name: &str) -> Self {
        Self {
            provider_id: provider_id.to_string(),
            model_name: model_name.to_string(),
            params: DecodingParams::default(),
        }
    }

    /// Human-readable key, e.g. for report rows: `mock/mock-alpha`.
    pub fn label(&self) -> String {
        format!("{}/{}", self.provider_id, self.model_name)
    }
}

/// One completed (and cached) model call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub fingerprint: String,
    pub provider_id: String,
    pub model_name: String,
    pub system_fingerprint: String,
    pub raw_response: String,
    pub extracted_code: String,
    pub timestamp: String,
    /// Regeneration ordinal that produced this record (1-based).
    pub attempt: u32,
    /// Cleared when every regeneration attempt failed validation; such
    /// records are still scored, under the parse-failure rules.
    pub valid: bool,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cache error: {0}")]
    Cache(String),
    #[error("no provider registered under id {0:?}")]
    UnknownProvider(String),
    #[error("gateway configuration error: {0}")]
    Config(String),
    #[error("provider {provider}: {message}")]
    Provider {
        provider: String,
        message: String,
        retryable: bool,
    },
    #[error("model returned an empty response")]
    EmptyResponse,
    #[error("offline mode and no cached record for fingerprint {0}")]
    OfflineMiss(String),
}

impl GatewayError {
    pub fn retryable(&self) -> bool {
        matches!(self, Self::Provider { retryable: true, .. })
    }
}

/// Hash of everything that identifies a request: model spec (provider,
/// name, decoding params), system prompt fingerprint, user prompt, and the
/// regeneration attempt ordinal. Any difference in any field changes the
/// fingerprint.
pub fn request_fingerprint(
    model: &ModelSpec,
    system_fingerprint: &str,
    user: &str,
    attempt: u32,
) -> String {
    let mut descriptor = String::new();
    let _ = writeln!(descriptor, "provider={}", model.provider_id);
    let _ = writeln!(descriptor, "model={}", model.model_name);
    let _ = writeln!(descriptor, "temperature={:?}", model.params.temperature);
    let _ = writeln!(descriptor, "max_output_tokens={}", model.params.max_output_tokens);
    let _ = writeln!(descriptor, "system={system_fingerprint}");
    let _ = writeln!(descriptor, "user={}", hex::encode(Sha256::digest(user.as_bytes())));
    let _ = writeln!(descriptor, "attempt={attempt}");
    hex::encode(Sha256::digest(descriptor.as_bytes()))
}

/// Pull the code out of a model response: the largest fenced block wins
/// (most lines, then most bytes, then first); with no fences the whole
/// response is returned trimmed. An unterminated fence runs to the end of
/// the response, since truncated outputs are common.
pub fn extract_code_block(raw: &str) -> Result<String, GatewayError> {
    if raw.trim().is_empty() {
        return Err(GatewayError::EmptyResponse);
    }
    let mut blocks: Vec<Vec<&str>> = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => current = Some(Vec::new()),
            }
        } else if let Some(block) = &mut current {
            block.push(line);
        }
    }
    if let Some(block) = current {
        blocks.push(block);
    }
    let best = blocks
        .iter()
        .enumerate()
        .max_by_key(|(index, block)| {
            let bytes: usize = block.iter().map(|l| l.len()).sum();
            (block.len(), bytes, std::cmp::Reverse(*index))
        })
        .map(|(_, block)| block);
    Ok(match best {
        Some(block) => {
            let mut code = block.join("\n");
            if !code.is_empty() {
                code.push('\n');
            }
            code
        }
        None => raw.trim().to_string(),
    })
}

/// Retry policy for transient provider failures (network errors,
/// rate-limit statuses): exponential backoff from `base_delay`.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_tries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_tries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

/// Per-provider politeness limits.
pub struct ProviderLimits {
    bucket: Option<TokenBucket>,
    in_flight: Option<Semaphore>,
}

impl ProviderLimits {
    pub fn new(requests_per_sec: Option<f64>, max_in_flight: Option<usize>) -> Self {
        Self {
            bucket: requests_per_sec.map(|rate| TokenBucket::new(rate, rate.max(1.0))),
            in_flight: max_in_flight.map(Semaphore::new),
        }
    }
}

pub struct Gateway {
    registry: ProviderRegistry,
    cache: ResponseCache,
    offline: bool,
    retry: RetryPolicy,
    limits: BTreeMap<String, ProviderLimits>,
}

impl Gateway {
    pub fn new(registry: ProviderRegistry, cache: ResponseCache) -> Self {
        Self {
            registry,
            cache,
            offline: false,
            retry: RetryPolicy::default(),
            limits: BTreeMap::new(),
        }
    }

    /// Forbid network: every request must hit the cache.
    pub fn offline(mut self, offline: bool) -> Self {
        self.offline = offline;
        self
    }

    pub fn retry(mut self, policy: RetryPolicy) -> Self {
        self.retry = policy;
        self
    }

    pub fn limit(mut self, provider_id: &str, limits: ProviderLimits) -> Self {
        self.limits.insert(provider_id.to_string(), limits);
        self
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    pub fn is_offline(&self) -> bool {
        self.offline
    }

    /// One completion: cache hit returns the stored record without any
    /// provider call; a miss calls the provider (unless offline), stores
    /// the record, and returns it.
    pub fn generate(
        &self,
        model: &ModelSpec,
        system: &SystemPrompt,
        user: &str,
    ) -> Result<CompletionRecord, GatewayError> {
        self.generate_attempt(model, system, user, 1)
    }

    fn generate_attempt(
        &self,
        model: &ModelSpec,
        system: &SystemPrompt,
        user: &str,
        attempt: u32,
    ) -> Result<CompletionRecord, GatewayError> {
        model.params.validate()?;
        let fingerprint = request_fingerprint(model, &system.fingerprint, user, attempt);
        if let Some(record) = self.cache.load(&fingerprint)? {
            return Ok(record);
        }
        if self.offline {
            return Err(GatewayError::OfflineMiss(fingerprint));
        }
        let provider = self.registry.get(&model.provider_id)?;
        let limits = self.limits.get(&model.provider_id);
        let _in_flight = limits.and_then(|l| l.in_flight.as_ref()).map(Semaphore::acquire);
        if let Some(bucket) = limits.and_then(|l| l.bucket.as_ref()) {
            bucket.acquire();
        }
        let request = CompletionRequest {
            model_name: &model.model_name,
            params: &model.params,
            system: &system.rendered_text,
            user,
            attempt,
        };
        let raw_response = self.call_with_retry(provider.as_ref(), &request)?;
        let extracted_code = extract_code_block(&raw_response)?;
        let record = CompletionRecord {
            fingerprint,
            provider_id: model.provider_id.clone(),
            model_name: model.model_name.clone(),
            system_fingerprint: system.fingerprint.clone(),
            raw_response,
            extracted_code,
            timestamp: chrono::Utc::now().to_rfc3339(),
            attempt,
            valid: true,
        };
        self.cache.store(&record)?;
        Ok(record)
    }

    fn call_with_retry(
        &self,
        provider: &dyn Provider,
        request: &CompletionRequest<'_>,
    ) -> Result<String, GatewayError> {
        let tries = self.retry.max_tries.max(1);
        let mut delay = self.retry.base_delay;
        for try_number in 1..=tries {
            match provider.complete(request) {
                Ok(raw) => return Ok(raw),
                Err(e) if e.retryable() && try_number < tries => {
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("loop returns on the final try")
    }

    /// Re-request with attempt-salted fingerprints until `validator`
    /// accepts the extracted code or `max_attempts` is exhausted. Model
    /// output is never edited; an exhausted record comes back with
    /// `valid = false` and is scored, not dropped.
    pub fn regenerate_on_invalid(
        &self,
        model: &ModelSpec,
        system: &SystemPrompt,
        user: &str,
        validator: &dyn Fn(&str) -> bool,
        max_attempts: u32,
    ) -> Result<CompletionRecord, GatewayError> {
        if max_attempts == 0 {
            return Err(GatewayError::Config("max_attempts must be at least 1".into()));
        }
        let mut last = None;
        for attempt in 1..=max_attempts {
            let record = self.generate_attempt(model, system, user, attempt)?;
            if validator(&record.extracted_code) {
                return Ok(record);
            }
            last = Some(record);
        }
        let mut record = last.expect("max_attempts >= 1 guarantees at least one record");
        record.valid = false;
        Ok(record)
    }
}
