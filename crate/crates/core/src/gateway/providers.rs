//! Provider adapters. Each adapter is thin: it speaks one wire format and
//! is registered under a provider id. The mock provider exists so the whole
//! pipeline (and its recorded fixtures) can run without credentials.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{DecodingParams, GatewayError};

/// Everything an adapter needs to issue one completion call.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub model_name: &'a str,
    pub params: &'a DecodingParams,
    pub system: &'a str,
    pub user: &'a str,
    /// Regeneration ordinal (1-based). Most wire formats have no slot for
    /// it; it exists so adapters that can perturb sampling may do so.
    pub attempt: u32,
}

pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, GatewayError>;
}

#[derive(Default)]
pub struct ProviderRegistry {
    providers: BTreeMap<String, Arc<dyn Provider>>,
}

impl ProviderRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register (or replace) the adapter for its provider id.
    pub fn register(&mut self, provider: Arc<dyn Provider>) {
        self.providers.insert(provider.id().to_string(), provider);
    }

    pub fn get(&self, provider_id: &str) -> Result<Arc<dyn Provider>, GatewayError> {
        self.providers
            .get(provider_id)
            .cloned()
            .ok_or_else(|| GatewayError::UnknownProvider(provider_id.to_string()))
    }

    pub fn ids(&self) -> Vec<&str> {
        self.providers.keys().map(String::as_str).collect()
    }
}

type Script = Box<dyn Fn(&CompletionRequest<'_>) -> Result<String, GatewayError> + Send + Sync>;

/// Deterministic offline provider. The default script derives a small
/// plausible script from a hash of the request, wrapped in prose and a
/// fenced block, so code extraction and the metrics have something real
/// to chew on. Custom scripts support failure-injection tests.
pub struct MockProvider {
    id: String,
    script: Script,
    calls: AtomicU64,
}

impl MockProvider {
    pub fn new(id: &str) -> Self {
        Self::with_script(id, Box::new(|request| Ok(canned_response(request))))
    }

    pub fn with_script(id: &str, script: Script) -> Self {
        Self {
            id: id.to_string(),
            script,
            calls: AtomicU64::new(0),
        }
    }

    /// Number of `complete` calls served; lets tests assert that a warm
    /// cache really made zero network-equivalent calls.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.script)(request)
    }
}

fn canned_response(request: &CompletionRequest<'_>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.model_name.as_bytes());
    hasher.update([0]);
    hasher.update(request.system.as_bytes());
    hasher.update([0]);
    hasher.update(request.user.as_bytes());
    hasher.update([0]);
    hasher.update(request.attempt.to_le_bytes());
    let digest = hasher.finalize();
    let reading = 10 + (digest[0] % 90) as u32;
    let limit = 10 + (digest[1] % 90) as u32;
    let names = ["speed", "cabin_temp", "fan_level", "battery"];
    let var = names[digest[2] as usize % names.len()];
    let paths = [
        "Vehicle.Speed",
        "Vehicle.Cabin.HVAC.AmbientAirTemperature",
        "Vehicle.Body.RainSensor.Intensity",
        "Vehicle.Powertrain.TractionBattery.StateOfCharge.Current",
    ];
    let path = paths[digest[3] as usize % paths.len()];
    // Several code shapes so structure-sensitive metrics see variety.
    let code = match digest[4] % 4 {
        0 => format!(
            "{var} = {reading}\nlimit = {limit}\nif {var} > limit:\n    {var} = limit\nstatus = {var}"
        ),
        1 => format!(
            "{var} = vehicle.get(\"{path}\")\nif {var} > {limit}:\n    vehicle.set(\"{path}\", {limit})\nelse:\n    vehicle.set(\"{path}\", {var})"
        ),
        2 => format!(
            "total = 0\nfor step in range({limit}):\n    total = total + step\n{var} = total + {reading}\nvehicle.set(\"{path}\", {var})"
        ),
        _ => format!(
            "def adjust(value):\n    if value > {limit}:\n        return {limit}\n    return value\n\n{var} = vehicle.get(\"{path}\")\nvehicle.set(\"{path}\", adjust({var} + {reading}))"
        ),
    };
    format!(
        "Here is a script for the request (attempt {attempt}).\n\n\
         ```python\n{code}\n```\n\n\
         The snippet keeps `{var}` within bounds.\n",
        attempt = request.attempt,
    )
}

/// Adapter for OpenAI-compatible chat-completion endpoints (a wire format
/// most vendors also expose). Credentials come from an environment
/// variable so recorded fixtures never embed secrets.
pub struct ChatHttpProvider {
    id: String,
    endpoint: String,
    api_key_env: String,
    client: reqwest::blocking::Client,
}

impl ChatHttpProvider {
    pub fn new(id: &str, endpoint: &str, api_key_env: &str) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        Ok(Self {
            id: id.to_string(),
            endpoint: endpoint.to_string(),
            api_key_env: api_key_env.to_string(),
            client,
        })
    }
}

impl Provider for ChatHttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, GatewayError> {
        let provider = self.id.clone();
        let key = std::env::var(&self.api_key_env).map_err(|_| GatewayError::Provider {
            provider: provider.clone(),
            message: format!("credentials missing: set {}", self.api_key_env),
            retryable: false,
        })?;
        let mut messages = Vec::new();
        if !request.system.is_empty() {
            messages.push(json!({"role": "system", "content": request.system}));
        }
        messages.push(json!({"role": "user", "content": request.user}));
        let body = json!({
            "model": request.model_name,
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_output_tokens,
            "messages": messages,
        });
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| GatewayError::Provider {
                provider: provider.clone(),
                message: e.to_string(),
                retryable: true,
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| GatewayError::Provider {
            provider: provider.clone(),
            message: e.to_string(),
            retryable: true,
        })?;
        if !status.is_success() {
            return Err(GatewayError::Provider {
                provider,
                message: format!("status {status}: {text}"),
                retryable: status.as_u16() == 429 || status.is_server_error(),
            });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| GatewayError::Provider {
            provider: provider.clone(),
            message: format!("malformed response: {e}"),
            retryable: false,
        })?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or(GatewayError::Provider {
                provider,
                message: "response carries no message content".into(),
                retryable: false,
            })
    }
}
