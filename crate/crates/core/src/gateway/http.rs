use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CompletionBackend, CompletionRequest, GatewayError};

pub const DEFAULT_API_KEY_ENV: &str = "APICHAIN_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 1000,
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Sleep before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let factor = self.multiplier.powi(retry.saturating_sub(1) as i32);
        Duration::from_millis((self.initial_backoff_ms as f64 * factor) as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/completions".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
            retry: RetryPolicy::default(),
        }
    }
}

/// Client for `{model, prompt, temperature, max_tokens, stop}` ->
/// `{choices: [{text}]}` completion endpoints.
#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    api_key: String,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Retry(String),
    Fatal(GatewayError),
}

impl HttpBackend {
    /// Fails with `AuthMissing` when the credential variable is unset or empty.
    pub fn new(config: HttpConfig) -> Result<Self, GatewayError> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| GatewayError::AuthMissing {
                var: config.api_key_env.clone(),
            })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Io(e.to_string()))?;
        Ok(HttpBackend {
            config,
            api_key,
            client,
        })
    }

    fn attempt(&self, req: &CompletionRequest) -> Result<String, Attempt> {
        let mut body = json!({
            "model": req.model,
            "prompt": req.prompt,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(stop) = &req.stop {
            body["stop"] = json!(stop);
        }
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() || e.is_connect() || e.is_request() {
                    Attempt::Retry(e.to_string())
                } else {
                    Attempt::Fatal(GatewayError::Io(e.to_string()))
                }
            })?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Attempt::Retry(format!("status {status}")));
        }
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Fatal(GatewayError::Rejected {
                status: status.as_u16(),
                body: text,
            }));
        }
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Attempt::Fatal(GatewayError::MalformedResponse(e.to_string())))?;
        value["choices"][0]["text"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(GatewayError::MalformedResponse("missing choices[0].text".into())))
    }
}

impl CompletionBackend for HttpBackend {
    fn id(&self) -> &str {
        "http"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<String, GatewayError> {
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    log::warn!("completion attempt {attempt}/{attempts} failed: {reason}");
                    last = reason;
                    if attempt < attempts {
                        std::thread::sleep(self.config.retry.backoff(attempt));
                    }
                }
            }
        }
        Err(GatewayError::BackendUnavailable { attempts, last })
    }
}
