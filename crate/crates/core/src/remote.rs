//! HTTP/JSON client for an external inference server.
//!
//! Request (`POST <endpoint>`, `Content-Type: application/json`):
//!
//! ```json
//! {"request_id": "req-00000001", "context": [12, 7, 993]}
//! ```
//!
//! Response (HTTP 200):
//!
//! ```json
//! {"request_id": "req-00000001", "vocab_size": 3, "logits": [0.1, -2.5, 3.0]}
//! ```
//!
//! `logits` entries are JSON numbers. A `null` or one of the strings `"NaN"`,
//! `"Infinity"`, `"-Infinity"` marks a non-finite value and is reported as
//! such. Transport failures and non-2xx statuses are retried up to the
//! configured limit; everything else fails immediately.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{LogitProvider, ProviderError};
use crate::token::{LogitVector, TokenId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Extra attempts after the first failed one.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout_secs: default_timeout(),
            retries: default_retries(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct LogitRequest<'a> {
    pub request_id: &'a str,
    pub context: Vec<u32>,
}

#[derive(Debug, Deserialize)]
pub struct LogitResponse {
    pub request_id: String,
    pub vocab_size: usize,
    pub logits: Vec<serde_json::Value>,
}

#[derive(Debug)]
pub struct RemoteProvider {
    config: RemoteConfig,
    vocab_size: usize,
    client: reqwest::blocking::Client,
    calls: AtomicU64,
}

impl RemoteProvider {
    /// `vocab_size` is the size the caller's vocabulary expects; responses of
    /// any other length are rejected.
    pub fn new(config: RemoteConfig, vocab_size: usize) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs.max(0.001)))
            .build()
            .map_err(|e| ProviderError::Transport {
                request_id: "-".into(),
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(RemoteProvider {
            config,
            vocab_size,
            client,
            calls: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn post(&self, request_id: &str, body: &LogitRequest<'_>) -> Result<String, String> {
        let response = self
            .client
            .post(&self.config.endpoint)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status();
        if !status.is_success() {
            return Err(format!("HTTP status {status} for {request_id}"));
        }
        response.text().map_err(|e| e.to_string())
    }
}

/// Validates a decoded response against the request it answers.
pub fn parse_response(
    body: &str,
    request_id: &str,
    expected: usize,
) -> Result<LogitVector, ProviderError> {
    let protocol = |message: String| ProviderError::Protocol {
        request_id: request_id.to_string(),
        message,
    };
    let response: LogitResponse = serde_json::from_str(body).map_err(|e| protocol(e.to_string()))?;
    if response.request_id != request_id {
        return Err(protocol(format!(
            "response answers request {}",
            response.request_id
        )));
    }
    if response.vocab_size != expected || response.logits.len() != expected {
        return Err(ProviderError::LengthMismatch {
            request_id: request_id.to_string(),
            expected,
            actual: if response.vocab_size != expected {
                response.vocab_size
            } else {
                response.logits.len()
            },
        });
    }
    let mut values = Vec::with_capacity(expected);
    for (index, value) in response.logits.iter().enumerate() {
        let non_finite = || ProviderError::NonFinite {
            request_id: request_id.to_string(),
            index,
        };
        match value {
            serde_json::Value::Number(n) => match n.as_f64() {
                Some(x) if x.is_finite() => values.push(x),
                _ => return Err(non_finite()),
            },
            serde_json::Value::Null => return Err(non_finite()),
            serde_json::Value::String(s)
                if matches!(s.as_str(), "NaN" | "Infinity" | "-Infinity") =>
            {
                return Err(non_finite())
            }
            other => return Err(protocol(format!("logit {index} is {other}"))),
        }
    }
    LogitVector::new(values).map_err(|e| protocol(e.to_string()))
}

impl LogitProvider for RemoteProvider {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn logits(&self, context: &[TokenId]) -> Result<LogitVector, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::Relaxed) + 1;
        let request_id = format!("req-{n:08}");
        let body = LogitRequest {
            request_id: &request_id,
            context: context.iter().map(|t| t.0).collect(),
        };
        let attempts = self.config.retries + 1;
        let mut last_error = String::new();
        for _ in 0..attempts {
            match self.post(&request_id, &body) {
                Ok(text) => return parse_response(&text, &request_id, self.vocab_size),
                Err(e) => last_error = e,
            }
        }
        Err(ProviderError::Transport {
            request_id,
            attempts,
            message: last_error,
        })
    }

    fn call_count(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}
