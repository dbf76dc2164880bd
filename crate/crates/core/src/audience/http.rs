use std::time::Duration;

use crate::error::{Error, Result};

use super::{CountBackend, CountRequest, CountResponse, WireError};

/// Remote counting API speaking the JSON count protocol over `POST`.
///
/// Credentials are opaque: every `(name, value)` pair is forwarded as a header.
pub struct HttpBackend {
    endpoint: String,
    headers: Vec<(String, String)>,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            headers: Vec::new(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(30))
                .build(),
        }
    }

    pub fn with_header(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.headers.push((name.into(), value.into()));
        self
    }

    /// Parses `"Name: value"` lines (as found in a credentials env var) into headers.
    pub fn with_credential_lines(mut self, lines: &str) -> Self {
        for line in lines.lines() {
            if let Some((name, value)) = line.split_once(':') {
                self.headers
                    .push((name.trim().to_string(), value.trim().to_string()));
            }
        }
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl CountBackend for HttpBackend {
    fn label(&self) -> &str {
        "http"
    }

    fn count(&self, request: &CountRequest) -> Result<CountResponse> {
        let mut call = self.agent.post(&self.endpoint);
        for (name, value) in &self.headers {
            call = call.set(name, value);
        }
        let body = serde_json::to_string(request)?;
        match call
            .set("Content-Type", "application/json")
            .send_string(&body)
        {
            Ok(response) => {
                let text = response
                    .into_string()
                    .map_err(|e| Error::Transport(e.to_string()))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Transport(format!("malformed count response: {e}")))
            }
            Err(ureq::Error::Status(status, response)) => {
                let retry_after_ms = response
                    .header("Retry-After")
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .map(|secs| secs * 1000);
                let text = response.into_string().unwrap_or_default();
                let wire = WireError::from_json(&text);
                match (status, wire) {
                    (429, wire) => Err(Error::QuotaExceeded {
                        retry_after_ms: retry_after_ms
                            .or_else(|| wire.and_then(|w| w.retry_after_ms)),
                    }),
                    (400..=499, Some(wire)) => Err(wire.into()),
                    (_, _) => Err(Error::Transport(format!("HTTP {status}: {text}"))),
                }
            }
            Err(err) => Err(Error::Transport(err.to_string())),
        }
    }
}
