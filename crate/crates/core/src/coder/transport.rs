use std::sync::atomic::{AtomicUsize, Ordering};

use super::prompt::Prompt;
use super::CoderConfig;

/// A failed completion request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportFailure {
    pub message: String,
    /// Whether another attempt may succeed.
    pub retryable: bool,
}

impl TransportFailure {
    pub fn retryable(message: impl Into<String>) -> Self {
        TransportFailure {
            message: message.into(),
            retryable: true,
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        TransportFailure {
            message: message.into(),
            retryable: false,
        }
    }
}

/// Something that turns a prompt into raw response text.
pub trait Transport: Sync {
    fn complete(&self, prompt: &Prompt, config: &CoderConfig) -> Result<String, TransportFailure>;
}

type Rule = dyn Fn(&str) -> Result<String, TransportFailure> + Send + Sync;

/// Offline transport answering from a rule on the current message.
pub struct MockTransport {
    rule: Box<Rule>,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new(rule: impl Fn(&str) -> Result<String, TransportFailure> + Send + Sync + 'static) -> Self {
        MockTransport {
            rule: Box::new(rule),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn constant(response: &str) -> Self {
        let response = response.to_string();
        MockTransport::new(move |_| Ok(response.clone()))
    }

    /// Keyword rules: the first keyword contained (case-insensitively) in the message
    /// picks the reply, otherwise `fallback`.
    pub fn keywords(rules: Vec<(String, String)>, fallback: &str) -> Self {
        let fallback = fallback.to_string();
        MockTransport::new(move |msg| {
            let lower = msg.to_lowercase();
            Ok(rules
                .iter()
                .find(|(k, _)| lower.contains(&k.to_lowercase()))
                .map(|(_, r)| r.clone())
                .unwrap_or_else(|| fallback.clone()))
        })
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn complete(&self, prompt: &Prompt, _config: &CoderConfig) -> Result<String, TransportFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.rule)(&prompt.current_message)
    }
}

#[cfg(feature = "http")]
pub use http::HttpTransport;

#[cfg(feature = "http")]
mod http {
    use serde_json::{json, Value};

    use super::{Transport, TransportFailure};
    use crate::coder::prompt::Prompt;
    use crate::coder::{CoderConfig, CoderError};

    /// Chat-completions client (system + user messages, first choice's text).
    pub struct HttpTransport {
        agent: ureq::Agent,
        api_key: String,
    }

    impl HttpTransport {
        /// Reads the API key from the environment variable named in `config`.
        pub fn from_config(config: &CoderConfig) -> Result<Self, CoderError> {
            let api_key = config.resolve_api_key()?;
            let agent: ureq::Agent = ureq::Agent::config_builder()
                .timeout_global(Some(config.timeout()))
                .http_status_as_error(false)
                .build()
                .into();
            Ok(HttpTransport { agent, api_key })
        }
    }

    impl Transport for HttpTransport {
        fn complete(&self, prompt: &Prompt, config: &CoderConfig) -> Result<String, TransportFailure> {
            let body = json!({
                "model": config.model_name,
                "temperature": config.temperature,
                "messages": [
                    {"role": "system", "content": prompt.system},
                    {"role": "user", "content": prompt.user},
                ],
            });
            let mut resp = self
                .agent
                .post(&config.endpoint_url)
                .header("Authorization", &format!("Bearer {}", self.api_key))
                .send_json(&body)
                .map_err(|e| TransportFailure::retryable(e.to_string()))?;
            let status = resp.status().as_u16();
            if status == 429 || status >= 500 {
                return Err(TransportFailure::retryable(format!("HTTP {status}")));
            }
            if status >= 400 {
                return Err(TransportFailure::fatal(format!("HTTP {status}")));
            }
            let v: Value = resp
                .body_mut()
                .read_json()
                .map_err(|e| TransportFailure::retryable(format!("bad response body: {e}")))?;
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| TransportFailure::fatal("response has no message content"))
        }
    }
}
