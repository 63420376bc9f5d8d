//! Prompt-based automatic coding of utterances against a chat-completion endpoint.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{Code, Codebook};
use crate::corpus::Utterance;

mod cache;
mod prompt;
mod transport;

pub use cache::{cache_key, ResponseCache};
pub use prompt::{
    build_prompt, render_codebook, Prompt, PromptSpec, ShotMode, DEFAULT_CONTEXT_WINDOW,
    OUTPUT_INSTRUCTION, ROLE_INSTRUCTION,
};
#[cfg(feature = "http")]
pub use transport::HttpTransport;
pub use transport::{MockTransport, Transport, TransportFailure};

#[derive(Debug, Error)]
pub enum CoderError {
    #[error("current message is empty")]
    EmptyMessage,
    #[error("unparseable response: {0:?}")]
    Unparseable(String),
    #[error("invalid coder config: {0}")]
    InvalidConfig(String),
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("transport failed for {utterance_id} after {attempts} attempts: {message}")]
    Transport {
        utterance_id: String,
        attempts: u32,
        message: String,
    },
    #[error("cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env_var: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
    pub cache_dir: Option<PathBuf>,
    pub context_window: usize,
}

impl Default for CoderConfig {
    fn default() -> Self {
        CoderConfig {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var: "OPENAI_API_KEY".into(),
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 60.0,
            retry_backoff_ms: 500,
            max_in_flight: 4,
            cache_dir: None,
            context_window: DEFAULT_CONTEXT_WINDOW,
        }
    }
}

impl CoderConfig {
    pub fn validate(&self) -> Result<(), CoderError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(CoderError::InvalidConfig("temperature must be >= 0".into()));
        }
        if self.max_in_flight == 0 {
            return Err(CoderError::InvalidConfig("max_in_flight must be >= 1".into()));
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err(CoderError::InvalidConfig("timeout_secs must be > 0".into()));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn resolve_api_key(&self) -> Result<String, CoderError> {
        match std::env::var(&self.api_key_env_var) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(CoderError::MissingCredential(self.api_key_env_var.clone())),
        }
    }
}

fn strip_think(text: &str) -> String {
    let mut out = String::new();
    let mut rest = text;
    while let Some(start) = rest.find("<think>") {
        out.push_str(&rest[..start]);
        match rest[start..].find("</think>") {
            Some(end) => rest = &rest[start + end + "</think>".len()..],
            None => {
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Extracts a code from a model response.
///
/// The first standalone two-character code token wins. The single-letter replies
/// `I` and `C` (the latter meaning `C1`) are accepted only as the whole response.
pub fn parse_code(response: &str) -> Result<Code, CoderError> {
    let cleaned = strip_think(response);
    let whole = cleaned
        .trim()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_ascii_uppercase();
    match whole.as_str() {
        "I" => return Ok(Code::I),
        "C" => return Ok(Code::C1),
        _ => {}
    }
    cleaned
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| t.len() == 2)
        .find_map(|t| {
            t.to_ascii_uppercase()
                .parse::<Code>()
                .ok()
                .filter(|c| *c != Code::I)
        })
        .ok_or_else(|| CoderError::Unparseable(response.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Transport,
    Unparseable,
    Prompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingFailure {
    pub utterance_id: String,
    pub kind: FailureKind,
    pub attempts: u32,
    pub message: String,
    pub response: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingReport {
    pub model_name: String,
    pub shot_mode: ShotMode,
    pub temperature: f64,
    pub n_total: usize,
    pub n_coded: usize,
    pub n_failed: usize,
    pub cache_hits: usize,
    pub transport_calls: usize,
    pub failures: Vec<CodingFailure>,
}

struct Outcome {
    code: Option<Code>,
    failure: Option<CodingFailure>,
    cache_hit: bool,
    calls: usize,
}

fn failure(u: &Utterance, kind: FailureKind, attempts: u32, message: String, response: Option<String>) -> Option<CodingFailure> {
    Some(CodingFailure {
        utterance_id: u.utterance_id.clone(),
        kind,
        attempts,
        message,
        response,
    })
}

fn code_one(
    utterances: &[Utterance],
    index: usize,
    codebook: &Codebook,
    config: &CoderConfig,
    mode: ShotMode,
    transport: &dyn Transport,
    cache: Option<&ResponseCache>,
) -> Outcome {
    let u = &utterances[index];
    let spec = PromptSpec::for_utterance(codebook, utterances, index, mode, config.context_window);
    let prompt = match build_prompt(&spec) {
        Ok(p) => p,
        Err(e) => {
            return Outcome {
                code: None,
                failure: failure(u, FailureKind::Prompt, 0, e.to_string(), None),
                cache_hit: false,
                calls: 0,
            }
        }
    };
    let key = cache_key(&prompt.text(), &config.model_name, config.temperature);
    let lock = cache.map(|c| c.lock(&key));
    let _guard = lock.as_ref().map(|l| l.lock().unwrap_or_else(|e| e.into_inner()));

    let mut calls = 0;
    let mut cache_hit = false;
    let cached = cache.and_then(|c| c.get(&key).ok().flatten());
    let response = match cached {
        Some(r) => {
            cache_hit = true;
            r
        }
        None => {
            let mut attempt = 0;
            loop {
                attempt += 1;
                calls += 1;
                match transport.complete(&prompt, config) {
                    Ok(r) => {
                        if let Some(c) = cache {
                            // A failed write only costs a future cache miss.
                            let _ = c.put(&key, &r);
                        }
                        break r;
                    }
                    Err(e) if e.retryable && attempt <= config.max_retries => {
                        let backoff = config.retry_backoff_ms.saturating_mul(1 << (attempt - 1).min(10));
                        if backoff > 0 {
                            thread::sleep(Duration::from_millis(backoff));
                        }
                    }
                    Err(e) => {
                        return Outcome {
                            code: None,
                            failure: failure(u, FailureKind::Transport, attempt, e.message, None),
                            cache_hit,
                            calls,
                        }
                    }
                }
            }
        }
    };
    match parse_code(&response) {
        Ok(code) => Outcome {
            code: Some(code),
            failure: None,
            cache_hit,
            calls,
        },
        Err(e) => Outcome {
            code: None,
            failure: failure(u, FailureKind::Unparseable, calls as u32, e.to_string(), Some(response)),
            cache_hit,
            calls,
        },
    }
}

/// Codes every utterance, filling `code_pred` (cleared on failure).
///
/// Requests run on at most `max_in_flight` threads; results come back in input
/// order whatever the scheduling, and failures never abort the run.
pub fn code_corpus(
    utterances: &[Utterance],
    codebook: &Codebook,
    config: &CoderConfig,
    mode: ShotMode,
    transport: &dyn Transport,
) -> Result<(Vec<Utterance>, CodingReport), CoderError> {
    config.validate()?;
    let cache = match &config.cache_dir {
        Some(dir) => Some(ResponseCache::open(dir)?),
        None => None,
    };
    let n = utterances.len();
    let slots: Vec<Mutex<Option<Outcome>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = config.max_in_flight.min(n.max(1));
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let o = code_one(utterances, i, codebook, config, mode, transport, cache.as_ref());
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(o);
            });
        }
    });

    let mut out = utterances.to_vec();
    let mut report = CodingReport {
        model_name: config.model_name.clone(),
        shot_mode: mode,
        temperature: config.temperature,
        n_total: n,
        n_coded: 0,
        n_failed: 0,
        cache_hits: 0,
        transport_calls: 0,
        failures: Vec::new(),
    };
    for (u, slot) in out.iter_mut().zip(slots) {
        let o = slot
            .into_inner()
            .unwrap_or_else(|e| e.into_inner())
            .expect("every index is claimed by a worker");
        u.code_pred = o.code;
        report.cache_hits += o.cache_hit as usize;
        report.transport_calls += o.calls;
        match o.failure {
            Some(f) => {
                report.n_failed += 1;
                report.failures.push(f);
            }
            None => report.n_coded += 1,
        }
    }
    Ok((out, report))
}
