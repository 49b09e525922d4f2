//! Conditional text generation behind a small trait, with an HTTP client
//! for a remote model service and a scripted mock for tests.
//!
//! Wire protocol (UTF-8 JSON):
//!
//! ```text
//! POST /generate  {"prompt", "max_new_tokens", "top_p", "temperature", "stop_token"}
//!              -> {"text", "finish_reason": "stop" | "length" | "error"}
//! GET  /health -> {"status": "ok", "model": "<name>"}
//! ```

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::{self, JsonlError};

/// End-of-text symbol of the GPT-2 tokenizer family served by the model bridge.
pub const DEFAULT_STOP_TOKEN: &str = "<|endoftext|>";

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    Unavailable { attempts: u32, message: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("duplicate prompt in mock script: {0:?}")]
    DuplicatePrompt(String),
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error(transparent)]
    Script(#[from] JsonlError),
}

impl BackendError {
    pub fn is_transport(&self) -> bool {
        matches!(
            self,
            BackendError::Unavailable { .. } | BackendError::Protocol(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub max_new_tokens: u32,
    pub top_p: f64,
    pub temperature: f64,
    pub stop_token: String,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            max_new_tokens: 48,
            top_p: 0.9,
            temperature: 1.0,
            stop_token: DEFAULT_STOP_TOKEN.to_string(),
        }
    }
}

impl SamplingParams {
    pub fn check(&self) -> Result<(), BackendError> {
        if self.max_new_tokens == 0 {
            return Err(BackendError::BadRequest(
                "max_new_tokens must be at least 1".into(),
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(BackendError::BadRequest(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::BadRequest(format!(
                "temperature must be nonnegative, got {}",
                self.temperature
            )));
        }
        if self.stop_token.is_empty() {
            return Err(BackendError::BadRequest(
                "stop_token must not be empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    #[serde(flatten)]
    pub params: SamplingParams,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            params: SamplingParams::default(),
        }
    }

    pub fn with_params(prompt: impl Into<String>, params: SamplingParams) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            params,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub text: String,
    pub finish_reason: FinishReason,
}

/// Samples a continuation for a prompt.
///
/// Implementations are shared across threads. `max_in_flight` is the number
/// of concurrent `generate` calls the implementation admits; callers use it
/// to size their fan-out.
pub trait Generator: Send + Sync {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError>;

    fn max_in_flight(&self) -> usize {
        1
    }

    fn describe(&self) -> String;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        (**self).generate(req)
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Checks the request, runs it, and cuts the result at the first stop token.
pub fn generate(
    gen: &dyn Generator,
    req: &GenerationRequest,
) -> Result<GenerationResult, BackendError> {
    req.params.check()?;
    let mut result = gen.generate(req)?;
    if let Some(idx) = result.text.find(&req.params.stop_token) {
        result.text.truncate(idx);
        result.finish_reason = FinishReason::Stop;
    }
    Ok(result)
}

/// What the mock does with a prompt that is not in its script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnscriptedPolicy {
    Strict,
    Fallback(String),
}

/// Table-lookup generator. Records every prompt it receives, in call order.
#[derive(Debug)]
pub struct MockGenerator {
    table: HashMap<String, String>,
    policy: UnscriptedPolicy,
    calls: Mutex<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub prompt: String,
    pub response: String,
}

pub fn mock_from_script<I, P, R>(entries: I) -> Result<MockGenerator, BackendError>
where
    I: IntoIterator<Item = (P, R)>,
    P: Into<String>,
    R: Into<String>,
{
    MockGenerator::from_entries(entries)
}

impl MockGenerator {
    pub fn from_entries<I, P, R>(entries: I) -> Result<Self, BackendError>
    where
        I: IntoIterator<Item = (P, R)>,
        P: Into<String>,
        R: Into<String>,
    {
        let mut table = HashMap::new();
        for (prompt, response) in entries {
            let prompt = prompt.into();
            if table.contains_key(&prompt) {
                return Err(BackendError::DuplicatePrompt(prompt));
            }
            table.insert(prompt, response.into());
        }
        Ok(MockGenerator {
            table,
            policy: UnscriptedPolicy::Strict,
            calls: Mutex::new(Vec::new()),
        })
    }

    /// Loads a script file with one `{"prompt", "response"}` object per line.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let entries: Vec<ScriptEntry> = jsonl::read(path)?;
        Self::from_entries(entries.into_iter().map(|e| (e.prompt, e.response)))
    }

    pub fn with_policy(mut self, policy: UnscriptedPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().expect("mock call log poisoned").clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().expect("mock call log poisoned").len()
    }
}

impl Generator for MockGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        self.calls
            .lock()
            .expect("mock call log poisoned")
            .push(req.prompt.clone());
        let text = match (self.table.get(&req.prompt), &self.policy) {
            (Some(text), _) => text.clone(),
            (None, UnscriptedPolicy::Fallback(text)) => text.clone(),
            (None, UnscriptedPolicy::Strict) => {
                return Err(BackendError::BadRequest(format!(
                    "unscripted prompt: {:?}",
                    req.prompt
                )))
            }
        };
        // Whitespace tokens stand in for model tokens.
        let cap = req.params.max_new_tokens as usize;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.len() > cap {
            return Ok(GenerationResult {
                text: tokens[..cap].join(" "),
                finish_reason: FinishReason::Length,
            });
        }
        Ok(GenerationResult {
            text,
            finish_reason: FinishReason::Stop,
        })
    }

    fn max_in_flight(&self) -> usize {
        8
    }

    fn describe(&self) -> String {
        format!("mock({} scripted prompts)", self.table.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total transport attempts, including the first.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(200),
            max_delay: Duration::from_secs(5),
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1` (zero-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn new(limit: usize) -> Self {
        InFlight {
            limit: limit.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().expect("in-flight lock poisoned");
        while *active >= self.limit {
            active = self.freed.wait(active).expect("in-flight lock poisoned");
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().expect("in-flight lock poisoned");
        *active -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model: String,
}

/// Blocking client for the model service.
#[derive(Debug)]
pub struct HttpGenerator {
    base_url: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
    in_flight: InFlight,
}

impl HttpGenerator {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout_read(Duration::from_secs(120))
            .build();
        HttpGenerator {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            retry: RetryPolicy::default(),
            in_flight: InFlight::new(4),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, limit: usize) -> Self {
        self.in_flight = InFlight::new(limit);
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn health(&self) -> Result<Health, BackendError> {
        let url = format!("{}/health", self.base_url);
        let resp = self
            .agent
            .get(&url)
            .call()
            .map_err(|e| BackendError::Unavailable {
                attempts: 1,
                message: e.to_string(),
            })?;
        resp.into_json()
            .map_err(|e| BackendError::Protocol(e.to_string()))
    }

    fn post_once(&self, url: &str, body: &str) -> Result<GenerationResult, Attempt> {
        let resp = self
            .agent
            .post(url)
            .set("Content-Type", "application/json; charset=utf-8")
            .send_string(body);
        match resp {
            Ok(resp) => {
                let text = resp
                    .into_string()
                    .map_err(|e| Attempt::Retry(e.to_string()))?;
                serde_json::from_str(&text)
                    .map_err(|e| Attempt::Fatal(BackendError::Protocol(e.to_string())))
            }
            Err(ureq::Error::Status(code, resp)) if (400..500).contains(&code) => {
                let detail = resp.into_string().unwrap_or_default();
                Err(Attempt::Fatal(BackendError::BadRequest(format!(
                    "HTTP {code}: {detail}"
                ))))
            }
            Err(ureq::Error::Status(code, _)) => Err(Attempt::Retry(format!("HTTP {code}"))),
            Err(e @ ureq::Error::Transport(_)) => Err(Attempt::Retry(e.to_string())),
        }
    }
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl Generator for HttpGenerator {
    fn generate(&self, req: &GenerationRequest) -> Result<GenerationResult, BackendError> {
        let _permit = self.in_flight.acquire();
        let url = format!("{}/generate", self.base_url);
        // Serialized once so every attempt sends identical bytes.
        let body = serde_json::to_string(req).expect("request serializes");
        let mut last = String::new();
        let attempts = self.retry.max_attempts.max(1);
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.retry.backoff(attempt - 1));
            }
            match self.post_once(&url, &body) {
                Ok(result) => return Ok(result),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(msg)) => last = msg,
            }
        }
        Err(BackendError::Unavailable {
            attempts,
            message: last,
        })
    }

    fn max_in_flight(&self) -> usize {
        self.in_flight.limit
    }

    fn describe(&self) -> String {
        format!("http({})", self.base_url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_mock_returns_exact_text() {
        let mock = mock_from_script([("q1", "plants trap sunlight")]).unwrap();
        let r = generate(&mock, &GenerationRequest::new("q1")).unwrap();
        assert_eq!(r.text, "plants trap sunlight");
        assert_eq!(r.finish_reason, FinishReason::Stop);
    }

    #[test]
    fn fallback_and_strict_policies() {
        let mock = mock_from_script(Vec::<(String, String)>::new())
            .unwrap()
            .with_policy(UnscriptedPolicy::Fallback("something".into()));
        let r = generate(&mock, &GenerationRequest::new("anything")).unwrap();
        assert_eq!(r.text, "something");
        assert_eq!(r.finish_reason, FinishReason::Stop);

        let strict = mock_from_script([("a", "b")]).unwrap();
        assert!(matches!(
            generate(&strict, &GenerationRequest::new("zzz")),
            Err(BackendError::BadRequest(_))
        ));
    }

    #[test]
    fn duplicate_prompt_rejected() {
        assert!(matches!(
            mock_from_script([("a", "x"), ("a", "y")]),
            Err(BackendError::DuplicatePrompt(p)) if p == "a"
        ));
    }

    #[test]
    fn token_cap_reports_length() {
        let mock = mock_from_script([("q", "one two three four")]).unwrap();
        let mut req = GenerationRequest::new("q");
        req.params.max_new_tokens = 2;
        let r = generate(&mock, &req).unwrap();
        assert_eq!(r.text, "one two");
        assert_eq!(r.finish_reason, FinishReason::Length);
    }

    #[test]
    fn stop_token_is_stripped() {
        let mock = mock_from_script([("q", "more rain<|endoftext|>junk")]).unwrap();
        let r = generate(&mock, &GenerationRequest::new("q")).unwrap();
        assert_eq!(r.text, "more rain");
        assert!(!r.text.contains(DEFAULT_STOP_TOKEN));
    }

    #[test]
    fn invalid_params_rejected_before_dispatch() {
        let mock = mock_from_script([("q", "x")]).unwrap();
        for params in [
            SamplingParams {
                top_p: 0.0,
                ..Default::default()
            },
            SamplingParams {
                top_p: 1.5,
                ..Default::default()
            },
            SamplingParams {
                max_new_tokens: 0,
                ..Default::default()
            },
            SamplingParams {
                temperature: -1.0,
                ..Default::default()
            },
        ] {
            let req = GenerationRequest::with_params("q", params);
            assert!(matches!(
                generate(&mock, &req),
                Err(BackendError::BadRequest(_))
            ));
        }
        assert_eq!(mock.call_count(), 0);
    }

    #[test]
    fn unreachable_endpoint_is_unavailable_after_retries() {
        let client = HttpGenerator::new("http://127.0.0.1:1").with_retry(RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        });
        match generate(&client, &GenerationRequest::new("q")) {
            Err(BackendError::Unavailable { attempts, .. }) => assert_eq!(attempts, 3),
            other => panic!("expected Unavailable, got {other:?}"),
        }
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(300),
        };
        assert_eq!(p.backoff(0), Duration::from_millis(100));
        assert_eq!(p.backoff(1), Duration::from_millis(200));
        assert_eq!(p.backoff(2), Duration::from_millis(300));
        assert_eq!(p.backoff(40), Duration::from_millis(300));
    }

    #[test]
    fn wire_body_shape() {
        let body = serde_json::to_value(GenerationRequest::new("p")).unwrap();
        assert_eq!(
            body,
            serde_json::json!({
                "prompt": "p",
                "max_new_tokens": 48,
                "top_p": 0.9,
                "temperature": 1.0,
                "stop_token": "<|endoftext|>"
            })
        );
    }
}
