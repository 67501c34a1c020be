//! Completion endpoints: an OpenAI-style HTTP client and a deterministic mock.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::prompt::{PromptKind, PromptTemplate};
use crate::corpus::PairRecord;
use crate::error::LlmError;

/// What a single completion call needs beyond the prompt itself.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a PromptTemplate,
    pub temperature: f64,
    pub max_tokens: u32,
    pub sample_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// The endpoint stopped because it hit `max_tokens`.
    pub truncated: bool,
}

impl Completion {
    pub fn new(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            truncated: false,
        }
    }
}

pub trait LanguageModel: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError>;
}

/// Connection settings for a chat-completions endpoint.
#[derive(Clone)]
pub struct LlmEndpoint {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens_gen: u32,
    pub max_tokens_sum: u32,
    pub api_key: Option<String>,
}

impl std::fmt::Debug for LlmEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmEndpoint")
            .field("base_url", &self.base_url)
            .field("model", &self.model)
            .field("temperature", &self.temperature)
            .field("max_tokens_gen", &self.max_tokens_gen)
            .field("max_tokens_sum", &self.max_tokens_sum)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl LlmEndpoint {
    pub fn validate(&self) -> Result<(), String> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err("temperature must be >= 0".into());
        }
        if self.max_tokens_gen == 0 || self.max_tokens_sum == 0 {
            return Err("max tokens must be > 0".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatResponseMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ChatResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Blocking client for `POST <base>/chat/completions`.
pub struct HttpLlm {
    endpoint: LlmEndpoint,
    client: reqwest::blocking::Client,
}

impl HttpLlm {
    pub fn new(endpoint: LlmEndpoint) -> Result<Self, LlmError> {
        endpoint.validate().map_err(LlmError::Protocol)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpLlm { endpoint, client })
    }

    pub fn endpoint(&self) -> &LlmEndpoint {
        &self.endpoint
    }
}

impl LanguageModel for HttpLlm {
    fn model(&self) -> &str {
        &self.endpoint.model
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let content = req.prompt.render();
        let body = ChatRequest {
            model: &self.endpoint.model,
            messages: vec![ChatMessage {
                role: "user",
                content: &content,
            }],
            temperature: req.temperature,
            max_tokens: req.max_tokens,
        };
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let mut builder = self.client.post(url).json(&body);
        if let Some(key) = &self.endpoint.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(LlmError::Auth(text)),
            429 => return Err(LlmError::RateLimited),
            500..=599 => return Err(LlmError::Transport(format!("HTTP {status}: {text}"))),
            _ => return Err(LlmError::Http { status, body: text }),
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::Protocol(e.to_string()))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| LlmError::Protocol("response has no choices".into()))?;
        Ok(Completion {
            text: choice.message.content.unwrap_or_default(),
            truncated: choice.finish_reason.as_deref() == Some("length"),
        })
    }
}

/// Offline stand-in for a real model.
#[derive(Debug, Clone)]
pub enum MockPersonality {
    /// Generation returns the target description verbatim; summarization
    /// returns `purpose of <id>` for known codes.
    Echo { ids_by_code: HashMap<String, String> },
    /// Lookup tables: description to code for generation, code to
    /// description for summarization. Misses fall back to echoing the target.
    Table {
        gen: HashMap<String, String>,
        sum: HashMap<String, String>,
    },
}

#[derive(Debug, Clone)]
pub struct MockLlm {
    model: String,
    personality: MockPersonality,
}

fn norm_key(s: &str) -> String {
    s.trim().to_string()
}

impl MockLlm {
    pub fn echo<'a>(pairs: impl IntoIterator<Item = &'a PairRecord>) -> Self {
        let ids_by_code = pairs
            .into_iter()
            .map(|p| (norm_key(&p.code), p.id.clone()))
            .collect();
        MockLlm {
            model: "mock-echo".into(),
            personality: MockPersonality::Echo { ids_by_code },
        }
    }

    /// Knows every pair: generation of a query yields its true code and
    /// summarizing a code yields its query, so a rewrite reproduces the
    /// original code.
    pub fn oracle<'a>(pairs: impl IntoIterator<Item = &'a PairRecord>) -> Self {
        let mut gen = HashMap::new();
        let mut sum = HashMap::new();
        for p in pairs {
            gen.insert(norm_key(&p.query), p.code.clone());
            sum.insert(norm_key(&p.code), p.query.clone());
        }
        MockLlm {
            model: "mock-oracle".into(),
            personality: MockPersonality::Table { gen, sum },
        }
    }

    pub fn from_tables(gen: HashMap<String, String>, sum: HashMap<String, String>) -> Self {
        let norm = |m: HashMap<String, String>| m.into_iter().map(|(k, v)| (norm_key(&k), v)).collect();
        MockLlm {
            model: "mock-table".into(),
            personality: MockPersonality::Table {
                gen: norm(gen),
                sum: norm(sum),
            },
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }
}

impl LanguageModel for MockLlm {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<Completion, LlmError> {
        let target = norm_key(&req.prompt.target);
        let text = match (&self.personality, req.prompt.kind) {
            (MockPersonality::Echo { .. }, PromptKind::Generate) => target,
            (MockPersonality::Echo { ids_by_code }, PromptKind::Summarize) => match ids_by_code.get(&target) {
                Some(id) => format!("purpose of {id}"),
                None => "purpose of snippet".to_string(),
            },
            (MockPersonality::Table { gen, .. }, PromptKind::Generate) => {
                gen.get(&target).cloned().unwrap_or(target)
            }
            (MockPersonality::Table { sum, .. }, PromptKind::Summarize) => {
                sum.get(&target).cloned().unwrap_or(target)
            }
        };
        Ok(Completion::new(text))
    }
}

/// Retries transport errors and rate limits with exponential backoff.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_delay: Duration::ZERO,
        }
    }

    pub fn run<T>(&self, mut call: impl FnMut() -> Result<T, LlmError>) -> Result<T, LlmError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(e) if e.is_retryable() && attempt < self.max_retries => {
                    let delay = self.base_delay * 2u32.pow(attempt);
                    log::warn!("attempt {} failed ({e}); retrying in {delay:?}", attempt + 1);
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

/// Spaces out calls so that at most `per_second` start each second.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(per_second: f64) -> Self {
        let interval = (per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / per_second));
        RateLimiter {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    pub fn unlimited() -> Self {
        Self::new(0.0)
    }

    pub fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let wait = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + interval;
            slot - now
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Strips surrounding blank lines and a Markdown code fence if present.
/// Interior lines are left untouched.
pub fn trim_completion(text: &str) -> String {
    let lines: Vec<&str> = text.lines().collect();
    let mut start = 0;
    let mut end = lines.len();
    let blank = |l: &str| l.trim().is_empty();
    while start < end && blank(lines[start]) {
        start += 1;
    }
    while end > start && blank(lines[end - 1]) {
        end -= 1;
    }
    if start < end && lines[start].trim_start().starts_with("```") {
        start += 1;
        if end > start && lines[end - 1].trim() == "```" {
            end -= 1;
        }
    } else if end > start && lines[end - 1].trim() == "```" {
        end -= 1;
    }
    while start < end && blank(lines[start]) {
        start += 1;
    }
    while end > start && blank(lines[end - 1]) {
        end -= 1;
    }
    lines[start..end].join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentor::prompt::build_gen_prompt;
    use crate::corpus::Language;
    use std::sync::atomic::{AtomicU32, Ordering};

    #[test]
    fn trims_fences_and_blank_lines() {
        assert_eq!(trim_completion("\n```python\ndef f():\n\n    return 1\n```\n\n"), "def f():\n\n    return 1");
        assert_eq!(trim_completion("  x = 1  \n"), "  x = 1  ");
        assert_eq!(trim_completion("```\n```"), "");
        assert_eq!(trim_completion("a\n```"), "a");
    }

    #[test]
    fn retry_stops_on_auth() {
        let calls = AtomicU32::new(0);
        let policy = RetryPolicy { max_retries: 3, base_delay: Duration::ZERO };
        let r: Result<(), _> = policy.run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(LlmError::Auth("bad key".into()))
        });
        assert!(matches!(r, Err(LlmError::Auth(_))));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn retry_bounded_at_three() {
        let calls = AtomicU32::new(0);
        let policy = RetryPolicy { max_retries: 3, base_delay: Duration::ZERO };
        let r: Result<(), _> = policy.run(|| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(LlmError::RateLimited)
        });
        assert!(r.is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 4);

        calls.store(0, Ordering::SeqCst);
        let r = policy.run(|| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(LlmError::Transport("reset".into()))
            } else {
                Ok(7)
            }
        });
        assert_eq!(r.unwrap(), 7);
    }

    #[test]
    fn mock_personalities() {
        let pairs = vec![PairRecord::new("p1", "add numbers", "def add(a, b): return a + b", Language::Python)];
        let prompt = build_gen_prompt("add numbers", &[], Language::Python).unwrap();
        let req = CompletionRequest { prompt: &prompt, temperature: 1.0, max_tokens: 256, sample_index: 0 };
        assert_eq!(MockLlm::echo(&pairs).complete(&req).unwrap().text, "add numbers");
        assert_eq!(MockLlm::oracle(&pairs).complete(&req).unwrap().text, "def add(a, b): return a + b");
    }

    #[test]
    fn rate_limiter_spaces_calls() {
        let rl = RateLimiter::new(100.0);
        let t = Instant::now();
        for _ in 0..4 {
            rl.acquire();
        }
        assert!(t.elapsed() >= Duration::from_millis(25));
    }
}
