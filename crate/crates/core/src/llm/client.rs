use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{GenerationRequest, LlmError, ResponseCache};

/// API key wrapper that never prints its value.
#[derive(Clone)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Option<Self> {
        let value = value.into();
        (!value.trim().is_empty()).then_some(Self(value))
    }

    pub fn from_env(var: &str) -> Result<Self, LlmError> {
        std::env::var(var)
            .ok()
            .and_then(Secret::new)
            .ok_or_else(|| LlmError::MissingCredentials(var.to_string()))
    }

    fn expose(&self) -> &str {
        &self.0
    }

    fn redact(&self, text: &str) -> String {
        text.replace(&self.0, "***")
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 1000,
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Wait after failed attempt `attempt` (1-based): base · factor^(attempt-1).
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms as f64 * self.factor.powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis(ms.round() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Base URL (e.g. `https://api.openai.com/v1`) or a full `/chat/completions` URL.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub concurrency: usize,
    /// Optional cap on request starts per minute, shared by all workers.
    pub requests_per_minute: Option<u32>,
    pub api_key_env: String,
    pub retry: RetryPolicy,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-0301".into(),
            temperature: 1.0,
            max_tokens: 256,
            timeout_secs: 60,
            concurrency: 4,
            requests_per_minute: None,
            api_key_env: "EMOSCRIPT_API_KEY".into(),
            retry: RetryPolicy::default(),
        }
    }
}

impl LlmSettings {
    pub fn completions_url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

pub type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

fn parse_completion(body: &str) -> Result<String, LlmError> {
    let resp: ChatResponse =
        serde_json::from_str(body).map_err(|e| LlmError::Malformed(e.to_string()))?;
    resp.choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| LlmError::Malformed("no choice with message content".into()))
}

enum Attempt {
    Done(String),
    Transient(String),
    Fatal(LlmError),
}

pub struct LlmClient {
    http: reqwest::blocking::Client,
    settings: LlmSettings,
    key: Secret,
    cache: Option<ResponseCache>,
    sleeper: Sleeper,
    network_calls: AtomicUsize,
    next_slot: Mutex<Option<Instant>>,
}

impl LlmClient {
    pub fn new(settings: LlmSettings, key: Secret, cache: Option<ResponseCache>) -> Result<Self, LlmError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(settings.timeout_secs.max(1)))
            .build()
            .map_err(|e| LlmError::Setup(e.to_string()))?;
        Ok(Self {
            http,
            settings,
            key,
            cache,
            sleeper: Arc::new(std::thread::sleep),
            network_calls: AtomicUsize::new(0),
            next_slot: Mutex::new(None),
        })
    }

    /// Replaces the function used to wait between retries and for rate limiting.
    pub fn with_sleeper(mut self, sleeper: Sleeper) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn settings(&self) -> &LlmSettings {
        &self.settings
    }

    pub fn cache(&self) -> Option<&ResponseCache> {
        self.cache.as_ref()
    }

    /// HTTP requests sent so far (cache hits excluded).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<String, LlmError> {
        self.generate_tracked(req).map(|(text, _)| text)
    }

    /// Like [`generate`](Self::generate), also reporting whether the cache answered.
    pub fn generate_tracked(&self, req: &GenerationRequest) -> Result<(String, bool), LlmError> {
        let key = req.request_key();
        if let Some(body) = self.cache.as_ref().and_then(|c| c.get(&key)) {
            match parse_completion(&body) {
                Ok(text) => return Ok((text, true)),
                Err(e) => log::warn!("ignoring unreadable cache entry {key}: {e}"),
            }
        }
        let payload = json!({
            "model": req.model_name,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "n": 1,
        });
        let retry = &self.settings.retry;
        let attempts = retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 1..=attempts {
            match self.attempt(&payload) {
                Attempt::Done(body) => {
                    let text = parse_completion(&body)?;
                    if let Some(cache) = &self.cache {
                        cache.put(&key, &body)?;
                    }
                    return Ok((text, false));
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Transient(reason) => {
                    log::debug!("attempt {attempt}/{attempts} failed: {reason}");
                    last = reason;
                    if attempt < attempts {
                        (self.sleeper)(retry.delay(attempt));
                    }
                }
            }
        }
        Err(LlmError::RetriesExhausted { attempts, last })
    }

    fn throttle(&self) {
        let Some(rpm) = self.settings.requests_per_minute.filter(|r| *r > 0) else {
            return;
        };
        let interval = Duration::from_secs_f64(60.0 / f64::from(rpm));
        let wait = {
            let mut slot = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + interval);
            start - now
        };
        if !wait.is_zero() {
            (self.sleeper)(wait);
        }
    }

    fn attempt(&self, payload: &serde_json::Value) -> Attempt {
        self.throttle();
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        let sent = self
            .http
            .post(self.settings.completions_url())
            .bearer_auth(self.key.expose())
            .json(payload)
            .send();
        let resp = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(self.key.redact(&e.to_string())),
        };
        let status = resp.status().as_u16();
        let body = match resp.text() {
            Ok(b) => b,
            Err(e) => return Attempt::Transient(self.key.redact(&e.to_string())),
        };
        match status {
            200..=299 => Attempt::Done(body),
            429 | 500..=599 => Attempt::Transient(format!("HTTP {status}")),
            _ => {
                let detail: String = self.key.redact(&body).chars().take(200).collect();
                Attempt::Fatal(LlmError::Rejected { status, detail })
            }
        }
    }
}
