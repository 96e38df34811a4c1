//! Candidate generation against an OpenAI-compatible chat-completions endpoint.
//!
//! Every request is keyed by a hash of (prompt, model, temperature). Raw response
//! bodies are cached on disk under that key, so a recorded batch can be replayed
//! offline and yields identical script ids.

mod cache;
mod client;
mod extract;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Emotion, NvPhrase, Script, SeedWord, Session};

pub use cache::ResponseCache;
pub use client::{LlmClient, LlmSettings, RetryPolicy, Secret, Sleeper};
pub use extract::{extract_script, Extracted, Rejection};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("API key missing: set the {0} environment variable")]
    MissingCredentials(String),
    #[error("endpoint rejected the request with HTTP {status}: {detail}")]
    Rejected { status: u16, detail: String },
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("malformed completion response: {0}")]
    Malformed(String),
    #[error("cache error at {path}: {reason}")]
    Cache { path: String, reason: String },
    #[error("client setup failed: {0}")]
    Setup(String),
    #[error("no script produced: {failures} request(s) failed, {rejected} completion(s) rejected")]
    NoScripts { failures: usize, rejected: usize },
}

impl LlmError {
    pub fn is_transient(&self) -> bool {
        matches!(self, LlmError::RetriesExhausted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>, settings: &LlmSettings) -> Self {
        Self {
            prompt: prompt.into(),
            model_name: settings.model.clone(),
            temperature: settings.temperature,
            max_tokens: settings.max_tokens,
        }
    }

    /// Hex SHA-256 over model, temperature and prompt.
    pub fn request_key(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model_name.as_bytes());
        h.update([0u8]);
        h.update(self.temperature.to_bits().to_le_bytes());
        h.update([0u8]);
        h.update(self.prompt.as_bytes());
        hex::encode(h.finalize())
    }
}

/// One planned generation: what the prompt asks for and the prompt itself.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSpec {
    pub emotion: Emotion,
    pub session: Session,
    pub seed: SeedWord,
    pub phrase: Option<NvPhrase>,
    pub prompt: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationBatchReport {
    pub requested: usize,
    pub returned: usize,
    pub rejected: usize,
    pub deduplicated: usize,
    pub cached_hits: usize,
    pub failures: usize,
}

impl GenerationBatchReport {
    pub fn is_consistent(&self) -> bool {
        self.returned + self.failures == self.requested
            && self.deduplicated + self.rejected <= self.returned
    }
}

enum Outcome {
    Script(Script),
    Rejected(Rejection),
    Failed(LlmError),
}

/// Runs every spec with at most `concurrency` requests in flight and returns the
/// accepted scripts in spec order, deduplicated by id (first occurrence wins).
pub fn run_batch(
    client: &LlmClient,
    specs: &[GenerationSpec],
    concurrency: usize,
) -> Result<(Vec<Script>, GenerationBatchReport), LlmError> {
    let concurrency = concurrency.max(1).min(specs.len().max(1));
    let next = AtomicUsize::new(0);
    let cached = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Outcome>>> = Mutex::new((0..specs.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..concurrency {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(spec) = specs.get(i) else { break };
                let req = GenerationRequest::new(spec.prompt.clone(), client.settings());
                let outcome = match client.generate_tracked(&req) {
                    Ok((raw, hit)) => {
                        if hit {
                            cached.fetch_add(1, Ordering::SeqCst);
                        }
                        let phrase = spec.phrase.as_ref().map(|p| p.surface.as_str());
                        match extract_script(&raw, phrase) {
                            Ok(ex) => {
                                let mut s = Script::new(
                                    &ex.text,
                                    spec.emotion,
                                    spec.session,
                                    spec.seed.clone(),
                                    spec.phrase.clone(),
                                );
                                if let Some(r) = &ex.reading {
                                    s = s.with_reading(r);
                                }
                                Outcome::Script(s)
                            }
                            Err(r) => Outcome::Rejected(r),
                        }
                    }
                    Err(e) => Outcome::Failed(e),
                };
                results.lock().expect("results lock")[i] = Some(outcome);
            });
        }
    });

    let mut report = GenerationBatchReport {
        requested: specs.len(),
        cached_hits: cached.into_inner(),
        ..Default::default()
    };
    let mut seen = BTreeSet::new();
    let mut scripts = Vec::new();
    for (spec, outcome) in specs.iter().zip(results.into_inner().expect("results lock")) {
        match outcome.expect("every spec processed") {
            Outcome::Script(s) => {
                report.returned += 1;
                if seen.insert(s.id.clone()) {
                    scripts.push(s);
                } else {
                    report.deduplicated += 1;
                }
            }
            Outcome::Rejected(r) => {
                report.returned += 1;
                report.rejected += 1;
                log::debug!("rejected completion for {}/{}: {r}", spec.emotion, spec.session);
            }
            Outcome::Failed(e) => {
                report.failures += 1;
                log::warn!("generation failed for {}/{}: {e}", spec.emotion, spec.session);
            }
        }
    }
    if scripts.is_empty() {
        return Err(LlmError::NoScripts {
            failures: report.failures,
            rejected: report.rejected,
        });
    }
    Ok((scripts, report))
}
