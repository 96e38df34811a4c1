use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{RawScores, ScoreOutcome, ScoringError};
use crate::model::{Emotion, Script, ScriptId};

#[derive(Serialize)]
struct EmotionRequest<'a> {
    texts: Vec<&'a str>,
    emotion: Emotion,
}

#[derive(Deserialize)]
struct EmotionResponse {
    scores: Vec<f64>,
}

#[derive(Serialize)]
struct FluencyRequest<'a> {
    texts: Vec<&'a str>,
}

#[derive(Deserialize)]
struct FluencyResponse {
    plls: Vec<f64>,
}

/// Client for the scorer service (`GET /health`, `POST /score/emotion`,
/// `POST /score/fluency`).
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    base_url: String,
    batch_size: usize,
    timeout: Duration,
}

impl RemoteScorer {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            batch_size: 32,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn client(&self) -> Result<reqwest::blocking::Client, ScoringError> {
        reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| self.unreachable(e.to_string()))
    }

    fn unreachable(&self, reason: String) -> ScoringError {
        ScoringError::Unreachable {
            url: self.base_url.clone(),
            reason,
        }
    }

    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        client: &reqwest::blocking::Client,
        path: &str,
        body: &Req,
    ) -> Result<Resp, String> {
        let resp = client
            .post(format!("{}{path}", self.base_url))
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.text().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("{path} returned HTTP {}", status.as_u16()));
        }
        serde_json::from_str(&text).map_err(|e| format!("{path}: malformed response: {e}"))
    }

    fn score_chunk(
        &self,
        client: &reqwest::blocking::Client,
        emotion: Emotion,
        chunk: &[&Script],
    ) -> Result<Vec<RawScores>, String> {
        let texts: Vec<&str> = chunk.iter().map(|s| s.text.as_str()).collect();
        let e: EmotionResponse = self.post(
            client,
            "/score/emotion",
            &EmotionRequest {
                texts: texts.clone(),
                emotion,
            },
        )?;
        let f: FluencyResponse = self.post(client, "/score/fluency", &FluencyRequest { texts })?;
        if e.scores.len() != chunk.len() || f.plls.len() != chunk.len() {
            return Err(format!(
                "length mismatch: sent {}, got {} emotion / {} fluency scores",
                chunk.len(),
                e.scores.len(),
                f.plls.len()
            ));
        }
        Ok(e.scores
            .into_iter()
            .zip(f.plls)
            .map(|(emotion, fluency)| RawScores { emotion, fluency })
            .collect())
    }

    /// Scores scripts grouped by emotion, in chunks of `batch_size`. A failed chunk
    /// marks its scripts as failed without aborting the pass.
    pub fn score(&self, scripts: &[Script]) -> Result<ScoreOutcome, ScoringError> {
        let client = self.client()?;
        let health = client
            .get(format!("{}/health", self.base_url))
            .send()
            .map_err(|e| self.unreachable(e.to_string()))?;
        if !health.status().is_success() {
            return Err(self.unreachable(format!("health check returned HTTP {}", health.status().as_u16())));
        }
        let mut groups: BTreeMap<Emotion, Vec<&Script>> = BTreeMap::new();
        for s in scripts {
            groups.entry(s.emotion).or_default().push(s);
        }
        let mut outcome = ScoreOutcome::default();
        for (emotion, group) in groups {
            for chunk in group.chunks(self.batch_size) {
                match self.score_chunk(&client, emotion, chunk) {
                    Ok(scores) => {
                        for (s, v) in chunk.iter().zip(scores) {
                            outcome.table.insert(s.id.clone(), v);
                        }
                    }
                    Err(reason) => {
                        for s in chunk {
                            outcome.failed.insert(ScriptId::clone(&s.id), reason.clone());
                        }
                    }
                }
            }
        }
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Polarity, SeedWord, Session};
    use crate::scoring::{score_batch, ScorerBackend};
    use crate::stub::{StubResponse, StubServer};
    use serde_json::json;

    fn script(text: &str, emotion: Emotion) -> Script {
        Script::new(text, emotion, Session::PhraseFree, SeedWord::new("x", Polarity::Neutral), None)
    }

    fn service() -> StubServer {
        StubServer::start(|req| match req.path.as_str() {
            "/health" => StubResponse::json(&json!({"emotion_model": "stub", "fluency_model": "stub"})),
            "/score/emotion" => {
                let body = req.json().unwrap();
                let texts = body["texts"].as_array().unwrap();
                if body["emotion"] == "fear" {
                    return StubResponse::status(500, "{}");
                }
                let scores: Vec<f64> = texts.iter().map(|t| if t.as_str().unwrap().contains("嬉") { 0.9 } else { 0.1 }).collect();
                StubResponse::json(&json!({"scores": scores}))
            }
            "/score/fluency" => {
                let body = req.json().unwrap();
                let plls: Vec<f64> = body["texts"].as_array().unwrap().iter().map(|t| -(t.as_str().unwrap().chars().count() as f64)).collect();
                StubResponse::json(&json!({"plls": plls}))
            }
            _ => StubResponse::status(404, "{}"),
        })
        .unwrap()
    }

    #[test]
    fn scores_and_reports_failures() {
        let server = service();
        let scripts = vec![
            script("嬉しい", Emotion::Happiness),
            script("普通", Emotion::Happiness),
            script("こわい", Emotion::Fear),
        ];
        let backend = ScorerBackend::RemoteHttp(RemoteScorer::new(server.url()).with_batch_size(1));
        let out = score_batch(&scripts, &backend).unwrap();
        assert_eq!(out.table[&scripts[0].id], RawScores { emotion: 0.9, fluency: -3.0 });
        assert_eq!(out.table[&scripts[1].id].emotion, 0.1);
        assert_eq!(out.failed.len(), 1);
        assert!(out.failed.contains_key(&scripts[2].id));
    }

    #[test]
    fn unreachable_backend() {
        let url = {
            let server = service();
            server.url()
        };
        let backend = ScorerBackend::RemoteHttp(
            RemoteScorer::new(url).with_timeout(Duration::from_secs(2)),
        );
        let err = score_batch(&[script("a", Emotion::Anger)], &backend).unwrap_err();
        assert!(matches!(err, ScoringError::Unreachable { .. }), "{err}");
    }
}
