//! Emotion-recognizability and fluency scoring.
//!
//! Backends produce raw scores (`emotion` a probability-like value in [0,1],
//! `fluency` a mean per-token log-likelihood, higher is better). Raw scores are
//! min-max normalized within each emotion's candidate pool and summed into the
//! combined score used for selection.

mod baseline;
mod remote;
mod wrime;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Emotion, Script, ScriptId};

pub use baseline::BaselineScorer;
pub use remote::RemoteScorer;
pub use wrime::{aggregate_wrime_intensity, has_emotion, WRIME_MAX, WRIME_THRESHOLD};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("no scripts to score")]
    Empty,
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("score table is missing {} id(s): {}", .0.len(), join_ids(.0))]
    MissingIds(Vec<ScriptId>),
    #[error("scorer backend unreachable at {url}: {reason}")]
    Unreachable { url: String, reason: String },
    #[error("no score could be obtained for any script")]
    AllFailed,
    #[error("value {0} is not finite")]
    NonFinite(f64),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("intensity {0} outside 0..=3")]
    Intensity(u8),
    #[error("at least one reader annotation is required")]
    NoReaders,
}

fn join_ids(ids: &[ScriptId]) -> String {
    ids.iter().map(ScriptId::as_str).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub emotion: f64,
    pub fluency: f64,
}

pub type ScoreTable = BTreeMap<ScriptId, RawScores>;

/// Result of a scoring pass: the table plus ids that could not be scored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreOutcome {
    pub table: ScoreTable,
    pub failed: BTreeMap<ScriptId, String>,
}

#[derive(Debug, Clone)]
pub enum ScorerBackend {
    RemoteHttp(RemoteScorer),
    PrecomputedFile(PathBuf),
    LexiconBaseline(BaselineScorer),
}

fn check_raw(s: RawScores) -> Result<RawScores, String> {
    if !(s.emotion.is_finite() && (0.0..=1.0).contains(&s.emotion)) {
        return Err(format!("emotion score {} outside [0, 1]", s.emotion));
    }
    if !s.fluency.is_finite() {
        return Err(format!("fluency score {} not finite", s.fluency));
    }
    Ok(s)
}

/// Reads `script_id<TAB>emotion_score<TAB>fluency_score` rows. A first row whose id
/// column reads `script_id` is treated as a header.
pub fn load_score_table(path: &Path) -> Result<ScoreTable, ScoringError> {
    let origin = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| ScoringError::Io {
        path: origin.clone(),
        reason: e.to_string(),
    })?;
    let mut table = ScoreTable::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') || (idx == 0 && line.starts_with("script_id")) {
            continue;
        }
        let malformed = |reason: String| ScoringError::Malformed {
            path: origin.clone(),
            line: idx + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(malformed(format!("expected 3 columns, found {}", fields.len())));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|e| malformed(format!("{s:?}: {e}")));
        let scores = RawScores {
            emotion: parse(fields[1])?,
            fluency: parse(fields[2])?,
        };
        let scores = check_raw(scores).map_err(malformed)?;
        table.insert(ScriptId::from(fields[0]), scores);
    }
    Ok(table)
}

pub fn write_score_table(table: &ScoreTable) -> String {
    let mut out = String::from("script_id\temotion_score\tfluency_score\n");
    for (id, s) in table {
        out.push_str(&format!("{id}\t{}\t{}\n", s.emotion, s.fluency));
    }
    out
}

/// Scores every script with `backend`.
///
/// A precomputed table that lacks any id is an error naming the missing ids. For the
/// remote backend, items whose request failed are left out of the table and listed
/// in [`ScoreOutcome::failed`].
pub fn score_batch(scripts: &[Script], backend: &ScorerBackend) -> Result<ScoreOutcome, ScoringError> {
    if scripts.is_empty() {
        return Err(ScoringError::Empty);
    }
    match backend {
        ScorerBackend::PrecomputedFile(path) => {
            let full = load_score_table(path)?;
            let mut missing: Vec<ScriptId> = Vec::new();
            let mut table = ScoreTable::new();
            for s in scripts {
                match full.get(&s.id) {
                    Some(v) => {
                        table.insert(s.id.clone(), *v);
                    }
                    None => missing.push(s.id.clone()),
                }
            }
            if !missing.is_empty() {
                missing.sort();
                missing.dedup();
                return Err(ScoringError::MissingIds(missing));
            }
            Ok(ScoreOutcome {
                table,
                failed: BTreeMap::new(),
            })
        }
        ScorerBackend::LexiconBaseline(b) => Ok(ScoreOutcome {
            table: scripts.iter().map(|s| (s.id.clone(), b.score(s))).collect(),
            failed: BTreeMap::new(),
        }),
        ScorerBackend::RemoteHttp(r) => {
            let outcome = r.score(scripts)?;
            let mut failed = outcome.failed;
            let mut table = ScoreTable::new();
            for (id, s) in outcome.table {
                match check_raw(s) {
                    Ok(s) => {
                        table.insert(id, s);
                    }
                    Err(reason) => {
                        failed.insert(id, reason);
                    }
                }
            }
            if table.is_empty() {
                return Err(ScoringError::AllFailed);
            }
            for (id, reason) in &failed {
                log::warn!("script {id} not scored: {reason}");
            }
            Ok(ScoreOutcome { table, failed })
        }
    }
}

/// Min-max normalization to [0,1]; a constant list maps to 0.5 everywhere.
pub fn normalize(scores: &[f64]) -> Result<Vec<f64>, ScoringError> {
    if let Some(bad) = scores.iter().find(|x| !x.is_finite()) {
        return Err(ScoringError::NonFinite(*bad));
    }
    let Some(min) = scores.iter().copied().reduce(f64::min) else {
        return Ok(Vec::new());
    };
    let max = scores.iter().copied().fold(min, f64::max);
    if max == min {
        return Ok(vec![0.5; scores.len()]);
    }
    let span = max - min;
    Ok(scores
        .iter()
        .map(|x| ((x - min) / span).clamp(0.0, 1.0))
        .collect())
}

pub fn combine(emotion_norm: f64, fluency_norm: f64) -> Result<f64, ScoringError> {
    for v in [emotion_norm, fluency_norm] {
        if !v.is_finite() {
            return Err(ScoringError::NonFinite(v));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(ScoringError::OutOfRange(v));
        }
    }
    Ok(emotion_norm + fluency_norm)
}

/// Copies raw scores onto the scripts found in `table`, normalizes each emotion's pool
/// separately and fills in the combined score. Scripts absent from the table are dropped
/// and their ids returned alongside.
pub fn apply_scores(
    scripts: &[Script],
    table: &ScoreTable,
) -> Result<(Vec<Script>, Vec<ScriptId>), ScoringError> {
    let mut dropped = Vec::new();
    let mut pools: BTreeMap<Emotion, Vec<Script>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for s in scripts {
        if !seen.insert(s.id.clone()) {
            continue;
        }
        match table.get(&s.id) {
            Some(raw) => {
                let mut s = s.clone();
                s.emotion_score_raw = Some(raw.emotion);
                s.fluency_score_raw = Some(raw.fluency);
                pools.entry(s.emotion).or_default().push(s);
            }
            None => dropped.push(s.id.clone()),
        }
    }
    let mut out = Vec::with_capacity(scripts.len());
    for (_, mut pool) in pools {
        let e: Vec<f64> = pool.iter().map(|s| s.emotion_score_raw.unwrap_or_default()).collect();
        let f: Vec<f64> = pool.iter().map(|s| s.fluency_score_raw.unwrap_or_default()).collect();
        let (e, f) = (normalize(&e)?, normalize(&f)?);
        for (i, s) in pool.iter_mut().enumerate() {
            s.emotion_score_norm = Some(e[i]);
            s.fluency_score_norm = Some(f[i]);
            s.combined_score = Some(combine(e[i], f[i])?);
        }
        out.extend(pool);
    }
    Ok((out, dropped))
}
