//! Stage composition shared by the CLI and the test suites.

use std::collections::{BTreeMap, HashSet};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::PhraseCatalog;
use crate::lexicon::{sample_seed, EmotionPolarityRouting, LexiconError, PolarityDictionary};
use crate::llm::GenerationSpec;
use crate::model::{Emotion, Script, ScriptId, Session};
use crate::phoneme::{EntropyConfig, MoraTable};
use crate::promptgen::{render_prompt, ExemplarSet, PromptError, PromptTemplate};
use crate::scoring::{apply_scores, score_batch, ScorerBackend, ScoringError};
use crate::selection::{audit_with, inject_rare_with, select_with, AuditReport, QuotaConfig, SelectionError, SelectionPlan};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("no {0} phrases in the catalog")]
    NoPhrases(Emotion),
}

/// What to generate per emotion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationCounts {
    pub regular: usize,
    pub phrase_free: usize,
}

pub struct PromptSources<'a> {
    pub instruction_regular: &'a str,
    pub instruction_phrase_free: &'a str,
    pub exemplars: &'a ExemplarSet,
    pub exemplar_count: usize,
}

/// Builds every generation spec, deterministically from `seed`.
///
/// Regular prompts cycle through the emotion's catalog phrases so phrases stay
/// balanced. Seed words are not reused within an emotion while the bucket allows it;
/// phrase-free prompts never get a seed word containing a catalog phrase.
pub fn plan_generation(
    dict: &PolarityDictionary,
    catalog: &PhraseCatalog,
    prompts: &PromptSources<'_>,
    routing: &EmotionPolarityRouting,
    counts: GenerationCounts,
    seed: u64,
) -> Result<Vec<GenerationSpec>, PipelineError> {
    let forbidden: Vec<String> = catalog.surfaces().map(str::to_string).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::new();
    for emotion in Emotion::ALL {
        let mut used: HashSet<String> = HashSet::new();
        for (session, n) in [(Session::Regular, counts.regular), (Session::PhraseFree, counts.phrase_free)] {
            if n == 0 {
                continue;
            }
            let instruction = match session {
                Session::Regular => prompts.instruction_regular,
                Session::PhraseFree => prompts.instruction_phrase_free,
            };
            let template = PromptTemplate::from_set(
                instruction,
                prompts.exemplars,
                emotion,
                session,
                prompts.exemplar_count,
                &forbidden,
            )?;
            let phrases = catalog.for_emotion(emotion);
            if session == Session::Regular && phrases.is_empty() {
                return Err(PipelineError::NoPhrases(emotion));
            }
            let blocked: HashSet<String> = match session {
                Session::Regular => HashSet::new(),
                Session::PhraseFree => dict
                    .bucket(routing.polarity(emotion))
                    .iter()
                    .filter(|w| template.forbids(&w.surface).is_some())
                    .map(|w| w.surface.clone())
                    .collect(),
            };
            for i in 0..n {
                let draw = rng.next_u64();
                let exclude: HashSet<String> = used.union(&blocked).cloned().collect();
                let word = match sample_seed(dict, emotion, routing, draw, &exclude) {
                    Ok(w) => w,
                    // bucket smaller than the request: allow repeats, never blocked words
                    Err(LexiconError::Exhausted { .. }) => sample_seed(dict, emotion, routing, draw, &blocked)?,
                    Err(e) => return Err(e.into()),
                };
                used.insert(word.surface.clone());
                let phrase = (session == Session::Regular).then(|| phrases[i % phrases.len()].clone());
                let prompt = render_prompt(&template, emotion, &word, phrase.as_ref())?;
                specs.push(GenerationSpec {
                    emotion,
                    session,
                    seed: word,
                    phrase,
                    prompt,
                });
            }
        }
    }
    Ok(specs)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scored: usize,
    pub dropped: Vec<ScriptId>,
    pub failed: BTreeMap<ScriptId, String>,
}

/// Scores candidates and normalizes per emotion. Scripts without a score are dropped.
pub fn score_candidates(
    candidates: &[Script],
    backend: &ScorerBackend,
) -> Result<(Vec<Script>, ScoreReport), PipelineError> {
    let outcome = score_batch(candidates, backend)?;
    let (mut scored, dropped) = apply_scores(candidates, &outcome.table)?;
    scored.sort_by(|a, b| (a.emotion, a.session, &a.id).cmp(&(b.emotion, b.session, &b.id)));
    let report = ScoreReport {
        scored: scored.len(),
        dropped,
        failed: outcome.failed,
    };
    Ok((scored, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub plan: SelectionPlan,
    pub audit: AuditReport,
}

/// Selection, rare-phoneme swaps and the audit in one pass.
pub fn run_selection(
    scored: &[Script],
    fillers: &[Script],
    tiers: &[QuotaConfig],
    max_injections: usize,
    entropy: &EntropyConfig,
    table: &MoraTable,
) -> Result<SelectionOutcome, PipelineError> {
    let plan = select_with(scored, tiers, entropy, table)?;
    let plan = if fillers.is_empty() || max_injections == 0 {
        plan
    } else {
        inject_rare_with(plan, scored, fillers, max_injections, table)
    };
    let known: HashSet<&ScriptId> = scored.iter().map(|s| &s.id).collect();
    let everything: Vec<Script> = scored
        .iter()
        .cloned()
        .chain(fillers.iter().filter(|f| !known.contains(&f.id)).cloned())
        .collect();
    let audit = audit_with(&plan, &everything, tiers, table);
    Ok(SelectionOutcome { plan, audit })
}
