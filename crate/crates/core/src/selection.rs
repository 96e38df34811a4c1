//! Quota-constrained top-k selection with rare-phoneme swaps and an auditor.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_script, Emotion, Script, ScriptId, Session};
use crate::phoneme::{
    count_ngrams, coverage_gaps, extended_entropy, EntropyConfig, MoraTable, Phoneme, PhonemeSequence,
};

pub const DEFAULT_MAX_INJECTIONS: usize = 5;

const CORE_REGULAR: [usize; 6] = [44, 49, 49, 48, 49, 57];
const CORE_PHRASE_FREE: usize = 10;
const EXTRA_REGULAR: [usize; 6] = [22, 15, 28, 41, 14, 38];

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("unknown quota preset '{0}' (expected core or extra)")]
    UnknownPreset(String),
    #[error("candidate {0} has no combined score")]
    Unscored(ScriptId),
    #[error("candidate {0} has a non-finite combined score")]
    NonFinite(ScriptId),
    #[error("candidate id {0} appears more than once")]
    DuplicateId(ScriptId),
    #[error("quota tier name '{0}' is used twice")]
    DuplicateTier(String),
}

/// Required script count per (emotion, session) bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaConfig {
    pub name: String,
    #[serde(default)]
    pub regular: BTreeMap<Emotion, usize>,
    #[serde(default)]
    pub phrase_free: BTreeMap<Emotion, usize>,
}

impl QuotaConfig {
    pub fn core() -> Self {
        Self {
            name: "core".into(),
            regular: Emotion::ALL.iter().copied().zip(CORE_REGULAR).collect(),
            phrase_free: Emotion::ALL.iter().map(|&e| (e, CORE_PHRASE_FREE)).collect(),
        }
    }

    pub fn extra() -> Self {
        Self {
            name: "extra".into(),
            regular: Emotion::ALL.iter().copied().zip(EXTRA_REGULAR).collect(),
            phrase_free: BTreeMap::new(),
        }
    }

    pub fn preset(name: &str) -> Result<Self, SelectionError> {
        match name {
            "core" => Ok(Self::core()),
            "extra" => Ok(Self::extra()),
            other => Err(SelectionError::UnknownPreset(other.to_string())),
        }
    }

    pub fn quota(&self, emotion: Emotion, session: Session) -> usize {
        let table = match session {
            Session::Regular => &self.regular,
            Session::PhraseFree => &self.phrase_free,
        };
        table.get(&emotion).copied().unwrap_or(0)
    }

    /// Non-zero buckets in (emotion, session) order.
    pub fn buckets(&self) -> Vec<(Emotion, Session, usize)> {
        let mut out = Vec::new();
        for e in Emotion::ALL {
            for s in [Session::Regular, Session::PhraseFree] {
                let q = self.quota(e, s);
                if q > 0 {
                    out.push((e, s, q));
                }
            }
        }
        out
    }

    pub fn total(&self) -> usize {
        self.regular.values().chain(self.phrase_free.values()).sum()
    }

    pub fn emotion_total(&self, emotion: Emotion) -> usize {
        self.quota(emotion, Session::Regular) + self.quota(emotion, Session::PhraseFree)
    }

    /// Every bucket divided by `divisor`, rounded up so no bucket vanishes.
    pub fn scaled(&self, divisor: usize) -> Self {
        let d = divisor.max(1);
        let scale = |m: &BTreeMap<Emotion, usize>| m.iter().map(|(&e, &q)| (e, q.div_ceil(d))).collect();
        Self {
            name: self.name.clone(),
            regular: scale(&self.regular),
            phrase_free: scale(&self.phrase_free),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSelection {
    pub emotion: Emotion,
    pub session: Session,
    pub quota: usize,
    /// Best first.
    pub selected: Vec<ScriptId>,
    pub deficit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierPlan {
    pub name: String,
    pub buckets: Vec<BucketSelection>,
}

impl TierPlan {
    pub fn total(&self) -> usize {
        self.buckets.iter().map(|b| b.selected.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = &ScriptId> {
        self.buckets.iter().flat_map(|b| b.selected.iter())
    }

    pub fn bucket(&self, emotion: Emotion, session: Session) -> Option<&BucketSelection> {
        self.buckets.iter().find(|b| b.emotion == emotion && b.session == session)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swap {
    pub tier: String,
    pub emotion: Emotion,
    pub session: Session,
    pub phoneme: Phoneme,
    pub inserted: ScriptId,
    pub evicted: ScriptId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub weights: Vec<f64>,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub gaps_before: BTreeSet<Phoneme>,
    pub gaps_after: BTreeSet<Phoneme>,
    /// Selected scripts left out of coverage because they could not be phonemized.
    pub unphonemized: Vec<ScriptId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub tiers: Vec<TierPlan>,
    pub leftover: Vec<ScriptId>,
    pub swaps: Vec<Swap>,
    pub coverage: CoverageReport,
}

impl SelectionPlan {
    pub fn is_feasible(&self) -> bool {
        self.deficits().is_empty()
    }

    /// (tier, emotion, session, missing count) for every short bucket.
    pub fn deficits(&self) -> Vec<(String, Emotion, Session, usize)> {
        self.tiers
            .iter()
            .flat_map(|t| {
                t.buckets
                    .iter()
                    .filter(|b| b.deficit > 0)
                    .map(move |b| (t.name.clone(), b.emotion, b.session, b.deficit))
            })
            .collect()
    }

    pub fn total(&self) -> usize {
        self.tiers.iter().map(TierPlan::total).sum()
    }

    pub fn selected_ids(&self) -> BTreeSet<ScriptId> {
        self.tiers.iter().flat_map(|t| t.ids().cloned()).collect()
    }

    pub fn tier(&self, name: &str) -> Option<&TierPlan> {
        self.tiers.iter().find(|t| t.name == name)
    }
}

fn rank(a: &Script, b: &Script) -> Ordering {
    b.score().total_cmp(&a.score()).then_with(|| a.id.cmp(&b.id))
}

struct Coverage {
    entropy: f64,
    gaps: BTreeSet<Phoneme>,
    unphonemized: Vec<ScriptId>,
}

fn phonemes_of(script: &Script, table: &MoraTable) -> Option<PhonemeSequence> {
    table.phonemize(script.phonetic_text()).ok()
}

fn measure<'a>(scripts: impl IntoIterator<Item = &'a Script>, cfg: &EntropyConfig, table: &MoraTable) -> Coverage {
    let mut seqs = Vec::new();
    let mut unphonemized = Vec::new();
    for s in scripts {
        match phonemes_of(s, table) {
            Some(p) => seqs.push(p),
            None => unphonemized.push(s.id.clone()),
        }
    }
    unphonemized.sort();
    let stats = count_ngrams(&seqs, cfg.max_order());
    Coverage {
        entropy: extended_entropy(&stats, cfg),
        gaps: coverage_gaps(&stats, &Phoneme::inventory()),
        unphonemized,
    }
}

fn index<'a>(scripts: impl IntoIterator<Item = &'a Script>) -> HashMap<&'a ScriptId, &'a Script> {
    scripts.into_iter().map(|s| (&s.id, s)).collect()
}

fn selected_scripts<'a>(plan: &SelectionPlan, by_id: &HashMap<&ScriptId, &'a Script>) -> Vec<&'a Script> {
    plan.selected_ids().iter().filter_map(|id| by_id.get(id).copied()).collect()
}

fn check_candidates(candidates: &[Script]) -> Result<(), SelectionError> {
    let mut seen = BTreeSet::new();
    for s in candidates {
        match s.combined_score {
            None => return Err(SelectionError::Unscored(s.id.clone())),
            Some(v) if !v.is_finite() => return Err(SelectionError::NonFinite(s.id.clone())),
            _ => {}
        }
        if !seen.insert(&s.id) {
            return Err(SelectionError::DuplicateId(s.id.clone()));
        }
    }
    Ok(())
}

pub fn select(candidates: &[Script], tiers: &[QuotaConfig]) -> Result<SelectionPlan, SelectionError> {
    select_with(candidates, tiers, &EntropyConfig::default(), MoraTable::bundled())
}

/// Fills each tier in order from what earlier tiers left, so tiers are disjoint.
/// Short buckets take everything available and record the deficit.
pub fn select_with(
    candidates: &[Script],
    tiers: &[QuotaConfig],
    cfg: &EntropyConfig,
    table: &MoraTable,
) -> Result<SelectionPlan, SelectionError> {
    check_candidates(candidates)?;
    let mut names = BTreeSet::new();
    for t in tiers {
        if !names.insert(t.name.as_str()) {
            return Err(SelectionError::DuplicateTier(t.name.clone()));
        }
    }

    let mut pools: BTreeMap<(Emotion, Session), Vec<&Script>> = BTreeMap::new();
    for s in candidates {
        pools.entry((s.emotion, s.session)).or_default().push(s);
    }
    for pool in pools.values_mut() {
        pool.sort_by(|a, b| rank(a, b));
    }
    let mut cursor: BTreeMap<(Emotion, Session), usize> = BTreeMap::new();

    let mut plan_tiers = Vec::with_capacity(tiers.len());
    for quotas in tiers {
        let mut buckets = Vec::new();
        for (emotion, session, quota) in quotas.buckets() {
            let pool = pools.get(&(emotion, session)).map(Vec::as_slice).unwrap_or(&[]);
            let start = cursor.entry((emotion, session)).or_insert(0);
            let end = (*start + quota).min(pool.len());
            let selected: Vec<ScriptId> = pool[*start..end].iter().map(|s| s.id.clone()).collect();
            *start = end;
            buckets.push(BucketSelection {
                emotion,
                session,
                quota,
                deficit: quota - selected.len(),
                selected,
            });
        }
        plan_tiers.push(TierPlan {
            name: quotas.name.clone(),
            buckets,
        });
    }

    let mut plan = SelectionPlan {
        tiers: plan_tiers,
        leftover: Vec::new(),
        swaps: Vec::new(),
        coverage: CoverageReport {
            weights: cfg.weights().to_vec(),
            entropy_before: 0.0,
            entropy_after: 0.0,
            gaps_before: BTreeSet::new(),
            gaps_after: BTreeSet::new(),
            unphonemized: Vec::new(),
        },
    };
    let chosen = plan.selected_ids();
    plan.leftover = candidates.iter().map(|s| s.id.clone()).filter(|id| !chosen.contains(id)).collect();
    plan.leftover.sort();

    let by_id = index(candidates);
    let cov = measure(selected_scripts(&plan, &by_id), cfg, table);
    plan.coverage.entropy_before = cov.entropy;
    plan.coverage.entropy_after = cov.entropy;
    plan.coverage.gaps_before = cov.gaps.clone();
    plan.coverage.gaps_after = cov.gaps;
    plan.coverage.unphonemized = cov.unphonemized;
    Ok(plan)
}

/// Greedy rare-phoneme swaps into phrase-free buckets.
///
/// For each uncovered phoneme the best-scoring unused filler containing it replaces
/// the lowest-scoring script of the same phrase-free bucket whose removal opens no
/// new gap. Bucket sizes never change and the gap set never grows.
pub fn inject_rare(
    plan: SelectionPlan,
    candidates: &[Script],
    fillers: &[Script],
    max_injections: usize,
) -> SelectionPlan {
    inject_rare_with(plan, candidates, fillers, max_injections, MoraTable::bundled())
}

pub fn inject_rare_with(
    mut plan: SelectionPlan,
    candidates: &[Script],
    fillers: &[Script],
    max_injections: usize,
    table: &MoraTable,
) -> SelectionPlan {
    let cfg = EntropyConfig::new(plan.coverage.weights.clone()).unwrap_or_default();
    let by_id = index(candidates.iter().chain(fillers));
    let mut current = measure(selected_scripts(&plan, &by_id), &cfg, table);
    let original_gaps = current.gaps.clone();

    let mut ranked: Vec<(&Script, BTreeSet<Phoneme>)> = fillers
        .iter()
        .filter(|f| f.session == Session::PhraseFree && f.combined_score.is_some_and(f64::is_finite))
        .filter_map(|f| Some((f, phonemes_of(f, table)?.phones.into_iter().collect())))
        .collect();
    ranked.sort_by(|a, b| rank(a.0, b.0));

    for gap in original_gaps.iter().copied() {
        if plan.swaps.len() >= max_injections {
            break;
        }
        if !current.gaps.contains(&gap) {
            continue;
        }
        let selected = plan.selected_ids();
        let swap = ranked
            .iter()
            .filter(|(f, phones)| phones.contains(&gap) && !selected.contains(&f.id))
            .find_map(|(filler, _)| try_swap(&plan, &by_id, filler, &current.gaps, &cfg, table).map(|s| (filler, s)));
        let Some((filler, (tier_idx, bucket_idx, slot, after))) = swap else {
            continue;
        };
        let bucket = &mut plan.tiers[tier_idx].buckets[bucket_idx];
        let evicted = std::mem::replace(&mut bucket.selected[slot], filler.id.clone());
        plan.swaps.push(Swap {
            tier: plan.tiers[tier_idx].name.clone(),
            emotion: filler.emotion,
            session: Session::PhraseFree,
            phoneme: gap,
            inserted: filler.id.clone(),
            evicted: evicted.clone(),
        });
        plan.leftover.retain(|id| *id != filler.id);
        plan.leftover.push(evicted);
        plan.leftover.sort();
        current = after;
    }

    plan.coverage.entropy_after = current.entropy;
    plan.coverage.gaps_after = current.gaps;
    plan.coverage.unphonemized = current.unphonemized;
    plan
}

/// Finds the eviction slot for `filler`: (tier, bucket, position, coverage after).
fn try_swap(
    plan: &SelectionPlan,
    by_id: &HashMap<&ScriptId, &Script>,
    filler: &Script,
    gaps: &BTreeSet<Phoneme>,
    cfg: &EntropyConfig,
    table: &MoraTable,
) -> Option<(usize, usize, usize, Coverage)> {
    let swapped: BTreeSet<&ScriptId> = plan.swaps.iter().map(|s| &s.inserted).collect();
    let (tier_idx, bucket_idx) = plan.tiers.iter().enumerate().find_map(|(ti, t)| {
        t.buckets
            .iter()
            .position(|b| b.emotion == filler.emotion && b.session == Session::PhraseFree && !b.selected.is_empty())
            .map(|bi| (ti, bi))
    })?;
    let bucket = &plan.tiers[tier_idx].buckets[bucket_idx];
    let mut victims: Vec<(usize, &Script)> = bucket
        .selected
        .iter()
        .enumerate()
        .filter(|(_, id)| !swapped.contains(id))
        .filter_map(|(i, id)| Some((i, *by_id.get(id)?)))
        .collect();
    // lowest score first; among ties the larger id ranks lower
    victims.sort_by(|a, b| rank(b.1, a.1));
    let base: Vec<&Script> = selected_scripts(plan, by_id);
    for (slot, victim) in victims {
        let trial = base
            .iter()
            .copied()
            .filter(|s| s.id != victim.id)
            .chain(std::iter::once(filler));
        let after = measure(trial, cfg, table);
        if after.gaps.is_subset(gaps) && after.gaps.len() < gaps.len() {
            return Some((tier_idx, bucket_idx, slot, after));
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditViolation {
    Quota { tier: String, emotion: Emotion, session: Session, expected: usize, actual: usize },
    Overlap { id: ScriptId, first: String, second: String },
    UnknownId { id: ScriptId },
    WrongBucket { id: ScriptId, tier: String, emotion: Emotion, session: Session },
    Ordering { tier: String, emotion: Emotion, session: Session, unselected: ScriptId, selected: ScriptId },
    Invalid { id: ScriptId, reason: String },
    Entropy { reported: f64, recomputed: f64 },
    Gaps { reported: BTreeSet<Phoneme>, recomputed: BTreeSet<Phoneme> },
    SwapNotApplied { inserted: ScriptId },
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use AuditViolation::*;
        match self {
            Quota { tier, emotion, session, expected, actual } => {
                write!(f, "{tier} {emotion}/{session}: expected {expected} scripts, found {actual}")
            }
            Overlap { id, first, second } => write!(f, "{id} selected in both {first} and {second}"),
            UnknownId { id } => write!(f, "{id} is not among the candidates"),
            WrongBucket { id, tier, emotion, session } => {
                write!(f, "{id} does not belong in {tier} {emotion}/{session}")
            }
            Ordering { tier, emotion, session, unselected, selected } => write!(
                f,
                "{tier} {emotion}/{session}: unselected {unselected} outranks selected {selected}"
            ),
            Invalid { id, reason } => write!(f, "{id} fails validation: {reason}"),
            Entropy { reported, recomputed } => {
                write!(f, "entropy reported {reported} but recomputes to {recomputed}")
            }
            Gaps { reported, recomputed } => {
                write!(f, "gap list reported {reported:?} but recomputes to {recomputed:?}")
            }
            SwapNotApplied { inserted } => write!(f, "swap of {inserted} is logged but not in the plan"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-checks a plan against the scripts it was built from (fillers included).
pub fn audit(plan: &SelectionPlan, candidates: &[Script], quotas: &[QuotaConfig]) -> AuditReport {
    audit_with(plan, candidates, quotas, MoraTable::bundled())
}

pub fn audit_with(
    plan: &SelectionPlan,
    candidates: &[Script],
    quotas: &[QuotaConfig],
    table: &MoraTable,
) -> AuditReport {
    let mut v = Vec::new();
    let by_id = index(candidates);
    let inserted: BTreeSet<&ScriptId> = plan.swaps.iter().map(|s| &s.inserted).collect();
    let evicted: BTreeSet<&ScriptId> = plan.swaps.iter().map(|s| &s.evicted).collect();

    for q in quotas {
        let tier = plan.tier(&q.name);
        for (emotion, session, expected) in q.buckets() {
            let actual = tier.and_then(|t| t.bucket(emotion, session)).map_or(0, |b| b.selected.len());
            if actual != expected {
                v.push(AuditViolation::Quota { tier: q.name.clone(), emotion, session, expected, actual });
            }
        }
    }

    let mut owner: BTreeMap<&ScriptId, &str> = BTreeMap::new();
    for t in &plan.tiers {
        for b in &t.buckets {
            for id in &b.selected {
                if let Some(first) = owner.insert(id, &t.name) {
                    v.push(AuditViolation::Overlap { id: id.clone(), first: first.to_string(), second: t.name.clone() });
                }
                match by_id.get(id) {
                    None => v.push(AuditViolation::UnknownId { id: id.clone() }),
                    Some(s) => {
                        if s.emotion != b.emotion || s.session != b.session {
                            v.push(AuditViolation::WrongBucket {
                                id: id.clone(),
                                tier: t.name.clone(),
                                emotion: b.emotion,
                                session: b.session,
                            });
                        }
                        for problem in validate_script(s) {
                            v.push(AuditViolation::Invalid { id: id.clone(), reason: problem.to_string() });
                        }
                    }
                }
            }
        }
    }
    for s in &plan.swaps {
        if !owner.contains_key(&s.inserted) {
            v.push(AuditViolation::SwapNotApplied { inserted: s.inserted.clone() });
        }
    }

    // ordering against whatever earlier tiers left in the same bucket
    let mut taken: BTreeSet<&ScriptId> = BTreeSet::new();
    for t in &plan.tiers {
        for b in &t.buckets {
            let chosen: BTreeSet<&ScriptId> = b.selected.iter().collect();
            let kept: Vec<&Script> = b
                .selected
                .iter()
                .filter(|id| !inserted.contains(id))
                .filter_map(|id| by_id.get(id).copied())
                .collect();
            let Some(weakest) = kept.iter().copied().max_by(|a, c| rank(a, c)) else {
                continue;
            };
            let rival = candidates
                .iter()
                .filter(|s| s.emotion == b.emotion && s.session == b.session)
                .filter(|s| !chosen.contains(&s.id) && !taken.contains(&s.id) && !evicted.contains(&s.id))
                .filter(|s| !inserted.contains(&s.id))
                .min_by(|a, c| rank(a, c));
            if let Some(r) = rival {
                if rank(r, weakest) == Ordering::Less {
                    v.push(AuditViolation::Ordering {
                        tier: t.name.clone(),
                        emotion: b.emotion,
                        session: b.session,
                        unselected: r.id.clone(),
                        selected: weakest.id.clone(),
                    });
                }
            }
        }
        taken.extend(t.ids());
    }

    match EntropyConfig::new(plan.coverage.weights.clone()) {
        Ok(cfg) => {
            let cov = measure(selected_scripts(plan, &by_id), &cfg, table);
            if (cov.entropy - plan.coverage.entropy_after).abs() > 1e-9 {
                v.push(AuditViolation::Entropy { reported: plan.coverage.entropy_after, recomputed: cov.entropy });
            }
            if cov.gaps != plan.coverage.gaps_after {
                v.push(AuditViolation::Gaps { reported: plan.coverage.gaps_after.clone(), recomputed: cov.gaps });
            }
        }
        Err(_) => v.push(AuditViolation::Entropy { reported: plan.coverage.entropy_after, recomputed: f64::NAN }),
    }
    AuditReport { violations: v }
}

/// How often each NV phrase surface occurs among the selected regular scripts.
pub fn phrase_histogram(plan: &SelectionPlan, candidates: &[Script]) -> BTreeMap<(Emotion, String), usize> {
    let by_id = index(candidates);
    let mut hist = BTreeMap::new();
    for s in selected_scripts(plan, &by_id) {
        if let Some(p) = &s.nv_phrase {
            *hist.entry((s.emotion, p.surface.clone())).or_insert(0) += 1;
        }
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NvPhrase, Polarity, SeedWord};
    use proptest::prelude::*;

    fn script(text: &str, emotion: Emotion, session: Session, score: f64) -> Script {
        let phrase = (session == Session::Regular).then(|| NvPhrase::new("x-01", "あ", emotion));
        let text = if session == Session::Regular { format!("あ{text}") } else { text.to_string() };
        Script::new(&text, emotion, session, SeedWord::new("たね", Polarity::Neutral), phrase)
            .with_combined_score(score)
    }

    fn only(quota: usize, emotion: Emotion, session: Session) -> QuotaConfig {
        let mut q = QuotaConfig { name: "t".into(), regular: BTreeMap::new(), phrase_free: BTreeMap::new() };
        match session {
            Session::Regular => q.regular.insert(emotion, quota),
            Session::PhraseFree => q.phrase_free.insert(emotion, quota),
        };
        q
    }

    #[test]
    fn presets_match_table() {
        let core = QuotaConfig::core();
        assert_eq!(core.total(), 356);
        assert_eq!(core.emotion_total(Emotion::Happiness), 58);
        assert_eq!(QuotaConfig::extra().total(), 158);
        assert_eq!(QuotaConfig::extra().quota(Emotion::Fear, Session::PhraseFree), 0);
        assert!(QuotaConfig::preset("bogus").is_err());
        let small = core.scaled(10);
        assert_eq!(small.quota(Emotion::Anger, Session::Regular), 5);
        assert_eq!(small.quota(Emotion::Anger, Session::PhraseFree), 1);
    }

    #[test]
    fn top_k_and_ties() {
        let pool = vec![
            script("いち", Emotion::Anger, Session::PhraseFree, 1.0),
            script("に", Emotion::Anger, Session::PhraseFree, 2.0),
            script("さん", Emotion::Anger, Session::PhraseFree, 1.5),
        ];
        let plan = select(&pool, &[only(2, Emotion::Anger, Session::PhraseFree)]).unwrap();
        assert_eq!(plan.tiers[0].buckets[0].selected, vec![pool[1].id.clone(), pool[2].id.clone()]);
        assert!(plan.is_feasible());
        assert_eq!(plan.leftover, vec![pool[0].id.clone()]);

        let tied = vec![
            script("かき", Emotion::Fear, Session::PhraseFree, 1.5),
            script("くけ", Emotion::Fear, Session::PhraseFree, 1.5),
        ];
        let plan = select(&tied, &[only(1, Emotion::Fear, Session::PhraseFree)]).unwrap();
        let smaller = tied.iter().map(|s| s.id.clone()).min().unwrap();
        assert_eq!(plan.tiers[0].buckets[0].selected, vec![smaller]);
    }

    #[test]
    fn deficit_is_reported() {
        let pool: Vec<Script> = ["あ", "い", "う"]
            .iter()
            .map(|t| script(t, Emotion::Sadness, Session::PhraseFree, 1.0))
            .collect();
        let q = only(5, Emotion::Sadness, Session::PhraseFree);
        let plan = select(&pool, std::slice::from_ref(&q)).unwrap();
        assert!(!plan.is_feasible());
        assert_eq!(plan.deficits(), vec![("t".to_string(), Emotion::Sadness, Session::PhraseFree, 2)]);
        assert!(!audit(&plan, &pool, &[q]).is_clean());
    }

    #[test]
    fn rejects_bad_candidates() {
        let mut s = script("あ", Emotion::Anger, Session::PhraseFree, 1.0);
        s.combined_score = None;
        assert!(matches!(select(&[s], &[QuotaConfig::core()]), Err(SelectionError::Unscored(_))));
        let d = script("あ", Emotion::Anger, Session::PhraseFree, 1.0);
        assert!(matches!(select(&[d.clone(), d], &[]), Err(SelectionError::DuplicateId(_))));
    }

    #[test]
    fn tiers_are_disjoint() {
        let pool: Vec<Script> = (0..10)
            .map(|i| script(&"か".repeat(i + 1), Emotion::Anger, Session::Regular, i as f64 / 10.0))
            .collect();
        let mut a = only(3, Emotion::Anger, Session::Regular);
        a.name = "a".into();
        let mut b = a.clone();
        b.name = "b".into();
        let plan = select(&pool, &[a.clone(), b.clone()]).unwrap();
        let x: BTreeSet<_> = plan.tiers[0].ids().collect();
        assert!(plan.tiers[1].ids().all(|id| !x.contains(id)));
        assert!(audit(&plan, &pool, &[a, b]).is_clean(), "{:?}", audit(&plan, &pool, &[]));
    }

    #[test]
    fn audit_catches_tampering() {
        let pool: Vec<Script> = (0..6)
            .map(|i| script(&"さ".repeat(i + 1), Emotion::Fear, Session::PhraseFree, i as f64 / 10.0))
            .collect();
        let mut q1 = only(2, Emotion::Fear, Session::PhraseFree);
        q1.name = "core".into();
        let mut q2 = q1.clone();
        q2.name = "extra".into();
        let plan = select(&pool, &[q1.clone(), q2.clone()]).unwrap();
        assert!(audit(&plan, &pool, &[q1.clone(), q2.clone()]).is_clean());

        let mut deleted = plan.clone();
        deleted.tiers[0].buckets[0].selected.pop();
        assert!(audit(&deleted, &pool, &[q1.clone()])
            .violations
            .iter()
            .any(|v| matches!(v, AuditViolation::Quota { actual: 1, .. })));

        let mut overlap = plan.clone();
        overlap.tiers[1].buckets[0].selected[0] = plan.tiers[0].buckets[0].selected[0].clone();
        assert!(audit(&overlap, &pool, &[q1, q2])
            .violations
            .iter()
            .any(|v| matches!(v, AuditViolation::Overlap { .. })));
    }

    #[test]
    fn injection_fills_gap() {
        let pool = vec![
            script("あい", Emotion::Anger, Session::PhraseFree, 1.0),
            script("かき", Emotion::Anger, Session::PhraseFree, 0.9),
        ];
        let q = only(2, Emotion::Anger, Session::PhraseFree);
        let plan = select(&pool, std::slice::from_ref(&q)).unwrap();
        assert!(plan.coverage.gaps_before.contains(&Phoneme::Dy));

        let filler = script("でゅあい", Emotion::Anger, Session::PhraseFree, 0.1);
        let after = inject_rare(plan.clone(), &pool, std::slice::from_ref(&filler), DEFAULT_MAX_INJECTIONS);
        assert_eq!(after.swaps.len(), 1);
        assert_eq!(after.swaps[0].inserted, filler.id);
        // evicting the weaker かき would open a k gap, so あい goes instead
        assert_eq!(after.swaps[0].evicted, pool[0].id);
        assert!(!after.coverage.gaps_after.contains(&Phoneme::Dy));
        assert!(after.coverage.gaps_after.is_subset(&plan.coverage.gaps_before));
        assert_eq!(after.total(), plan.total());
        let everything: Vec<Script> = pool.iter().cloned().chain([filler]).collect();
        assert!(audit(&after, &everything, &[q]).is_clean());
    }

    #[test]
    fn injection_identity_cases() {
        let pool = vec![script("あい", Emotion::Anger, Session::PhraseFree, 1.0)];
        let plan = select(&pool, &[only(1, Emotion::Anger, Session::PhraseFree)]).unwrap();
        let useless = script("くく", Emotion::Anger, Session::PhraseFree, 0.5);
        let after = inject_rare(plan.clone(), &pool, &[useless], 5);
        // くく covers k and u but would drop a and i, so no swap is allowed
        assert_eq!(after.tiers, plan.tiers);
        assert_eq!(after.coverage.gaps_after, plan.coverage.gaps_before);
        let capped = inject_rare(plan.clone(), &pool, &[script("でゅあい", Emotion::Anger, Session::PhraseFree, 0.5)], 0);
        assert_eq!(capped, plan);
    }

    fn pool_strategy() -> impl Strategy<Value = Vec<(u8, u8, u8)>> {
        prop::collection::vec((0u8..6, 0u8..2, 0u8..8), 0..60)
    }

    proptest! {
        #[test]
        fn ordering_holds(raw in pool_strategy(), quota in 0usize..6) {
            let mut pool: Vec<Script> = Vec::new();
            for (i, (e, s, sc)) in raw.into_iter().enumerate() {
                let session = if s == 0 { Session::Regular } else { Session::PhraseFree };
                pool.push(script(&format!("な{i}"), Emotion::ALL[e as usize], session, f64::from(sc) / 4.0));
            }
            let mut q = QuotaConfig { name: "p".into(), regular: BTreeMap::new(), phrase_free: BTreeMap::new() };
            for e in Emotion::ALL {
                q.regular.insert(e, quota);
                q.phrase_free.insert(e, quota);
            }
            let plan = select(&pool, std::slice::from_ref(&q)).unwrap();
            let report = audit(&plan, &pool, &[q.clone()]);
            let ordering = report.violations.iter().any(|v| matches!(v, AuditViolation::Ordering { .. }));
            prop_assert!(!ordering);
            let mut reversed = pool.clone();
            reversed.reverse();
            prop_assert_eq!(select(&reversed, &[q]).unwrap(), plan);
        }
    }
}
