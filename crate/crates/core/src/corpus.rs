//! Files on disk: candidate JSONL, plans, the corpus manifest, listening-test responses.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Emotion, ParseLabelError, Script, ScriptId, Session};
use crate::selection::SelectionPlan;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error("refusing to write manifest: plan is infeasible ({0})")]
    Infeasible(String),
    #[error("plan references unknown script {0}")]
    MissingScript(ScriptId),
    #[error("manifest record {id}: {reason}")]
    InvalidRecord { id: ScriptId, reason: String },
    #[error("no responses to aggregate")]
    NoResponses,
    #[error("unknown choice label '{0}'")]
    UnknownChoice(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `contents` to a sibling temp file, then renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(contents).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn scripts_to_jsonl(scripts: &[Script]) -> String {
    let mut out = String::new();
    for s in scripts {
        out.push_str(&serde_json::to_string(s).expect("script serializes"));
        out.push('\n');
    }
    out
}

pub fn write_scripts(path: &Path, scripts: &[Script]) -> Result<(), CorpusError> {
    write_atomic(path, scripts_to_jsonl(scripts).as_bytes())
}

pub fn read_scripts(path: &Path) -> Result<Vec<Script>, CorpusError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CorpusError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CorpusError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        reason: e.to_string(),
    })
}

/// Half-open character range `[start, end)` in the script text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvDuration {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub set: String,
    pub id: ScriptId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reading: Option<String>,
    pub emotion: Emotion,
    pub session: Session,
    pub seed_word: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nv_phrase: Option<String>,
    #[serde(default)]
    pub nv_spans: Vec<CharSpan>,
    #[serde(default)]
    pub multiple_nv: bool,
    #[serde(default)]
    pub rare_phoneme_swap: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub durations: Vec<NvDuration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub name: String,
    pub version: u32,
    pub rng_seed: u64,
    pub records: Vec<ManifestRecord>,
}

/// Every non-overlapping occurrence of `phrase` in `text`, in characters.
pub fn find_spans(text: &str, phrase: &str) -> Vec<CharSpan> {
    if phrase.is_empty() {
        return Vec::new();
    }
    let len = phrase.chars().count();
    let mut spans = Vec::new();
    let mut from = 0;
    while let Some(pos) = text[from..].find(phrase) {
        let byte = from + pos;
        let start = text[..byte].chars().count();
        spans.push(CharSpan { start, end: start + len });
        from = byte + phrase.len();
    }
    spans
}

fn char_slice(text: &str, span: CharSpan) -> Option<String> {
    (span.start < span.end && span.end <= text.chars().count())
        .then(|| text.chars().skip(span.start).take(span.end - span.start).collect())
}

impl CorpusManifest {
    /// Records ordered by set (plan order), emotion, session, id.
    pub fn from_plan(
        name: &str,
        plan: &SelectionPlan,
        scripts: &[Script],
        rng_seed: u64,
    ) -> Result<Self, CorpusError> {
        if !plan.is_feasible() {
            let list: Vec<String> = plan
                .deficits()
                .into_iter()
                .map(|(t, e, s, n)| format!("{t} {e}/{s} short by {n}"))
                .collect();
            return Err(CorpusError::Infeasible(list.join(", ")));
        }
        let by_id: HashMap<&ScriptId, &Script> = scripts.iter().map(|s| (&s.id, s)).collect();
        let swapped: Vec<&ScriptId> = plan.swaps.iter().map(|s| &s.inserted).collect();
        let mut records = Vec::new();
        for tier in &plan.tiers {
            let mut tier_records = Vec::new();
            for id in tier.ids() {
                let s = by_id.get(id).ok_or_else(|| CorpusError::MissingScript(id.clone()))?;
                let phrase = s.nv_phrase.as_ref().map(|p| p.surface.clone());
                let spans = phrase.as_deref().map(|p| find_spans(&s.text, p)).unwrap_or_default();
                tier_records.push(ManifestRecord {
                    set: tier.name.clone(),
                    id: s.id.clone(),
                    text: s.text.clone(),
                    reading: s.reading.clone(),
                    emotion: s.emotion,
                    session: s.session,
                    seed_word: s.seed_word.surface.clone(),
                    nv_phrase: phrase,
                    multiple_nv: spans.len() > 1,
                    nv_spans: spans,
                    rare_phoneme_swap: swapped.contains(&id),
                    combined_score: s.combined_score,
                    durations: Vec::new(),
                });
            }
            tier_records.sort_by(|a, b| (a.emotion, a.session, &a.id).cmp(&(b.emotion, b.session, &b.id)));
            records.extend(tier_records);
        }
        let manifest = Self {
            name: name.to_string(),
            version: MANIFEST_VERSION,
            rng_seed,
            records,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for r in &self.records {
            let bad = |reason: String| CorpusError::InvalidRecord { id: r.id.clone(), reason };
            match (&r.nv_phrase, r.session) {
                (Some(p), _) => {
                    if r.nv_spans.is_empty() {
                        return Err(bad(format!("phrase {p} has no span")));
                    }
                    for &span in &r.nv_spans {
                        if char_slice(&r.text, span).as_deref() != Some(p.as_str()) {
                            return Err(bad(format!("span {}..{} does not address {p}", span.start, span.end)));
                        }
                    }
                    if r.multiple_nv != (r.nv_spans.len() > 1) {
                        return Err(bad("multiplicity flag disagrees with spans".into()));
                    }
                }
                (None, _) if !r.nv_spans.is_empty() => return Err(bad("spans without a phrase".into())),
                _ => {}
            }
            for d in &r.durations {
                if !(d.start >= 0.0 && d.start < d.end) {
                    return Err(bad(format!("bad duration {}..{}", d.start, d.end)));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        self.validate()?;
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, CorpusError> {
        let m: Self = read_json(path)?;
        m.validate()?;
        Ok(m)
    }

    pub fn count(&self, set: &str) -> usize {
        self.records.iter().filter(|r| r.set == set).count()
    }
}

/// Builds the manifest and writes it; infeasible plans are refused.
pub fn write_manifest(
    name: &str,
    plan: &SelectionPlan,
    scripts: &[Script],
    rng_seed: u64,
    path: &Path,
) -> Result<CorpusManifest, CorpusError> {
    let m = CorpusManifest::from_plan(name, plan, scripts, rng_seed)?;
    m.write(path)?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choice {
    Emotion(Emotion),
    NoneOfTheAbove,
}

impl FromStr for Choice {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "none_of_the_above" | "none of the above" | "none") {
            return Ok(Choice::NoneOfTheAbove);
        }
        t.parse::<Emotion>()
            .map(Choice::Emotion)
            .map_err(|_: ParseLabelError| CorpusError::UnknownChoice(s.to_string()))
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Emotion(e) => write!(f, "{e}"),
            Choice::NoneOfTheAbove => f.write_str("none_of_the_above"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForcedChoiceResponse {
    pub item_id: String,
    pub true_emotion: Emotion,
    pub choice: Choice,
    pub rater_id: String,
}

impl ForcedChoiceResponse {
    pub fn is_correct(&self) -> bool {
        self.choice == Choice::Emotion(self.true_emotion)
    }
}

#[derive(Deserialize)]
struct ResponseRow {
    item_id: String,
    true_emotion: String,
    choice: String,
    rater_id: String,
}

pub fn parse_responses(reader: impl std::io::Read, origin: &str) -> Result<Vec<ForcedChoiceResponse>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ResponseRow>().enumerate() {
        let line = i + 2;
        let parse_err = |reason: String| CorpusError::Parse {
            path: origin.to_string(),
            line,
            reason,
        };
        let row = row.map_err(|e| parse_err(e.to_string()))?;
        let true_emotion = row.true_emotion.parse::<Emotion>().map_err(|e| parse_err(e.to_string()))?;
        let choice = row.choice.parse::<Choice>().map_err(|e| parse_err(e.to_string()))?;
        out.push(ForcedChoiceResponse {
            item_id: row.item_id,
            true_emotion,
            choice,
            rater_id: row.rater_id,
        });
    }
    Ok(out)
}

pub fn load_responses(path: &Path) -> Result<Vec<ForcedChoiceResponse>, CorpusError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    parse_responses(f, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub total: usize,
    pub correct: usize,
    /// Percent.
    pub overall: f64,
    pub per_emotion: BTreeMap<Emotion, f64>,
}

/// Forced-choice accuracy in percent; "none of the above" always counts as wrong.
pub fn recognition_accuracy(responses: &[ForcedChoiceResponse]) -> Result<AccuracyReport, CorpusError> {
    if responses.is_empty() {
        return Err(CorpusError::NoResponses);
    }
    let mut groups: BTreeMap<Emotion, (usize, usize)> = BTreeMap::new();
    for r in responses {
        let g = groups.entry(r.true_emotion).or_default();
        g.0 += usize::from(r.is_correct());
        g.1 += 1;
    }
    let pct = |c: usize, n: usize| 100.0 * c as f64 / n as f64;
    let correct = groups.values().map(|g| g.0).sum();
    Ok(AccuracyReport {
        total: responses.len(),
        correct,
        overall: pct(correct, responses.len()),
        per_emotion: groups.into_iter().map(|(e, (c, n))| (e, pct(c, n))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NvPhrase, Polarity, SeedWord};
    use crate::selection::{select, QuotaConfig};
    use proptest::prelude::*;

    fn resp(truth: Emotion, choice: &str) -> ForcedChoiceResponse {
        ForcedChoiceResponse {
            item_id: "i".into(),
            true_emotion: truth,
            choice: choice.parse().unwrap(),
            rater_id: "r".into(),
        }
    }

    #[test]
    fn accuracy_arithmetic() {
        let r = vec![
            resp(Emotion::Anger, "anger"),
            resp(Emotion::Anger, "anger"),
            resp(Emotion::Anger, "anger"),
            resp(Emotion::Anger, "fear"),
        ];
        assert_eq!(recognition_accuracy(&r).unwrap().overall, 75.0);
        let none = vec![resp(Emotion::Fear, "none_of_the_above"); 3];
        assert_eq!(recognition_accuracy(&none).unwrap().overall, 0.0);
        let grouped = vec![
            resp(Emotion::Anger, "anger"),
            resp(Emotion::Anger, "anger"),
            resp(Emotion::Fear, "sadness"),
            resp(Emotion::Fear, "none_of_the_above"),
        ];
        let rep = recognition_accuracy(&grouped).unwrap();
        assert_eq!(rep.per_emotion[&Emotion::Anger], 100.0);
        assert_eq!(rep.per_emotion[&Emotion::Fear], 0.0);
        assert_eq!(rep.overall, 50.0);
        assert!(matches!(recognition_accuracy(&[]), Err(CorpusError::NoResponses)));
    }

    #[test]
    fn csv_parsing() {
        let csv = "item_id,true_emotion,choice,rater_id\nu1,anger,anger,w1\nu2,fear,None of the above,w1\n";
        let r = parse_responses(csv.as_bytes(), "mem").unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[1].choice, Choice::NoneOfTheAbove);
        let bad = "item_id,true_emotion,choice,rater_id\nu1,anger,boredom,w1\n";
        let err = parse_responses(bad.as_bytes(), "mem").unwrap_err();
        assert!(err.to_string().contains("mem:2"), "{err}");
    }

    #[test]
    fn spans_are_character_offsets() {
        assert_eq!(find_spans("ふふ、ふふっ", "ふふ"), vec![CharSpan { start: 0, end: 2 }, CharSpan { start: 3, end: 5 }]);
        assert!(find_spans("abc", "").is_empty());
    }

    fn plan_and_scripts() -> (SelectionPlan, Vec<Script>) {
        let mut scripts = Vec::new();
        for (i, e) in Emotion::ALL.into_iter().enumerate() {
            for k in 0..2 {
                let surface = ["ちっ", "うえ", "ひっ", "ふふ", "ぐすっ", "えっ"][i];
                let text = format!("{surface}、{}です。{}", "な".repeat(k + 1), if k == 1 { surface } else { "" });
                scripts.push(
                    Script::new(&text, e, Session::Regular, SeedWord::new("たね", Polarity::Neutral), Some(NvPhrase::new("p", surface, e)))
                        .with_combined_score(1.0 + k as f64 / 10.0),
                );
            }
            scripts.push(
                Script::new(&format!("{e}のはなし"), e, Session::PhraseFree, SeedWord::new("たね", Polarity::Neutral), None)
                    .with_combined_score(0.5),
            );
        }
        let plan = select(&scripts, &[QuotaConfig::core().scaled(100)]).unwrap();
        (plan, scripts)
    }

    #[test]
    fn manifest_round_trip_and_determinism() {
        let (plan, scripts) = plan_and_scripts();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        let m = write_manifest("toy", &plan, &scripts, 7, &a).unwrap();
        let mut shuffled = scripts.clone();
        shuffled.reverse();
        write_manifest("toy", &plan, &shuffled, 7, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(CorpusManifest::read(&a).unwrap(), m);
        assert_eq!(m.records.len(), 12);
        assert!(m.records.iter().any(|r| r.multiple_nv));
    }

    #[test]
    fn infeasible_plan_is_refused() {
        let (_, scripts) = plan_and_scripts();
        let plan = select(&scripts, &[QuotaConfig::core()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        assert!(matches!(write_manifest("x", &plan, &scripts, 0, &path), Err(CorpusError::Infeasible(_))));
        assert!(!path.exists());
    }

    #[test]
    fn validation_catches_bad_spans_and_durations() {
        let (plan, scripts) = plan_and_scripts();
        let m = CorpusManifest::from_plan("toy", &plan, &scripts, 0).unwrap();
        let mut bad = m.clone();
        let r = bad.records.iter_mut().find(|r| r.nv_phrase.is_some()).unwrap();
        r.nv_spans[0].start += 1;
        r.nv_spans[0].end += 1;
        assert!(bad.validate().is_err());
        let mut bad = m.clone();
        bad.records[0].durations.push(NvDuration { start: 1.0, end: 1.0 });
        assert!(bad.validate().is_err());
        let mut ok = m;
        ok.records[0].durations.push(NvDuration { start: 0.0, end: 0.4 });
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn jsonl_round_trip() {
        let (_, scripts) = plan_and_scripts();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        write_scripts(&p, &scripts).unwrap();
        assert_eq!(read_scripts(&p).unwrap(), scripts);
    }

    proptest! {
        #[test]
        fn accuracy_is_bounded_and_order_free(picks in prop::collection::vec((0usize..6, 0usize..7), 1..80)) {
            let labels = ["anger", "disgust", "fear", "happiness", "sadness", "surprise", "none_of_the_above"];
            let mut r: Vec<ForcedChoiceResponse> = picks.iter().map(|&(t, c)| resp(Emotion::ALL[t], labels[c])).collect();
            let a = recognition_accuracy(&r).unwrap();
            prop_assert!((0.0..=100.0).contains(&a.overall));
            r.reverse();
            prop_assert_eq!(recognition_accuracy(&r).unwrap(), a);
        }
    }
}
