//! Few-shot prompt rendering for script generation.
//!
//! A prompt is an English instruction, `n` exemplars in file order, and a final slot
//! holding the sampled seed word (plus the NV phrase for the regular session) with an
//! empty `Script:` field for the model to complete.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{Emotion, NvPhrase, SeedWord, Session};

pub const DEFAULT_EXEMPLAR_COUNT: usize = 3;

pub const BUNDLED_EXEMPLARS: &str = include_str!("../assets/exemplars.toml");
pub const BUNDLED_INSTRUCTION_REGULAR: &str = include_str!("../assets/instruction_regular.txt");
pub const BUNDLED_INSTRUCTION_PHRASE_FREE: &str =
    include_str!("../assets/instruction_phrase_free.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed exemplar file: {0}")]
    Malformed(String),
    #[error("no exemplars for {emotion}/{session}")]
    Missing { emotion: Emotion, session: Session },
    #[error("{emotion}/{session}: need {needed} exemplars, found {found}")]
    TooFew {
        emotion: Emotion,
        session: Session,
        needed: usize,
        found: usize,
    },
    #[error("exemplar overlap for {emotion}/{session}: {field} {value:?} used twice")]
    Overlap {
        emotion: Emotion,
        session: Session,
        field: &'static str,
        value: String,
    },
    #[error("exemplar for {found} used in a {expected} template")]
    EmotionMismatch { expected: Emotion, found: Emotion },
    #[error("regular exemplar without phrase")]
    PhraseMissing,
    #[error("phrase in phrase-free")]
    PhraseInPhraseFree,
    #[error("exemplar script does not contain its phrase {0:?}")]
    PhraseNotInScript(String),
    #[error("regular instruction must mention \"interjection\"")]
    NoInterjection,
    #[error("phrase-free prompt would contain catalog phrase {0:?}")]
    ContainsCatalogPhrase(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Exemplar {
    pub emotion: Emotion,
    pub session: Session,
    pub seed: String,
    #[serde(default)]
    pub phrase: Option<String>,
    pub script: String,
}

#[derive(Deserialize)]
struct ExemplarFile {
    #[serde(default)]
    exemplar: Vec<Exemplar>,
}

pub type ExemplarSet = BTreeMap<(Emotion, Session), Vec<Exemplar>>;

/// Parses an exemplar file (TOML `[[exemplar]]` records).
///
/// Every emotion needs at least `n` regular exemplars. Within one (emotion, session)
/// group seeds and phrases must be pairwise distinct.
pub fn parse_exemplars(text: &str, n: usize) -> Result<ExemplarSet, PromptError> {
    let file: ExemplarFile =
        toml::from_str(text).map_err(|e| PromptError::Malformed(e.to_string()))?;
    let mut set = ExemplarSet::new();
    for ex in file.exemplar {
        match (ex.session, &ex.phrase) {
            (Session::Regular, None) => return Err(PromptError::PhraseMissing),
            (Session::Regular, Some(p)) if !ex.script.contains(p.as_str()) => {
                return Err(PromptError::PhraseNotInScript(p.clone()))
            }
            (Session::PhraseFree, Some(_)) => return Err(PromptError::PhraseInPhraseFree),
            _ => {}
        }
        if ex.seed.trim().is_empty() || ex.script.trim().is_empty() {
            return Err(PromptError::Malformed("empty seed or script".into()));
        }
        set.entry((ex.emotion, ex.session)).or_default().push(ex);
    }
    for ((emotion, session), group) in &set {
        check_distinct(*emotion, *session, group)?;
    }
    for emotion in Emotion::ALL {
        match set.get(&(emotion, Session::Regular)) {
            None => {
                return Err(PromptError::Missing {
                    emotion,
                    session: Session::Regular,
                })
            }
            Some(g) if g.len() < n => {
                return Err(PromptError::TooFew {
                    emotion,
                    session: Session::Regular,
                    needed: n,
                    found: g.len(),
                })
            }
            Some(_) => {}
        }
    }
    Ok(set)
}

pub fn load_exemplars(path: &Path, n: usize) -> Result<ExemplarSet, PromptError> {
    let text = fs::read_to_string(path).map_err(|source| PromptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_exemplars(&text, n)
}

fn check_distinct(emotion: Emotion, session: Session, group: &[Exemplar]) -> Result<(), PromptError> {
    let mut seeds = HashSet::new();
    let mut phrases = HashSet::new();
    for ex in group {
        if !seeds.insert(ex.seed.as_str()) {
            return Err(PromptError::Overlap {
                emotion,
                session,
                field: "seed",
                value: ex.seed.clone(),
            });
        }
        if let Some(p) = &ex.phrase {
            if !phrases.insert(p.as_str()) {
                return Err(PromptError::Overlap {
                    emotion,
                    session,
                    field: "phrase",
                    value: p.clone(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    instruction: String,
    exemplars: Vec<Exemplar>,
    session: Session,
    forbidden: Vec<String>,
}

impl PromptTemplate {
    /// `forbidden` lists phrase surfaces that must never reach a phrase-free prompt
    /// (normally every surface in the NV catalog). Ignored for the regular session.
    pub fn new(
        instruction: &str,
        exemplars: Vec<Exemplar>,
        session: Session,
        forbidden: &[String],
    ) -> Result<Self, PromptError> {
        let first = exemplars.first().map(|e| e.emotion);
        if let Some(expected) = first {
            if let Some(bad) = exemplars.iter().find(|e| e.emotion != expected) {
                return Err(PromptError::EmotionMismatch {
                    expected,
                    found: bad.emotion,
                });
            }
            check_distinct(expected, session, &exemplars)?;
        }
        let forbidden = match session {
            Session::Regular => {
                if !instruction.contains("interjection") {
                    return Err(PromptError::NoInterjection);
                }
                if exemplars.iter().any(|e| e.phrase.is_none()) {
                    return Err(PromptError::PhraseMissing);
                }
                Vec::new()
            }
            Session::PhraseFree => {
                if instruction.contains("{phrase}") || exemplars.iter().any(|e| e.phrase.is_some()) {
                    return Err(PromptError::PhraseInPhraseFree);
                }
                let forbidden: Vec<String> =
                    forbidden.iter().filter(|s| !s.is_empty()).cloned().collect();
                for ex in &exemplars {
                    for text in [&ex.seed, &ex.script] {
                        if let Some(hit) = forbidden.iter().find(|f| text.contains(f.as_str())) {
                            return Err(PromptError::ContainsCatalogPhrase(hit.clone()));
                        }
                    }
                }
                forbidden
            }
        };
        Ok(Self {
            instruction: instruction.trim().to_string(),
            exemplars,
            session,
            forbidden,
        })
    }

    /// Takes the first `n` exemplars for (emotion, session) from a loaded set.
    pub fn from_set(
        instruction: &str,
        set: &ExemplarSet,
        emotion: Emotion,
        session: Session,
        n: usize,
        forbidden: &[String],
    ) -> Result<Self, PromptError> {
        let group = set
            .get(&(emotion, session))
            .ok_or(PromptError::Missing { emotion, session })?;
        if group.len() < n {
            return Err(PromptError::TooFew {
                emotion,
                session,
                needed: n,
                found: group.len(),
            });
        }
        Self::new(instruction, group[..n].to_vec(), session, forbidden)
    }

    pub fn session(&self) -> Session {
        self.session
    }

    pub fn exemplars(&self) -> &[Exemplar] {
        &self.exemplars
    }

    /// Whether `surface` would put a forbidden phrase into a phrase-free prompt.
    pub fn forbids(&self, surface: &str) -> Option<&str> {
        self.forbidden
            .iter()
            .find(|f| surface.contains(f.as_str()))
            .map(String::as_str)
    }
}

fn fill(instruction: &str, emotion: Emotion, seed: &str, phrase: &str) -> String {
    instruction
        .replace("{emotion_adj}", emotion.adjective())
        .replace("{emotion}", emotion.as_str())
        .replace("{seed}", seed)
        .replace("{phrase}", phrase)
}

fn write_slot(out: &mut String, seed: &str, phrase: Option<&str>, script: &str) {
    let _ = writeln!(out, "Word: {seed}");
    if let Some(p) = phrase {
        let _ = writeln!(out, "Interjection: {p}");
    }
    if script.is_empty() {
        out.push_str("Script:");
    } else {
        let _ = write!(out, "Script: {script}");
    }
}

pub fn render_prompt(
    t: &PromptTemplate,
    emotion: Emotion,
    seed: &SeedWord,
    phrase: Option<&NvPhrase>,
) -> Result<String, PromptError> {
    match (t.session, phrase) {
        (Session::Regular, None) => return Err(PromptError::PhraseMissing),
        (Session::PhraseFree, Some(_)) => return Err(PromptError::PhraseInPhraseFree),
        (Session::Regular, Some(p)) if p.emotion != emotion => {
            return Err(PromptError::EmotionMismatch {
                expected: emotion,
                found: p.emotion,
            })
        }
        _ => {}
    }
    if let Some(bad) = t.exemplars.iter().find(|e| e.emotion != emotion) {
        return Err(PromptError::EmotionMismatch {
            expected: emotion,
            found: bad.emotion,
        });
    }
    if let Some(hit) = t.forbids(&seed.surface) {
        return Err(PromptError::ContainsCatalogPhrase(hit.to_string()));
    }
    let phrase_surface = phrase.map(|p| p.surface.as_str());
    let mut out = fill(&t.instruction, emotion, &seed.surface, phrase_surface.unwrap_or(""));
    out.push_str("\n\n");
    for (i, ex) in t.exemplars.iter().enumerate() {
        let _ = writeln!(out, "# Example {}", i + 1);
        write_slot(&mut out, &ex.seed, ex.phrase.as_deref(), &ex.script);
        out.push_str("\n\n");
    }
    out.push_str("# Your turn\n");
    write_slot(&mut out, &seed.surface, phrase_surface, "");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::PhraseCatalog;
    use crate::model::Polarity;

    fn bundled() -> ExemplarSet {
        parse_exemplars(BUNDLED_EXEMPLARS, DEFAULT_EXEMPLAR_COUNT).unwrap()
    }

    fn catalog_surfaces() -> Vec<String> {
        PhraseCatalog::bundled().surfaces().map(str::to_string).collect()
    }

    fn regular_happy() -> PromptTemplate {
        PromptTemplate::from_set(
            BUNDLED_INSTRUCTION_REGULAR,
            &bundled(),
            Emotion::Happiness,
            Session::Regular,
            3,
            &[],
        )
        .unwrap()
    }

    #[test]
    fn final_slot_holds_seed_and_phrase() {
        let seed = SeedWord::new("interesting", Polarity::Positive);
        let phrase = NvPhrase::new("h", "haha", Emotion::Happiness);
        let p = render_prompt(&regular_happy(), Emotion::Happiness, &seed, Some(&phrase)).unwrap();
        let last = p.rsplit("# Your turn").next().unwrap();
        assert!(last.contains("interesting"));
        assert!(last.contains("haha"));
        assert!(last.trim_end().ends_with("Script:"));
        assert!(p.contains("interjection"));
        assert_eq!(p.matches("# Example ").count(), 3);
    }

    #[test]
    fn exemplars_in_file_order() {
        let p = render_prompt(
            &regular_happy(),
            Emotion::Happiness,
            &SeedWord::new("海", Polarity::Positive),
            Some(&NvPhrase::new("h", "ふふ", Emotion::Happiness)),
        )
        .unwrap();
        let a = p.find("面白い").unwrap();
        let b = p.find("合格").unwrap();
        let c = p.find("誕生日").unwrap();
        assert!(a < b && b < c);
    }

    #[test]
    fn phrase_free_rejects_phrase() {
        let t = PromptTemplate::from_set(
            BUNDLED_INSTRUCTION_PHRASE_FREE,
            &bundled(),
            Emotion::Happiness,
            Session::PhraseFree,
            3,
            &catalog_surfaces(),
        )
        .unwrap();
        let err = render_prompt(
            &t,
            Emotion::Happiness,
            &SeedWord::new("海", Polarity::Positive),
            Some(&NvPhrase::new("h", "はは", Emotion::Happiness)),
        )
        .unwrap_err();
        assert_eq!(err.to_string(), "phrase in phrase-free");
    }

    #[test]
    fn phrase_free_rejects_seed_holding_catalog_phrase() {
        let t = PromptTemplate::from_set(
            BUNDLED_INSTRUCTION_PHRASE_FREE,
            &bundled(),
            Emotion::Surprise,
            Session::PhraseFree,
            3,
            &catalog_surfaces(),
        )
        .unwrap();
        let err = render_prompt(&t, Emotion::Surprise, &SeedWord::new("もうけ", Polarity::Neutral), None);
        assert!(matches!(err, Err(PromptError::ContainsCatalogPhrase(_))));
    }

    #[test]
    fn deterministic() {
        let seed = SeedWord::new("interesting", Polarity::Positive);
        let phrase = NvPhrase::new("h", "haha", Emotion::Happiness);
        let t = regular_happy();
        assert_eq!(
            render_prompt(&t, Emotion::Happiness, &seed, Some(&phrase)).unwrap(),
            render_prompt(&t, Emotion::Happiness, &seed, Some(&phrase)).unwrap()
        );
    }

    #[test]
    fn wrong_emotion_is_rejected() {
        let err = render_prompt(
            &regular_happy(),
            Emotion::Anger,
            &SeedWord::new("x", Polarity::Negative),
            Some(&NvPhrase::new("a", "ちっ", Emotion::Anger)),
        );
        assert!(matches!(err, Err(PromptError::EmotionMismatch { .. })));
    }

    #[test]
    fn bundled_set_is_complete() {
        let set = bundled();
        for e in Emotion::ALL {
            for s in Session::ALL {
                assert_eq!(set[&(e, s)].len(), 3, "{e}/{s}");
            }
        }
        assert_eq!(set[&(Emotion::Happiness, Session::Regular)].len(), 3);
    }

    #[test]
    fn overlapping_seed_rejected() {
        let mut text = String::new();
        for e in Emotion::ALL {
            for i in 0..3 {
                let seed = if e == Emotion::Happiness && i < 2 { "fun".to_string() } else { format!("s{i}") };
                text.push_str(&format!(
                    "[[exemplar]]\nemotion = \"{e}\"\nsession = \"regular\"\nseed = \"{seed}\"\nphrase = \"p{i}\"\nscript = \"p{i} text\"\n"
                ));
            }
        }
        let err = parse_exemplars(&text, 3).unwrap_err();
        assert!(matches!(err, PromptError::Overlap { field: "seed", .. }), "{err}");
    }

    #[test]
    fn missing_emotion_rejected() {
        let text: String = BUNDLED_EXEMPLARS
            .split("[[exemplar]]")
            .filter(|chunk| !chunk.contains("\"fear\""))
            .collect::<Vec<_>>()
            .join("[[exemplar]]");
        let err = parse_exemplars(&text, 3).unwrap_err();
        assert_eq!(err.to_string(), "no exemplars for fear/regular");
    }

    #[test]
    fn malformed_record_rejected() {
        assert!(matches!(
            parse_exemplars("[[exemplar]]\nemotion = \"joy\"\n", 3),
            Err(PromptError::Malformed(_))
        ));
    }

    #[test]
    fn regular_instruction_needs_interjection() {
        let set = bundled();
        let err = PromptTemplate::from_set("Write a sentence.", &set, Emotion::Fear, Session::Regular, 3, &[]);
        assert!(matches!(err, Err(PromptError::NoInterjection)));
    }
}
