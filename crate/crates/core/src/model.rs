//! Shared domain types: emotions, sessions, seed words, NV phrases and scripts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseLabelError {
    #[error("unknown emotion label {0:?}")]
    Emotion(String),
    #[error("unknown session label {0:?}")]
    Session(String),
    #[error("unknown polarity label {0:?}")]
    Polarity(String),
}

/// The six basic emotions covered by the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

impl Emotion {
    pub const ALL: [Emotion; 6] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happiness,
        Emotion::Sadness,
        Emotion::Surprise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happiness => "happiness",
            Emotion::Sadness => "sadness",
            Emotion::Surprise => "surprise",
        }
    }

    /// Adjective form used when filling prompt instructions ("happy script").
    pub fn adjective(self) -> &'static str {
        match self {
            Emotion::Anger => "angry",
            Emotion::Disgust => "disgusted",
            Emotion::Fear => "fearful",
            Emotion::Happiness => "happy",
            Emotion::Sadness => "sad",
            Emotion::Surprise => "surprised",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s.trim())
            .ok_or_else(|| ParseLabelError::Emotion(s.to_string()))
    }
}

/// Recording session a script belongs to.
///
/// Regular scripts embed exactly one catalog NV phrase that the speaker must utter;
/// phrase-free scripts leave the vocalization to the speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Session {
    Regular,
    PhraseFree,
}

impl Session {
    pub const ALL: [Session; 2] = [Session::Regular, Session::PhraseFree];

    pub fn as_str(self) -> &'static str {
        match self {
            Session::Regular => "regular",
            Session::PhraseFree => "phrase_free",
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Session {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "regular" => Ok(Session::Regular),
            "phrase_free" | "phrase-free" => Ok(Session::PhraseFree),
            other => Err(ParseLabelError::Session(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "positive" | "p" => Ok(Polarity::Positive),
            "negative" | "n" => Ok(Polarity::Negative),
            "neutral" | "e" => Ok(Polarity::Neutral),
            other => Err(ParseLabelError::Polarity(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedWord {
    pub surface: String,
    pub polarity: Polarity,
    #[serde(default)]
    pub flagged_inappropriate: bool,
}

impl SeedWord {
    pub fn new(surface: impl Into<String>, polarity: Polarity) -> Self {
        Self {
            surface: surface.into(),
            polarity,
            flagged_inappropriate: false,
        }
    }
}

/// A nonverbal-vocalization phrase (in kana) bound to one emotion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NvPhrase {
    pub id: String,
    pub surface: String,
    pub emotion: Emotion,
}

impl NvPhrase {
    pub fn new(id: impl Into<String>, surface: impl Into<String>, emotion: Emotion) -> Self {
        Self {
            id: id.into(),
            surface: surface.into(),
            emotion,
        }
    }
}

/// Content-derived script identifier (truncated SHA-256 of the normalized text).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScriptId(String);

impl ScriptId {
    pub fn from_text(text: &str) -> Self {
        let digest = Sha256::digest(normalize_text(text).as_bytes());
        ScriptId(hex::encode(&digest[..8]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ScriptId {
    fn from(s: &str) -> Self {
        ScriptId(s.to_string())
    }
}

impl From<String> for ScriptId {
    fn from(s: String) -> Self {
        ScriptId(s)
    }
}

impl fmt::Display for ScriptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// NFC, trimmed, internal whitespace runs collapsed to a single ASCII space.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A candidate or selected script.
///
/// `reading` optionally carries a kana reading of `text`; phoneme statistics are computed
/// from the reading when present, otherwise from `text` itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub id: ScriptId,
    pub text: String,
    #[serde(default)]
    pub reading: Option<String>,
    pub emotion: Emotion,
    pub session: Session,
    pub seed_word: SeedWord,
    #[serde(default)]
    pub nv_phrase: Option<NvPhrase>,
    #[serde(default)]
    pub emotion_score_raw: Option<f64>,
    #[serde(default)]
    pub fluency_score_raw: Option<f64>,
    #[serde(default)]
    pub emotion_score_norm: Option<f64>,
    #[serde(default)]
    pub fluency_score_norm: Option<f64>,
    #[serde(default)]
    pub combined_score: Option<f64>,
}

impl Script {
    pub fn new(
        text: &str,
        emotion: Emotion,
        session: Session,
        seed_word: SeedWord,
        nv_phrase: Option<NvPhrase>,
    ) -> Self {
        let text = normalize_text(text);
        Self {
            id: ScriptId::from_text(&text),
            text,
            reading: None,
            emotion,
            session,
            seed_word,
            nv_phrase,
            emotion_score_raw: None,
            fluency_score_raw: None,
            emotion_score_norm: None,
            fluency_score_norm: None,
            combined_score: None,
        }
    }

    pub fn with_reading(mut self, reading: &str) -> Self {
        let reading = normalize_text(reading);
        self.reading = (!reading.is_empty()).then_some(reading);
        self
    }

    pub fn with_combined_score(mut self, score: f64) -> Self {
        self.combined_score = Some(score);
        self
    }

    /// Text used for phonemization.
    pub fn phonetic_text(&self) -> &str {
        self.reading.as_deref().unwrap_or(&self.text)
    }

    pub fn score(&self) -> f64 {
        self.combined_score.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("empty text")]
    EmptyText,
    #[error("empty seed word")]
    EmptySeed,
    #[error("id does not match normalized text")]
    IdMismatch,
    #[error("regular script without phrase")]
    PhraseMissing,
    #[error("phrase not in text")]
    PhraseNotInText,
    #[error("phrase in phrase-free")]
    PhraseInPhraseFree,
    #[error("phrase emotion {phrase} differs from script emotion {script}")]
    PhraseEmotionMismatch { phrase: Emotion, script: Emotion },
    #[error("{field} is not finite")]
    NonFinite { field: &'static str },
    #[error("{field} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Checks every script invariant and returns all violations (empty when valid).
///
/// A regular script passes when its phrase occurs at least once in the text.
pub fn validate_script(s: &Script) -> Vec<Violation> {
    let mut out = Vec::new();
    if s.text.trim().is_empty() {
        out.push(Violation::EmptyText);
    }
    if s.seed_word.surface.trim().is_empty() {
        out.push(Violation::EmptySeed);
    }
    if s.id != ScriptId::from_text(&s.text) {
        out.push(Violation::IdMismatch);
    }
    match (s.session, &s.nv_phrase) {
        (Session::Regular, None) => out.push(Violation::PhraseMissing),
        (Session::Regular, Some(p)) => {
            if p.surface.is_empty() || !s.text.contains(&p.surface) {
                out.push(Violation::PhraseNotInText);
            }
            if p.emotion != s.emotion {
                out.push(Violation::PhraseEmotionMismatch {
                    phrase: p.emotion,
                    script: s.emotion,
                });
            }
        }
        (Session::PhraseFree, Some(_)) => out.push(Violation::PhraseInPhraseFree),
        (Session::PhraseFree, None) => {}
    }
    let ranged = [
        ("emotion_score_norm", s.emotion_score_norm, 1.0),
        ("fluency_score_norm", s.fluency_score_norm, 1.0),
        ("combined_score", s.combined_score, 2.0),
    ];
    for (field, value, hi) in ranged {
        if let Some(v) = value {
            if !v.is_finite() {
                out.push(Violation::NonFinite { field });
            } else if !(0.0..=hi).contains(&v) {
                out.push(Violation::OutOfRange {
                    field,
                    value: v,
                    lo: 0.0,
                    hi,
                });
            }
        }
    }
    for (field, value) in [
        ("emotion_score_raw", s.emotion_score_raw),
        ("fluency_score_raw", s.fluency_score_raw),
    ] {
        if matches!(value, Some(v) if !v.is_finite()) {
            out.push(Violation::NonFinite { field });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn happy_phrase() -> NvPhrase {
        NvPhrase::new("happiness-01", "はは", Emotion::Happiness)
    }

    fn seed() -> SeedWord {
        SeedWord::new("面白い", Polarity::Positive)
    }

    #[test]
    fn regular_with_phrase_is_valid() {
        let s = Script::new(
            "はは、面白い！",
            Emotion::Happiness,
            Session::Regular,
            seed(),
            Some(happy_phrase()),
        );
        assert!(validate_script(&s).is_empty());
    }

    #[test]
    fn regular_missing_substring() {
        let s = Script::new(
            "面白い！",
            Emotion::Happiness,
            Session::Regular,
            seed(),
            Some(happy_phrase()),
        );
        let v = validate_script(&s);
        assert_eq!(v, vec![Violation::PhraseNotInText]);
        assert_eq!(v[0].to_string(), "phrase not in text");
    }

    #[test]
    fn phrase_free_with_phrase() {
        let s = Script::new(
            "はは、面白い！",
            Emotion::Happiness,
            Session::PhraseFree,
            seed(),
            Some(happy_phrase()),
        );
        let v = validate_script(&s);
        assert_eq!(v, vec![Violation::PhraseInPhraseFree]);
        assert_eq!(v[0].to_string(), "phrase in phrase-free");
    }

    #[test]
    fn reports_every_violation() {
        let mut s = Script::new("", Emotion::Anger, Session::Regular, SeedWord::new(" ", Polarity::Negative), None);
        s.combined_score = Some(2.5);
        let v = validate_script(&s);
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn normalization_rules() {
        // U+0065 U+0301 composes to U+00E9 under NFC
        assert_eq!(normalize_text("  cafe\u{301}\t\n  au   lait "), "caf\u{e9} au lait");
        assert_eq!(
            ScriptId::from_text(" はは  面白い "),
            ScriptId::from_text("はは 面白い")
        );
        assert_eq!(ScriptId::from_text("x").as_str().len(), 16);
    }

    #[test]
    fn labels_round_trip() {
        for e in Emotion::ALL {
            assert_eq!(e.as_str().parse::<Emotion>().unwrap(), e);
        }
        assert!("neutral".parse::<Emotion>().is_err());
        assert_eq!("phrase-free".parse::<Session>().unwrap(), Session::PhraseFree);
        assert_eq!("e".parse::<Polarity>().unwrap(), Polarity::Neutral);
    }

    proptest! {
        #[test]
        fn validation_is_pure_and_serialization_is_stable(
            text in "[あ-ん]{1,12}",
            use_phrase in any::<bool>(),
            score in proptest::option::of(0.0f64..=2.0),
        ) {
            let (session, phrase) = if use_phrase {
                (Session::Regular, Some(NvPhrase::new("p", text.chars().take(1).collect::<String>(), Emotion::Fear)))
            } else {
                (Session::PhraseFree, None)
            };
            let mut s = Script::new(&text, Emotion::Fear, session, SeedWord::new("こわい", Polarity::Negative), phrase);
            s.combined_score = score;
            prop_assert_eq!(validate_script(&s), validate_script(&s));
            prop_assert!(validate_script(&s).is_empty());
            let bytes = serde_json::to_string(&s).unwrap();
            let back: Script = serde_json::from_str(&bytes).unwrap();
            prop_assert_eq!(&back, &s);
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), bytes);
        }
    }
}
