use std::collections::BTreeMap;

use super::RawScores;
use crate::model::{Emotion, Script};

const BUNDLED_KEYWORDS: &str = include_str!("../../assets/baseline_keywords.tsv");

/// Offline scorer built from a small keyword list.
///
/// Emotion score is `sigmoid(hits(target) - hits(other emotions))`; fluency is the
/// negated share of characters outside the Japanese writing system. Intended for
/// tests and dry runs, not as a stand-in for a trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineScorer {
    keywords: BTreeMap<Emotion, Vec<String>>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn in_vocabulary(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c as u32,
            0x3000..=0x30FF      // CJK punctuation, hiragana, katakana
            | 0x3400..=0x4DBF
            | 0x4E00..=0x9FFF
            | 0xF900..=0xFAFF
            | 0xFF01..=0xFF65    // fullwidth punctuation and forms
            | 0x2010..=0x206F)
}

impl BaselineScorer {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_KEYWORDS)
    }

    /// `emotion<TAB>keyword` lines; unknown emotions and malformed lines are skipped.
    pub fn parse(text: &str) -> Self {
        let mut keywords: BTreeMap<Emotion, Vec<String>> = BTreeMap::new();
        for line in text.lines().filter(|l| !l.starts_with('#')) {
            if let Some((e, kw)) = line.split_once('\t') {
                if let (Ok(e), kw) = (e.parse::<Emotion>(), kw.trim()) {
                    if !kw.is_empty() {
                        keywords.entry(e).or_default().push(kw.to_string());
                    }
                }
            }
        }
        Self { keywords }
    }

    pub fn hits(&self, text: &str, emotion: Emotion) -> usize {
        self.keywords
            .get(&emotion)
            .map_or(0, |kws| kws.iter().map(|k| text.matches(k.as_str()).count()).sum())
    }

    pub fn emotion_score(&self, text: &str, emotion: Emotion) -> f64 {
        let target = self.hits(text, emotion) as f64;
        let other: usize = Emotion::ALL
            .into_iter()
            .filter(|e| *e != emotion)
            .map(|e| self.hits(text, e))
            .sum();
        sigmoid(target - other as f64)
    }

    pub fn fluency_score(&self, text: &str) -> f64 {
        let counted: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if counted.is_empty() {
            return -1.0;
        }
        let oov = counted.iter().filter(|c| !in_vocabulary(**c)).count();
        -(oov as f64 / counted.len() as f64)
    }

    pub fn score(&self, script: &Script) -> RawScores {
        RawScores {
            emotion: self.emotion_score(&script.text, script.emotion),
            fluency: self.fluency_score(&script.text),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_balance() {
        let b = BaselineScorer::bundled();
        assert!((b.emotion_score("嬉しい", Emotion::Happiness) - sigmoid(1.0)).abs() < 1e-15);
        assert_eq!(b.emotion_score("今日は晴れ", Emotion::Happiness), 0.5);
        assert!(b.emotion_score("怖いけど嬉しい", Emotion::Happiness) == 0.5);
        assert!(b.emotion_score("悲しい", Emotion::Happiness) < 0.5);
    }

    #[test]
    fn fluency_penalizes_foreign_characters() {
        let b = BaselineScorer::bundled();
        assert_eq!(b.fluency_score("きょうは、晴れ。"), 0.0);
        assert_eq!(b.fluency_score("abcd"), -1.0);
        assert_eq!(b.fluency_score("あいab"), -0.5);
        assert_eq!(b.fluency_score(""), -1.0);
    }
}
