use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

use super::{Phoneme, PhonemeSequence};

const BUNDLED_TABLE: &str = include_str!("../../assets/mora.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KanaError {
    #[error("kanji {ch:?} at position {pos}; supply a kana reading")]
    Kanji { pos: usize, ch: char },
    #[error("unsupported character {ch:?} at position {pos}")]
    Unknown { pos: usize, ch: char },
    #[error("prolonged sound mark at position {pos} does not follow a vowel")]
    DanglingProlongation { pos: usize },
    #[error("mora table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("cannot read mora table {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Kana → phoneme lookup, keyed by hiragana. Keys are one kana or a kana followed by
/// a small kana (digraph).
#[derive(Debug, Clone, PartialEq)]
pub struct MoraTable {
    entries: HashMap<String, Vec<Phoneme>>,
}

fn is_kanji(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F | 0x3005 | 0x3007)
}

fn is_skippable(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c as u32,
            0x3000..=0x303F | 0x30FB | 0x2010..=0x206F | 0xFF01..=0xFF0F | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40 | 0xFF5B..=0xFF65)
}

/// Folds katakana onto hiragana so one table serves both scripts.
fn fold(c: char) -> char {
    match c as u32 {
        0x30A1..=0x30F6 => char::from_u32(c as u32 - 0x60).unwrap_or(c),
        _ => c,
    }
}

fn is_small(c: char) -> bool {
    matches!(c, 'ぁ' | 'ぃ' | 'ぅ' | 'ぇ' | 'ぉ' | 'ゃ' | 'ゅ' | 'ょ' | 'ゎ')
}

impl MoraTable {
    pub fn bundled() -> &'static MoraTable {
        static TABLE: OnceLock<MoraTable> = OnceLock::new();
        TABLE.get_or_init(|| MoraTable::parse(BUNDLED_TABLE).expect("bundled mora table is valid"))
    }

    pub fn load(path: &Path) -> Result<Self, KanaError> {
        let text = fs::read_to_string(path).map_err(|e| KanaError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Parses `kana<TAB>phonemes` lines (phonemes space-separated).
    pub fn parse(text: &str) -> Result<Self, KanaError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let err = |reason: String| KanaError::Table {
                line: idx + 1,
                reason,
            };
            let (kana, phones) = raw
                .split_once('\t')
                .ok_or_else(|| err("expected kana<TAB>phonemes".into()))?;
            let key: String = kana.trim().chars().map(fold).collect();
            if key.is_empty() || key.chars().count() > 2 {
                return Err(err(format!("bad key {kana:?}")));
            }
            let seq = PhonemeSequence::parse(phones).map_err(|e| err(e.to_string()))?;
            if seq.is_empty() {
                return Err(err("empty phoneme list".into()));
            }
            if entries.insert(key, seq.phones).is_some() {
                return Err(err(format!("duplicate key {kana:?}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Converts kana text to phonemes. Punctuation and whitespace are skipped, `ー`
    /// repeats the preceding vowel, digraphs take precedence over single kana.
    pub fn phonemize(&self, text: &str) -> Result<PhonemeSequence, KanaError> {
        let chars: Vec<char> = text.chars().collect();
        let mut phones: Vec<Phoneme> = Vec::with_capacity(chars.len() * 2);
        let mut pos = 0;
        while pos < chars.len() {
            let c = chars[pos];
            if c == 'ー' {
                match phones.last() {
                    Some(&v) if v.is_vowel() => phones.push(v),
                    _ => return Err(KanaError::DanglingProlongation { pos }),
                }
                pos += 1;
                continue;
            }
            if is_skippable(c) {
                pos += 1;
                continue;
            }
            let folded = fold(c);
            if let Some(&next) = chars.get(pos + 1) {
                let next = fold(next);
                if is_small(next) {
                    let key: String = [folded, next].iter().collect();
                    if let Some(p) = self.entries.get(&key) {
                        phones.extend_from_slice(p);
                        pos += 2;
                        continue;
                    }
                }
            }
            let mut buf = [0u8; 4];
            match self.entries.get(folded.encode_utf8(&mut buf) as &str) {
                Some(p) => phones.extend_from_slice(p),
                None if is_kanji(c) => return Err(KanaError::Kanji { pos, ch: c }),
                None => return Err(KanaError::Unknown { pos, ch: c }),
            }
            pos += 1;
        }
        Ok(PhonemeSequence::new(phones))
    }
}

/// Converts kana text using the bundled mora table.
pub fn kana_to_phonemes(text: &str) -> Result<PhonemeSequence, KanaError> {
    MoraTable::bundled().phonemize(text)
}
