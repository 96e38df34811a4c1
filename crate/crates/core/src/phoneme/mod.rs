//! Phoneme inventory, kana front-end, n-gram statistics and extended entropy.

mod kana;
mod ngram;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kana::{kana_to_phonemes, KanaError, MoraTable};
pub use ngram::{
    arrangement_table, count_ngrams, count_ngrams_parallel, coverage_gaps, extended_entropy,
    EntropyConfig, EntropyConfigError, NGramStats,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown phoneme {0:?}")]
pub struct UnknownPhoneme(pub String);

macro_rules! inventory {
    ($($variant:ident => $sym:literal),+ $(,)?) => {
        /// Closed phoneme inventory. Declaration order is the canonical report order.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Phoneme {
            $($variant),+
        }

        impl Phoneme {
            pub const ALL: &'static [Phoneme] = &[$(Phoneme::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(Phoneme::$variant => $sym),+
                }
            }
        }

        impl FromStr for Phoneme {
            type Err = UnknownPhoneme;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($sym => Ok(Phoneme::$variant),)+
                    other => Err(UnknownPhoneme(other.to_string())),
                }
            }
        }
    };
}

inventory! {
    A => "a", I => "i", U => "u", E => "e", O => "o",
    N => "N", Q => "Q",
    K => "k", G => "g", S => "s", Sh => "sh", Z => "z", J => "j",
    T => "t", Ch => "ch", Ts => "ts", D => "d", Nn => "n", H => "h", F => "f",
    B => "b", P => "p", M => "m", Y => "y", R => "r", W => "w",
    Ky => "ky", Gy => "gy", Ny => "ny", Hy => "hy", By => "by", Py => "py",
    My => "my", Ry => "ry", Dy => "dy", Ty => "ty", Fy => "fy",
}

impl Phoneme {
    pub fn is_vowel(self) -> bool {
        matches!(self, Phoneme::A | Phoneme::I | Phoneme::U | Phoneme::E | Phoneme::O)
    }

    pub fn inventory() -> std::collections::BTreeSet<Phoneme> {
        Phoneme::ALL.iter().copied().collect()
    }
}

impl fmt::Display for Phoneme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Phoneme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Phoneme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Phonemes of one script. N-grams are never counted across two sequences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhonemeSequence {
    pub phones: Vec<Phoneme>,
    pub source_script_id: Option<crate::model::ScriptId>,
}

impl PhonemeSequence {
    pub fn new(phones: Vec<Phoneme>) -> Self {
        Self {
            phones,
            source_script_id: None,
        }
    }

    /// Parses whitespace-separated phoneme symbols, e.g. `"ky o u"`.
    pub fn parse(symbols: &str) -> Result<Self, UnknownPhoneme> {
        symbols
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.phones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phones.is_empty()
    }
}

impl fmt::Display for PhonemeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.phones.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(p.as_str())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventory_symbols_round_trip() {
        assert_eq!(Phoneme::ALL.len(), 37);
        for p in Phoneme::ALL {
            assert_eq!(p.as_str().parse::<Phoneme>().unwrap(), *p);
        }
        assert!("v".parse::<Phoneme>().is_err());
    }

    #[test]
    fn sequence_display() {
        let s = PhonemeSequence::parse("ky o u").unwrap();
        assert_eq!(s.to_string(), "ky o u");
    }
}
