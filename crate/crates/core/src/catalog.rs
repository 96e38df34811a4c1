//! Per-emotion catalog of NV phrases used by the regular session.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{Emotion, NvPhrase};

const BUNDLED: &str = include_str!("../assets/nv_phrases.tsv");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read phrase catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("phrase catalog line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate phrase id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseCatalog {
    phrases: Vec<NvPhrase>,
}

impl PhraseCatalog {
    /// Catalog shipped with the crate: 11/7/8/16/7/19 phrases for
    /// anger/disgust/fear/happiness/sadness/surprise.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled phrase catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses `id<TAB>emotion<TAB>surface` lines; `#` lines and blanks are skipped.
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut phrases: Vec<NvPhrase> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let malformed = |reason: String| CatalogError::Malformed {
                line: idx + 1,
                reason,
            };
            if fields.len() != 3 {
                return Err(malformed(format!("expected 3 fields, found {}", fields.len())));
            }
            let emotion: Emotion = fields[1].parse().map_err(|e| malformed(format!("{e}")))?;
            if fields[2].is_empty() {
                return Err(malformed("empty surface".into()));
            }
            if phrases.iter().any(|p| p.id == fields[0]) {
                return Err(CatalogError::DuplicateId(fields[0].to_string()));
            }
            phrases.push(NvPhrase::new(fields[0], fields[2], emotion));
        }
        Ok(Self { phrases })
    }

    pub fn phrases(&self) -> &[NvPhrase] {
        &self.phrases
    }

    pub fn for_emotion(&self, emotion: Emotion) -> Vec<&NvPhrase> {
        self.phrases.iter().filter(|p| p.emotion == emotion).collect()
    }

    pub fn counts(&self) -> BTreeMap<Emotion, usize> {
        let mut out = BTreeMap::new();
        for p in &self.phrases {
            *out.entry(p.emotion).or_insert(0) += 1;
        }
        out
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(|p| p.surface.as_str())
    }
}
