//! Sentiment-polarity dictionary ingestion and polarity-routed seed sampling.
//!
//! Dictionary files hold one `surface<TAB>polarity` entry per line, polarity being
//! `p`, `n` or `e` (positive, negative, neutral). Trailing columns are ignored and
//! lines starting with `#` are comments. Blocklists hold one surface per line.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Emotion, Polarity, SeedWord};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{0} bucket empty after filtering")]
    EmptyBucket(Polarity),
    #[error("no {polarity} seed word left for {emotion} after exclusions")]
    Exhausted { emotion: Emotion, polarity: Polarity },
}

/// Maps each emotion to the polarity its seed words are drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionPolarityRouting(BTreeMap<Emotion, Polarity>);

impl Default for EmotionPolarityRouting {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for e in [Emotion::Anger, Emotion::Disgust, Emotion::Fear, Emotion::Sadness] {
            map.insert(e, Polarity::Negative);
        }
        map.insert(Emotion::Happiness, Polarity::Positive);
        map.insert(Emotion::Surprise, Polarity::Neutral);
        Self(map)
    }
}

impl EmotionPolarityRouting {
    /// Default table with the given entries replaced.
    pub fn with_overrides(overrides: &BTreeMap<Emotion, Polarity>) -> Self {
        let mut routing = Self::default();
        routing.0.extend(overrides.iter().map(|(e, p)| (*e, *p)));
        routing
    }

    pub fn polarity(&self, emotion: Emotion) -> Polarity {
        self.0[&emotion]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolarityDictionary {
    entries: Vec<SeedWord>,
    buckets: BTreeMap<Polarity, Vec<SeedWord>>,
}

impl PolarityDictionary {
    /// Builds buckets from raw entries: blocklisted surfaces are flagged, flagged
    /// entries are kept out of every bucket, and each bucket is deduplicated by
    /// surface (first occurrence wins). Empty buckets are allowed here.
    pub fn from_entries(entries: Vec<SeedWord>, blocklist: &HashSet<String>) -> Self {
        let mut seen: HashSet<(Polarity, String)> = HashSet::new();
        let mut buckets: BTreeMap<Polarity, Vec<SeedWord>> =
            Polarity::ALL.iter().map(|p| (*p, Vec::new())).collect();
        let entries: Vec<SeedWord> = entries
            .into_iter()
            .map(|mut w| {
                w.surface = w.surface.trim().to_string();
                w.flagged_inappropriate |= blocklist.contains(&w.surface);
                w
            })
            .collect();
        for w in &entries {
            if w.flagged_inappropriate || w.surface.is_empty() {
                continue;
            }
            if seen.insert((w.polarity, w.surface.clone())) {
                buckets.entry(w.polarity).or_default().push(w.clone());
            }
        }
        Self { entries, buckets }
    }

    pub fn entries(&self) -> &[SeedWord] {
        &self.entries
    }

    pub fn bucket(&self, polarity: Polarity) -> &[SeedWord] {
        self.buckets.get(&polarity).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn counts(&self) -> BTreeMap<Polarity, usize> {
        Polarity::ALL.iter().map(|p| (*p, self.bucket(*p).len())).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.entries.iter().filter(|w| w.flagged_inappropriate).count()
    }
}

fn read(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_dictionary(text: &str, origin: &str) -> Result<Vec<SeedWord>, LexiconError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| LexiconError::Malformed {
            path: origin.to_string(),
            line: idx + 1,
            reason,
        };
        let mut fields = line.split('\t');
        let surface = fields.next().unwrap_or("").trim();
        let Some(polarity) = fields.next() else {
            return Err(malformed("expected surface<TAB>polarity".into()));
        };
        if surface.is_empty() {
            return Err(malformed("empty surface".into()));
        }
        let polarity = match polarity.trim() {
            "p" => Polarity::Positive,
            "n" => Polarity::Negative,
            "e" => Polarity::Neutral,
            other => return Err(malformed(format!("polarity must be p, n or e, found {other:?}"))),
        };
        out.push(SeedWord::new(surface, polarity));
    }
    Ok(out)
}

pub fn parse_blocklist(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Loads a dictionary and optional blocklist. Any polarity bucket left empty after
/// filtering is a hard error.
pub fn load_dictionary(
    dict_path: &Path,
    blocklist_path: Option<&Path>,
) -> Result<PolarityDictionary, LexiconError> {
    let entries = parse_dictionary(&read(dict_path)?, &dict_path.display().to_string())?;
    let blocklist = match blocklist_path {
        Some(p) => parse_blocklist(&read(p)?),
        None => HashSet::new(),
    };
    let dict = PolarityDictionary::from_entries(entries, &blocklist);
    for (polarity, n) in dict.counts() {
        if n == 0 {
            return Err(LexiconError::EmptyBucket(polarity));
        }
    }
    log::info!(
        "loaded {}: {:?}, {} flagged",
        dict_path.display(),
        dict.counts(),
        dict.flagged_count()
    );
    Ok(dict)
}

/// Draws one seed word whose polarity matches `routing` for `emotion`, avoiding
/// `exclude`. The draw is fully determined by `rng_seed`.
pub fn sample_seed(
    dict: &PolarityDictionary,
    emotion: Emotion,
    routing: &EmotionPolarityRouting,
    rng_seed: u64,
    exclude: &HashSet<String>,
) -> Result<SeedWord, LexiconError> {
    let polarity = routing.polarity(emotion);
    let bucket = dict.bucket(polarity);
    if bucket.is_empty() {
        return Err(LexiconError::EmptyBucket(polarity));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // rejection sampling first; exclusions are usually a small fraction of the bucket
    for _ in 0..16 {
        let w = &bucket[rng.gen_range(0..bucket.len())];
        if !exclude.contains(&w.surface) {
            return Ok(w.clone());
        }
    }
    let eligible: Vec<&SeedWord> = bucket
        .iter()
        .filter(|w| !exclude.contains(&w.surface))
        .collect();
    if eligible.is_empty() {
        return Err(LexiconError::Exhausted { emotion, polarity });
    }
    Ok(eligible[rng.gen_range(0..eligible.len())].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy() -> Vec<SeedWord> {
        vec![
            SeedWord::new("good", Polarity::Positive),
            SeedWord::new("bad", Polarity::Negative),
            SeedWord::new("table", Polarity::Neutral),
        ]
    }

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn blocklisting_empties_negative_bucket() {
        let dict = write("good\tp\nbad\tn\ntable\te\n");
        let block = write("bad\n");
        let err = load_dictionary(dict.path(), Some(block.path())).unwrap_err();
        assert_eq!(err.to_string(), "negative bucket empty after filtering");

        let blocklist: HashSet<String> = ["bad".to_string()].into();
        let d = PolarityDictionary::from_entries(toy(), &blocklist);
        let err = sample_seed(&d, Emotion::Anger, &Default::default(), 1, &HashSet::new()).unwrap_err();
        assert!(err.to_string().contains("bucket empty after filtering"));
        assert!(d.entries().iter().find(|w| w.surface == "bad").unwrap().flagged_inappropriate);
    }

    #[test]
    fn duplicates_collapse() {
        let dict = write("good\tp\ngood\tp\nbad\tn\ntable\te\n");
        let d = load_dictionary(dict.path(), None).unwrap();
        assert_eq!(d.bucket(Polarity::Positive).len(), 1);
    }

    #[test]
    fn three_singleton_buckets() {
        let dict = write("# comment\ngood\tp\tdescription\n\nbad\tn\ntable\te\n");
        let d = load_dictionary(dict.path(), None).unwrap();
        assert!(d.counts().values().all(|n| *n == 1));
    }

    #[test]
    fn malformed_line_reports_number() {
        let dict = write("good\tp\nbad\tx\n");
        match load_dictionary(dict.path(), None).unwrap_err() {
            LexiconError::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
        let dict = write("good\n");
        assert!(matches!(
            load_dictionary(dict.path(), None),
            Err(LexiconError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_dictionary(Path::new("/nonexistent/dict.tsv"), None),
            Err(LexiconError::Io { .. })
        ));
    }

    #[test]
    fn routing_examples() {
        let d = PolarityDictionary::from_entries(toy(), &HashSet::new());
        let r = EmotionPolarityRouting::default();
        let none = HashSet::new();
        assert_eq!(sample_seed(&d, Emotion::Happiness, &r, 7, &none).unwrap(), SeedWord::new("good", Polarity::Positive));
        assert_eq!(sample_seed(&d, Emotion::Surprise, &r, 7, &none).unwrap(), SeedWord::new("table", Polarity::Neutral));
        let exclude: HashSet<String> = ["bad".to_string()].into();
        assert!(matches!(
            sample_seed(&d, Emotion::Anger, &r, 7, &exclude),
            Err(LexiconError::Exhausted { .. })
        ));
    }

    #[test]
    fn routing_overrides() {
        let overrides = [(Emotion::Surprise, Polarity::Positive)].into_iter().collect();
        let r = EmotionPolarityRouting::with_overrides(&overrides);
        assert_eq!(r.polarity(Emotion::Surprise), Polarity::Positive);
        assert_eq!(r.polarity(Emotion::Fear), Polarity::Negative);
    }

    #[test]
    fn same_seed_same_word() {
        let entries = (0..100).map(|i| SeedWord::new(format!("w{i}"), Polarity::Negative)).chain(toy()).collect();
        let d = PolarityDictionary::from_entries(entries, &HashSet::new());
        let r = EmotionPolarityRouting::default();
        let none = HashSet::new();
        for seed in 0..50 {
            assert_eq!(
                sample_seed(&d, Emotion::Fear, &r, seed, &none).unwrap(),
                sample_seed(&d, Emotion::Fear, &r, seed, &none).unwrap()
            );
        }
    }

    #[test]
    fn exclusion_falls_back_to_remaining_word() {
        let entries = (0..40).map(|i| SeedWord::new(format!("w{i}"), Polarity::Negative)).chain(toy()).collect();
        let d = PolarityDictionary::from_entries(entries, &HashSet::new());
        let exclude: HashSet<String> = (1..40).map(|i| format!("w{i}")).chain(["bad".to_string()]).collect();
        for seed in 0..20 {
            let w = sample_seed(&d, Emotion::Sadness, &Default::default(), seed, &exclude).unwrap();
            assert_eq!(w.surface, "w0");
        }
    }
}
