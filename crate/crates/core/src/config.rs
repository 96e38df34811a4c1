//! Pipeline configuration (TOML). Relative paths resolve against the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::LlmSettings;
use crate::model::{Emotion, Polarity};
use crate::phoneme::EntropyConfig;
use crate::selection::{QuotaConfig, SelectionError, DEFAULT_MAX_INJECTIONS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("invalid config {path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("{key} points to {path}, which does not exist")]
    MissingPath { key: String, path: String },
    #[error("{0} is required for this command but not configured")]
    Required(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dictionary: Option<PathBuf>,
    pub blocklist: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub instruction_regular: Option<PathBuf>,
    pub instruction_phrase_free: Option<PathBuf>,
    pub nv_catalog: Option<PathBuf>,
    pub mora_table: Option<PathBuf>,
    pub baseline_keywords: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Precomputed,
    #[default]
    Baseline,
}

impl FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "remote" => Ok(Self::Remote),
            "precomputed" => Ok(Self::Precomputed),
            "baseline" => Ok(Self::Baseline),
            other => Err(format!("unknown backend '{other}' (remote, precomputed, baseline)")),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Remote => "remote",
            Self::Precomputed => "precomputed",
            Self::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSettings {
    pub backend: BackendKind,
    pub url: String,
    pub scores: Option<PathBuf>,
    pub batch_size: usize,
    pub timeout_secs: u64,
}

impl Default for ScorerSettings {
    fn default() -> Self {
        Self {
            backend: BackendKind::Baseline,
            url: "http://127.0.0.1:8000".into(),
            scores: None,
            batch_size: 32,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSettings {
    /// Prompts issued per emotion for the regular session.
    pub regular_per_emotion: usize,
    pub phrase_free_per_emotion: usize,
    pub exemplars: usize,
    /// Overrides of the emotion to polarity routing.
    pub routing: BTreeMap<Emotion, Polarity>,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            regular_per_emotion: 100,
            phrase_free_per_emotion: 20,
            exemplars: crate::promptgen::DEFAULT_EXEMPLAR_COUNT,
            routing: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSettings {
    /// Preset names, filled in order.
    pub presets: Vec<String>,
    /// Explicit tiers; used instead of `presets` when non-empty.
    pub custom: Vec<QuotaConfig>,
    /// Divide every quota by this (rounded up).
    pub scale: usize,
    pub max_injections: usize,
    pub fillers: Option<PathBuf>,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            presets: vec!["core".into(), "extra".into()],
            custom: Vec::new(),
            scale: 1,
            max_injections: DEFAULT_MAX_INJECTIONS,
            fillers: None,
        }
    }
}

impl SelectionSettings {
    pub fn tiers(&self) -> Result<Vec<QuotaConfig>, SelectionError> {
        let base = if self.custom.is_empty() {
            self.presets.iter().map(|p| QuotaConfig::preset(p)).collect::<Result<Vec<_>, _>>()?
        } else {
            self.custom.clone()
        };
        Ok(base.into_iter().map(|q| q.scaled(self.scale)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSettings {
    pub weights: Vec<f64>,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        Self {
            weights: EntropyConfig::default().weights().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub name: String,
    pub seed: u64,
    pub paths: Paths,
    pub llm: LlmSettings,
    pub scorer: ScorerSettings,
    pub generation: GenerationSettings,
    pub selection: SelectionSettings,
    pub coverage: CoverageSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            name: "emoscript".into(),
            seed: 0,
            paths: Paths::default(),
            llm: LlmSettings::default(),
            scorer: ScorerSettings::default(),
            generation: GenerationSettings::default(),
            selection: SelectionSettings::default(),
            coverage: CoverageSettings::default(),
        }
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Invalid {
            path: origin.to_string(),
            reason: e.to_string(),
        })
    }

    /// Reads, resolves relative paths and checks that every input path exists.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut cfg = Self::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check(&path.display().to_string())?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.dictionary,
            &mut p.blocklist,
            &mut p.exemplars,
            &mut p.instruction_regular,
            &mut p.instruction_phrase_free,
            &mut p.nv_catalog,
            &mut p.mora_table,
            &mut p.baseline_keywords,
            &mut p.cache_dir,
            &mut p.output_dir,
        ] {
            resolve(base, slot);
        }
        resolve(base, &mut self.scorer.scores);
        resolve(base, &mut self.selection.fillers);
    }

    /// Input paths that are set, keyed by their config name.
    pub fn input_paths(&self) -> Vec<(&'static str, &Path)> {
        let p = &self.paths;
        [
            ("paths.dictionary", &p.dictionary),
            ("paths.blocklist", &p.blocklist),
            ("paths.exemplars", &p.exemplars),
            ("paths.instruction_regular", &p.instruction_regular),
            ("paths.instruction_phrase_free", &p.instruction_phrase_free),
            ("paths.nv_catalog", &p.nv_catalog),
            ("paths.mora_table", &p.mora_table),
            ("paths.baseline_keywords", &p.baseline_keywords),
            ("scorer.scores", &self.scorer.scores),
            ("selection.fillers", &self.selection.fillers),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|p| (k, p)))
        .collect()
    }

    pub fn check(&self, origin: &str) -> Result<(), ConfigError> {
        for (key, path) in self.input_paths() {
            if !path.exists() {
                return Err(ConfigError::MissingPath {
                    key: key.to_string(),
                    path: path.display().to_string(),
                });
            }
        }
        let invalid = |reason: String| ConfigError::Invalid { path: origin.to_string(), reason };
        EntropyConfig::new(self.coverage.weights.clone()).map_err(|e| invalid(e.to_string()))?;
        self.selection.tiers().map_err(|e| invalid(e.to_string()))?;
        if self.generation.exemplars == 0 {
            return Err(invalid("generation.exemplars must be at least 1".into()));
        }
        if self.selection.scale == 0 {
            return Err(invalid("selection.scale must be at least 1".into()));
        }
        Ok(())
    }

    pub fn entropy(&self) -> EntropyConfig {
        EntropyConfig::new(self.coverage.weights.clone()).unwrap_or_default()
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.paths.cache_dir.clone().unwrap_or_else(|| self.output_dir().join("cache"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = PipelineConfig::parse("", "mem").unwrap();
        cfg.check("mem").unwrap();
        assert_eq!(cfg.selection.tiers().unwrap().iter().map(QuotaConfig::total).sum::<usize>(), 514);
        assert_eq!(cfg.llm.temperature, 1.0);
        assert_eq!(cfg.generation.exemplars, 3);
    }

    #[test]
    fn full_document() {
        let text = r#"
            name = "toy"
            seed = 9
            [llm]
            endpoint = "http://localhost:1/v1"
            concurrency = 2
            [scorer]
            backend = "precomputed"
            [generation]
            regular_per_emotion = 4
            routing = { surprise = "positive" }
            [selection]
            scale = 10
            [[selection.custom]]
            name = "mine"
            regular = { anger = 20 }
        "#;
        let cfg = PipelineConfig::parse(text, "mem").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.scorer.backend, BackendKind::Precomputed);
        assert_eq!(cfg.generation.routing[&Emotion::Surprise], Polarity::Positive);
        let tiers = cfg.selection.tiers().unwrap();
        assert_eq!(tiers.len(), 1);
        assert_eq!(tiers[0].quota(Emotion::Anger, crate::model::Session::Regular), 2);
    }

    #[test]
    fn unknown_keys_and_bad_weights_rejected() {
        assert!(PipelineConfig::parse("[llm]\nmodle = \"x\"", "mem").is_err());
        let cfg = PipelineConfig::parse("[coverage]\nweights = [0.5, 0.6]", "mem").unwrap();
        assert!(cfg.check("mem").is_err());
        let cfg = PipelineConfig::parse("[selection]\npresets = [\"huge\"]", "mem").unwrap();
        assert!(cfg.check("mem").is_err());
    }

    #[test]
    fn relative_paths_and_existence() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("dict.tsv"), "a\tp\n").unwrap();
        let cfg_path = dir.path().join("c.toml");
        std::fs::write(&cfg_path, "[paths]\ndictionary = \"dict.tsv\"\noutput_dir = \"out\"\n").unwrap();
        let cfg = PipelineConfig::load(&cfg_path).unwrap();
        assert_eq!(cfg.output_dir(), dir.path().join("out"));
        assert_eq!(cfg.paths.dictionary.unwrap(), dir.path().join("dict.tsv"));

        std::fs::write(&cfg_path, "[paths]\nblocklist = \"nope.txt\"\n").unwrap();
        let err = PipelineConfig::load(&cfg_path).unwrap_err();
        assert!(matches!(err, ConfigError::MissingPath { .. }), "{err}");
        assert!(err.to_string().contains("paths.blocklist"));
    }
}
