//! Command-line front end. Exit codes: 0 ok, 1 usage/config, 2 infeasible, 3 backend.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::catalog::{CatalogError, PhraseCatalog};
use crate::config::{BackendKind, ConfigError, PipelineConfig};
use crate::corpus::{
    load_responses, read_json, read_scripts, recognition_accuracy, write_json, write_manifest, write_scripts,
    CorpusError, CorpusManifest,
};
use crate::lexicon::{load_dictionary, EmotionPolarityRouting, LexiconError};
use crate::llm::{run_batch, GenerationBatchReport, LlmClient, LlmError, ResponseCache, Secret};
use crate::model::{Emotion, Script, Session};
use crate::phoneme::{
    arrangement_table, count_ngrams, coverage_gaps, extended_entropy, EntropyConfig, KanaError, MoraTable, Phoneme,
    PhonemeSequence,
};
use crate::pipeline::{
    plan_generation, run_selection, score_candidates, GenerationCounts, PipelineError, PromptSources, ScoreReport,
    SelectionOutcome,
};
use crate::promptgen::{
    load_exemplars, parse_exemplars, PromptError, BUNDLED_EXEMPLARS, BUNDLED_INSTRUCTION_PHRASE_FREE,
    BUNDLED_INSTRUCTION_REGULAR,
};
use crate::scoring::{BaselineScorer, RemoteScorer, ScorerBackend, ScoringError};
use crate::selection::{AuditReport, QuotaConfig, SelectionError, SelectionPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "emoscript", version, about = "Build emotional speech-corpus scripts")]
pub struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured RNG seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the configured scorer backend.
    #[arg(long, global = true, value_name = "remote|precomputed|baseline")]
    pub backend: Option<BackendKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample seeds and phrases, prompt the LLM and write candidate scripts.
    Generate {
        /// Candidate JSONL [default: <output_dir>/candidates.jsonl]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Regular-session prompts per emotion.
        #[arg(long)]
        regular: Option<usize>,
        /// Phrase-free prompts per emotion.
        #[arg(long)]
        phrase_free: Option<usize>,
    },
    /// Score candidates and add normalized and combined scores.
    Score {
        /// Candidate JSONL [default: <output_dir>/candidates.jsonl]
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Score table for the precomputed backend.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Scored JSONL [default: <output_dir>/scored.jsonl]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select the quota-balanced script set and write the manifest.
    Select {
        /// Scored JSONL [default: <output_dir>/scored.jsonl]
        #[arg(long)]
        scored: Option<PathBuf>,
        /// Scored phrase-free scripts offered for rare-phoneme swaps.
        #[arg(long)]
        fillers: Option<PathBuf>,
        /// Quota presets in fill order (repeatable).
        #[arg(long = "preset")]
        presets: Vec<String>,
        /// Divide every quota by this.
        #[arg(long)]
        scale: Option<usize>,
        /// Where plan.json and manifest.json go [default: <output_dir>]
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Phoneme coverage of manifests, script files or kana text files.
    Analyze {
        /// .json manifests, .jsonl script files or text files with one script per line
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Plain-text inputs hold space-separated phoneme symbols instead of kana.
        #[arg(long)]
        phonemes: bool,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
    /// Summarize a manifest and, optionally, listening-test responses.
    Report {
        /// Manifest written by `select`.
        manifest: Option<PathBuf>,
        /// Forced-choice CSV (`item_id,true_emotion,choice,rater_id`), repeatable.
        #[arg(long)]
        responses: Vec<PathBuf>,
        /// Machine-readable output.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

macro_rules! usage_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::new(EXIT_USAGE, e)
            }
        }
    )*};
}
usage_errors!(ConfigError, LexiconError, PromptError, CatalogError, KanaError, SelectionError);

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        let code = match e {
            CorpusError::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_USAGE,
        };
        Failure::new(code, e)
    }
}

impl From<LlmError> for Failure {
    fn from(e: LlmError) -> Self {
        let code = match e {
            LlmError::MissingCredentials(_) | LlmError::Setup(_) | LlmError::Cache { .. } => EXIT_USAGE,
            _ => EXIT_BACKEND,
        };
        Failure::new(code, e)
    }
}

impl From<ScoringError> for Failure {
    fn from(e: ScoringError) -> Self {
        let code = match e {
            ScoringError::Unreachable { .. } | ScoringError::AllFailed => EXIT_BACKEND,
            _ => EXIT_USAGE,
        };
        Failure::new(code, e)
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Lexicon(e) => e.into(),
            PipelineError::Prompt(e) => e.into(),
            PipelineError::Scoring(e) => e.into(),
            PipelineError::Selection(e) => e.into(),
            other => Failure::new(EXIT_USAGE, other),
        }
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(b) = cli.backend {
        cfg.scorer.backend = b;
    }
    match &cli.command {
        Command::Generate { out, regular, phrase_free } => cmd_generate(&cfg, out.as_deref(), *regular, *phrase_free),
        Command::Score { candidates, scores, out } => cmd_score(&cfg, candidates.as_deref(), scores.as_deref(), out.as_deref()),
        Command::Select { scored, fillers, presets, scale, out_dir } => {
            cmd_select(&cfg, scored.as_deref(), fillers.as_deref(), presets, *scale, out_dir.as_deref())
        }
        Command::Analyze { inputs, phonemes, json } => cmd_analyze(&cfg, inputs, *phonemes, *json),
        Command::Report { manifest, responses, json } => cmd_report(&cfg, manifest.as_deref(), responses, *json),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn read_or(path: Option<&Path>, bundled: &str) -> Result<String, Failure> {
    path.map_or_else(|| Ok(bundled.to_string()), read_text)
}

enum Table {
    Bundled,
    Owned(MoraTable),
}

impl Table {
    fn load(cfg: &PipelineConfig) -> Result<Self, Failure> {
        Ok(match &cfg.paths.mora_table {
            Some(p) => Table::Owned(MoraTable::load(p)?),
            None => Table::Bundled,
        })
    }

    fn get(&self) -> &MoraTable {
        match self {
            Table::Bundled => MoraTable::bundled(),
            Table::Owned(t) => t,
        }
    }
}

#[derive(Serialize)]
struct GenerationFile<'a> {
    rng_seed: u64,
    model: &'a str,
    temperature: f64,
    network_calls: usize,
    report: &'a GenerationBatchReport,
}

fn cmd_generate(
    cfg: &PipelineConfig,
    out: Option<&Path>,
    regular: Option<usize>,
    phrase_free: Option<usize>,
) -> Result<i32, Failure> {
    let dict_path = cfg.paths.dictionary.as_deref().ok_or(ConfigError::Required("paths.dictionary".into()))?;
    let dict = load_dictionary(dict_path, cfg.paths.blocklist.as_deref())?;
    let catalog = match &cfg.paths.nv_catalog {
        Some(p) => PhraseCatalog::load(p)?,
        None => PhraseCatalog::bundled(),
    };
    let n = cfg.generation.exemplars;
    let exemplars = match &cfg.paths.exemplars {
        Some(p) => load_exemplars(p, n)?,
        None => parse_exemplars(BUNDLED_EXEMPLARS, n)?,
    };
    let regular_text = read_or(cfg.paths.instruction_regular.as_deref(), BUNDLED_INSTRUCTION_REGULAR)?;
    let phrase_free_text = read_or(cfg.paths.instruction_phrase_free.as_deref(), BUNDLED_INSTRUCTION_PHRASE_FREE)?;
    let prompts = PromptSources {
        instruction_regular: &regular_text,
        instruction_phrase_free: &phrase_free_text,
        exemplars: &exemplars,
        exemplar_count: n,
    };
    let counts = GenerationCounts {
        regular: regular.unwrap_or(cfg.generation.regular_per_emotion),
        phrase_free: phrase_free.unwrap_or(cfg.generation.phrase_free_per_emotion),
    };
    let routing = EmotionPolarityRouting::with_overrides(&cfg.generation.routing);
    let specs = plan_generation(&dict, &catalog, &prompts, &routing, counts, cfg.seed)?;

    let key = Secret::from_env(&cfg.llm.api_key_env)?;
    let cache = ResponseCache::open(cfg.cache_dir())?;
    let client = LlmClient::new(cfg.llm.clone(), key, Some(cache))?;
    let (scripts, report) = run_batch(&client, &specs, cfg.llm.concurrency)?;

    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir().join("candidates.jsonl"));
    write_scripts(&out, &scripts)?;
    let report_path = out.with_file_name("generation_report.json");
    write_json(
        &report_path,
        &GenerationFile {
            rng_seed: cfg.seed,
            model: &cfg.llm.model,
            temperature: cfg.llm.temperature,
            network_calls: client.network_calls(),
            report: &report,
        },
    )?;
    println!(
        "requested {} returned {} rejected {} deduplicated {} cached {} failed {} network calls {}",
        report.requested,
        report.returned,
        report.rejected,
        report.deduplicated,
        report.cached_hits,
        report.failures,
        client.network_calls()
    );
    println!("wrote {} candidates to {}", scripts.len(), out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ScoreFile<'a> {
    rng_seed: u64,
    backend: BackendKind,
    report: &'a ScoreReport,
}

fn backend(cfg: &PipelineConfig, scores: Option<&Path>) -> Result<ScorerBackend, Failure> {
    Ok(match cfg.scorer.backend {
        BackendKind::Baseline => ScorerBackend::LexiconBaseline(match &cfg.paths.baseline_keywords {
            Some(p) => BaselineScorer::parse(&read_text(p)?),
            None => BaselineScorer::bundled(),
        }),
        BackendKind::Precomputed => {
            let path = scores
                .map(Path::to_path_buf)
                .or_else(|| cfg.scorer.scores.clone())
                .ok_or(ConfigError::Required("scorer.scores (or --scores)".into()))?;
            ScorerBackend::PrecomputedFile(path)
        }
        BackendKind::Remote => ScorerBackend::RemoteHttp(
            RemoteScorer::new(cfg.scorer.url.clone())
                .with_batch_size(cfg.scorer.batch_size)
                .with_timeout(std::time::Duration::from_secs(cfg.scorer.timeout_secs.max(1))),
        ),
    })
}

fn cmd_score(
    cfg: &PipelineConfig,
    candidates: Option<&Path>,
    scores: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    let input = candidates.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir().join("candidates.jsonl"));
    let scripts = read_scripts(&input)?;
    let backend = backend(cfg, scores)?;
    let (scored, report) = score_candidates(&scripts, &backend)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir().join("scored.jsonl"));
    write_scripts(&out, &scored)?;
    write_json(
        &out.with_file_name("score_report.json"),
        &ScoreFile {
            rng_seed: cfg.seed,
            backend: cfg.scorer.backend,
            report: &report,
        },
    )?;
    for (id, reason) in &report.failed {
        eprintln!("not scored: {id}: {reason}");
    }
    println!("scored {} of {} candidates with the {} backend", scored.len(), scripts.len(), cfg.scorer.backend);
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize, serde::Deserialize)]
pub struct PlanFile {
    pub rng_seed: u64,
    pub tiers: Vec<QuotaConfig>,
    pub plan: SelectionPlan,
    pub audit: AuditReport,
}

fn cmd_select(
    cfg: &PipelineConfig,
    scored: Option<&Path>,
    fillers: Option<&Path>,
    presets: &[String],
    scale: Option<usize>,
    out_dir: Option<&Path>,
) -> Result<i32, Failure> {
    let input = scored.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir().join("scored.jsonl"));
    let scripts = read_scripts(&input)?;
    let filler_path = fillers.map(Path::to_path_buf).or_else(|| cfg.selection.fillers.clone());
    let filler_scripts = match &filler_path {
        Some(p) => read_scripts(p)?,
        None => Vec::new(),
    };
    let mut sel = cfg.selection.clone();
    if !presets.is_empty() {
        sel.presets = presets.to_vec();
        sel.custom.clear();
    }
    if let Some(s) = scale {
        if s == 0 {
            return Err(Failure::new(EXIT_USAGE, "--scale must be at least 1"));
        }
        sel.scale = s;
    }
    let tiers = sel.tiers()?;
    let table = Table::load(cfg)?;
    let SelectionOutcome { plan, audit } =
        run_selection(&scripts, &filler_scripts, &tiers, sel.max_injections, &cfg.entropy(), table.get())?;

    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir());
    let plan_path = dir.join("plan.json");
    let file = PlanFile {
        rng_seed: cfg.seed,
        tiers: tiers.clone(),
        plan,
        audit,
    };
    write_json(&plan_path, &file)?;

    for t in &file.plan.tiers {
        println!("{}: {} scripts", t.name, t.total());
    }
    for s in &file.plan.swaps {
        println!(
            "injected {} for /{}/ into {} {}/{}, evicting {}",
            s.inserted, s.phoneme, s.tier, s.emotion, s.session, s.evicted
        );
    }
    let cov = &file.plan.coverage;
    println!("entropy {} -> {}", cov.entropy_before, cov.entropy_after);
    println!("gaps ({}): {}", cov.gaps_after.len(), join_phones(&cov.gaps_after));
    if !cov.unphonemized.is_empty() {
        eprintln!("warning: {} selected scripts lack a kana reading and were left out of coverage", cov.unphonemized.len());
    }

    if !file.plan.is_feasible() {
        for (tier, e, s, n) in file.plan.deficits() {
            eprintln!("deficit: {tier} {e}/{s} short by {n}");
        }
        eprintln!("plan is infeasible; wrote {}", plan_path.display());
        return Ok(EXIT_INFEASIBLE);
    }
    if !file.audit.is_clean() {
        for v in &file.audit.violations {
            eprintln!("audit: {v}");
        }
        return Ok(EXIT_INFEASIBLE);
    }
    let all: Vec<Script> = scripts.into_iter().chain(filler_scripts).collect();
    let manifest_path = dir.join("manifest.json");
    let m = write_manifest(&cfg.name, &file.plan, &all, cfg.seed, &manifest_path)?;
    println!("wrote {} scripts to {}", m.records.len(), manifest_path.display());
    Ok(EXIT_OK)
}

fn join_phones(set: &std::collections::BTreeSet<Phoneme>) -> String {
    set.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(" ")
}

struct Corpus {
    name: String,
    seqs: Vec<PhonemeSequence>,
    skipped: usize,
}

fn phonemize_all(texts: impl IntoIterator<Item = String>, table: &MoraTable, origin: &str) -> (Vec<PhonemeSequence>, usize) {
    let mut seqs = Vec::new();
    let mut skipped = 0;
    for t in texts {
        match table.phonemize(&t) {
            Ok(p) => seqs.push(p),
            Err(e) => {
                log::warn!("{origin}: skipping '{t}': {e}");
                skipped += 1;
            }
        }
    }
    (seqs, skipped)
}

fn load_corpus(path: &Path, phonemes: bool, table: &MoraTable) -> Result<Corpus, Failure> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let origin = path.display().to_string();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let (seqs, skipped) = match ext {
        "json" => {
            let m = CorpusManifest::read(path)?;
            phonemize_all(m.records.into_iter().map(|r| r.reading.unwrap_or(r.text)), table, &origin)
        }
        "jsonl" => {
            let scripts = read_scripts(path)?;
            phonemize_all(scripts.iter().map(|s| s.phonetic_text().to_string()), table, &origin)
        }
        _ => {
            let text = read_text(path)?;
            let lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
            if phonemes {
                let mut seqs = Vec::new();
                for (i, l) in lines.enumerate() {
                    let seq = PhonemeSequence::parse(l)
                        .map_err(|e| Failure::new(EXIT_USAGE, format!("{origin}: line {}: {e}", i + 1)))?;
                    seqs.push(seq);
                }
                (seqs, 0)
            } else {
                phonemize_all(lines.map(str::to_string), table, &origin)
            }
        }
    };
    Ok(Corpus { name, seqs, skipped })
}

#[derive(Serialize)]
struct CoverageSummary {
    name: String,
    scripts: usize,
    skipped: usize,
    entropy: f64,
    arrangements: Vec<usize>,
    gaps: Vec<Phoneme>,
}

fn summarize(c: &Corpus, entropy: &EntropyConfig) -> (CoverageSummary, crate::phoneme::NGramStats) {
    let stats = count_ngrams(&c.seqs, entropy.max_order());
    let summary = CoverageSummary {
        name: c.name.clone(),
        scripts: c.seqs.len(),
        skipped: c.skipped,
        entropy: extended_entropy(&stats, entropy),
        arrangements: (1..=entropy.max_order()).map(|m| stats.arrangements(m)).collect(),
        gaps: coverage_gaps(&stats, &Phoneme::inventory()).into_iter().collect(),
    };
    (summary, stats)
}

fn cmd_analyze(cfg: &PipelineConfig, inputs: &[PathBuf], phonemes: bool, json: bool) -> Result<i32, Failure> {
    let table = Table::load(cfg)?;
    let entropy = cfg.entropy();
    let mut summaries = Vec::new();
    let mut stats = Vec::new();
    for path in inputs {
        let corpus = load_corpus(path, phonemes, table.get())?;
        let (s, st) = summarize(&corpus, &entropy);
        summaries.push(s);
        stats.push(st);
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&summaries).expect("summary serializes"));
        return Ok(EXIT_OK);
    }
    let mut out = String::new();
    for s in &summaries {
        let _ = writeln!(out, "{}: {} scripts ({} skipped)", s.name, s.scripts, s.skipped);
        let _ = writeln!(out, "  S = {}", s.entropy);
        let gaps: Vec<&str> = s.gaps.iter().map(|p| p.as_str()).collect();
        let _ = writeln!(out, "  gaps ({}): {}", gaps.len(), gaps.join(" "));
    }
    let named: Vec<(&str, &crate::phoneme::NGramStats)> =
        summaries.iter().map(|s| s.name.as_str()).zip(stats.iter()).collect();
    out.push_str("N_m\n");
    out.push_str(&arrangement_table(&named, entropy.max_order()));
    print!("{out}");
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ManifestSummary {
    name: String,
    rng_seed: u64,
    sets: Vec<SetSummary>,
    swaps: usize,
    phrases: Vec<(Emotion, String, usize)>,
    coverage: CoverageSummary,
}

#[derive(Serialize)]
struct SetSummary {
    set: String,
    counts: Vec<(Emotion, usize, usize)>,
    total: usize,
}

fn cmd_report(cfg: &PipelineConfig, manifest: Option<&Path>, responses: &[PathBuf], json: bool) -> Result<i32, Failure> {
    if manifest.is_none() && responses.is_empty() {
        return Err(Failure::new(EXIT_USAGE, "nothing to report: give a manifest and/or --responses"));
    }
    let mut text = String::new();
    let mut doc = serde_json::Map::new();
    if let Some(path) = manifest {
        let m = CorpusManifest::read(path)?;
        let mut sets: Vec<String> = Vec::new();
        for r in &m.records {
            if !sets.contains(&r.set) {
                sets.push(r.set.clone());
            }
        }
        let set_summaries: Vec<SetSummary> = sets
            .iter()
            .map(|set| {
                let counts: Vec<(Emotion, usize, usize)> = Emotion::ALL
                    .into_iter()
                    .map(|e| {
                        let n = |s: Session| m.records.iter().filter(|r| &r.set == set && r.emotion == e && r.session == s).count();
                        (e, n(Session::Regular), n(Session::PhraseFree))
                    })
                    .collect();
                SetSummary {
                    set: set.clone(),
                    total: m.count(set),
                    counts,
                }
            })
            .collect();
        let mut phrases: std::collections::BTreeMap<(Emotion, String), usize> = Default::default();
        for r in &m.records {
            if let Some(p) = &r.nv_phrase {
                *phrases.entry((r.emotion, p.clone())).or_default() += 1;
            }
        }
        let table = Table::load(cfg)?;
        let (seqs, skipped) = phonemize_all(
            m.records.iter().map(|r| r.reading.clone().unwrap_or_else(|| r.text.clone())),
            table.get(),
            &path.display().to_string(),
        );
        let (coverage, _) = summarize(&Corpus { name: m.name.clone(), seqs, skipped }, &cfg.entropy());
        let summary = ManifestSummary {
            name: m.name.clone(),
            rng_seed: m.rng_seed,
            swaps: m.records.iter().filter(|r| r.rare_phoneme_swap).count(),
            phrases: phrases.into_iter().map(|((e, p), n)| (e, p, n)).collect(),
            sets: set_summaries,
            coverage,
        };
        let _ = writeln!(text, "{} (seed {})", summary.name, summary.rng_seed);
        for s in &summary.sets {
            let _ = writeln!(text, "{}: {} scripts", s.set, s.total);
            let _ = writeln!(text, "  {:<10} {:>8} {:>12}", "emotion", "regular", "phrase_free");
            for (e, r, p) in &s.counts {
                let _ = writeln!(text, "  {:<10} {:>8} {:>12}", e.as_str(), r, p);
            }
        }
        let _ = writeln!(text, "rare-phoneme swaps: {}", summary.swaps);
        let _ = writeln!(text, "phrases:");
        for (e, p, n) in &summary.phrases {
            let _ = writeln!(text, "  {:<10} {p} {n}", e.as_str());
        }
        let _ = writeln!(text, "S = {}", summary.coverage.entropy);
        let gaps: Vec<&str> = summary.coverage.gaps.iter().map(|p| p.as_str()).collect();
        let _ = writeln!(text, "gaps ({}): {}", gaps.len(), gaps.join(" "));
        doc.insert("manifest".into(), serde_json::to_value(&summary).expect("summary serializes"));
    }
    if !responses.is_empty() {
        let mut all = Vec::new();
        let mut per_file = Vec::new();
        for p in responses {
            let r = load_responses(p)?;
            let acc = recognition_accuracy(&r)?;
            let _ = writeln!(text, "{}: {:.2}% ({} / {})", p.display(), acc.overall, acc.correct, acc.total);
            for (e, v) in &acc.per_emotion {
                let _ = writeln!(text, "  {:<10} {v:.2}%", e.as_str());
            }
            per_file.push((p.display().to_string(), acc));
            all.extend(r);
        }
        doc.insert("accuracy".into(), serde_json::to_value(&per_file).expect("report serializes"));
        if responses.len() > 1 {
            let acc = recognition_accuracy(&all)?;
            let _ = writeln!(text, "all: {:.2}% ({} / {})", acc.overall, acc.correct, acc.total);
            doc.insert("overall".into(), serde_json::to_value(&acc).expect("report serializes"));
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&doc).expect("report serializes"));
    } else {
        print!("{text}");
    }
    Ok(EXIT_OK)
}

/// Loads a plan file written by `select`.
pub fn read_plan(path: &Path) -> Result<PlanFile, CorpusError> {
    read_json(path)
}

