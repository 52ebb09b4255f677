//! Command-line front end: `parse`, `evaluate`, `detect` and `report`.
//!
//! Settings come from flags, then a TOML config file (`--config`), then
//! `BABYLON_*` environment variables, then defaults; the first source that
//! sets a value wins.
//!
//! Exit codes:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | configuration, I/O or backend error       |
//! | 2    | input file missing (or bad usage)         |
//! | 3    | parsed ids do not cover the ground truth  |
//! | 4    | the normal-log vector store is empty      |

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::extractor::{BackendKind, Extractor, ExtractorConfig};
use crate::ingest::{load_raw_log, load_structured_csv, Dataset};
use crate::llm::{CannedChat, ChatTransport, HttpConfig, HttpChat, HttpEmbeddings};
use crate::metrics::evaluate;
use crate::parse_core::ParserState;
use crate::pipeline::{outcomes_to_jsonl, OutcomeLine, Pipeline};
use crate::rag::{
    classify, interpret, AnomalyJudge, AnomalyVerdict, Embedder, HashedEmbedder, KeywordStub, LlmJudge, Narrator,
    RagError, RemoteEmbedder, VectorStore, DEFAULT_TAU, DEFAULT_TOP_K,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MISSING_INPUT: i32 = 2;
pub const EXIT_COVERAGE: i32 = 3;
pub const EXIT_EMPTY_STORE: i32 = 4;

const DEFAULT_DIM: usize = 256;
const DEFAULT_EMBED_MODEL: &str = "text-embedding-3-small";

#[derive(Debug, Parser)]
#[command(name = "babylon", version, about = "Log template parsing and anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Settings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Parse a log into templates; writes outcomes.jsonl and summary.json.
    Parse,
    /// Score outcomes against a structured ground-truth CSV.
    Evaluate,
    /// Classify log lines as normal or abnormal against a store of normal logs.
    Detect,
    /// Summarize outcomes (and verdicts) as a text and JSON report.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorChoice {
    Remote,
    Heuristic,
    Oracle,
}

impl From<ExtractorChoice> for BackendKind {
    fn from(c: ExtractorChoice) -> Self {
        match c {
            ExtractorChoice::Remote => BackendKind::Remote,
            ExtractorChoice::Heuristic => BackendKind::Heuristic,
            ExtractorChoice::Oracle => BackendKind::Oracle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JudgeChoice {
    /// Abnormal iff the best retrieval score is below `--tau`.
    Stub,
    /// Ask a chat model.
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingChoice {
    Hashed,
    Remote,
}

/// Every setting, unset by default. Also the schema of the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// TOML file with any of these settings (kebab-case keys).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Log to parse or classify (raw log, or `*.csv` structured file);
    /// outcomes JSONL for `evaluate` and `report`.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Structured ground-truth CSV.
    #[arg(long, global = true)]
    pub truth: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub extractor: Option<ExtractorChoice>,
    /// Chat-completions URL for the remote extractor, LLM judge and narrator.
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Demonstrations per extraction prompt.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    #[arg(long, global = true)]
    pub max_retries: Option<u32>,
    /// Normal logs retrieved per query.
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Score threshold of the stub judge.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Write a parser state snapshot here after `parse`.
    #[arg(long, global = true)]
    pub state: Option<PathBuf>,
    /// Start `parse` from this snapshot.
    #[arg(long, global = true)]
    pub resume: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Canned chat responses (JSONL) used instead of the endpoint.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    /// Normal logs to build the vector store from.
    #[arg(long, global = true)]
    pub normal: Option<PathBuf>,
    /// Saved vector store to load (or to write with `--save-store`).
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[arg(long, global = true)]
    #[serde(default)]
    pub save_store: bool,
    #[arg(long, global = true, value_enum)]
    pub judge: Option<JudgeChoice>,
    #[arg(long, global = true, value_enum)]
    pub embedding: Option<EmbeddingChoice>,
    #[arg(long, global = true)]
    pub embed_endpoint: Option<String>,
    #[arg(long, global = true)]
    pub embed_model: Option<String>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Verdicts JSONL to include in `report`.
    #[arg(long, global = true)]
    pub verdicts: Option<PathBuf>,
}

impl Settings {
    /// Fills every unset field from `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        Settings {
            config: self.config.or(lower.config),
            input: self.input.or(lower.input),
            truth: self.truth.or(lower.truth),
            extractor: self.extractor.or(lower.extractor),
            endpoint: self.endpoint.or(lower.endpoint),
            model: self.model.or(lower.model),
            k: self.k.or(lower.k),
            temperature: self.temperature.or(lower.temperature),
            max_retries: self.max_retries.or(lower.max_retries),
            top_k: self.top_k.or(lower.top_k),
            tau: self.tau.or(lower.tau),
            state: self.state.or(lower.state),
            resume: self.resume.or(lower.resume),
            out: self.out.or(lower.out),
            fixtures: self.fixtures.or(lower.fixtures),
            normal: self.normal.or(lower.normal),
            store: self.store.or(lower.store),
            save_store: self.save_store || lower.save_store,
            judge: self.judge.or(lower.judge),
            embedding: self.embedding.or(lower.embedding),
            embed_endpoint: self.embed_endpoint.or(lower.embed_endpoint),
            embed_model: self.embed_model.or(lower.embed_model),
            dim: self.dim.or(lower.dim),
            verdicts: self.verdicts.or(lower.verdicts),
        }
    }

    pub fn from_toml(text: &str) -> Result<Settings, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// `BABYLON_ENDPOINT`, `BABYLON_MODEL`, `BABYLON_EXTRACTOR`, `BABYLON_OUT`,
    /// `BABYLON_EMBED_ENDPOINT`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Settings, String> {
        let extractor = match get("BABYLON_EXTRACTOR") {
            Some(v) => Some(ExtractorChoice::from_str(&v, true).map_err(|e| format!("BABYLON_EXTRACTOR: {e}"))?),
            None => None,
        };
        Ok(Settings {
            endpoint: get("BABYLON_ENDPOINT"),
            model: get("BABYLON_MODEL"),
            extractor,
            out: get("BABYLON_OUT").map(PathBuf::from),
            embed_endpoint: get("BABYLON_EMBED_ENDPOINT"),
            ..Settings::default()
        })
    }
}

/// Settings after defaults and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub input: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub extractor: BackendKind,
    pub endpoint: Option<String>,
    pub model: String,
    pub k: usize,
    pub temperature: f64,
    pub max_retries: u32,
    pub top_k: usize,
    pub tau: f64,
    pub state: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub out: PathBuf,
    pub fixtures: Option<PathBuf>,
    pub normal: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub save_store: bool,
    pub judge: JudgeChoice,
    pub embedding: EmbeddingChoice,
    pub embed_endpoint: Option<String>,
    pub embed_model: String,
    pub dim: usize,
    pub verdicts: Option<PathBuf>,
}

impl AppConfig {
    pub fn resolve(s: Settings) -> Result<AppConfig, String> {
        let defaults = ExtractorConfig::default();
        let cfg = AppConfig {
            input: s.input,
            truth: s.truth,
            extractor: s.extractor.unwrap_or(ExtractorChoice::Heuristic).into(),
            endpoint: s.endpoint,
            model: s.model.unwrap_or(defaults.model),
            k: s.k.unwrap_or(defaults.k_demonstrations),
            temperature: s.temperature.unwrap_or(defaults.temperature),
            max_retries: s.max_retries.unwrap_or(defaults.max_retries),
            top_k: s.top_k.unwrap_or(DEFAULT_TOP_K),
            tau: s.tau.unwrap_or(DEFAULT_TAU),
            state: s.state,
            resume: s.resume,
            out: s.out.unwrap_or_else(|| PathBuf::from(".")),
            fixtures: s.fixtures,
            normal: s.normal,
            store: s.store,
            save_store: s.save_store,
            judge: s.judge.unwrap_or(JudgeChoice::Stub),
            embedding: s.embedding.unwrap_or(EmbeddingChoice::Hashed),
            embed_endpoint: s.embed_endpoint,
            embed_model: s.embed_model.unwrap_or_else(|| DEFAULT_EMBED_MODEL.into()),
            dim: s.dim.unwrap_or(DEFAULT_DIM),
            verdicts: s.verdicts,
        };
        if !cfg.temperature.is_finite() || !(0.0..=2.0).contains(&cfg.temperature) {
            return Err(format!("temperature must be in [0, 2], got {}", cfg.temperature));
        }
        if cfg.top_k == 0 {
            return Err("top-k must be at least 1".into());
        }
        if !cfg.tau.is_finite() || !(-1.0..=1.0).contains(&cfg.tau) {
            return Err(format!("tau must be in [-1, 1], got {}", cfg.tau));
        }
        if cfg.dim == 0 {
            return Err("dim must be at least 1".into());
        }
        if cfg.embedding == EmbeddingChoice::Remote && cfg.embed_endpoint.is_none() {
            return Err("remote embedding needs --embed-endpoint".into());
        }
        Ok(cfg)
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn outcomes_path(&self) -> PathBuf {
        self.input.clone().unwrap_or_else(|| self.out_file("outcomes.jsonl"))
    }

    /// Chat transport from `--fixtures` or `--endpoint`, if either is set.
    fn transport(&self) -> Result<Option<Box<dyn ChatTransport>>, Failure> {
        if let Some(path) = &self.fixtures {
            let canned = CannedChat::from_jsonl(path).map_err(Failure::error)?;
            return Ok(Some(Box::new(canned)));
        }
        Ok(self
            .endpoint
            .as_ref()
            .map(|url| Box::new(HttpChat::new(HttpConfig::new(url.clone()))) as Box<dyn ChatTransport>))
    }

    fn extractor_config(&self) -> ExtractorConfig {
        ExtractorConfig {
            k_demonstrations: self.k,
            temperature: self.temperature,
            max_retries: self.max_retries,
            model: self.model.clone(),
            ..ExtractorConfig::default()
        }
    }
}

/// Error carrying its exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn error(e: impl std::fmt::Display) -> Self {
        Failure::new(EXIT_ERROR, e.to_string())
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Failure::error(format!("{}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::error(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn require(path: Option<&PathBuf>, what: &str) -> Result<PathBuf, Failure> {
    let path = path.ok_or_else(|| Failure::new(EXIT_MISSING_INPUT, format!("missing {what}")))?;
    if !path.exists() {
        return Err(Failure::new(
            EXIT_MISSING_INPUT,
            format!("{what} not found: {}", path.display()),
        ));
    }
    Ok(path.clone())
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Structured CSV, or a raw log named after its file stem.
fn load_logs(path: &Path) -> Result<Dataset, Failure> {
    if is_csv(path) {
        return load_structured_csv(path).map_err(Failure::error);
    }
    let stem = path
        .file_stem()
        .map_or_else(|| "log".to_owned(), |s| s.to_string_lossy().into_owned());
    let (mut dataset, report) = load_raw_log(path, &stem).map_err(Failure::error)?;
    if report.skipped_blank > 0 {
        eprintln!("skipped {} blank lines in {}", report.skipped_blank, path.display());
    }
    dataset.name = stem;
    Ok(dataset)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::error(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::error(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn to_jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|i| serde_json::to_string(i).expect("serializes") + "\n")
        .collect()
}

pub fn cmd_parse(cfg: &AppConfig) -> Result<(), Failure> {
    let input = require(cfg.input.as_ref(), "input log")?;
    let dataset = load_logs(&input)?;
    let extractor = match cfg.extractor {
        BackendKind::Heuristic => Extractor::new(crate::extractor::Backend::Heuristic, cfg.extractor_config()),
        BackendKind::Oracle => {
            let truth = match &cfg.truth {
                Some(t) => load_structured_csv(require(Some(t), "truth file")?).map_err(Failure::error)?,
                None if dataset.truth.is_some() => dataset.clone(),
                None => return Err(Failure::new(EXIT_MISSING_INPUT, "oracle extractor needs --truth")),
            };
            Extractor::oracle(&truth).map_err(Failure::error)?
        }
        BackendKind::Remote => {
            let transport = cfg
                .transport()?
                .ok_or_else(|| Failure::error("remote extractor needs --endpoint or --fixtures"))?;
            Extractor::new(crate::extractor::Backend::Remote(transport), cfg.extractor_config())
        }
    };
    let state = match &cfg.resume {
        Some(path) => {
            let path = require(Some(path), "resume snapshot")?;
            let text = fs::read_to_string(&path).map_err(Failure::error)?;
            ParserState::from_json(&text).map_err(Failure::error)?
        }
        None => ParserState::new(),
    };
    let mut pipeline = Pipeline::with_state(state, extractor);
    let report = pipeline.run_stream(&dataset);

    write_atomic(&cfg.out_file("outcomes.jsonl"), outcomes_to_jsonl(&report.outcomes).as_bytes())?;
    let summary = serde_json::to_string_pretty(&report.summary).expect("summary serializes") + "\n";
    write_atomic(&cfg.out_file("summary.json"), summary.as_bytes())?;
    if let Some(path) = &cfg.state {
        let json = pipeline.state().to_json().map_err(Failure::error)?;
        write_atomic(path, json.as_bytes())?;
    }
    let s = &report.summary;
    eprintln!(
        "{}: {} records, {} clusters, {} extractor calls, {} dead letters in {:.2?}",
        s.dataset,
        s.records,
        s.clusters,
        s.extractor_calls,
        s.dead_letters.len(),
        s.wall_time
    );
    Ok(())
}

pub fn cmd_evaluate(cfg: &AppConfig) -> Result<(), Failure> {
    let outcomes_path = require(Some(&cfg.outcomes_path()), "outcomes file")?;
    let truth_path = require(cfg.truth.as_ref(), "truth file")?;
    let outcomes: Vec<OutcomeLine> = read_jsonl(&outcomes_path)?;
    let truth = load_structured_csv(&truth_path).map_err(Failure::error)?;
    let report = evaluate(&outcomes, &truth).map_err(|e| Failure::new(EXIT_COVERAGE, e.to_string()))?;
    write_atomic(&cfg.out_file("metrics.json"), (report.to_json() + "\n").as_bytes())?;
    print!("{}", report.table(&truth.name));
    Ok(())
}

fn embedder(cfg: &AppConfig) -> Box<dyn Embedder> {
    match cfg.embedding {
        EmbeddingChoice::Hashed => Box::new(HashedEmbedder::new(cfg.dim)),
        EmbeddingChoice::Remote => {
            let url = cfg.embed_endpoint.clone().expect("validated in resolve");
            Box::new(RemoteEmbedder::new(
                HttpEmbeddings::new(HttpConfig::new(url), cfg.embed_model.clone()),
                cfg.dim,
            ))
        }
    }
}

pub fn cmd_detect(cfg: &AppConfig) -> Result<(), Failure> {
    let input = require(cfg.input.as_ref(), "input log")?;
    let queries = load_logs(&input)?;
    let embedder = embedder(cfg);
    let store = match (&cfg.normal, &cfg.store) {
        (Some(normal), _) => {
            let normal = load_logs(&require(Some(normal), "normal log")?)?;
            let (store, skipped) = VectorStore::build(embedder.as_ref(), normal.records.iter().map(|r| r.content.as_str()));
            for (text, e) in &skipped {
                eprintln!("not stored ({e}): {text}");
            }
            if cfg.save_store {
                if let Some(path) = &cfg.store {
                    write_atomic(path, store.to_json().as_bytes())?;
                }
            }
            store
        }
        (None, Some(path)) => VectorStore::load(require(Some(path), "vector store")?).map_err(Failure::error)?,
        (None, None) => return Err(Failure::new(EXIT_MISSING_INPUT, "detect needs --normal or --store")),
    };
    if store.is_empty() {
        return Err(Failure::new(EXIT_EMPTY_STORE, RagError::EmptyStore.to_string()));
    }
    if store.dim() != embedder.dim() {
        return Err(Failure::error(format!(
            "store dimension {} does not match embedder dimension {}",
            store.dim(),
            embedder.dim()
        )));
    }
    let judge: Box<dyn AnomalyJudge> = match cfg.judge {
        JudgeChoice::Stub => Box::new(KeywordStub { tau: cfg.tau }),
        JudgeChoice::Llm => Box::new(LlmJudge {
            transport: cfg
                .transport()?
                .ok_or_else(|| Failure::error("llm judge needs --endpoint or --fixtures"))?,
            model: cfg.model.clone(),
            temperature: cfg.temperature,
        }),
    };
    let mut verdicts: Vec<AnomalyVerdict> = Vec::with_capacity(queries.len());
    for record in &queries.records {
        let verdict = classify(record, &store, embedder.as_ref(), judge.as_ref(), cfg.top_k).map_err(|e| match e {
            RagError::EmptyStore => Failure::new(EXIT_EMPTY_STORE, e.to_string()),
            other => Failure::error(other),
        })?;
        verdicts.push(verdict);
    }
    write_atomic(&cfg.out_file("verdicts.jsonl"), to_jsonl(&verdicts).as_bytes())?;
    let abnormal = verdicts
        .iter()
        .filter(|v| v.label == crate::rag::Label::Abnormal)
        .count();
    eprintln!("{} lines checked, {} abnormal", verdicts.len(), abnormal);
    Ok(())
}

pub fn cmd_report(cfg: &AppConfig) -> Result<(), Failure> {
    let outcomes_path = require(Some(&cfg.outcomes_path()), "outcomes file")?;
    let outcomes: Vec<OutcomeLine> = read_jsonl(&outcomes_path)?;
    let verdicts: Option<Vec<AnomalyVerdict>> = match &cfg.verdicts {
        Some(p) => Some(read_jsonl(&require(Some(p), "verdicts file")?)?),
        None => None,
    };
    let transport = cfg.transport()?;
    let narrator = transport.as_deref().map(|t| Narrator {
        transport: t,
        model: cfg.model.clone(),
    });
    let report = interpret(&outcomes, verdicts.as_deref(), narrator.as_ref());
    let text = report.render_text();
    write_atomic(&cfg.out_file("report.txt"), text.as_bytes())?;
    write_atomic(&cfg.out_file("report.json"), (report.to_json() + "\n").as_bytes())?;
    print!("{text}");
    Ok(())
}

/// Merges flags, config file and environment into a validated config.
pub fn resolve_settings(flags: Settings, env: impl Fn(&str) -> Option<String>) -> Result<AppConfig, Failure> {
    let file = match &flags.config {
        Some(path) => {
            let path = require(Some(path), "config file")?;
            let text = fs::read_to_string(&path).map_err(Failure::error)?;
            Settings::from_toml(&text).map_err(|e| Failure::error(format!("{}: {e}", path.display())))?
        }
        None => Settings::default(),
    };
    let env = Settings::from_env(env).map_err(Failure::error)?;
    AppConfig::resolve(flags.or(file).or(env)).map_err(Failure::error)
}

pub fn dispatch(command: Command, cfg: &AppConfig) -> Result<(), Failure> {
    match command {
        Command::Parse => cmd_parse(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Detect => cmd_detect(cfg),
        Command::Report => cmd_report(cfg),
    }
}

/// Runs one command and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_MISSING_INPUT } else { EXIT_OK };
        }
    };
    let result = resolve_settings(cli.flags, |k| std::env::var(k).ok().filter(|v| !v.is_empty()))
        .and_then(|cfg| dispatch(cli.command, &cfg));
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("babylon: {}", f.message);
            f.code
        }
    }
}
