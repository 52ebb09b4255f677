//! Template extraction backends.
//!
//! `Remote` asks an OpenAI-compatible chat model with a variable-aware,
//! k-shot prompt and validates the answer by aligning it to the log.
//! Invalid answers are retried, then the record falls back to `Heuristic`.
//! `Oracle` replays ground-truth templates and exists for evaluation.

mod heuristic;
mod prompt;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, LogRecord};
use crate::llm::{ChatRequest, ChatTransport};
use crate::parse_core::{derive_syntax_template, LogTemplate, ParseError, ParserState, SyntaxTemplate};

pub use heuristic::{heuristic_syntax, heuristic_template, is_variable};
pub use prompt::{
    build_prompt, default_seed_examples, select_demonstrations, Demonstration, ExtractionPrompt, Jaccard,
    SeedExample, INSTRUCTIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Heuristic,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractorConfig {
    pub k_demonstrations: usize,
    pub seed_examples: Vec<SeedExample>,
    pub temperature: f64,
    pub max_retries: u32,
    pub model: String,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            k_demonstrations: 3,
            seed_examples: default_seed_examples(),
            temperature: 0.0,
            max_retries: 2,
            model: "gpt-4".into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("dataset `{0}` has no ground truth")]
    MissingTruth(String),
    #[error("no ground-truth template for line {0}")]
    MissingLine(u64),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub enum Backend {
    Remote(Box<dyn ChatTransport>),
    Heuristic,
    Oracle(HashMap<u64, String>),
}

impl Backend {
    pub fn kind(&self) -> BackendKind {
        match self {
            Backend::Remote(_) => BackendKind::Remote,
            Backend::Heuristic => BackendKind::Heuristic,
            Backend::Oracle(_) => BackendKind::Oracle,
        }
    }
}

impl std::fmt::Debug for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Remote(_) => f.write_str("Remote"),
            Backend::Heuristic => f.write_str("Heuristic"),
            Backend::Oracle(truth) => write!(f, "Oracle({} lines)", truth.len()),
        }
    }
}

/// Where a returned template came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Remote,
    Heuristic,
    Oracle,
    Fallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub template: LogTemplate,
    /// `template` aligned to the record's tokens.
    pub syntax: SyntaxTemplate,
    pub origin: Origin,
}

/// A record whose preferred backend could not produce a valid template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degradation {
    pub source: String,
    pub line_id: u64,
    pub reason: String,
}

#[derive(Debug)]
pub struct Extractor {
    backend: Backend,
    cfg: ExtractorConfig,
    calls: AtomicU64,
    degradations: Mutex<Vec<Degradation>>,
}

/// Template from the last non-empty line of a model answer.
pub fn parse_response(text: &str) -> Option<String> {
    let line = text.lines().rev().map(str::trim).find(|l| !l.is_empty())?;
    let line = match line.get(..9) {
        Some(head) if head.eq_ignore_ascii_case("template:") => line[9..].trim(),
        _ => line,
    };
    let line = line.trim_matches('`').trim();
    let line = match (line.strip_prefix('"'), line.ends_with('"')) {
        (Some(inner), true) if !inner.is_empty() => &inner[..inner.len() - 1],
        _ => line,
    };
    let line = line.trim();
    (!line.is_empty()).then(|| line.to_owned())
}

impl Extractor {
    pub fn new(backend: Backend, cfg: ExtractorConfig) -> Self {
        Extractor {
            backend,
            cfg,
            calls: AtomicU64::new(0),
            degradations: Mutex::new(Vec::new()),
        }
    }

    pub fn heuristic() -> Self {
        Self::new(Backend::Heuristic, ExtractorConfig::default())
    }

    pub fn remote(transport: impl ChatTransport + 'static, cfg: ExtractorConfig) -> Self {
        Self::new(Backend::Remote(Box::new(transport)), cfg)
    }

    /// Ground-truth replay. The dataset must carry truth.
    pub fn oracle(dataset: &Dataset) -> Result<Self, ExtractError> {
        let truth = dataset
            .truth
            .as_ref()
            .ok_or_else(|| ExtractError::MissingTruth(dataset.name.clone()))?;
        let map = truth
            .iter()
            .map(|e| (e.line_id, e.event_template.clone()))
            .collect();
        Ok(Self::new(Backend::Oracle(map), ExtractorConfig::default()))
    }

    pub fn kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.cfg
    }

    /// Number of `extract` invocations so far.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn degradations(&self) -> Vec<Degradation> {
        self.degradations.lock().expect("degradation lock").clone()
    }

    fn degrade(&self, record: &LogRecord, reason: String) {
        self.degradations.lock().expect("degradation lock").push(Degradation {
            source: record.source.clone(),
            line_id: record.line_id,
            reason,
        });
    }

    /// The request the remote backend sends for `record`.
    pub fn remote_request(&self, record: &LogRecord, state: &ParserState) -> ChatRequest {
        let demos = select_demonstrations(&record.tokens, state, self.cfg.k_demonstrations);
        let prompt = build_prompt(&record.content, &demos, &self.cfg.seed_examples);
        ChatRequest {
            model: self.cfg.model.clone(),
            temperature: self.cfg.temperature,
            messages: prompt.messages(),
        }
    }

    pub fn extract(&self, record: &LogRecord, state: &ParserState) -> Result<Extraction, ExtractError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.backend {
            Backend::Heuristic => Ok(self.heuristic_extraction(record, Origin::Heuristic)),
            Backend::Oracle(truth) => {
                let text = truth
                    .get(&record.line_id)
                    .ok_or(ExtractError::MissingLine(record.line_id))?;
                match aligned(text, &record.tokens) {
                    Ok((template, syntax)) => Ok(Extraction {
                        template,
                        syntax,
                        origin: Origin::Oracle,
                    }),
                    Err(e) => {
                        self.degrade(record, format!("ground truth does not align: {e}"));
                        Ok(self.heuristic_extraction(record, Origin::Fallback))
                    }
                }
            }
            Backend::Remote(transport) => {
                let request = self.remote_request(record, state);
                let mut last_problem = String::new();
                for _ in 0..=self.cfg.max_retries {
                    match transport.complete(&request) {
                        Ok(answer) => match parse_response(&answer) {
                            Some(text) => match aligned(&text, &record.tokens) {
                                Ok((template, syntax)) => {
                                    return Ok(Extraction {
                                        template,
                                        syntax,
                                        origin: Origin::Remote,
                                    })
                                }
                                Err(e) => last_problem = e.to_string(),
                            },
                            None => last_problem = "empty answer".into(),
                        },
                        Err(e) => last_problem = e.to_string(),
                    }
                }
                self.degrade(record, last_problem);
                Ok(self.heuristic_extraction(record, Origin::Fallback))
            }
        }
    }

    fn heuristic_extraction(&self, record: &LogRecord, origin: Origin) -> Extraction {
        let syntax = heuristic_syntax(&record.tokens);
        Extraction {
            template: LogTemplate::from_syntax(&syntax),
            syntax,
            origin,
        }
    }
}

fn aligned(text: &str, tokens: &[String]) -> Result<(LogTemplate, SyntaxTemplate), ParseError> {
    let template = LogTemplate::new(text)?;
    let syntax = derive_syntax_template(&template, tokens)?;
    Ok((template, syntax))
}
