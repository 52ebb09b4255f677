use serde::{Deserialize, Serialize};

use super::embed::Embedder;
use super::store::{RetrievalResult, VectorStore};
use super::RagError;
use crate::ingest::LogRecord;
use crate::llm::{ChatMessage, ChatRequest, ChatTransport, TransportError};

pub const QUESTION: &str =
    "Is the new log entry normal or abnormal, given the provided examples of normal logs?";

pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_TAU: f64 = 0.80;

/// Retrieved normal logs, then the new entry, then the question.
pub fn build_anomaly_prompt(query_log: &str, retrieved: &RetrievalResult) -> String {
    let mut out = String::from("Examples of normal log entries:\n");
    for (entry, _) in &retrieved.entries {
        out.push_str("- ");
        out.push_str(&entry.text);
        out.push('\n');
    }
    out.push_str("\nNew log entry:\n");
    out.push_str(query_log);
    out.push_str("\n\n");
    out.push_str(QUESTION);
    out.push('\n');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Abnormal,
    Undetermined,
}

/// "abnormal" is checked first since it contains "normal".
pub fn parse_label(answer: &str) -> Label {
    let lower = answer.to_lowercase();
    if lower.contains("abnormal") {
        Label::Abnormal
    } else if lower.contains("normal") {
        Label::Normal
    } else {
        Label::Undetermined
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub line_id: u64,
    pub label: Label,
    pub explanation: String,
    pub top_score: Option<f64>,
}

/// Something that answers the anomaly question.
pub trait AnomalyJudge {
    fn judge(&self, prompt: &str, retrieved: &RetrievalResult) -> Result<String, TransportError>;
}

/// Sends the prompt to a chat model.
pub struct LlmJudge<T> {
    pub transport: T,
    pub model: String,
    pub temperature: f64,
}

impl<T: ChatTransport> AnomalyJudge for LlmJudge<T> {
    fn judge(&self, prompt: &str, _retrieved: &RetrievalResult) -> Result<String, TransportError> {
        self.transport.complete(&ChatRequest {
            model: self.model.clone(),
            temperature: self.temperature,
            messages: vec![ChatMessage::user(prompt)],
        })
    }
}

/// Test double: abnormal iff the best retrieval score is below `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordStub {
    pub tau: f64,
}

impl Default for KeywordStub {
    fn default() -> Self {
        KeywordStub { tau: DEFAULT_TAU }
    }
}

impl AnomalyJudge for KeywordStub {
    fn judge(&self, _prompt: &str, retrieved: &RetrievalResult) -> Result<String, TransportError> {
        let best = retrieved.top_score().unwrap_or(f64::NEG_INFINITY);
        Ok(if best < self.tau {
            format!("abnormal: closest normal log scores {best:.4}, below {:.2}", self.tau)
        } else {
            format!("normal: closest normal log scores {best:.4}")
        })
    }
}

/// Embeds the record, retrieves its nearest normal logs and asks the judge.
pub fn classify(
    record: &LogRecord,
    store: &VectorStore,
    embedder: &dyn Embedder,
    judge: &dyn AnomalyJudge,
    top_k: usize,
) -> Result<AnomalyVerdict, RagError> {
    if store.is_empty() {
        return Err(RagError::EmptyStore);
    }
    let undetermined = |why: String| AnomalyVerdict {
        line_id: record.line_id,
        label: Label::Undetermined,
        explanation: why,
        top_score: None,
    };
    let query = match embedder.embed(&record.content) {
        Ok(q) => q,
        Err(e) => return Ok(undetermined(format!("embedding failed: {e}"))),
    };
    let retrieved = store.retrieve(&query, top_k.max(1))?;
    let prompt = build_anomaly_prompt(&record.content, &retrieved);
    Ok(match judge.judge(&prompt, &retrieved) {
        Ok(answer) => AnomalyVerdict {
            line_id: record.line_id,
            label: parse_label(&answer),
            explanation: answer,
            top_score: retrieved.top_score(),
        },
        Err(e) => AnomalyVerdict {
            top_score: retrieved.top_score(),
            ..undetermined(format!("judge failed: {e}"))
        },
    })
}
