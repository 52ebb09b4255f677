use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::llm::ChatMessage;
use crate::parse_core::{ClusterId, LogTemplate, ParserState};

/// A parameter type name with an example value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedExample {
    pub kind: String,
    pub example: String,
}

impl SeedExample {
    pub fn new(kind: &str, example: &str) -> Self {
        SeedExample {
            kind: kind.into(),
            example: example.into(),
        }
    }
}

pub fn default_seed_examples() -> Vec<SeedExample> {
    vec![
        SeedExample::new("timestamp", "2024-03-01T12:00:05.123Z"),
        SeedExample::new("ipv4 address", "192.168.10.21"),
        SeedExample::new("ipv6 address", "fe80::1ff:fe23:4567:890a"),
        SeedExample::new("port", "8080"),
        SeedExample::new("file path", "/var/log/hadoop/datanode.log"),
        SeedExample::new("url", "https://api.example.com/v1/items?page=2"),
        SeedExample::new("hex id", "0x7f3a9c2e"),
        SeedExample::new("uuid", "123e4567-e89b-12d3-a456-426614174000"),
        SeedExample::new("integer counter", "1024"),
        SeedExample::new("duration", "350ms"),
    ]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub content: String,
    pub template: LogTemplate,
}

pub const INSTRUCTIONS: &str = "\
You extract templates from log messages. Work through the message step by step:
1. Identify the variable parts of the message: values that would change between \
occurrences of the same event, such as timestamps, IP addresses, ports, file paths, \
URLs, identifiers, numbers and durations.
2. Classify each variable into a type (timestamp, IP address, path, id, number, \
duration, ...). Constant words and punctuation are not variables.
3. On the final line, output only the template: the message with each variable \
replaced by <*>, keeping every constant token unchanged.";

/// Extraction prompt: instructions, seed examples, demonstrations, query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionPrompt {
    pub instructions: String,
    pub seeds: Vec<SeedExample>,
    pub demonstrations: Vec<Demonstration>,
    pub query: String,
}

impl ExtractionPrompt {
    fn body(&self) -> String {
        let mut out = String::new();
        if !self.seeds.is_empty() {
            out.push_str("Variable types with example values:\n");
            for seed in &self.seeds {
                out.push_str(&format!("- {}: {}\n", seed.kind, seed.example));
            }
            out.push('\n');
        }
        if !self.demonstrations.is_empty() {
            out.push_str("Examples:\n");
            for demo in &self.demonstrations {
                out.push_str(&format!("Log: {}\nTemplate: {}\n", demo.content, demo.template));
            }
            out.push('\n');
        }
        out.push_str("Log: ");
        out.push_str(&self.query);
        out.push('\n');
        out
    }

    pub fn render(&self) -> String {
        format!("{}\n\n{}", self.instructions, self.body())
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage::system(self.instructions.clone()),
            ChatMessage::user(self.body()),
        ]
    }
}

pub fn build_prompt(query: &str, demos: &[Demonstration], seeds: &[SeedExample]) -> ExtractionPrompt {
    ExtractionPrompt {
        instructions: INSTRUCTIONS.to_owned(),
        seeds: seeds.to_vec(),
        demonstrations: demos.to_vec(),
        query: query.to_owned(),
    }
}

/// Jaccard similarity of two token sets as an exact fraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Jaccard {
    pub shared: usize,
    pub union: usize,
}

impl Jaccard {
    pub fn of<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> Self {
        let a: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
        let b: HashSet<&str> = b.iter().map(AsRef::as_ref).collect();
        Jaccard {
            shared: a.intersection(&b).count(),
            union: a.union(&b).count(),
        }
    }

    pub fn value(&self) -> f64 {
        if self.union == 0 {
            0.0
        } else {
            self.shared as f64 / self.union as f64
        }
    }
}

impl PartialOrd for Jaccard {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Jaccard {
    fn cmp(&self, other: &Self) -> Ordering {
        // a/b vs c/d without floats; empty unions count as zero
        let lhs = self.shared * other.union.max(1);
        let rhs = other.shared * self.union.max(1);
        lhs.cmp(&rhs)
    }
}

/// Top-`k` clusters by token-set Jaccard similarity to the query, using
/// each cluster's representative member.
pub fn select_demonstrations<S: AsRef<str>>(
    query_tokens: &[S],
    state: &ParserState,
    k: usize,
) -> Vec<Demonstration> {
    let mut ranked: Vec<(Jaccard, ClusterId, Demonstration)> = state
        .clusters()
        .map(|c| {
            let rep: Vec<&str> = c.representative.split_whitespace().collect();
            (
                Jaccard::of(query_tokens, &rep),
                c.id,
                Demonstration {
                    content: c.representative.clone(),
                    template: c.template.clone(),
                },
            )
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, _, d)| d).collect()
}
