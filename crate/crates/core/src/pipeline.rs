//! The streaming parse loop.
//!
//! Per record: strict tree match, otherwise extract a template and try, in
//! order, the template pool, a merge with a loosely matching cluster, and
//! finally a new cluster.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::extractor::{Degradation, Extractor};
use crate::ingest::{Dataset, LogRecord};
use crate::parse_core::{
    check_merge, derive_syntax_template, ClusterId, MatchResult, MemberId, ParseError, ParserState,
    Violation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    StrictMatched,
    PoolMatched,
    Merged,
    Created,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseOutcome {
    pub record: LogRecord,
    pub cluster_id: ClusterId,
    pub template_text: String,
    pub action: Action,
}

/// One line of the outcomes JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeLine {
    pub line_id: u64,
    pub cluster_id: ClusterId,
    pub template: String,
    pub action: Action,
}

impl From<&ParseOutcome> for OutcomeLine {
    fn from(o: &ParseOutcome) -> Self {
        OutcomeLine {
            line_id: o.record.line_id,
            cluster_id: o.cluster_id,
            template: o.template_text.clone(),
            action: o.action,
        }
    }
}

pub fn outcomes_to_jsonl<'a>(outcomes: impl IntoIterator<Item = &'a ParseOutcome>) -> String {
    outcomes
        .into_iter()
        .map(|o| serde_json::to_string(&OutcomeLine::from(o)).expect("outcome serializes") + "\n")
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub source: String,
    pub line_id: u64,
    pub content: String,
    pub reason: String,
}

impl DeadLetter {
    fn new(record: &LogRecord, reason: impl ToString) -> Self {
        DeadLetter {
            source: record.source.clone(),
            line_id: record.line_id,
            content: record.content.clone(),
            reason: reason.to_string(),
        }
    }
}

impl fmt::Display for DeadLetter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} line {}: {}", self.source, self.line_id, self.reason)
    }
}

impl std::error::Error for DeadLetter {}

/// Loose-match lists keyed by exact token sequence.
#[derive(Debug, Clone, Default)]
pub struct PartialMatchCache {
    entries: HashMap<String, (Vec<String>, Vec<ClusterId>)>,
    by_cluster: HashMap<ClusterId, HashSet<String>>,
    hits: u64,
}

impl PartialMatchCache {
    pub fn key<S: AsRef<str>>(tokens: &[S]) -> String {
        let mut key = String::new();
        for (i, t) in tokens.iter().enumerate() {
            if i > 0 {
                key.push('\u{1f}');
            }
            key.push_str(t.as_ref());
        }
        key
    }

    pub fn get(&mut self, key: &str) -> Option<&[ClusterId]> {
        let found = self.entries.get(key).map(|(_, ids)| ids.as_slice());
        if found.is_some() {
            self.hits += 1;
        }
        found
    }

    pub fn insert(&mut self, tokens: Vec<String>, clusters: Vec<ClusterId>) {
        let key = Self::key(&tokens);
        for id in &clusters {
            self.by_cluster.entry(*id).or_default().insert(key.clone());
        }
        self.entries.insert(key, (tokens, clusters));
    }

    /// Drops every entry that lists `cluster`.
    pub fn invalidate(&mut self, cluster: ClusterId) {
        for key in self.by_cluster.remove(&cluster).unwrap_or_default() {
            self.remove(&key);
        }
    }

    /// Drops entries whose token sequence `cluster` now loosely matches.
    pub fn invalidate_new(&mut self, state: &ParserState, cluster: ClusterId) {
        let Some(c) = state.cluster(cluster) else {
            return;
        };
        let stale: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, (tokens, _))| c.loose_overlap(tokens).is_some())
            .map(|(k, _)| k.clone())
            .collect();
        for key in stale {
            self.remove(&key);
        }
    }

    fn remove(&mut self, key: &str) {
        if let Some((_, ids)) = self.entries.remove(key) {
            for id in ids {
                if let Some(keys) = self.by_cluster.get_mut(&id) {
                    keys.remove(key);
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    /// Cached (tokens, clusters) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[String], &[ClusterId])> {
        self.entries.values().map(|(t, c)| (t.as_slice(), c.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub strict_matched: usize,
    pub pool_matched: usize,
    pub merged: usize,
    pub created: usize,
}

impl ActionCounts {
    fn bump(&mut self, action: Action) {
        match action {
            Action::StrictMatched => self.strict_matched += 1,
            Action::PoolMatched => self.pool_matched += 1,
            Action::Merged => self.merged += 1,
            Action::Created => self.created += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub dataset: String,
    pub records: usize,
    pub clusters: usize,
    pub extractor_calls: u64,
    pub actions: ActionCounts,
    pub dead_letters: Vec<DeadLetter>,
    pub degradations: Vec<Degradation>,
    /// Kept out of serialized output so runs stay byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct StreamReport {
    pub outcomes: Vec<ParseOutcome>,
    pub summary: RunSummary,
}

pub struct Pipeline {
    state: ParserState,
    extractor: Extractor,
    cache: PartialMatchCache,
    dead_letters: Vec<DeadLetter>,
    audit_each_step: bool,
    audit_failures: Vec<(u64, Vec<Violation>)>,
}

impl Pipeline {
    pub fn new(extractor: Extractor) -> Self {
        Self::with_state(ParserState::new(), extractor)
    }

    pub fn with_state(state: ParserState, extractor: Extractor) -> Self {
        Pipeline {
            state,
            extractor,
            cache: PartialMatchCache::default(),
            dead_letters: Vec::new(),
            audit_each_step: false,
            audit_failures: Vec::new(),
        }
    }

    /// Runs a full consistency audit after every record. Slow; for tests.
    pub fn audited(extractor: Extractor) -> Self {
        let mut p = Self::with_state(ParserState::with_member_tracking(), extractor);
        p.audit_each_step = true;
        p
    }

    pub fn state(&self) -> &ParserState {
        &self.state
    }

    pub fn into_state(self) -> ParserState {
        self.state
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    pub fn cache(&self) -> &PartialMatchCache {
        &self.cache
    }

    pub fn dead_letters(&self) -> &[DeadLetter] {
        &self.dead_letters
    }

    /// Violations seen by the per-step audit, keyed by line id.
    pub fn audit_failures(&self) -> &[(u64, Vec<Violation>)] {
        &self.audit_failures
    }

    pub fn process_log(&mut self, record: &LogRecord) -> Result<ParseOutcome, DeadLetter> {
        let result = self.place(record);
        if let Err(letter) = &result {
            self.dead_letters.push(letter.clone());
        }
        if self.audit_each_step {
            let mut violations = self.state.audit();
            violations.extend(self.audit_cache());
            if !violations.is_empty() {
                self.audit_failures.push((record.line_id, violations));
            }
        }
        result
    }

    fn audit_cache(&self) -> Vec<Violation> {
        // cached lists must equal a fresh scan
        self.cache
            .iter()
            .filter(|(tokens, cached)| self.state.find_loose_matches(tokens) != *cached)
            .map(|(tokens, _)| Violation::CacheStale {
                tokens: tokens.join(" "),
            })
            .collect()
    }

    fn outcome(&self, record: &LogRecord, cluster_id: ClusterId, action: Action) -> ParseOutcome {
        let template_text = self
            .state
            .cluster(cluster_id)
            .map(|c| c.template.as_str().to_owned())
            .unwrap_or_default();
        ParseOutcome {
            record: record.clone(),
            cluster_id,
            template_text,
            action,
        }
    }

    fn place(&mut self, record: &LogRecord) -> Result<ParseOutcome, DeadLetter> {
        let member = MemberId::new(record.source.clone(), record.line_id);
        let tokens = &record.tokens;
        let fail = |e: ParseError| DeadLetter::new(record, e);

        if let Some(existing) = self.state.placement(&member) {
            // re-ingestion of an already placed record
            let matches = self
                .state
                .cluster(existing)
                .is_some_and(|c| c.strictly_matches(tokens));
            if !matches {
                return Err(DeadLetter::new(
                    record,
                    format!("member {member} already placed in {existing} with different content"),
                ));
            }
            return Ok(self.outcome(record, existing, Action::StrictMatched));
        }

        if let MatchResult::Strict(id) = self.state.search(tokens) {
            self.state.add_member(id, member, &record.content).map_err(fail)?;
            return Ok(self.outcome(record, id, Action::StrictMatched));
        }

        let extraction = self
            .extractor
            .extract(record, &self.state)
            .map_err(|e| DeadLetter::new(record, e))?;

        if let Some(id) = self.state.pool_lookup(&extraction.template) {
            self.state.add_syntax(id, extraction.syntax).map_err(fail)?;
            self.state.add_member(id, member, &record.content).map_err(fail)?;
            self.cache.invalidate(id);
            return Ok(self.outcome(record, id, Action::PoolMatched));
        }

        let key = PartialMatchCache::key(tokens);
        let candidates = match self.cache.get(&key) {
            Some(hit) if !hit.is_empty() => hit.to_vec(),
            _ => {
                let fresh = self.state.find_loose_matches(tokens);
                self.cache.insert(tokens.clone(), fresh.clone());
                fresh
            }
        };
        for id in candidates {
            let Some(cluster) = self.state.cluster(id) else {
                continue;
            };
            let Some(merged) = check_merge(tokens, cluster) else {
                continue;
            };
            if self.state.pool_lookup(&merged).is_some_and(|owner| owner != id) {
                continue;
            }
            let Ok(syntax) = derive_syntax_template(&merged, tokens) else {
                continue;
            };
            self.state.replace_template(id, merged).map_err(fail)?;
            self.state.add_syntax(id, syntax).map_err(fail)?;
            self.state.add_member(id, member, &record.content).map_err(fail)?;
            self.cache.invalidate(id);
            return Ok(self.outcome(record, id, Action::Merged));
        }

        let id = self
            .state
            .create_cluster(extraction.template, extraction.syntax, member, &record.content)
            .map_err(fail)?;
        self.cache.invalidate_new(&self.state, id);
        Ok(self.outcome(record, id, Action::Created))
    }

    /// Processes every record of `dataset` in order.
    pub fn run_stream(&mut self, dataset: &Dataset) -> StreamReport {
        let started = Instant::now();
        let calls_before = self.extractor.call_count();
        let letters_before = self.dead_letters.len();
        let degradations_before = self.extractor.degradations().len();
        let mut outcomes = Vec::with_capacity(dataset.len());
        let mut actions = ActionCounts::default();
        for record in &dataset.records {
            if let Ok(outcome) = self.process_log(record) {
                actions.bump(outcome.action);
                outcomes.push(outcome);
            }
        }
        let summary = RunSummary {
            dataset: dataset.name.clone(),
            records: dataset.len(),
            clusters: self.state.cluster_count(),
            extractor_calls: self.extractor.call_count() - calls_before,
            actions,
            dead_letters: self.dead_letters[letters_before..].to_vec(),
            degradations: self.extractor.degradations()[degradations_before..].to_vec(),
            wall_time: started.elapsed(),
        };
        StreamReport { outcomes, summary }
    }
}
