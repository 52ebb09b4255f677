use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::template::{derive_syntax_template, merge_keeps_enough, LogTemplate, SyntaxTemplate};
use super::tree::ParseTree;
use super::ParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u64);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemberId {
    pub source: String,
    pub line_id: u64,
}

impl MemberId {
    pub fn new(source: impl Into<String>, line_id: u64) -> Self {
        MemberId {
            source: source.into(),
            line_id,
        }
    }
}

impl fmt::Display for MemberId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source, self.line_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCluster {
    pub id: ClusterId,
    pub template: LogTemplate,
    /// Keyed by arity.
    pub syntax_templates: BTreeMap<usize, Vec<SyntaxTemplate>>,
    pub member_ids: Vec<MemberId>,
    /// Content of the first member; used when picking demonstrations.
    pub representative: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

impl LogCluster {
    pub fn syntax_for_arity(&self, arity: usize) -> &[SyntaxTemplate] {
        self.syntax_templates
            .get(&arity)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn all_syntax(&self) -> impl Iterator<Item = &SyntaxTemplate> {
        self.syntax_templates.values().flatten()
    }

    pub fn strictly_matches<S: AsRef<str>>(&self, tokens: &[S]) -> bool {
        self.syntax_for_arity(tokens.len())
            .iter()
            .any(|s| s.matches(tokens))
    }

    /// Best loose overlap over this cluster's templates of the query's arity.
    pub fn loose_overlap<S: AsRef<str>>(&self, tokens: &[S]) -> Option<usize> {
        self.syntax_for_arity(tokens.len())
            .iter()
            .filter_map(|s| s.loose_overlap(tokens))
            .max()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult {
    Strict(ClusterId),
    /// Ordered by descending literal overlap, then ascending id.
    Loose(Vec<ClusterId>),
    NoMatch,
}

/// Clusters, template pool and parse tree, mutated by a single writer.
#[derive(Debug, Clone, Default)]
pub struct ParserState {
    clusters: BTreeMap<ClusterId, LogCluster>,
    pool: BTreeMap<String, ClusterId>,
    tree: ParseTree,
    placement: HashMap<MemberId, ClusterId>,
    member_tokens: Option<HashMap<MemberId, Vec<String>>>,
    next_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PoolDeadCluster { template: String, cluster: ClusterId },
    PoolStaleKey { template: String, cluster: ClusterId },
    PoolMissing { cluster: ClusterId },
    ArityKey { cluster: ClusterId, key: usize, arity: usize },
    TreePathMissing { cluster: ClusterId, syntax: String },
    TreeDeadCluster { path: String, cluster: ClusterId },
    TreeDanglingRef { path: String, cluster: ClusterId },
    DuplicateMember { cluster: ClusterId, member: MemberId },
    MemberUnmatched { cluster: ClusterId, member: MemberId },
    PlacementMismatch { member: MemberId },
    CacheStale { tokens: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PoolDeadCluster { template, cluster } => {
                write!(f, "pool[{template:?}] points at missing cluster {cluster}")
            }
            Violation::PoolStaleKey { template, cluster } => {
                write!(f, "pool[{template:?}] -> {cluster}, but that is not its template")
            }
            Violation::PoolMissing { cluster } => write!(f, "template of {cluster} is not pooled"),
            Violation::ArityKey { cluster, key, arity } => {
                write!(f, "{cluster}: arity-{arity} syntax template stored under key {key}")
            }
            Violation::TreePathMissing { cluster, syntax } => {
                write!(f, "{cluster}: no tree path for syntax template {syntax:?}")
            }
            Violation::TreeDeadCluster { path, cluster } => {
                write!(f, "tree node {path:?} points at missing cluster {cluster}")
            }
            Violation::TreeDanglingRef { path, cluster } => {
                write!(f, "tree node {path:?} points at {cluster}, which has no such syntax template")
            }
            Violation::DuplicateMember { cluster, member } => {
                write!(f, "{cluster}: member {member} listed more than once")
            }
            Violation::MemberUnmatched { cluster, member } => {
                write!(f, "{cluster}: member {member} matches none of its syntax templates")
            }
            Violation::PlacementMismatch { member } => {
                write!(f, "member {member} placement index disagrees with cluster lists")
            }
            Violation::CacheStale { tokens } => {
                write!(f, "cached loose matches for {tokens:?} differ from a fresh scan")
            }
        }
    }
}

fn order_loose(mut scored: Vec<(ClusterId, usize)>) -> Vec<ClusterId> {
    scored.sort_by_key(|&(id, overlap)| (Reverse(overlap), id));
    scored.into_iter().map(|(id, _)| id).collect()
}

impl ParserState {
    pub fn new() -> Self {
        ParserState {
            next_id: 1,
            ..Default::default()
        }
    }

    /// Also keeps each member's tokens so `audit` can check them.
    pub fn with_member_tracking() -> Self {
        ParserState {
            member_tokens: Some(HashMap::new()),
            ..Self::new()
        }
    }

    pub fn tracks_members(&self) -> bool {
        self.member_tokens.is_some()
    }

    pub fn clusters(&self) -> impl ExactSizeIterator<Item = &LogCluster> {
        self.clusters.values()
    }

    pub fn cluster(&self, id: ClusterId) -> Option<&LogCluster> {
        self.clusters.get(&id)
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn pool(&self) -> &BTreeMap<String, ClusterId> {
        &self.pool
    }

    pub fn pool_lookup(&self, template: &LogTemplate) -> Option<ClusterId> {
        self.pool.get(template.as_str()).copied()
    }

    pub fn tree(&self) -> &ParseTree {
        &self.tree
    }

    pub fn placement(&self, member: &MemberId) -> Option<ClusterId> {
        self.placement.get(member).copied()
    }

    /// Immutable copy for concurrent readers.
    pub fn snapshot(&self) -> ParserState {
        self.clone()
    }

    /// Classifies `tokens` against the clusters reachable through the tree.
    pub fn search<S: AsRef<str>>(&self, tokens: &[S]) -> MatchResult {
        if tokens.is_empty() {
            return MatchResult::NoMatch;
        }
        let candidates: BTreeSet<ClusterId> = self
            .tree
            .walk(tokens, true)
            .into_iter()
            .flat_map(|r| r.clusters.iter().copied())
            .collect();
        self.classify(candidates, tokens)
    }

    fn classify<S: AsRef<str>>(
        &self,
        candidates: impl IntoIterator<Item = ClusterId>,
        tokens: &[S],
    ) -> MatchResult {
        let mut loose = Vec::new();
        for id in candidates {
            let Some(cluster) = self.clusters.get(&id) else {
                continue;
            };
            if cluster.strictly_matches(tokens) {
                // candidates arrive in ascending id order
                return MatchResult::Strict(id);
            }
            if let Some(overlap) = cluster.loose_overlap(tokens) {
                loose.push((id, overlap));
            }
        }
        if loose.is_empty() {
            MatchResult::NoMatch
        } else {
            MatchResult::Loose(order_loose(loose))
        }
    }

    /// Full registry scan for loosely aligning clusters, independent of the tree.
    pub fn find_loose_matches<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<ClusterId> {
        order_loose(
            self.clusters
                .values()
                .filter_map(|c| c.loose_overlap(tokens).map(|o| (c.id, o)))
                .collect(),
        )
    }

    pub fn create_cluster(
        &mut self,
        template: LogTemplate,
        syntax: SyntaxTemplate,
        member: MemberId,
        content: &str,
    ) -> Result<ClusterId, ParseError> {
        if let Some(owner) = self.pool_lookup(&template) {
            return Err(ParseError::PoolConflict {
                template: template.as_str().to_owned(),
                owner,
            });
        }
        if let Some(&cluster) = self.placement.get(&member) {
            return Err(ParseError::DuplicateMember { member, cluster });
        }
        let id = ClusterId(self.next_id.max(1));
        self.next_id = id.0 + 1;
        self.pool.insert(template.as_str().to_owned(), id);
        self.clusters.insert(
            id,
            LogCluster {
                id,
                template,
                syntax_templates: BTreeMap::new(),
                member_ids: Vec::new(),
                representative: content.to_owned(),
                embedding: None,
            },
        );
        self.add_syntax(id, syntax)?;
        self.add_member(id, member, content)?;
        Ok(id)
    }

    /// Appends a member. Re-adding a member already in this cluster is a no-op.
    pub fn add_member(
        &mut self,
        id: ClusterId,
        member: MemberId,
        content: &str,
    ) -> Result<bool, ParseError> {
        let cluster = self
            .clusters
            .get_mut(&id)
            .ok_or(ParseError::UnknownCluster(id))?;
        match self.placement.get(&member) {
            Some(&existing) if existing == id => return Ok(false),
            Some(&existing) => {
                return Err(ParseError::DuplicateMember {
                    member,
                    cluster: existing,
                })
            }
            None => {}
        }
        cluster.member_ids.push(member.clone());
        if let Some(tokens) = self.member_tokens.as_mut() {
            tokens.insert(
                member.clone(),
                content.split_whitespace().map(str::to_owned).collect(),
            );
        }
        self.placement.insert(member, id);
        Ok(true)
    }

    /// Registers a syntax template with a cluster and routes it in the tree.
    pub fn add_syntax(&mut self, id: ClusterId, syntax: SyntaxTemplate) -> Result<bool, ParseError> {
        let cluster = self
            .clusters
            .get_mut(&id)
            .ok_or(ParseError::UnknownCluster(id))?;
        if syntax.arity() == 0 {
            return Err(ParseError::EmptySyntax);
        }
        let bucket = cluster.syntax_templates.entry(syntax.arity()).or_default();
        if bucket.contains(&syntax) {
            return Ok(false);
        }
        self.tree.insert(&syntax, id);
        bucket.push(syntax);
        Ok(true)
    }

    /// Swaps a cluster's template, moving its pool key.
    pub fn replace_template(&mut self, id: ClusterId, template: LogTemplate) -> Result<(), ParseError> {
        match self.pool_lookup(&template) {
            Some(owner) if owner != id => {
                return Err(ParseError::PoolConflict {
                    template: template.as_str().to_owned(),
                    owner,
                })
            }
            _ => {}
        }
        let cluster = self
            .clusters
            .get_mut(&id)
            .ok_or(ParseError::UnknownCluster(id))?;
        if self.pool.get(cluster.template.as_str()) == Some(&id) {
            self.pool.remove(cluster.template.as_str());
        }
        self.pool.insert(template.as_str().to_owned(), id);
        cluster.template = template;
        Ok(())
    }

    pub fn set_embedding(&mut self, id: ClusterId, embedding: Vec<f32>) -> Result<(), ParseError> {
        self.clusters
            .get_mut(&id)
            .ok_or(ParseError::UnknownCluster(id))?
            .embedding = Some(embedding);
        Ok(())
    }

    /// Lists every broken invariant across tree, clusters and pool.
    pub fn audit(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for (template, &cluster) in &self.pool {
            match self.clusters.get(&cluster) {
                None => out.push(Violation::PoolDeadCluster {
                    template: template.clone(),
                    cluster,
                }),
                Some(c) if c.template.as_str() != template => out.push(Violation::PoolStaleKey {
                    template: template.clone(),
                    cluster,
                }),
                Some(_) => {}
            }
        }
        let mut seen_members: HashMap<&MemberId, ClusterId> = HashMap::new();
        for cluster in self.clusters.values() {
            if self.pool.get(cluster.template.as_str()) != Some(&cluster.id) {
                out.push(Violation::PoolMissing { cluster: cluster.id });
            }
            for (&key, list) in &cluster.syntax_templates {
                for syntax in list {
                    if syntax.arity() != key {
                        out.push(Violation::ArityKey {
                            cluster: cluster.id,
                            key,
                            arity: syntax.arity(),
                        });
                    }
                    let routed = self
                        .tree
                        .lookup(syntax)
                        .is_some_and(|node| node.cluster_refs().contains(&cluster.id));
                    if !routed {
                        out.push(Violation::TreePathMissing {
                            cluster: cluster.id,
                            syntax: syntax.to_string(),
                        });
                    }
                }
            }
            let mut local = HashSet::new();
            for member in &cluster.member_ids {
                if !local.insert(member) {
                    out.push(Violation::DuplicateMember {
                        cluster: cluster.id,
                        member: member.clone(),
                    });
                }
                if seen_members.insert(member, cluster.id).is_some_and(|c| c != cluster.id)
                    || self.placement.get(member) != Some(&cluster.id)
                {
                    out.push(Violation::PlacementMismatch {
                        member: member.clone(),
                    });
                }
                if let Some(tokens) = self.member_tokens.as_ref().and_then(|m| m.get(member)) {
                    if !cluster.strictly_matches(tokens) {
                        out.push(Violation::MemberUnmatched {
                            cluster: cluster.id,
                            member: member.clone(),
                        });
                    }
                }
            }
        }
        if self.placement.len() != seen_members.len() {
            for member in self.placement.keys().filter(|m| !seen_members.contains_key(m)) {
                out.push(Violation::PlacementMismatch {
                    member: member.clone(),
                });
            }
        }
        for (path, cluster) in self.tree.paths() {
            match self.clusters.get(&cluster) {
                None => out.push(Violation::TreeDeadCluster {
                    path: path.to_string(),
                    cluster,
                }),
                Some(c) if !c.syntax_for_arity(path.arity()).contains(&path) => {
                    out.push(Violation::TreeDanglingRef {
                        path: path.to_string(),
                        cluster,
                    })
                }
                Some(_) => {}
            }
        }
        out
    }

    pub fn to_document(&self) -> StateDocument {
        StateDocument {
            clusters: self.clusters.values().cloned().collect(),
            pool: self.pool.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        }
    }

    /// Rebuilds state (including the tree) from an exported document.
    pub fn from_document(doc: StateDocument) -> Result<Self, ParseError> {
        let mut state = ParserState::new();
        for cluster in doc.clusters {
            if state.clusters.contains_key(&cluster.id) {
                return Err(ParseError::Snapshot(format!("duplicate cluster id {}", cluster.id)));
            }
            for syntax in cluster.all_syntax() {
                state.tree.insert(syntax, cluster.id);
            }
            for member in &cluster.member_ids {
                state.placement.entry(member.clone()).or_insert(cluster.id);
            }
            state.next_id = state.next_id.max(cluster.id.0 + 1);
            state.clusters.insert(cluster.id, cluster);
        }
        state.pool = doc.pool;
        let violations = state.audit();
        if !violations.is_empty() {
            return Err(ParseError::Inconsistent(violations));
        }
        Ok(state)
    }

    pub fn to_json(&self) -> Result<String, ParseError> {
        serde_json::to_string_pretty(&self.to_document()).map_err(|e| ParseError::Snapshot(e.to_string()))
    }

    pub fn from_json(json: &str) -> Result<Self, ParseError> {
        let doc: StateDocument =
            serde_json::from_str(json).map_err(|e| ParseError::Snapshot(e.to_string()))?;
        Self::from_document(doc)
    }

    #[cfg(test)]
    pub(crate) fn pool_mut(&mut self) -> &mut BTreeMap<String, ClusterId> {
        &mut self.pool
    }

    #[cfg(test)]
    pub(crate) fn cluster_mut(&mut self, id: ClusterId) -> Option<&mut LogCluster> {
        self.clusters.get_mut(&id)
    }

    #[cfg(test)]
    pub(crate) fn member_tokens_mut(&mut self) -> Option<&mut HashMap<MemberId, Vec<String>>> {
        self.member_tokens.as_mut()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub clusters: Vec<LogCluster>,
    pub pool: BTreeMap<String, ClusterId>,
}

/// Generalizes the cluster's best-aligned syntax template against `tokens`.
///
/// Disagreeing literal positions become wildcards. The merge holds when at
/// least one literal survives and survivors cover at least half the arity.
pub fn check_merge<S: AsRef<str>>(tokens: &[S], cluster: &LogCluster) -> Option<LogTemplate> {
    let (best, overlap) = cluster
        .syntax_for_arity(tokens.len())
        .iter()
        .filter_map(|s| s.loose_overlap(tokens).map(|o| (s, o)))
        // first template wins ties
        .fold(None, |acc: Option<(&SyntaxTemplate, usize)>, (s, o)| match acc {
            Some((_, best)) if best >= o => acc,
            _ => Some((s, o)),
        })?;
    if !merge_keeps_enough(overlap, tokens.len()) {
        return None;
    }
    let merged = best.generalize(tokens)?;
    if &merged == best {
        return Some(cluster.template.clone());
    }
    Some(LogTemplate::from_syntax(&merged))
}

/// Whether `template` still covers `tokens` loosely after re-alignment.
pub fn covers<S: AsRef<str>>(template: &LogTemplate, tokens: &[S]) -> bool {
    derive_syntax_template(template, tokens).is_ok_and(|s| s.loose_overlap(tokens).is_some())
}
