use std::collections::{BTreeMap, BTreeSet};

use super::template::{SyntaxTemplate, SyntaxToken};
use super::ClusterId;

/// Prefix trie over syntax-template tokens. Wildcards get their own child.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseTree {
    root: Node,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Node {
    children: BTreeMap<SyntaxToken, Node>,
    cluster_refs: BTreeSet<ClusterId>,
}

impl Node {
    pub fn children(&self) -> &BTreeMap<SyntaxToken, Node> {
        &self.children
    }

    pub fn cluster_refs(&self) -> &BTreeSet<ClusterId> {
        &self.cluster_refs
    }
}

/// A terminal node reached while walking a query through the tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reached<'a> {
    pub clusters: &'a BTreeSet<ClusterId>,
    /// literal positions on the path that agree with the query
    pub overlap: usize,
    /// literal positions on the path that disagree
    pub mismatches: usize,
}

impl ParseTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Adds the path for `syntax` and points its last node at `cluster`.
    /// Idempotent.
    pub fn insert(&mut self, syntax: &SyntaxTemplate, cluster: ClusterId) {
        let mut node = &mut self.root;
        for token in syntax.tokens() {
            node = node.children.entry(token.clone()).or_default();
        }
        node.cluster_refs.insert(cluster);
    }

    /// Node at the end of the exact path for `syntax`, if present.
    pub fn lookup(&self, syntax: &SyntaxTemplate) -> Option<&Node> {
        syntax
            .tokens()
            .iter()
            .try_fold(&self.root, |node, token| node.children.get(token))
    }

    /// Walks `query` through the tree, following the matching literal child
    /// and the wildcard child at every step.
    ///
    /// With `loose` set, mismatching literal children are explored too, as
    /// long as the path can still keep a loose alignment with the query.
    pub fn walk<'a, S: AsRef<str>>(&'a self, query: &[S], loose: bool) -> Vec<Reached<'a>> {
        let mut out = Vec::new();
        self.walk_from(&self.root, query, 0, 0, 0, loose, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_from<'a, S: AsRef<str>>(
        &'a self,
        node: &'a Node,
        query: &[S],
        depth: usize,
        overlap: usize,
        mismatches: usize,
        loose: bool,
        out: &mut Vec<Reached<'a>>,
    ) {
        let n = query.len();
        if depth == n {
            if !node.cluster_refs.is_empty() {
                out.push(Reached {
                    clusters: &node.cluster_refs,
                    overlap,
                    mismatches,
                });
            }
            return;
        }
        let token = query[depth].as_ref();
        for (key, child) in &node.children {
            let (overlap, mismatches) = match key {
                SyntaxToken::Wildcard => (overlap, mismatches),
                SyntaxToken::Literal(s) if s == token => (overlap + 1, mismatches),
                SyntaxToken::Literal(_) if loose => (overlap, mismatches + 1),
                SyntaxToken::Literal(_) => continue,
            };
            if mismatches > 0 {
                let best = overlap + (n - depth - 1);
                if best == 0 || 2 * best < n {
                    continue;
                }
            }
            self.walk_from(child, query, depth + 1, overlap, mismatches, loose, out);
        }
    }

    /// Every (path, cluster) pair stored in the tree.
    pub fn paths(&self) -> Vec<(SyntaxTemplate, ClusterId)> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        collect(&self.root, &mut prefix, &mut out);
        out
    }

    pub fn node_count(&self) -> usize {
        fn count(node: &Node) -> usize {
            1 + node.children.values().map(count).sum::<usize>()
        }
        count(&self.root)
    }
}

fn collect(node: &Node, prefix: &mut Vec<SyntaxToken>, out: &mut Vec<(SyntaxTemplate, ClusterId)>) {
    for id in &node.cluster_refs {
        out.push((SyntaxTemplate::new(prefix.clone()), *id));
    }
    for (token, child) in &node.children {
        prefix.push(token.clone());
        collect(child, prefix, out);
        prefix.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syn(parts: &[Option<&str>]) -> SyntaxTemplate {
        SyntaxTemplate::new(
            parts.iter()
                .map(|t| match t {
                    Some(s) => SyntaxToken::Literal((*s).into()),
                    None => SyntaxToken::Wildcard,
                })
                .collect(),
        )
    }

    #[test]
    fn insert_is_idempotent() {
        let mut tree = ParseTree::new();
        let s = syn(&[Some("a"), None]);
        tree.insert(&s, ClusterId(1));
        let once = tree.clone();
        tree.insert(&s, ClusterId(1));
        assert_eq!(tree, once);
    }

    #[test]
    fn shared_prefix_branches() {
        let mut tree = ParseTree::new();
        tree.insert(&syn(&[Some("a"), None]), ClusterId(1));
        tree.insert(&syn(&[Some("a"), Some("b")]), ClusterId(2));
        let a = &tree.root().children()[&SyntaxToken::Literal("a".into())];
        assert_eq!(a.children().len(), 2);
        assert!(a.children().contains_key(&SyntaxToken::Wildcard));
        assert!(a.children().contains_key(&SyntaxToken::Literal("b".into())));
        assert_eq!(tree.paths().len(), 2);
    }

    #[test]
    fn walk_follows_wildcard_child() {
        let mut tree = ParseTree::new();
        tree.insert(&syn(&[Some("a"), None]), ClusterId(1));
        let reached = tree.walk(&["a", "z"], false);
        assert_eq!(reached.len(), 1);
        assert!(reached[0].clusters.contains(&ClusterId(1)));
        assert_eq!(reached[0].overlap, 1);
        assert!(tree.walk(&["b", "z"], false).is_empty());
        assert!(tree.walk(&["a"], false).is_empty());
    }

    #[test]
    fn loose_walk_tolerates_minority_mismatch() {
        let mut tree = ParseTree::new();
        tree.insert(&syn(&[Some("User"), Some("alice"), Some("login")]), ClusterId(1));
        let reached = tree.walk(&["User", "bob", "login"], true);
        assert_eq!(reached.len(), 1);
        assert_eq!((reached[0].overlap, reached[0].mismatches), (2, 1));
        assert!(tree.walk(&["User", "bob", "logout"], true).is_empty());
    }
}
