//! Clusters, template pool and the prefix parse tree.
//!
//! A log is classified against existing clusters as a strict match (every
//! literal agrees), a loose match (see [`SyntaxTemplate::loose_overlap`]) or
//! no match. Templates coming back from an extractor are aligned to the
//! concrete log to produce token-granular syntax templates, which are what the
//! tree routes on.

mod state;
mod template;
mod tree;

use thiserror::Error;

pub use state::{
    check_merge, covers, ClusterId, LogCluster, MatchResult, MemberId, ParserState, StateDocument,
    Violation,
};
pub use template::{derive_syntax_template, LogTemplate, SyntaxTemplate, SyntaxToken, PLACEHOLDER};
pub use tree::{Node, ParseTree, Reached};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("template is blank")]
    BlankTemplate,
    #[error("syntax template has no tokens")]
    EmptySyntax,
    #[error("template {template:?} does not align with log {log:?}")]
    Alignment { template: String, log: String },
    #[error("unknown cluster {0}")]
    UnknownCluster(ClusterId),
    #[error("template {template:?} already belongs to {owner}")]
    PoolConflict { template: String, owner: ClusterId },
    #[error("member {member} already placed in {cluster}")]
    DuplicateMember { member: MemberId, cluster: ClusterId },
    #[error("bad state snapshot: {0}")]
    Snapshot(String),
    #[error("state snapshot is inconsistent: {} violation(s)", .0.len())]
    Inconsistent(Vec<Violation>),
}
