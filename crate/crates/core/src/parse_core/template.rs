use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ParseError;

pub const PLACEHOLDER: &str = "<*>";

/// A log template as text, with `<*>` marking variable slots.
///
/// One placeholder may stand for several raw tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LogTemplate(String);

impl LogTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self, ParseError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(ParseError::BlankTemplate);
        }
        Ok(LogTemplate(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Renders a token mask, collapsing consecutive wildcards into one `<*>`.
    pub fn from_syntax(syntax: &SyntaxTemplate) -> Self {
        let mut parts: Vec<&str> = Vec::with_capacity(syntax.arity());
        for token in syntax.tokens() {
            match token {
                SyntaxToken::Literal(s) => parts.push(s),
                SyntaxToken::Wildcard => {
                    if parts.last() != Some(&PLACEHOLDER) {
                        parts.push(PLACEHOLDER);
                    }
                }
            }
        }
        LogTemplate(parts.join(" "))
    }

    pub fn placeholder_count(&self) -> usize {
        self.0.matches(PLACEHOLDER).count()
    }
}

impl fmt::Display for LogTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for LogTemplate {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LogTemplate {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        LogTemplate::new(text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SyntaxToken {
    Literal(String),
    Wildcard,
}

impl SyntaxToken {
    pub fn is_wildcard(&self) -> bool {
        matches!(self, SyntaxToken::Wildcard)
    }
}

// Serialized as a string for literals and `null` for wildcards, so a raw
// token that happens to read `<*>` stays unambiguous.
impl Serialize for SyntaxToken {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            SyntaxToken::Literal(s) => serializer.serialize_some(s),
            SyntaxToken::Wildcard => serializer.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for SyntaxToken {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match Option::<String>::deserialize(deserializer)? {
            Some(s) => SyntaxToken::Literal(s),
            None => SyntaxToken::Wildcard,
        })
    }
}

/// Token-granular literal/wildcard mask of a fixed arity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SyntaxTemplate {
    tokens: Vec<SyntaxToken>,
}

impl SyntaxTemplate {
    pub fn new(tokens: Vec<SyntaxToken>) -> Self {
        SyntaxTemplate { tokens }
    }

    /// Every token literal.
    pub fn literal<S: AsRef<str>>(tokens: &[S]) -> Self {
        SyntaxTemplate {
            tokens: tokens
                .iter()
                .map(|t| SyntaxToken::Literal(t.as_ref().to_owned()))
                .collect(),
        }
    }

    pub fn tokens(&self) -> &[SyntaxToken] {
        &self.tokens
    }

    pub fn arity(&self) -> usize {
        self.tokens.len()
    }

    pub fn literal_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.is_wildcard()).count()
    }

    /// Every literal position equals the log token. Arity must agree.
    pub fn matches<S: AsRef<str>>(&self, log: &[S]) -> bool {
        self.arity() == log.len()
            && self.tokens.iter().zip(log).all(|(t, l)| match t {
                SyntaxToken::Literal(s) => s == l.as_ref(),
                SyntaxToken::Wildcard => true,
            })
    }

    /// Number of literal positions that agree with `log`, or `None` on arity
    /// mismatch.
    pub fn literal_overlap<S: AsRef<str>>(&self, log: &[S]) -> Option<usize> {
        if self.arity() != log.len() {
            return None;
        }
        Some(
            self.tokens
                .iter()
                .zip(log)
                .filter(|(t, l)| matches!(t, SyntaxToken::Literal(s) if s == l.as_ref()))
                .count(),
        )
    }

    /// Positionwise generalization against `log`: literals that disagree
    /// become wildcards.
    pub fn generalize<S: AsRef<str>>(&self, log: &[S]) -> Option<SyntaxTemplate> {
        if self.arity() != log.len() {
            return None;
        }
        Some(SyntaxTemplate {
            tokens: self
                .tokens
                .iter()
                .zip(log)
                .map(|(t, l)| match t {
                    SyntaxToken::Literal(s) if s == l.as_ref() => t.clone(),
                    _ => SyntaxToken::Wildcard,
                })
                .collect(),
        })
    }

    /// Loose alignment: a strict match, or a generalization that keeps at
    /// least one literal and at least half of the positions literal.
    /// Returns the surviving literal count.
    pub fn loose_overlap<S: AsRef<str>>(&self, log: &[S]) -> Option<usize> {
        let overlap = self.literal_overlap(log)?;
        if overlap == self.literal_count() || merge_keeps_enough(overlap, self.arity()) {
            Some(overlap)
        } else {
            None
        }
    }
}

/// Surviving literals must be at least one and at least half the arity.
pub(crate) fn merge_keeps_enough(literals: usize, arity: usize) -> bool {
    literals >= 1 && 2 * literals >= arity
}

impl fmt::Display for SyntaxTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match t {
                SyntaxToken::Literal(s) => f.write_str(s)?,
                SyntaxToken::Wildcard => f.write_str(PLACEHOLDER)?,
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Piece<'a> {
    Literal(&'a str),
    Placeholder,
    // literal text fused with one or more placeholders, e.g. `size=<*>`
    Mixed(Vec<&'a str>),
}

impl<'a> Piece<'a> {
    fn parse(word: &'a str) -> Self {
        if word == PLACEHOLDER {
            Piece::Placeholder
        } else if word.contains(PLACEHOLDER) {
            Piece::Mixed(word.split(PLACEHOLDER).collect())
        } else {
            Piece::Literal(word)
        }
    }
}

/// Glob match where the gaps between `fragments` may hold any text.
fn glob_match(fragments: &[&str], text: &str) -> bool {
    let (first, rest) = match fragments.split_first() {
        Some(split) => split,
        None => return text.is_empty(),
    };
    let Some(mut remaining) = text.strip_prefix(first) else {
        return false;
    };
    let Some((last, middle)) = rest.split_last() else {
        return remaining.is_empty();
    };
    for fragment in middle {
        match remaining.find(fragment) {
            Some(idx) => remaining = &remaining[idx + fragment.len()..],
            None => return false,
        }
    }
    remaining.len() >= last.len() && remaining.ends_with(last)
}

/// Aligns a coarse template against concrete tokens.
///
/// Each placeholder takes the fewest whole tokens (at least one) that still
/// let the rest of the template align. Tokens covered by a placeholder, or by
/// a word that mixes literal text with a placeholder, become wildcards.
pub fn derive_syntax_template<S: AsRef<str>>(
    template: &LogTemplate,
    tokens: &[S],
) -> Result<SyntaxTemplate, ParseError> {
    let pieces: Vec<Piece<'_>> = template.as_str().split_whitespace().map(Piece::parse).collect();
    let tokens: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let mut spans = Vec::with_capacity(pieces.len());
    let mut dead = HashSet::new();
    if !align(&pieces, &tokens, 0, 0, &mut spans, &mut dead) {
        return Err(ParseError::Alignment {
            template: template.as_str().to_owned(),
            log: tokens.join(" "),
        });
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut at = 0;
    for (piece, span) in pieces.iter().zip(&spans) {
        match piece {
            Piece::Literal(word) => out.push(SyntaxToken::Literal((*word).to_owned())),
            Piece::Placeholder | Piece::Mixed(_) => {
                out.extend(std::iter::repeat_n(SyntaxToken::Wildcard, *span))
            }
        }
        at += span;
    }
    debug_assert_eq!(at, tokens.len());
    Ok(SyntaxTemplate::new(out))
}

fn align(
    pieces: &[Piece<'_>],
    tokens: &[&str],
    piece: usize,
    token: usize,
    spans: &mut Vec<usize>,
    dead: &mut HashSet<(usize, usize)>,
) -> bool {
    if piece == pieces.len() {
        return token == tokens.len();
    }
    // every remaining piece needs at least one token
    if tokens.len() - token < pieces.len() - piece || dead.contains(&(piece, token)) {
        return false;
    }
    let max_span = tokens.len() - token - (pieces.len() - piece - 1);
    let found = match &pieces[piece] {
        Piece::Literal(word) => {
            *word == tokens[token] && {
                spans.push(1);
                align(pieces, tokens, piece + 1, token + 1, spans, dead) || {
                    spans.pop();
                    false
                }
            }
        }
        Piece::Placeholder | Piece::Mixed(_) => (1..=max_span).any(|span| {
            if let Piece::Mixed(fragments) = &pieces[piece] {
                if !glob_match(fragments, &tokens[token..token + span].join(" ")) {
                    return false;
                }
            }
            spans.push(span);
            if align(pieces, tokens, piece + 1, token + span, spans, dead) {
                true
            } else {
                spans.pop();
                false
            }
        }),
    };
    if !found {
        dead.insert((piece, token));
    }
    found
}
