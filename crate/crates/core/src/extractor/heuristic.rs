use std::net::IpAddr;

use crate::parse_core::{LogTemplate, SyntaxTemplate, SyntaxToken};

/// Whether a raw token looks like a variable value.
pub fn is_variable(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
        || token.parse::<IpAddr>().is_ok()
        || is_hex(token)
        || token.contains('=')
        || token.contains('/')
}

fn is_hex(token: &str) -> bool {
    let digits = token
        .strip_prefix("0x")
        .or_else(|| token.strip_prefix("0X"))
        .unwrap_or(token);
    digits.len() >= 4 && digits.bytes().all(|b| b.is_ascii_hexdigit())
}

pub fn heuristic_syntax<S: AsRef<str>>(tokens: &[S]) -> SyntaxTemplate {
    SyntaxTemplate::new(
        tokens
            .iter()
            .map(|t| {
                let t = t.as_ref();
                if is_variable(t) {
                    SyntaxToken::Wildcard
                } else {
                    SyntaxToken::Literal(t.to_owned())
                }
            })
            .collect(),
    )
}

pub fn heuristic_template<S: AsRef<str>>(tokens: &[S]) -> LogTemplate {
    LogTemplate::from_syntax(&heuristic_syntax(tokens))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(s: &str) -> String {
        let toks: Vec<&str> = s.split_whitespace().collect();
        heuristic_template(&toks).as_str().to_owned()
    }

    // each rule checked on its own
    #[test]
    fn token_rules() {
        assert!(is_variable("10.0.0.1"));
        assert!(is_variable("blk_-1608999687919862906"));
        assert!(is_variable("::"));
        assert!(is_variable("fe80::abcd"));
        assert!(is_variable("deadbeef"));
        assert!(is_variable("0xCAFE"));
        assert!(is_variable("user=bob"));
        assert!(is_variable("/var/log"));
        assert!(!is_variable("abc"));
        assert!(!is_variable("connect"));
        assert!(!is_variable("to"));
        assert!(!is_variable("face_"));
    }

    #[test]
    fn examples() {
        assert_eq!(template("Failed to connect to 10.0.0.1"), "Failed to connect to <*>");
        assert_eq!(template("a b c"), "a b c");
        assert_eq!(template("took 10 ms from /a/b"), "took <*> ms from <*>");
        assert_eq!(template("x 1 2 y"), "x <*> y");
    }
}
