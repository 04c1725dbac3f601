//! Answer grammar:
//!
//! ```text
//! [<think>REASONING</think>\n]score: <decimal>\nsuccess: <success|failure>\nsource: <policy|teleoperation>
//! ```
//!
//! The grammar is anchored at both ends; no trailing newline is accepted.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Source;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const FIELDS: [&str; 3] = ["score", "success", "source"];

/// A structured evaluation: quality score, success verdict, source verdict
/// and optional reasoning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutput {
    pub score: f64,
    pub success: bool,
    pub source: Source,
    pub think: Option<String>,
}

impl EvalOutput {
    /// Checks the score range and that the reasoning carries no think tags.
    pub fn is_valid(&self) -> bool {
        (1.0..=10.0).contains(&self.score)
            && self
                .think
                .as_deref()
                .is_none_or(|t| !t.contains(THINK_OPEN) && !t.contains(THINK_CLOSE))
    }
}

/// Ground-truth labels an output is rewarded against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub score: f64,
    pub success: bool,
    pub source: Source,
}

/// First grammar rule an input violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    MissingThink,
    MultipleThink,
    UnterminatedThink,
    MisplacedThink,
    MissingField(&'static str),
    UnexpectedLine(String),
    InvalidScore(String),
    ScoreOutOfRange,
    InvalidSuccess(String),
    InvalidSource(String),
    TrailingText,
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::MissingThink => f.write_str("missing think block"),
            ProtocolError::MultipleThink => f.write_str("more than one think block"),
            ProtocolError::UnterminatedThink => f.write_str("unterminated think block"),
            ProtocolError::MisplacedThink => f.write_str("think block must precede the answer"),
            ProtocolError::MissingField(name) => write!(f, "missing field: {name}"),
            ProtocolError::UnexpectedLine(l) => write!(f, "unexpected line: {l:?}"),
            ProtocolError::InvalidScore(s) => write!(f, "invalid score: {s:?}"),
            ProtocolError::ScoreOutOfRange => f.write_str("score out of range"),
            ProtocolError::InvalidSuccess(s) => write!(f, "invalid success value: {s:?}"),
            ProtocolError::InvalidSource(s) => write!(f, "invalid source value: {s:?}"),
            ProtocolError::TrailingText => f.write_str("trailing text after answer"),
        }
    }
}

impl std::error::Error for ProtocolError {}

/// Canonical text. The score uses the shortest decimal that reads back exactly.
pub fn serialize_output(o: &EvalOutput) -> String {
    let mut s = String::new();
    if let Some(t) = &o.think {
        s.push_str(THINK_OPEN);
        s.push_str(t);
        s.push_str(THINK_CLOSE);
        s.push('\n');
    }
    s.push_str(&format!(
        "score: {}\nsuccess: {}\nsource: {}",
        o.score,
        if o.success { "success" } else { "failure" },
        o.source
    ));
    s
}

fn parse_score(raw: &str) -> Result<f64, ProtocolError> {
    let (int, frac) = match raw.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (raw, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || frac.is_some_and(|f| !digits(f)) {
        return Err(ProtocolError::InvalidScore(raw.to_string()));
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| ProtocolError::InvalidScore(raw.to_string()))?;
    if !(1.0..=10.0).contains(&v) {
        return Err(ProtocolError::ScoreOutOfRange);
    }
    Ok(v)
}

pub fn parse_output(text: &str, require_cot: bool) -> Result<EvalOutput, ProtocolError> {
    if text.matches(THINK_OPEN).count() > 1 || text.matches(THINK_CLOSE).count() > 1 {
        return Err(ProtocolError::MultipleThink);
    }
    let (think, body) = match text.strip_prefix(THINK_OPEN) {
        Some(rest) => {
            let end = rest.find(THINK_CLOSE).ok_or(ProtocolError::UnterminatedThink)?;
            let body = rest[end + THINK_CLOSE.len()..]
                .strip_prefix('\n')
                .ok_or(ProtocolError::MisplacedThink)?;
            (Some(rest[..end].to_string()), body)
        }
        None => {
            if text.contains(THINK_OPEN) || text.contains(THINK_CLOSE) {
                return Err(ProtocolError::MisplacedThink);
            }
            (None, text)
        }
    };
    if require_cot && think.is_none() {
        return Err(ProtocolError::MissingThink);
    }

    let mut lines = body.split('\n');
    let mut values = [""; 3];
    for (i, key) in FIELDS.iter().enumerate() {
        let line = lines.next().ok_or(ProtocolError::MissingField(key))?;
        match line.strip_prefix(key).and_then(|r| r.strip_prefix(": ")) {
            Some(v) => values[i] = v,
            None => {
                let later = FIELDS[i + 1..]
                    .iter()
                    .any(|k| line.starts_with(&format!("{k}:")));
                return Err(if later || line.is_empty() {
                    ProtocolError::MissingField(key)
                } else {
                    ProtocolError::UnexpectedLine(line.to_string())
                });
            }
        }
    }
    if lines.next().is_some() {
        return Err(ProtocolError::TrailingText);
    }

    let score = parse_score(values[0])?;
    let success = match values[1] {
        "success" => true,
        "failure" => false,
        other => return Err(ProtocolError::InvalidSuccess(other.to_string())),
    };
    let source = values[2]
        .parse::<Source>()
        .map_err(|_| ProtocolError::InvalidSource(values[2].to_string()))?;
    Ok(EvalOutput {
        score,
        success,
        source,
        think,
    })
}

/// 1 when the text parses under the grammar, 0 otherwise.
pub fn format_reward(text: &str, require_cot: bool) -> f64 {
    if parse_output(text, require_cot).is_ok() {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(score: f64, success: bool, think: Option<&str>) -> EvalOutput {
        EvalOutput {
            score,
            success,
            source: Source::Policy,
            think: think.map(str::to_string),
        }
    }

    #[test]
    fn plain_serialization() {
        assert_eq!(
            serialize_output(&out(8.0, true, None)),
            "score: 8\nsuccess: success\nsource: policy"
        );
    }

    #[test]
    fn cot_serialization() {
        assert_eq!(
            serialize_output(&out(5.0, false, Some("towel is dropped"))),
            "<think>towel is dropped</think>\nscore: 5\nsuccess: failure\nsource: policy"
        );
    }

    #[test]
    fn fractional_score_round_trips() {
        let o = out(7.25, true, None);
        let text = serialize_output(&o);
        assert!(text.starts_with("score: 7.25\n"));
        assert_eq!(parse_output(&text, false).unwrap(), o);
    }

    #[test]
    fn parses_valid_text() {
        let o = parse_output("score: 3\nsuccess: failure\nsource: teleoperation", false).unwrap();
        assert_eq!(o.score, 3.0);
        assert!(!o.success);
        assert_eq!(o.source, Source::Teleoperation);
    }

    #[test]
    fn named_failures() {
        let e = parse_output("score: 3\nsuccess: failure", false).unwrap_err();
        assert_eq!(e.to_string(), "missing field: source");
        let e = parse_output("score: 12\nsuccess: failure\nsource: policy", false).unwrap_err();
        assert_eq!(e.to_string(), "score out of range");
        let e = parse_output("success: failure\nsource: policy", false).unwrap_err();
        assert_eq!(e, ProtocolError::MissingField("score"));
        let e = parse_output("score: 3\nsuccess: failure\nsource: policy\n", false).unwrap_err();
        assert_eq!(e, ProtocolError::TrailingText);
        let e = parse_output("score: 3\nsuccess: yes\nsource: policy", false).unwrap_err();
        assert!(matches!(e, ProtocolError::InvalidSuccess(_)));
        let e = parse_output("score: -3\nsuccess: success\nsource: policy", false).unwrap_err();
        assert!(matches!(e, ProtocolError::InvalidScore(_)));
        let e = parse_output("score: 1e1\nsuccess: success\nsource: policy", false).unwrap_err();
        assert!(matches!(e, ProtocolError::InvalidScore(_)));
    }

    #[test]
    fn think_rules() {
        let body = "score: 3\nsuccess: failure\nsource: policy";
        assert_eq!(parse_output(body, true).unwrap_err(), ProtocolError::MissingThink);
        let two = format!("<think>a</think>\n<think>b</think>\n{body}");
        assert_eq!(parse_output(&two, false).unwrap_err(), ProtocolError::MultipleThink);
        let late = format!("{body}<think>x</think>");
        assert_eq!(parse_output(&late, false).unwrap_err(), ProtocolError::MisplacedThink);
        let open = format!("<think>never closed\n{body}");
        assert_eq!(parse_output(&open, true).unwrap_err(), ProtocolError::UnterminatedThink);
        let ok = format!("<think>multi\nline</think>\n{body}");
        assert_eq!(parse_output(&ok, true).unwrap().think.as_deref(), Some("multi\nline"));
    }

    #[test]
    fn binary_format_reward() {
        let body = "score: 3\nsuccess: failure\nsource: policy";
        assert_eq!(format_reward(&format!("<think>ok</think>\n{body}"), true), 1.0);
        assert_eq!(format_reward(body, true), 0.0);
        assert_eq!(format_reward(body, false), 1.0);
        assert_eq!(format_reward(&format!("<think>a</think>\n<think>b</think>\n{body}"), true), 0.0);
    }
}
