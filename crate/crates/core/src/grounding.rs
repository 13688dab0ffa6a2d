//! Locating generated answer strings as character spans of the source text.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{char_slice, Span};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseMode {
    /// Case-sensitive search first, then a case-folded search.
    #[default]
    ExactThenFold,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Occurrence {
    #[default]
    First,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Runs of whitespace compare equal to a single space.
    #[default]
    WhitespaceCollapse,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundingPolicy {
    pub case_mode: CaseMode,
    pub occurrence: Occurrence,
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grounded {
    pub span: Span,
    /// The match needed case folding.
    pub case_folded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroundError {
    #[error("phrase is empty after normalization")]
    EmptyPhrase,
    #[error("phrase {0:?} does not occur in the text")]
    NotFound(String),
}

fn fold(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Whitespace-collapsed characters of `s`, each paired with its original
/// character index.
fn collapse(s: &str) -> Vec<(char, usize)> {
    let mut out: Vec<(char, usize)> = Vec::with_capacity(s.len());
    for (i, c) in s.chars().enumerate() {
        if c.is_whitespace() {
            if out.last().is_some_and(|&(p, _)| p == ' ') {
                continue;
            }
            out.push((' ', i));
        } else {
            out.push((c, i));
        }
    }
    out
}

fn find(hay: &[(char, usize)], needle: &[char], folded: bool) -> Option<usize> {
    if needle.len() > hay.len() {
        return None;
    }
    let eq = |a: char, b: char| if folded { fold(a) == fold(b) } else { a == b };
    (0..=hay.len() - needle.len()).find(|&i| needle.iter().enumerate().all(|(j, &n)| eq(hay[i + j].0, n)))
}

/// Normalized form of an answer phrase: trimmed, inner whitespace collapsed.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Finds the first occurrence of `phrase` in `text`.
pub fn ground_span(text: &str, phrase: &str, _policy: &GroundingPolicy) -> Result<Grounded, GroundError> {
    let needle: Vec<char> = normalize_phrase(phrase).chars().collect();
    if needle.is_empty() {
        return Err(GroundError::EmptyPhrase);
    }
    let hay = collapse(text);
    let (pos, case_folded) = match find(&hay, &needle, false) {
        Some(p) => (p, false),
        None => (
            find(&hay, &needle, true).ok_or_else(|| GroundError::NotFound(phrase.to_string()))?,
            true,
        ),
    };
    let start = hay[pos].1;
    let end = hay[pos + needle.len() - 1].1 + 1;
    let surface = char_slice(text, start, end).expect("offsets come from the text");
    Ok(Grounded {
        span: Span {
            start,
            end,
            text: surface.to_string(),
        },
        case_folded,
    })
}
