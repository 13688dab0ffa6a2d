//! Samples, annotations and the dataset readers/samplers built on them.
//!
//! All offsets are 0-based character (Unicode scalar) offsets, end-exclusive.

mod formats;
mod sampling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::schema::OTHER_LABEL;

pub use formats::{
    load_dataset, load_predictions, parse_conll_columns, parse_ie_jsonl, parse_predictions,
    parse_re_pairs, write_ie_jsonl, write_predictions_jsonl, DatasetFormat,
};
pub use sampling::{
    sample_fraction, sample_kshot, split_zero_shot, ClassKey, FractionSample, KShotSample,
    ShotReport, ZeroShotSplit,
};

/// Characters `[start, end)` of `text`, or `None` when out of bounds.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let from = indices.nth(start)?;
    let to = if end == start {
        from
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[from..to])
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

impl Span {
    /// Builds a span from offsets, reading the surface text from `doc`.
    pub fn from_offsets(doc: &str, start: usize, end: usize) -> Option<Self> {
        if start >= end {
            return None;
        }
        char_slice(doc, start, end).map(|t| Span {
            start,
            end,
            text: t.to_string(),
        })
    }

    /// True when `0 <= start < end <= |doc|` and the slice equals `text`.
    pub fn is_valid_in(&self, doc: &str) -> bool {
        self.start < self.end && char_slice(doc, self.start, self.end) == Some(self.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityAnnotation {
    pub span: Span,
    pub entity_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgumentAnnotation {
    pub role: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventAnnotation {
    pub trigger: Span,
    pub event_type: String,
    pub arguments: Vec<ArgumentAnnotation>,
}

/// Which way a directed relation reads over an annotated `(head, tail)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// The pair's head fills the relation's head slot.
    Forward,
    /// The pair's tail fills the relation's head slot.
    Reverse,
}

/// A relation label: the reserved `Other` or a schema relation plus direction.
///
/// Textual form: `Other`, `name` (forward, also accepted as `name(e1,e2)`),
/// and `name(e2,e1)` (reverse).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationLabel {
    Other,
    Typed { name: String, direction: Direction },
}

impl RelationLabel {
    pub fn typed(name: impl Into<String>, direction: Direction) -> Self {
        RelationLabel::Typed {
            name: name.into(),
            direction,
        }
    }

    pub fn is_other(&self) -> bool {
        matches!(self, RelationLabel::Other)
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationLabel::Other => f.write_str(OTHER_LABEL),
            RelationLabel::Typed {
                name,
                direction: Direction::Forward,
            } => f.write_str(name),
            RelationLabel::Typed {
                name,
                direction: Direction::Reverse,
            } => write!(f, "{name}(e2,e1)"),
        }
    }
}

impl FromStr for RelationLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty relation label".into());
        }
        if s == OTHER_LABEL {
            return Ok(RelationLabel::Other);
        }
        if let Some(name) = s.strip_suffix("(e2,e1)") {
            return Ok(RelationLabel::typed(name, Direction::Reverse));
        }
        let name = s.strip_suffix("(e1,e2)").unwrap_or(s);
        if name.contains(['(', ')']) {
            return Err(format!("malformed relation label {s:?}"));
        }
        Ok(RelationLabel::typed(name, Direction::Forward))
    }
}

impl Serialize for RelationLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RelationLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationAnnotation {
    pub head: EntityAnnotation,
    pub tail: EntityAnnotation,
    pub label: RelationLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub entities: Vec<EntityAnnotation>,
    #[serde(default)]
    pub events: Vec<EventAnnotation>,
    #[serde(default)]
    pub relations: Vec<RelationAnnotation>,
}

impl Sample {
    /// Every span of the sample, in annotation order.
    pub fn spans(&self) -> impl Iterator<Item = &Span> {
        let entities = self.entities.iter().map(|e| &e.span);
        let events = self
            .events
            .iter()
            .flat_map(|ev| std::iter::once(&ev.trigger).chain(ev.arguments.iter().map(|a| &a.span)));
        let relations = self
            .relations
            .iter()
            .flat_map(|r| [&r.head.span, &r.tail.span]);
        entities.chain(events).chain(relations)
    }

    /// First span that does not slice back to its own text, if any.
    pub fn invalid_span(&self) -> Option<&Span> {
        self.spans().find(|s| !s.is_valid_in(&self.text))
    }
}
