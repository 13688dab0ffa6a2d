use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    /// A prompt slot's surface is absent from the generated text.
    MissingSlot,
    /// A `|`-separated segment was blank.
    EmptySegment,
    /// The generated text names a slot the prompt does not have.
    UnknownSlot,
    DuplicateSlot,
    /// Slot surfaces appear out of index order.
    SlotOrder,
    /// Non-blank text before the first slot surface.
    LeadingText,
    /// Role answers were produced for an event type with no trigger answer.
    OrphanRoleAnswers,
    /// Several triggers of one event type; role answers attached to all of them.
    MultiEventPooled,
    Ungrounded,
    CaseFoldMatch,
    /// Several positive verdicts without scores; the first in schema order won.
    AmbiguousVerdict,
    UnrecognizedVerdict,
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("code serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

/// One line of the diagnostics sidecar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub sample_id: String,
    pub prompt_meta: String,
    pub code: DiagnosticCode,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(sample_id: &str, prompt_meta: impl fmt::Display, code: DiagnosticCode, detail: impl Into<String>) -> Self {
        Self {
            sample_id: sample_id.to_string(),
            prompt_meta: prompt_meta.to_string(),
            code,
            detail: detail.into(),
        }
    }
}

pub fn tally(diagnostics: &[Diagnostic]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for d in diagnostics {
        *counts.entry(d.code.to_string()).or_default() += 1;
    }
    counts
}
