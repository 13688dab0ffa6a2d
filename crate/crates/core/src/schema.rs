//! The information ontology: entity, event and relation types plus the
//! modular fragment library used by composable prompts.
//!
//! Schema files are UTF-8 JSON with four arrays (`entity_types`,
//! `event_types`, `relation_types`, `fragments`). Stems carry a literal
//! `{SLOT}` placeholder; the mask surface is chosen at compile time.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// Placeholder token that stems carry in schema files.
pub const SLOT_PLACEHOLDER: &str = "{SLOT}";

/// Reserved fallback label for entity pairs with no schema relation.
pub const OTHER_LABEL: &str = "Other";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityTypeSpec {
    pub name: String,
    pub prompt_stem: String,
    #[serde(default)]
    pub aliases: Vec<String>,
}

impl EntityTypeSpec {
    /// Phrase used for typed mentions in relation verdict clauses.
    pub fn phrase(&self) -> &str {
        self.aliases.first().map(String::as_str).unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: String,
    pub type_dependent_stem: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTypeSpec {
    pub name: String,
    pub trigger_stem: String,
    /// Declared order defines slot indices 1..=roles.len(); the trigger is slot 0.
    #[serde(default)]
    pub roles: Vec<RoleSpec>,
}

impl EventTypeSpec {
    pub fn role(&self, name: &str) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentSpec {
    pub fragment_id: String,
    pub modular_stem: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTypeSpec {
    pub name: String,
    pub head_entity_type: String,
    pub tail_entity_type: String,
    pub connecting_phrase: String,
    pub directed: bool,
}

/// Words the generator uses for absent information and relation verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerVocabulary {
    pub null_word: String,
    pub positive_verdict: String,
    pub negative_verdict: String,
}

impl Default for AnswerVocabulary {
    fn default() -> Self {
        Self {
            null_word: "none".into(),
            positive_verdict: "right".into(),
            negative_verdict: "wrong".into(),
        }
    }
}

fn is_default_vocab(v: &AnswerVocabulary) -> bool {
    *v == AnswerVocabulary::default()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaBundle {
    #[serde(default)]
    pub version: String,
    #[serde(default)]
    pub entity_types: Vec<EntityTypeSpec>,
    #[serde(default)]
    pub event_types: Vec<EventTypeSpec>,
    #[serde(default)]
    pub relation_types: Vec<RelationTypeSpec>,
    #[serde(default)]
    pub fragments: Vec<FragmentSpec>,
    #[serde(default, skip_serializing_if = "is_default_vocab")]
    pub vocabulary: AnswerVocabulary,
}

impl SchemaBundle {
    pub fn entity_type(&self, name: &str) -> Option<&EntityTypeSpec> {
        self.entity_types.iter().find(|e| e.name == name)
    }

    pub fn event_type(&self, name: &str) -> Option<&EventTypeSpec> {
        self.event_types.iter().find(|e| e.name == name)
    }

    pub fn relation_type(&self, name: &str) -> Option<&RelationTypeSpec> {
        self.relation_types.iter().find(|r| r.name == name)
    }

    /// Unknown relation names count as directed.
    pub fn is_directed(&self, relation: &str) -> bool {
        self.relation_type(relation).is_none_or(|r| r.directed)
    }

    pub fn fragment(&self, id: &str) -> Option<&FragmentSpec> {
        self.fragments.iter().find(|f| f.fragment_id == id)
    }

    /// Sorts the top-level arrays by name. Role order inside an event type is
    /// semantic (it fixes slot indices) and is left alone.
    pub fn canonicalize(&mut self) {
        self.entity_types.sort_by(|a, b| a.name.cmp(&b.name));
        self.event_types.sort_by(|a, b| a.name.cmp(&b.name));
        self.relation_types.sort_by(|a, b| a.name.cmp(&b.name));
        self.fragments.sort_by(|a, b| a.fragment_id.cmp(&b.fragment_id));
    }

    /// Canonical JSON: arrays ordered by name, object keys sorted.
    pub fn to_canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.canonicalize();
        // serde_json::Value maps are BTreeMaps, so keys come out sorted.
        let value = serde_json::to_value(&copy).expect("schema serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    pub fn from_json_str(json: &str, origin: &Path) -> Result<Self, SchemaError> {
        let mut bundle: SchemaBundle =
            serde_json::from_str(json).map_err(|e| SchemaError::Parse {
                path: origin.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        let report = validate_schema(&bundle);
        if !report.is_empty() {
            return Err(SchemaError::Invalid(report));
        }
        bundle.canonicalize();
        Ok(bundle)
    }
}

/// Reads, validates and canonicalizes a schema file.
pub fn load_schema(path: impl AsRef<Path>) -> Result<SchemaBundle, SchemaError> {
    let path = path.as_ref();
    let json = std::fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SchemaBundle::from_json_str(&json, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DuplicateIdentifier,
    SlotPlaceholderCount,
    DanglingFragment,
    DanglingEntityType,
    FragmentTypeLeak,
    EmptyConnectingPhrase,
    ReservedLabel,
    EmptyIdentifier,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("code serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// Dotted location, e.g. `event_types[attack].roles[place].fragment_id`.
    pub field: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }

    fn push(&mut self, code: ViolationCode, field: String, detail: impl Into<String>) {
        self.violations.push(Violation {
            code,
            field,
            detail: detail.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {} at {}: {}", v.code, v.field, v.detail)?;
        }
        Ok(())
    }
}

pub(crate) fn placeholder_count(stem: &str) -> usize {
    stem.matches(SLOT_PLACEHOLDER).count()
}

/// Case-insensitive whole-word search for `word` inside `text`.
fn contains_word(text: &str, word: &str) -> bool {
    if word.is_empty() {
        return false;
    }
    let hay = text.to_lowercase();
    let needle = word.to_lowercase();
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    hay.match_indices(&needle).any(|(pos, m)| {
        let before = hay[..pos].chars().next_back();
        let after = hay[pos + m.len()..].chars().next();
        !is_word(before) && !is_word(after)
    })
}

/// Checks every bundle invariant. Violations are data: an empty report
/// means the bundle is valid.
pub fn validate_schema(bundle: &SchemaBundle) -> ValidationReport {
    use ViolationCode::*;
    let mut report = ValidationReport::default();

    let check_stem = |report: &mut ValidationReport, field: String, stem: &str| {
        let n = placeholder_count(stem);
        if n != 1 {
            report.push(
                SlotPlaceholderCount,
                field,
                format!("expected exactly one {SLOT_PLACEHOLDER}, found {n}"),
            );
        }
    };

    let dupes = |report: &mut ValidationReport, kind: &str, ids: Vec<&str>| {
        let mut set = BTreeSet::new();
        for id in ids {
            if id.trim().is_empty() {
                report.push(EmptyIdentifier, kind.to_string(), "identifier is empty");
            }
            if !set.insert(id) {
                report.push(
                    DuplicateIdentifier,
                    format!("{kind}[{id}]"),
                    format!("{id:?} declared twice"),
                );
            }
        }
    };
    dupes(&mut report, "entity_types", bundle.entity_types.iter().map(|e| e.name.as_str()).collect());
    dupes(&mut report, "event_types", bundle.event_types.iter().map(|e| e.name.as_str()).collect());
    dupes(&mut report, "relation_types", bundle.relation_types.iter().map(|r| r.name.as_str()).collect());
    dupes(&mut report, "fragments", bundle.fragments.iter().map(|f| f.fragment_id.as_str()).collect());
    for ev in &bundle.event_types {
        dupes(
            &mut report,
            &format!("event_types[{}].roles", ev.name),
            ev.roles.iter().map(|r| r.name.as_str()).collect(),
        );
    }

    for et in &bundle.entity_types {
        check_stem(&mut report, format!("entity_types[{}].prompt_stem", et.name), &et.prompt_stem);
    }

    let fragment_ids: BTreeSet<&str> = bundle.fragments.iter().map(|f| f.fragment_id.as_str()).collect();
    for ev in &bundle.event_types {
        check_stem(&mut report, format!("event_types[{}].trigger_stem", ev.name), &ev.trigger_stem);
        for role in &ev.roles {
            let base = format!("event_types[{}].roles[{}]", ev.name, role.name);
            check_stem(&mut report, format!("{base}.type_dependent_stem"), &role.type_dependent_stem);
            if let Some(fid) = &role.fragment_id {
                if !fragment_ids.contains(fid.as_str()) {
                    report.push(
                        DanglingFragment,
                        format!("{base}.fragment_id"),
                        format!("fragment {fid:?} is not in the library"),
                    );
                }
            }
        }
    }

    for frag in &bundle.fragments {
        let field = format!("fragments[{}].modular_stem", frag.fragment_id);
        check_stem(&mut report, field.clone(), &frag.modular_stem);
        for ev in &bundle.event_types {
            if contains_word(&frag.modular_stem, &ev.name) {
                report.push(
                    FragmentTypeLeak,
                    field.clone(),
                    format!("modular stem mentions event type {:?}", ev.name),
                );
            }
        }
    }

    let entity_names: BTreeSet<&str> = bundle.entity_types.iter().map(|e| e.name.as_str()).collect();
    for rel in &bundle.relation_types {
        let base = format!("relation_types[{}]", rel.name);
        if rel.name == OTHER_LABEL {
            report.push(ReservedLabel, base.clone(), "\"Other\" is the reserved fallback label");
        }
        for (field, ty) in [("head_entity_type", &rel.head_entity_type), ("tail_entity_type", &rel.tail_entity_type)] {
            if !entity_names.contains(ty.as_str()) {
                report.push(
                    DanglingEntityType,
                    format!("{base}.{field}"),
                    format!("entity type {ty:?} is not declared"),
                );
            }
        }
        if rel.connecting_phrase.trim().is_empty() {
            report.push(EmptyConnectingPhrase, format!("{base}.connecting_phrase"), "connecting phrase is empty");
        }
    }

    report
}
