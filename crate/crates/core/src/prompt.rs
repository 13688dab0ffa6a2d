//! Prompt compilation: stems become single-slot sub-prompts, and sub-prompts
//! are appended to the source text to form one prompt per information type.

use std::fmt;
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::data::{Direction, EntityAnnotation, Sample};
use crate::error::CompileError;
use crate::schema::{
    placeholder_count, EntityTypeSpec, EventTypeSpec, RelationTypeSpec, SchemaBundle,
    SLOT_PLACEHOLDER,
};

/// Text placed between the source text and each sub-prompt.
pub const JOINER: &str = " ";

/// Default verdict framing, followed by the slot and the typed clause.
pub const DEFAULT_RE_FRAMING: &str = "From the above sentence, the following conclusion can be inferred: it is";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Ner,
    Ee,
    Re,
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ner" => Ok(Task::Ner),
            "ee" => Ok(Task::Ee),
            "re" => Ok(Task::Re),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

/// How event prompts source their role stems.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventMode {
    /// Role stems mention the event type (`type_dependent_stem`).
    #[default]
    TypeSpecific,
    /// Role stems come from the type-independent fragment library.
    Composable,
}

impl FromStr for EventMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "type-specific" => Ok(EventMode::TypeSpecific),
            "composable" => Ok(EventMode::Composable),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    TypeSpecific,
    Composable,
    Ner,
    Re,
}

impl From<EventMode> for PromptMode {
    fn from(m: EventMode) -> Self {
        match m {
            EventMode::TypeSpecific => PromptMode::TypeSpecific,
            EventMode::Composable => PromptMode::Composable,
        }
    }
}

/// Rendering of slot `i`, e.g. `<extra_id_{i}>` or `[mask{i}]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct MaskSurface {
    prefix: String,
    suffix: String,
}

impl MaskSurface {
    pub const SENTINEL: &'static str = "<extra_id_{i}>";
    pub const BRACKET: &'static str = "[mask{i}]";

    pub fn new(pattern: &str) -> Result<Self, CompileError> {
        let mut parts = pattern.split("{i}");
        match (parts.next(), parts.next(), parts.next()) {
            (Some(prefix), Some(suffix), None) if !prefix.is_empty() || !suffix.is_empty() => Ok(Self {
                prefix: prefix.to_string(),
                suffix: suffix.to_string(),
            }),
            _ => Err(CompileError::MaskPattern(pattern.to_string())),
        }
    }

    pub fn sentinel() -> Self {
        Self::new(Self::SENTINEL).expect("valid pattern")
    }

    pub fn render(&self, index: usize) -> String {
        format!("{}{}{}", self.prefix, index, self.suffix)
    }

    pub fn pattern(&self) -> String {
        format!("{}{{i}}{}", self.prefix, self.suffix)
    }

    /// Matches any rendered surface; capture group 1 is the index.
    pub fn regex(&self) -> Regex {
        Regex::new(&format!("{}([0-9]+){}", regex::escape(&self.prefix), regex::escape(&self.suffix)))
            .expect("escaped pattern compiles")
    }
}

impl Default for MaskSurface {
    fn default() -> Self {
        Self::sentinel()
    }
}

impl TryFrom<String> for MaskSurface {
    type Error = CompileError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        MaskSurface::new(&s)
    }
}

impl From<MaskSurface> for String {
    fn from(m: MaskSurface) -> Self {
        m.pattern()
    }
}

impl fmt::Display for MaskSurface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern())
    }
}

/// What a slot's answer fills in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotTarget {
    Trigger { event_type: String },
    Role { event_type: String, role: String },
    Entity { entity_type: String },
    RelationVerdict { relation: String, direction: Direction },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRef {
    pub index: usize,
    pub target: SlotTarget,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubPrompt {
    pub text: String,
    pub slot: SlotRef,
}

/// Identifiers needed to turn a prompt's answers back into information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PromptMeta {
    Event {
        event_type: String,
    },
    Entity {
        entity_type: String,
    },
    Relation {
        relation: String,
        direction: Direction,
        /// Index into the sample's `relations` list.
        pair_index: usize,
        head: EntityAnnotation,
        tail: EntityAnnotation,
    },
}

impl fmt::Display for PromptMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptMeta::Event { event_type } => write!(f, "event:{event_type}"),
            PromptMeta::Entity { entity_type } => write!(f, "entity:{entity_type}"),
            PromptMeta::Relation {
                relation,
                direction,
                pair_index,
                ..
            } => write!(f, "relation:{relation}:{direction:?}:pair{pair_index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub sample_id: String,
    pub source_text: String,
    pub sub_prompts: Vec<SubPrompt>,
    pub full_text: String,
    pub mode: PromptMode,
    pub meta: PromptMeta,
}

impl Prompt {
    pub fn slots(&self) -> impl Iterator<Item = &SlotRef> {
        self.sub_prompts.iter().map(|s| &s.slot)
    }

    pub fn slot_count(&self) -> usize {
        self.sub_prompts.len()
    }

    /// The JSON line written by the `compile` command.
    pub fn to_record(&self) -> serde_json::Value {
        serde_json::json!({
            "sample_id": self.sample_id,
            "mode": self.mode,
            "meta": self.meta,
            "full_text": self.full_text,
            "slots": self.slots().collect::<Vec<_>>(),
        })
    }
}

/// Replaces the single `{SLOT}` of `stem` with the surface for `slot_index`.
pub fn render_sub_prompt(
    stem: &str,
    slot_index: usize,
    target: SlotTarget,
    mask: &MaskSurface,
) -> Result<SubPrompt, CompileError> {
    let found = placeholder_count(stem);
    if found != 1 {
        return Err(CompileError::Placeholder {
            stem: stem.to_string(),
            found,
        });
    }
    let surface = mask.render(slot_index);
    Ok(SubPrompt {
        text: stem.replacen(SLOT_PLACEHOLDER, &surface, 1),
        slot: SlotRef {
            index: slot_index,
            target,
            surface,
        },
    })
}

/// What to do when a prompt exceeds the token budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverflowPolicy {
    #[default]
    Error,
    /// Drop words from the end of the source text; sub-prompts are never cut.
    TruncateSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileOptions {
    #[serde(default)]
    pub mask: MaskSurface,
    /// Budget in whitespace-separated tokens; `None` disables the guard.
    #[serde(default)]
    pub token_budget: Option<usize>,
    #[serde(default)]
    pub overflow: OverflowPolicy,
    #[serde(default = "default_framing")]
    pub re_framing: String,
}

fn default_framing() -> String {
    DEFAULT_RE_FRAMING.to_string()
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            mask: MaskSurface::default(),
            token_budget: None,
            overflow: OverflowPolicy::Error,
            re_framing: default_framing(),
        }
    }
}

fn token_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Byte length of the first `n` whitespace-separated words of `s`.
fn prefix_of_words(s: &str, n: usize) -> &str {
    if n == 0 {
        return "";
    }
    let mut seen = 0;
    let mut in_word = false;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            if in_word {
                seen += 1;
                if seen == n {
                    return &s[..i];
                }
            }
            in_word = false;
        } else {
            in_word = true;
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct PromptCompiler<'a> {
    bundle: &'a SchemaBundle,
    options: CompileOptions,
}

impl<'a> PromptCompiler<'a> {
    pub fn new(bundle: &'a SchemaBundle, options: CompileOptions) -> Self {
        Self { bundle, options }
    }

    pub fn bundle(&self) -> &'a SchemaBundle {
        self.bundle
    }

    pub fn options(&self) -> &CompileOptions {
        &self.options
    }

    fn assemble(
        &self,
        sample_id: &str,
        text: &str,
        sub_prompts: Vec<SubPrompt>,
        mode: PromptMode,
        meta: PromptMeta,
    ) -> Result<Prompt, CompileError> {
        let mut source = text;
        if let Some(budget) = self.options.token_budget {
            let tail: usize = sub_prompts.iter().map(|s| token_count(&s.text)).sum();
            let needed = token_count(text) + tail;
            if needed > budget {
                match self.options.overflow {
                    OverflowPolicy::TruncateSource if tail <= budget => {
                        source = prefix_of_words(text, budget - tail);
                    }
                    _ => return Err(CompileError::OverBudget { needed, budget }),
                }
            }
        }
        let mut full_text = source.to_string();
        for sp in &sub_prompts {
            if !full_text.is_empty() {
                full_text.push_str(JOINER);
            }
            full_text.push_str(&sp.text);
        }
        Ok(Prompt {
            sample_id: sample_id.to_string(),
            source_text: source.to_string(),
            sub_prompts,
            full_text,
            mode,
            meta,
        })
    }

    /// Trigger sub-prompt at slot 0, then one sub-prompt per role in declared order.
    pub fn compile_event_prompt(
        &self,
        sample_id: &str,
        text: &str,
        event_type: &EventTypeSpec,
        mode: EventMode,
    ) -> Result<Prompt, CompileError> {
        let mask = &self.options.mask;
        let mut subs = Vec::with_capacity(1 + event_type.roles.len());
        subs.push(render_sub_prompt(
            &event_type.trigger_stem,
            0,
            SlotTarget::Trigger {
                event_type: event_type.name.clone(),
            },
            mask,
        )?);
        for (i, role) in event_type.roles.iter().enumerate() {
            let stem = match mode {
                EventMode::TypeSpecific => role.type_dependent_stem.as_str(),
                EventMode::Composable => {
                    let id = role.fragment_id.as_deref().ok_or_else(|| CompileError::MissingFragment {
                        event_type: event_type.name.clone(),
                        role: role.name.clone(),
                    })?;
                    let frag = self
                        .bundle
                        .fragment(id)
                        .ok_or_else(|| CompileError::UnknownFragment(id.to_string()))?;
                    frag.modular_stem.as_str()
                }
            };
            subs.push(render_sub_prompt(
                stem,
                i + 1,
                SlotTarget::Role {
                    event_type: event_type.name.clone(),
                    role: role.name.clone(),
                },
                mask,
            )?);
        }
        self.assemble(
            sample_id,
            text,
            subs,
            mode.into(),
            PromptMeta::Event {
                event_type: event_type.name.clone(),
            },
        )
    }

    pub fn compile_ner_prompt(&self, sample_id: &str, text: &str, entity_type: &str) -> Result<Prompt, CompileError> {
        let spec: &EntityTypeSpec = self
            .bundle
            .entity_type(entity_type)
            .ok_or_else(|| CompileError::UnknownEntityType(entity_type.to_string()))?;
        let sub = render_sub_prompt(
            &spec.prompt_stem,
            0,
            SlotTarget::Entity {
                entity_type: spec.name.clone(),
            },
            &self.options.mask,
        )?;
        self.assemble(
            sample_id,
            text,
            vec![sub],
            PromptMode::Ner,
            PromptMeta::Entity {
                entity_type: spec.name.clone(),
            },
        )
    }

    fn type_phrase(&self, entity_type: &str) -> String {
        self.bundle
            .entity_type(entity_type)
            .map(|e| e.phrase().to_string())
            .unwrap_or_else(|| entity_type.to_string())
    }

    /// Verdict prompt for one candidate relation over an annotated pair.
    ///
    /// Type phrases come from the candidate's endpoint types, mentions from
    /// the pair; `Reverse` puts the pair's tail in the relation's head slot.
    /// A mismatch between the two is left in place for the model to judge.
    #[allow(clippy::too_many_arguments)]
    pub fn compile_re_prompt(
        &self,
        sample_id: &str,
        text: &str,
        pair_index: usize,
        head: &EntityAnnotation,
        tail: &EntityAnnotation,
        candidate: &RelationTypeSpec,
        direction: Direction,
    ) -> Result<Prompt, CompileError> {
        let (first, second) = match direction {
            Direction::Forward => (head, tail),
            Direction::Reverse => (tail, head),
        };
        let surface = self.options.mask.render(0);
        let clause = format!(
            "{} {} that the {} ``{}'' {} the {} ``{}''.",
            self.options.re_framing,
            surface,
            self.type_phrase(&candidate.head_entity_type),
            first.span.text,
            candidate.connecting_phrase,
            self.type_phrase(&candidate.tail_entity_type),
            second.span.text,
        );
        let sub = SubPrompt {
            text: clause,
            slot: SlotRef {
                index: 0,
                target: SlotTarget::RelationVerdict {
                    relation: candidate.name.clone(),
                    direction,
                },
                surface,
            },
        };
        self.assemble(
            sample_id,
            text,
            vec![sub],
            PromptMode::Re,
            PromptMeta::Relation {
                relation: candidate.name.clone(),
                direction,
                pair_index,
                head: head.clone(),
                tail: tail.clone(),
            },
        )
    }

    /// All prompts for one sample, in schema order.
    ///
    /// `ee` yields one prompt per event type and `ner` one per entity type.
    /// `re` yields, for each annotated pair, one prompt per candidate relation
    /// and direction (both directions for directed relations).
    pub fn compile_batch(&self, sample: &Sample, task: Task, mode: EventMode) -> Result<Vec<Prompt>, CompileError> {
        match task {
            Task::Ee => self
                .bundle
                .event_types
                .iter()
                .map(|ev| self.compile_event_prompt(&sample.id, &sample.text, ev, mode))
                .collect(),
            Task::Ner => self
                .bundle
                .entity_types
                .iter()
                .map(|et| self.compile_ner_prompt(&sample.id, &sample.text, &et.name))
                .collect(),
            Task::Re => {
                let mut out = Vec::new();
                for (pair_index, rel) in sample.relations.iter().enumerate() {
                    for cand in &self.bundle.relation_types {
                        out.push(self.compile_re_prompt(
                            &sample.id,
                            &sample.text,
                            pair_index,
                            &rel.head,
                            &rel.tail,
                            cand,
                            Direction::Forward,
                        )?);
                        if cand.directed {
                            out.push(self.compile_re_prompt(
                                &sample.id,
                                &sample.text,
                                pair_index,
                                &rel.head,
                                &rel.tail,
                                cand,
                                Direction::Reverse,
                            )?);
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}
