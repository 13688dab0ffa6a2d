//! Target sequences and their inverse.
//!
//! A target sequence lists every slot surface of a prompt in index order,
//! each followed by its answers joined with ` | `, or by the null word when
//! the slot has no filler:
//!
//! ```text
//! <extra_id_0> protests <extra_id_1> Retired military officers <extra_id_2> Malaysia
//! ```
//!
//! Parsing reads generated text back into per-slot answer lists, and
//! aggregation grounds those answers and reassembles entities, events and
//! relations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::{Direction, EntityAnnotation, RelationLabel, Sample, Span};
use crate::diagnostics::{Diagnostic, DiagnosticCode};
use crate::error::CodecError;
use crate::grounding::{ground_span, normalize_phrase, GroundError, GroundingPolicy};
use crate::prompt::{MaskSurface, Prompt, PromptMeta, SlotTarget};
use crate::schema::AnswerVocabulary;

/// Separator between multiple answers of one slot.
pub const SEPARATOR: char = '|';
/// Separator as written into target sequences.
pub const JOINED_SEPARATOR: &str = " | ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSequence {
    pub text: String,
}

/// Answers per slot index; `answers[i]` belongs to slot `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotAnswers {
    pub answers: Vec<Vec<String>>,
}

impl SlotAnswers {
    pub fn slot(&self, index: usize) -> &[String] {
        self.answers.get(index).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.answers.iter().all(Vec::is_empty)
    }
}

fn sorted_unique(mut spans: Vec<&Span>) -> Vec<String> {
    spans.sort_by_key(|s| (s.start, s.end));
    let mut seen = BTreeSet::new();
    spans
        .into_iter()
        .filter(|s| seen.insert(s.text.as_str()))
        .map(|s| s.text.clone())
        .collect()
}

fn verdict_matches(label: &RelationLabel, relation: &str, direction: Direction, directed: bool) -> bool {
    match label {
        RelationLabel::Typed { name, direction: d } => name == relation && (!directed || *d == direction),
        RelationLabel::Other => false,
    }
}

/// Gold answers for each slot of `prompt`, in first-occurrence order.
///
/// `directed` reports whether a relation is directed; undirected relations
/// accept a gold label in either direction.
pub fn gold_slot_answers(
    prompt: &Prompt,
    gold: &Sample,
    vocab: &AnswerVocabulary,
    directed: impl Fn(&str) -> bool,
) -> Result<SlotAnswers, CodecError> {
    let mut answers = Vec::with_capacity(prompt.slot_count());
    for slot in prompt.slots() {
        let list = match &slot.target {
            SlotTarget::Trigger { event_type } => sorted_unique(
                gold.events
                    .iter()
                    .filter(|e| &e.event_type == event_type)
                    .map(|e| &e.trigger)
                    .collect(),
            ),
            SlotTarget::Role { event_type, role } => sorted_unique(
                gold.events
                    .iter()
                    .filter(|e| &e.event_type == event_type)
                    .flat_map(|e| e.arguments.iter().filter(|a| &a.role == role).map(|a| &a.span))
                    .collect(),
            ),
            SlotTarget::Entity { entity_type } => sorted_unique(
                gold.entities
                    .iter()
                    .filter(|e| &e.entity_type == entity_type)
                    .map(|e| &e.span)
                    .collect(),
            ),
            SlotTarget::RelationVerdict { relation, direction } => {
                let PromptMeta::Relation { pair_index, .. } = &prompt.meta else {
                    unreachable!("verdict slots only occur in relation prompts")
                };
                let pair = gold.relations.get(*pair_index).ok_or_else(|| CodecError::MissingPair {
                    sample: gold.id.clone(),
                    pair: *pair_index,
                })?;
                let word = if verdict_matches(&pair.label, relation, *direction, directed(relation)) {
                    &vocab.positive_verdict
                } else {
                    &vocab.negative_verdict
                };
                vec![word.clone()]
            }
        };
        if let Some(bad) = list.iter().find(|a| a.contains(SEPARATOR)) {
            return Err(CodecError::SeparatorInAnswer { answer: bad.clone() });
        }
        answers.push(list);
    }
    Ok(SlotAnswers { answers })
}

/// Writes per-slot answers as a target sequence.
pub fn render_target(prompt: &Prompt, answers: &SlotAnswers, vocab: &AnswerVocabulary) -> TargetSequence {
    let parts: Vec<String> = prompt
        .slots()
        .map(|slot| {
            let list = answers.slot(slot.index);
            let body = if list.is_empty() {
                vocab.null_word.clone()
            } else {
                list.join(JOINED_SEPARATOR)
            };
            format!("{} {}", slot.surface, body)
        })
        .collect();
    TargetSequence { text: parts.join(" ") }
}

/// Gold target sequence of `prompt` for the sample it was compiled from.
pub fn encode_target(
    prompt: &Prompt,
    gold: &Sample,
    vocab: &AnswerVocabulary,
    directed: impl Fn(&str) -> bool,
) -> Result<TargetSequence, CodecError> {
    let answers = gold_slot_answers(prompt, gold, vocab, directed)?;
    Ok(render_target(prompt, &answers, vocab))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedOutput {
    pub answers: SlotAnswers,
    pub diagnostics: Vec<Diagnostic>,
}

/// Splits one raw slot answer on the separator. Blank segments are dropped
/// and reported; null-word segments are dropped silently.
pub fn split_answers(raw: &str, null_word: &str) -> (Vec<String>, usize) {
    let mut out = Vec::new();
    let mut empty = 0;
    for piece in raw.split(SEPARATOR) {
        let piece = normalize_phrase(piece);
        if piece.is_empty() {
            empty += 1;
        } else if piece != null_word {
            out.push(piece);
        }
    }
    (out, empty)
}

/// Reads generated text into answers per slot. Never fails: every anomaly
/// becomes a diagnostic and the affected slot gets an empty list.
pub fn parse_output(prompt: &Prompt, generated: &str, mask: &MaskSurface, vocab: &AnswerVocabulary) -> ParsedOutput {
    let meta = prompt.meta.to_string();
    let diag = |code, detail: String| Diagnostic::new(&prompt.sample_id, &meta, code, detail);
    let mut diagnostics = Vec::new();
    let n = prompt.slot_count();

    let marks: Vec<(usize, usize, Option<usize>)> = mask
        .regex()
        .captures_iter(generated)
        .map(|c| {
            let m = c.get(0).expect("whole match");
            (m.start(), m.end(), c[1].parse::<usize>().ok())
        })
        .collect();

    let lead_end = marks.first().map_or(generated.len(), |m| m.0);
    if !marks.is_empty() && !generated[..lead_end].trim().is_empty() {
        diagnostics.push(diag(
            DiagnosticCode::LeadingText,
            format!("ignored {:?}", generated[..lead_end].trim()),
        ));
    }

    let mut raw: Vec<Option<&str>> = vec![None; n];
    let mut last_index: Option<usize> = None;
    for (k, &(_, end, index)) in marks.iter().enumerate() {
        let next = marks.get(k + 1).map_or(generated.len(), |m| m.0);
        let segment = &generated[end..next];
        match index {
            Some(i) if i < n => {
                if raw[i].is_some() {
                    diagnostics.push(diag(DiagnosticCode::DuplicateSlot, format!("slot {i} repeated; kept the first")));
                    continue;
                }
                if last_index.is_some_and(|l| l > i) {
                    diagnostics.push(diag(DiagnosticCode::SlotOrder, format!("slot {i} after slot {}", last_index.unwrap())));
                }
                last_index = Some(i);
                raw[i] = Some(segment);
            }
            _ => diagnostics.push(diag(
                DiagnosticCode::UnknownSlot,
                format!("{:?} is not a slot of this prompt", &generated[marks[k].0..end]),
            )),
        }
    }

    let mut answers = Vec::with_capacity(n);
    for (i, r) in raw.into_iter().enumerate() {
        match r {
            None => {
                diagnostics.push(diag(DiagnosticCode::MissingSlot, format!("slot {i} not found in output")));
                answers.push(Vec::new());
            }
            Some(segment) => {
                let (list, empty) = split_answers(segment, &vocab.null_word);
                for _ in 0..empty {
                    diagnostics.push(diag(DiagnosticCode::EmptySegment, format!("slot {i} has a blank answer segment")));
                }
                answers.push(list);
            }
        }
    }
    ParsedOutput {
        answers: SlotAnswers { answers },
        diagnostics,
    }
}

/// A predicted span: the surface text, plus offsets when it was grounded.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredSpan {
    pub text: String,
    pub offsets: Option<(usize, usize)>,
}

impl PredSpan {
    pub fn grounded(&self) -> bool {
        self.offsets.is_some()
    }
}

impl From<&Span> for PredSpan {
    fn from(s: &Span) -> Self {
        PredSpan {
            text: s.text.clone(),
            offsets: Some((s.start, s.end)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredEntity {
    pub span: PredSpan,
    pub entity_type: String,
}

impl From<&EntityAnnotation> for PredEntity {
    fn from(e: &EntityAnnotation) -> Self {
        PredEntity {
            span: (&e.span).into(),
            entity_type: e.entity_type.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredArgument {
    pub role: String,
    pub span: PredSpan,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredEvent {
    pub trigger: PredSpan,
    pub event_type: String,
    pub arguments: Vec<PredArgument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredRelation {
    pub head: PredEntity,
    pub tail: PredEntity,
    pub label: RelationLabel,
}

/// Extracted information for one sample; gold samples convert into the same
/// shape so that scoring compares like with like.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePredictions {
    pub sample_id: String,
    pub text: String,
    pub entities: Vec<PredEntity>,
    pub events: Vec<PredEvent>,
    pub relations: Vec<PredRelation>,
}

impl SamplePredictions {
    pub fn from_gold(sample: &Sample) -> Self {
        SamplePredictions {
            sample_id: sample.id.clone(),
            text: sample.text.clone(),
            entities: sample.entities.iter().map(Into::into).collect(),
            events: sample
                .events
                .iter()
                .map(|e| PredEvent {
                    trigger: (&e.trigger).into(),
                    event_type: e.event_type.clone(),
                    arguments: e
                        .arguments
                        .iter()
                        .map(|a| PredArgument {
                            role: a.role.clone(),
                            span: (&a.span).into(),
                        })
                        .collect(),
                })
                .collect(),
            relations: sample
                .relations
                .iter()
                .map(|r| PredRelation {
                    head: (&r.head).into(),
                    tail: (&r.tail).into(),
                    label: r.label.clone(),
                })
                .collect(),
        }
    }

    /// Sorted, duplicate-free copy (arguments sorted within each event).
    pub fn canonical(&self) -> Self {
        let mut c = self.clone();
        for ev in &mut c.events {
            ev.arguments.sort();
            ev.arguments.dedup();
        }
        c.entities.sort();
        c.entities.dedup();
        c.events.sort();
        c.events.dedup();
        c.relations.sort();
        c.relations.dedup();
        c
    }
}

/// Verdict for one candidate relation of an entity pair.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictCandidate {
    pub relation: String,
    pub direction: Direction,
    /// Parsed answers of the verdict slot.
    pub answer: Vec<String>,
    /// Probability of the positive verdict, when the backend reports one.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationDecision {
    pub label: RelationLabel,
    pub ambiguous: bool,
    /// Candidates whose answer was neither verdict word.
    pub unrecognized: Vec<usize>,
}

fn is_verdict(answer: &[String], word: &str) -> bool {
    matches!(answer, [a] if a.trim().eq_ignore_ascii_case(word))
}

/// Picks the label for an entity pair from its candidates' verdicts, which
/// must be given in schema order.
///
/// No positive verdict gives `Other`. Several positives are resolved by the
/// highest score when every positive has one (ties keep schema order), and
/// otherwise by schema order, flagged as ambiguous.
pub fn decide_relation(candidates: &[VerdictCandidate], vocab: &AnswerVocabulary) -> RelationDecision {
    let unrecognized = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| !is_verdict(&c.answer, &vocab.positive_verdict) && !is_verdict(&c.answer, &vocab.negative_verdict))
        .map(|(i, _)| i)
        .collect();
    let positive: Vec<&VerdictCandidate> = candidates
        .iter()
        .filter(|c| is_verdict(&c.answer, &vocab.positive_verdict))
        .collect();
    let (chosen, ambiguous) = match positive.as_slice() {
        [] => (None, false),
        [only] => (Some(*only), false),
        many => {
            if many.iter().all(|c| c.score.is_some()) {
                let best = many
                    .iter()
                    .copied()
                    .reduce(|best, c| if c.score > best.score { c } else { best });
                (best, false)
            } else {
                (Some(many[0]), true)
            }
        }
    };
    RelationDecision {
        label: chosen.map_or(RelationLabel::Other, |c| RelationLabel::typed(&c.relation, c.direction)),
        ambiguous,
        unrecognized,
    }
}

/// A prompt together with what the backend produced for it.
#[derive(Debug, Clone)]
pub struct DecodedPrompt<'a> {
    pub prompt: &'a Prompt,
    pub answers: SlotAnswers,
    /// Probability of each slot's emitted answer, keyed by slot surface.
    pub slot_scores: Option<BTreeMap<String, f64>>,
}

struct Grounder<'a> {
    text: &'a str,
    policy: &'a GroundingPolicy,
    sample_id: &'a str,
    diagnostics: &'a mut Vec<Diagnostic>,
}

impl Grounder<'_> {
    fn ground(&mut self, meta: &PromptMeta, answer: &str) -> PredSpan {
        match ground_span(self.text, answer, self.policy) {
            Ok(g) => {
                if g.case_folded {
                    self.diagnostics.push(Diagnostic::new(
                        self.sample_id,
                        meta,
                        DiagnosticCode::CaseFoldMatch,
                        format!("{answer:?} matched {:?} only after case folding", g.span.text),
                    ));
                }
                (&g.span).into()
            }
            Err(e) => {
                let detail = match e {
                    GroundError::EmptyPhrase => "empty answer".to_string(),
                    GroundError::NotFound(p) => format!("{p:?} not found in source text"),
                };
                self.diagnostics
                    .push(Diagnostic::new(self.sample_id, meta, DiagnosticCode::Ungrounded, detail));
                PredSpan {
                    text: normalize_phrase(answer),
                    offsets: None,
                }
            }
        }
    }
}

/// Reassembles one sample's information from its decoded prompts.
///
/// Events exist only where the trigger slot has answers: one event per
/// trigger answer. When an event type yields several triggers, its role
/// answers are pooled and attached to every one of those events. Relation
/// prompts are grouped by entity pair and resolved with [`decide_relation`].
pub fn aggregate(
    sample_id: &str,
    text: &str,
    decoded: &[DecodedPrompt<'_>],
    vocab: &AnswerVocabulary,
    policy: &GroundingPolicy,
) -> (SamplePredictions, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let mut out = SamplePredictions {
        sample_id: sample_id.to_string(),
        text: text.to_string(),
        ..Default::default()
    };
    let mut pairs: BTreeMap<usize, (EntityAnnotation, EntityAnnotation, Vec<VerdictCandidate>, String)> = BTreeMap::new();

    for d in decoded {
        let p = d.prompt;
        let mut g = Grounder {
            text,
            policy,
            sample_id,
            diagnostics: &mut diagnostics,
        };
        match &p.meta {
            PromptMeta::Event { event_type } => {
                let triggers = d.answers.slot(0);
                let mut arguments = Vec::new();
                for slot in p.slots().skip(1) {
                    let SlotTarget::Role { role, .. } = &slot.target else { continue };
                    for a in d.answers.slot(slot.index) {
                        arguments.push((role.clone(), a.clone()));
                    }
                }
                if triggers.is_empty() {
                    if !arguments.is_empty() {
                        g.diagnostics.push(Diagnostic::new(
                            sample_id,
                            &p.meta,
                            DiagnosticCode::OrphanRoleAnswers,
                            format!("{} role answers discarded: no trigger", arguments.len()),
                        ));
                    }
                    continue;
                }
                if triggers.len() > 1 && !arguments.is_empty() {
                    g.diagnostics.push(Diagnostic::new(
                        sample_id,
                        &p.meta,
                        DiagnosticCode::MultiEventPooled,
                        format!("{} triggers share {} pooled role answers", triggers.len(), arguments.len()),
                    ));
                }
                let arguments: Vec<PredArgument> = arguments
                    .iter()
                    .map(|(role, a)| PredArgument {
                        role: role.clone(),
                        span: g.ground(&p.meta, a),
                    })
                    .collect();
                for t in triggers {
                    out.events.push(PredEvent {
                        trigger: g.ground(&p.meta, t),
                        event_type: event_type.clone(),
                        arguments: arguments.clone(),
                    });
                }
            }
            PromptMeta::Entity { entity_type } => {
                for a in d.answers.slot(0) {
                    out.entities.push(PredEntity {
                        span: g.ground(&p.meta, a),
                        entity_type: entity_type.clone(),
                    });
                }
            }
            PromptMeta::Relation {
                relation,
                direction,
                pair_index,
                head,
                tail,
            } => {
                let surface = p.sub_prompts.first().map(|s| s.slot.surface.as_str()).unwrap_or("");
                let answer = d.answers.slot(0).to_vec();
                let emitted = d.slot_scores.as_ref().and_then(|s| s.get(surface).copied());
                let score = emitted.map(|s| if is_verdict(&answer, &vocab.negative_verdict) { 1.0 - s } else { s });
                let entry = pairs
                    .entry(*pair_index)
                    .or_insert_with(|| (head.clone(), tail.clone(), Vec::new(), format!("relation-pair:{pair_index}")));
                entry.2.push(VerdictCandidate {
                    relation: relation.clone(),
                    direction: *direction,
                    answer,
                    score,
                });
            }
        }
    }

    for (head, tail, candidates, meta) in pairs.into_values() {
        let decision = decide_relation(&candidates, vocab);
        if decision.ambiguous {
            diagnostics.push(Diagnostic::new(
                sample_id,
                &meta,
                DiagnosticCode::AmbiguousVerdict,
                format!("several positive verdicts without scores; chose {}", decision.label),
            ));
        }
        for i in decision.unrecognized {
            diagnostics.push(Diagnostic::new(
                sample_id,
                &meta,
                DiagnosticCode::UnrecognizedVerdict,
                format!("{}: {:?}", candidates[i].relation, candidates[i].answer),
            ));
        }
        out.relations.push(PredRelation {
            head: (&head).into(),
            tail: (&tail).into(),
            label: decision.label,
        });
    }
    (out, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ArgumentAnnotation, EventAnnotation};
    use crate::prompt::{CompileOptions, EventMode, PromptCompiler};
    use crate::schema::{EventTypeSpec, RoleSpec, SchemaBundle};
    use proptest::prelude::*;

    const SENTENCE: &str = "Retired military officers held protests in Malaysia.";

    fn bundle() -> SchemaBundle {
        let role = |name: &str| RoleSpec {
            name: name.into(),
            type_dependent_stem: format!("The {name} of the demonstrate event is {{SLOT}}."),
            fragment_id: None,
        };
        SchemaBundle {
            event_types: vec![EventTypeSpec {
                name: "demonstrate".into(),
                trigger_stem: "There is an event with type demonstrate triggered by the word {SLOT}".into(),
                roles: vec![role("agent"), role("place")],
            }],
            ..Default::default()
        }
    }

    fn span(text: &str, phrase: &str) -> Span {
        let start = text.find(phrase).unwrap();
        let start = text[..start].chars().count();
        Span::from_offsets(text, start, start + phrase.chars().count()).unwrap()
    }

    fn gold() -> Sample {
        Sample {
            id: "s".into(),
            text: SENTENCE.into(),
            events: vec![EventAnnotation {
                trigger: span(SENTENCE, "protests"),
                event_type: "demonstrate".into(),
                arguments: vec![
                    ArgumentAnnotation {
                        role: "agent".into(),
                        span: span(SENTENCE, "Retired military officers"),
                    },
                    ArgumentAnnotation {
                        role: "place".into(),
                        span: span(SENTENCE, "Malaysia"),
                    },
                ],
            }],
            ..Default::default()
        }
    }

    fn prompt(b: &SchemaBundle) -> Prompt {
        PromptCompiler::new(b, CompileOptions::default())
            .compile_event_prompt("s", SENTENCE, &b.event_types[0], EventMode::TypeSpecific)
            .unwrap()
    }

    fn parse(p: &Prompt, generated: &str) -> ParsedOutput {
        parse_output(p, generated, &MaskSurface::default(), &AnswerVocabulary::default())
    }

    #[test]
    fn encodes_demonstrate_event() {
        let b = bundle();
        let p = prompt(&b);
        let t = encode_target(&p, &gold(), &AnswerVocabulary::default(), |_| true).unwrap();
        assert_eq!(t.text, "<extra_id_0> protests <extra_id_1> Retired military officers <extra_id_2> Malaysia");
        let parsed = parse(&p, &t.text);
        assert!(parsed.diagnostics.is_empty());
        assert_eq!(
            parsed.answers.answers,
            vec![vec!["protests".to_string()], vec!["Retired military officers".into()], vec!["Malaysia".into()]]
        );
    }

    #[test]
    fn multiple_fillers_are_joined_in_text_order() {
        let b = bundle();
        let p = prompt(&b);
        let text = "Officers and students held protests in Malaysia.";
        let mut g = gold();
        g.text = text.into();
        g.events[0].trigger = span(text, "protests");
        g.events[0].arguments = vec![
            ArgumentAnnotation {
                role: "agent".into(),
                span: span(text, "students"),
            },
            ArgumentAnnotation {
                role: "agent".into(),
                span: span(text, "Officers"),
            },
        ];
        let t = encode_target(&p, &g, &AnswerVocabulary::default(), |_| true).unwrap();
        assert_eq!(t.text, "<extra_id_0> protests <extra_id_1> Officers | students <extra_id_2> none");
    }

    #[test]
    fn absent_event_encodes_null_words_and_aggregates_to_nothing() {
        let b = bundle();
        let p = prompt(&b);
        let empty = Sample {
            id: "s".into(),
            text: SENTENCE.into(),
            ..Default::default()
        };
        let vocab = AnswerVocabulary::default();
        let t = encode_target(&p, &empty, &vocab, |_| true).unwrap();
        assert_eq!(t.text, "<extra_id_0> none <extra_id_1> none <extra_id_2> none");
        let parsed = parse(&p, &t.text);
        assert!(parsed.answers.is_empty());
        let d = DecodedPrompt {
            prompt: &p,
            answers: parsed.answers,
            slot_scores: None,
        };
        let (pred, diags) = aggregate("s", SENTENCE, &[d], &vocab, &GroundingPolicy::default());
        assert!(pred.events.is_empty() && diags.is_empty());
    }

    #[test]
    fn separator_in_gold_is_rejected() {
        let b = bundle();
        let p = prompt(&b);
        let text = "a|b protests";
        let mut g = gold();
        g.text = text.into();
        g.events[0].trigger = span(text, "a|b");
        g.events[0].arguments.clear();
        assert!(matches!(
            encode_target(&p, &g, &AnswerVocabulary::default(), |_| true),
            Err(CodecError::SeparatorInAnswer { .. })
        ));
    }

    #[test]
    fn parse_empty_output() {
        let b = bundle();
        let p = prompt(&b);
        let parsed = parse(&p, "");
        assert!(parsed.answers.is_empty());
        assert_eq!(parsed.answers.answers.len(), 3);
        assert_eq!(parsed.diagnostics.len(), 3);
        assert!(parsed.diagnostics.iter().all(|d| d.code == DiagnosticCode::MissingSlot));
    }

    #[test]
    fn parse_drops_blank_segments() {
        let b = bundle();
        let p = prompt(&b);
        let parsed = parse(&p, "<extra_id_0> a | | b <extra_id_1> none <extra_id_2> none");
        assert_eq!(parsed.answers.slot(0), ["a", "b"]);
        assert_eq!(parsed.diagnostics.len(), 1);
        assert_eq!(parsed.diagnostics[0].code, DiagnosticCode::EmptySegment);
    }

    #[test]
    fn parse_flags_structural_anomalies() {
        let b = bundle();
        let p = prompt(&b);
        let parsed = parse(
            &p,
            "noise <extra_id_1> x <extra_id_0> y <extra_id_0> z <extra_id_7> w <extra_id_2>",
        );
        let codes: Vec<_> = parsed.diagnostics.iter().map(|d| d.code).collect();
        assert_eq!(
            codes,
            vec![
                DiagnosticCode::LeadingText,
                DiagnosticCode::SlotOrder,
                DiagnosticCode::DuplicateSlot,
                DiagnosticCode::UnknownSlot,
                DiagnosticCode::EmptySegment,
            ]
        );
        assert_eq!(parsed.answers.slot(0), ["y"]);
        assert_eq!(parsed.answers.slot(1), ["x"]);
        assert!(parsed.answers.slot(2).is_empty());
    }

    #[test]
    fn aggregate_single_event() {
        let b = bundle();
        let p = prompt(&b);
        let vocab = AnswerVocabulary::default();
        let parsed = parse(&p, "<extra_id_0> protests <extra_id_1> Retired military officers <extra_id_2> Malaysia");
        let d = DecodedPrompt {
            prompt: &p,
            answers: parsed.answers,
            slot_scores: None,
        };
        let (pred, diags) = aggregate("s", SENTENCE, &[d], &vocab, &GroundingPolicy::default());
        assert!(diags.is_empty());
        assert_eq!(pred.canonical(), SamplePredictions::from_gold(&gold()).canonical());
    }

    #[test]
    fn aggregate_orphan_roles_and_pooling() {
        let b = bundle();
        let p = prompt(&b);
        let vocab = AnswerVocabulary::default();
        let run = |generated: &str| {
            let d = DecodedPrompt {
                prompt: &p,
                answers: parse(&p, generated).answers,
                slot_scores: None,
            };
            aggregate("s", SENTENCE, &[d], &vocab, &GroundingPolicy::default())
        };
        let (pred, diags) = run("<extra_id_0> none <extra_id_1> Retired military officers <extra_id_2> Malaysia");
        assert!(pred.events.is_empty());
        assert_eq!(diags[0].code, DiagnosticCode::OrphanRoleAnswers);

        let (pred, diags) = run("<extra_id_0> held | protests <extra_id_1> none <extra_id_2> Malaysia | Mars");
        assert_eq!(pred.events.len(), 2);
        assert!(pred.events.iter().all(|e| e.arguments.len() == 2));
        let codes: Vec<_> = diags.iter().map(|d| d.code).collect();
        assert_eq!(codes, vec![DiagnosticCode::MultiEventPooled, DiagnosticCode::Ungrounded]);
        assert!(!pred.events[0].arguments[1].span.grounded());
    }

    fn cand(relation: &str, answer: &str, score: Option<f64>) -> VerdictCandidate {
        VerdictCandidate {
            relation: relation.into(),
            direction: Direction::Forward,
            answer: vec![answer.into()],
            score,
        }
    }

    #[test]
    fn relation_decision_rule() {
        let v = AnswerVocabulary::default();
        let d = decide_relation(&[cand("located-in", "right", None), cand("founded-by", "wrong", None)], &v);
        assert_eq!(d.label, RelationLabel::typed("located-in", Direction::Forward));
        let d = decide_relation(&[cand("a", "wrong", None), cand("b", "wrong", None)], &v);
        assert_eq!(d.label, RelationLabel::Other);
        let d = decide_relation(&[cand("a", "right", Some(0.6)), cand("b", "right", Some(0.9))], &v);
        assert_eq!(d.label, RelationLabel::typed("b", Direction::Forward));
        assert!(!d.ambiguous);
        let d = decide_relation(&[cand("a", "right", None), cand("b", "right", None)], &v);
        assert_eq!((d.label.to_string().as_str(), d.ambiguous), ("a", true));
        let d = decide_relation(&[cand("a", "maybe", None)], &v);
        assert_eq!((d.label, d.unrecognized), (RelationLabel::Other, vec![0]));
        assert_eq!(decide_relation(&[], &v).label, RelationLabel::Other);
    }

    #[test]
    fn alternate_verdict_pair() {
        let v = AnswerVocabulary {
            positive_verdict: "consistent".into(),
            negative_verdict: "inconsistent".into(),
            ..Default::default()
        };
        let d = decide_relation(&[cand("a", "inconsistent", None), cand("b", "consistent", None)], &v);
        assert_eq!(d.label.to_string(), "b");
    }

    proptest! {
        #[test]
        fn removing_surfaces_never_reduces_diagnostics(drop_order in Just((0usize..3).collect::<Vec<_>>()).prop_shuffle()) {
            let b = bundle();
            let p = prompt(&b);
            let mut text = encode_target(&p, &gold(), &AnswerVocabulary::default(), |_| true).unwrap().text;
            let mut last = parse(&p, &text).diagnostics.len();
            for i in drop_order {
                text = text.replace(&format!("<extra_id_{i}>"), "");
                let now = parse(&p, &text).diagnostics.len();
                prop_assert!(now >= last);
                last = now;
            }
        }

        #[test]
        fn parse_is_total(generated in ".{0,80}") {
            let b = bundle();
            let p = prompt(&b);
            let parsed = parse(&p, &generated);
            prop_assert_eq!(parsed.answers.answers.len(), 3);
            prop_assert!(parsed.answers.answers.iter().flatten().all(|a| !a.trim().is_empty() && !a.contains('|')));
        }
    }
}
