use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    char_slice, ArgumentAnnotation, EntityAnnotation, EventAnnotation, RelationAnnotation,
    RelationLabel, Sample, Span,
};
use crate::codec::{PredArgument, PredEntity, PredEvent, PredRelation, PredSpan, SamplePredictions};
use crate::error::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    IeJsonl,
    ConllColumns,
    RePairs,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ie-jsonl" => Ok(Self::IeJsonl),
            "conll-columns" => Ok(Self::ConllColumns),
            "re-pairs" => Ok(Self::RePairs),
            other => Err(format!("unknown dataset format {other:?}")),
        }
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Vec<Sample>, DataError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        DatasetFormat::IeJsonl => parse_ie_jsonl(&content),
        DatasetFormat::ConllColumns => parse_conll_columns(&content),
        DatasetFormat::RePairs => parse_re_pairs(&content),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpanRecord {
    start: Option<usize>,
    end: Option<usize>,
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EntityRecord {
    start: Option<usize>,
    end: Option<usize>,
    text: String,
    #[serde(rename = "type")]
    entity_type: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArgumentRecord {
    role: String,
    start: Option<usize>,
    end: Option<usize>,
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EventRecord {
    trigger: SpanRecord,
    #[serde(rename = "type")]
    event_type: String,
    #[serde(default)]
    arguments: Vec<ArgumentRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RelationRecord {
    head_idx: usize,
    tail_idx: usize,
    label: RelationLabel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IeRecord {
    id: String,
    text: String,
    #[serde(default)]
    entities: Vec<EntityRecord>,
    #[serde(default)]
    events: Vec<EventRecord>,
    #[serde(default)]
    relations: Vec<RelationRecord>,
}

#[derive(Debug, Clone, Deserialize)]
struct RePairRecord {
    id: String,
    text: String,
    head: EntityRecord,
    tail: EntityRecord,
    label: RelationLabel,
}

fn gold_span(doc: &str, line: usize, start: Option<usize>, end: Option<usize>, text: &str) -> Result<Span, DataError> {
    let (Some(start), Some(end)) = (start, end) else {
        return Err(DataError::Malformed {
            line,
            message: format!("span {text:?} is missing offsets"),
        });
    };
    match char_slice(doc, start, end) {
        Some(actual) if start < end && actual == text => Ok(Span {
            start,
            end,
            text: text.to_string(),
        }),
        actual => Err(DataError::OffsetMismatch {
            line,
            start,
            end,
            expected: text.to_string(),
            actual: actual.unwrap_or("<out of bounds>").to_string(),
        }),
    }
}

fn gold_entity(doc: &str, line: usize, r: &EntityRecord) -> Result<EntityAnnotation, DataError> {
    Ok(EntityAnnotation {
        span: gold_span(doc, line, r.start, r.end, &r.text)?,
        entity_type: r.entity_type.clone(),
    })
}

fn json_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_line<'a, T: Deserialize<'a>>(line: usize, raw: &'a str) -> Result<T, DataError> {
    serde_json::from_str(raw).map_err(|e| DataError::Malformed {
        line,
        message: e.to_string(),
    })
}

/// One JSON object per line; relations reference the `entities` array by index.
pub fn parse_ie_jsonl(content: &str) -> Result<Vec<Sample>, DataError> {
    json_lines(content)
        .map(|(line, raw)| {
            let rec: IeRecord = parse_line(line, raw)?;
            let doc = rec.text.as_str();
            let entities = rec
                .entities
                .iter()
                .map(|e| gold_entity(doc, line, e))
                .collect::<Result<Vec<_>, _>>()?;
            let events = rec
                .events
                .iter()
                .map(|ev| {
                    Ok(EventAnnotation {
                        trigger: gold_span(doc, line, ev.trigger.start, ev.trigger.end, &ev.trigger.text)?,
                        event_type: ev.event_type.clone(),
                        arguments: ev
                            .arguments
                            .iter()
                            .map(|a| {
                                Ok(ArgumentAnnotation {
                                    role: a.role.clone(),
                                    span: gold_span(doc, line, a.start, a.end, &a.text)?,
                                })
                            })
                            .collect::<Result<_, DataError>>()?,
                    })
                })
                .collect::<Result<Vec<_>, DataError>>()?;
            let relations = rec
                .relations
                .iter()
                .map(|r| {
                    let lookup = |idx: usize| {
                        entities.get(idx).cloned().ok_or_else(|| DataError::Malformed {
                            line,
                            message: format!("relation references entity #{idx}, only {} present", entities.len()),
                        })
                    };
                    Ok(RelationAnnotation {
                        head: lookup(r.head_idx)?,
                        tail: lookup(r.tail_idx)?,
                        label: r.label.clone(),
                    })
                })
                .collect::<Result<Vec<_>, DataError>>()?;
            Ok(Sample {
                id: rec.id,
                text: rec.text,
                entities,
                events,
                relations,
            })
        })
        .collect()
}

/// One `{id, text, head, tail, label}` object per line.
pub fn parse_re_pairs(content: &str) -> Result<Vec<Sample>, DataError> {
    json_lines(content)
        .map(|(line, raw)| {
            let rec: RePairRecord = parse_line(line, raw)?;
            let head = gold_entity(&rec.text, line, &rec.head)?;
            let tail = gold_entity(&rec.text, line, &rec.tail)?;
            Ok(Sample {
                id: rec.id,
                relations: vec![RelationAnnotation {
                    head: head.clone(),
                    tail: tail.clone(),
                    label: rec.label,
                }],
                entities: vec![head, tail],
                text: rec.text,
                events: vec![],
            })
        })
        .collect()
}

enum BioTag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_bio(tag: &str) -> Option<BioTag<'_>> {
    if tag == "O" {
        return Some(BioTag::Outside);
    }
    let (prefix, ty) = tag.split_once('-')?;
    if ty.is_empty() {
        return None;
    }
    match prefix {
        "B" => Some(BioTag::Begin(ty)),
        "I" => Some(BioTag::Inside(ty)),
        _ => None,
    }
}

/// Token-per-line BIO files. The first column is the token and the last is
/// the tag, so both two-column and CoNLL-2003 four-column files are read.
/// Sentence text is the tokens joined by single spaces. `-DOCSTART-` lines
/// are skipped. An `I-X` that does not continue an open `X` entity starts one.
pub fn parse_conll_columns(content: &str) -> Result<Vec<Sample>, DataError> {
    struct Open {
        start: usize,
        end: usize,
        ty: String,
    }
    let mut samples = Vec::new();
    let mut tokens: Vec<String> = Vec::new();
    let mut entities: Vec<(usize, usize, String)> = Vec::new();
    let mut open: Option<Open> = None;
    let mut offset = 0usize;

    let mut flush = |tokens: &mut Vec<String>, entities: &mut Vec<(usize, usize, String)>, open: &mut Option<Open>, offset: &mut usize| {
        if let Some(o) = open.take() {
            entities.push((o.start, o.end, o.ty));
        }
        if tokens.is_empty() {
            return;
        }
        let text = tokens.join(" ");
        let ents = entities
            .drain(..)
            .map(|(s, e, ty)| EntityAnnotation {
                span: Span::from_offsets(&text, s, e).expect("offsets built from tokens"),
                entity_type: ty,
            })
            .collect();
        samples.push(Sample {
            id: samples.len().to_string(),
            text,
            entities: ents,
            events: vec![],
            relations: vec![],
        });
        tokens.clear();
        *offset = 0;
    };

    for (i, raw) in content.lines().enumerate() {
        let line = i + 1;
        let cols: Vec<&str> = raw.split_whitespace().collect();
        if cols.is_empty() {
            flush(&mut tokens, &mut entities, &mut open, &mut offset);
            continue;
        }
        if cols[0] == "-DOCSTART-" {
            continue;
        }
        if cols.len() < 2 {
            return Err(DataError::Malformed {
                line,
                message: format!("expected \"token tag\", got {raw:?}"),
            });
        }
        let token = cols[0];
        let tag = cols[cols.len() - 1];
        let start = if tokens.is_empty() { 0 } else { offset + 1 };
        let end = start + token.chars().count();
        match parse_bio(tag).ok_or_else(|| DataError::UnknownTag {
            line,
            tag: tag.to_string(),
        })? {
            BioTag::Outside => {
                if let Some(o) = open.take() {
                    entities.push((o.start, o.end, o.ty));
                }
            }
            BioTag::Inside(ty) if open.as_ref().is_some_and(|o| o.ty == ty) => {
                open.as_mut().expect("checked").end = end;
            }
            BioTag::Begin(ty) | BioTag::Inside(ty) => {
                if let Some(o) = open.take() {
                    entities.push((o.start, o.end, o.ty));
                }
                open = Some(Open {
                    start,
                    end,
                    ty: ty.to_string(),
                });
            }
        }
        tokens.push(token.to_string());
        offset = end;
    }
    flush(&mut tokens, &mut entities, &mut open, &mut offset);
    Ok(samples)
}

fn span_record(span: &Span) -> SpanRecord {
    SpanRecord {
        start: Some(span.start),
        end: Some(span.end),
        text: span.text.clone(),
    }
}

fn entity_record(e: &EntityAnnotation) -> EntityRecord {
    EntityRecord {
        start: Some(e.span.start),
        end: Some(e.span.end),
        text: e.span.text.clone(),
        entity_type: e.entity_type.clone(),
    }
}

fn push_entity(entities: &mut Vec<EntityRecord>, rec: EntityRecord) -> usize {
    let found = entities.iter().position(|e| {
        e.start == rec.start && e.end == rec.end && e.text == rec.text && e.entity_type == rec.entity_type
    });
    found.unwrap_or_else(|| {
        entities.push(rec);
        entities.len() - 1
    })
}

/// Writes gold samples as ie-jsonl. Relation endpoints missing from
/// `entities` are appended so that `head_idx`/`tail_idx` resolve.
pub fn write_ie_jsonl<W: Write>(mut out: W, samples: &[Sample]) -> std::io::Result<()> {
    for s in samples {
        let mut entities: Vec<EntityRecord> = s.entities.iter().map(entity_record).collect();
        let relations = s
            .relations
            .iter()
            .map(|r| RelationRecord {
                head_idx: push_entity(&mut entities, entity_record(&r.head)),
                tail_idx: push_entity(&mut entities, entity_record(&r.tail)),
                label: r.label.clone(),
            })
            .collect();
        let rec = IeRecord {
            id: s.id.clone(),
            text: s.text.clone(),
            entities,
            events: s
                .events
                .iter()
                .map(|ev| EventRecord {
                    trigger: span_record(&ev.trigger),
                    event_type: ev.event_type.clone(),
                    arguments: ev
                        .arguments
                        .iter()
                        .map(|a| ArgumentRecord {
                            role: a.role.clone(),
                            start: Some(a.span.start),
                            end: Some(a.span.end),
                            text: a.span.text.clone(),
                        })
                        .collect(),
                })
                .collect(),
            relations,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn pred_span(start: Option<usize>, end: Option<usize>, text: &str) -> PredSpan {
    PredSpan {
        text: text.to_string(),
        offsets: start.zip(end),
    }
}

fn pred_entity_record(e: &PredEntity) -> EntityRecord {
    EntityRecord {
        start: e.span.offsets.map(|o| o.0),
        end: e.span.offsets.map(|o| o.1),
        text: e.span.text.clone(),
        entity_type: e.entity_type.clone(),
    }
}

/// Writes predictions as ie-jsonl; ungrounded spans get `null` offsets.
pub fn write_predictions_jsonl<W: Write>(mut out: W, predictions: &[SamplePredictions]) -> std::io::Result<()> {
    for p in predictions {
        write_predictions_line(&mut out, p)?;
    }
    Ok(())
}

fn write_predictions_line<W: Write>(mut out: W, p: &SamplePredictions) -> std::io::Result<()> {
    let mut entities: Vec<EntityRecord> = p.entities.iter().map(pred_entity_record).collect();
    let relations = p
        .relations
        .iter()
        .map(|r| RelationRecord {
            head_idx: push_entity(&mut entities, pred_entity_record(&r.head)),
            tail_idx: push_entity(&mut entities, pred_entity_record(&r.tail)),
            label: r.label.clone(),
        })
        .collect();
    let rec = IeRecord {
        id: p.sample_id.clone(),
        text: p.text.clone(),
        entities,
        events: p
            .events
            .iter()
            .map(|ev| EventRecord {
                trigger: SpanRecord {
                    start: ev.trigger.offsets.map(|o| o.0),
                    end: ev.trigger.offsets.map(|o| o.1),
                    text: ev.trigger.text.clone(),
                },
                event_type: ev.event_type.clone(),
                arguments: ev
                    .arguments
                    .iter()
                    .map(|a| ArgumentRecord {
                        role: a.role.clone(),
                        start: a.span.offsets.map(|o| o.0),
                        end: a.span.offsets.map(|o| o.1),
                        text: a.span.text.clone(),
                    })
                    .collect(),
            })
            .collect(),
        relations,
    };
    serde_json::to_writer(&mut out, &rec)?;
    out.write_all(b"\n")
}

/// Reads a predictions file (ie-jsonl whose offsets may be `null` for
/// ungrounded answers). Entities that only serve as relation endpoints are
/// still listed under `entities`, as written by the `predict` command.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<SamplePredictions>, DataError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_predictions(&content)
}

pub fn parse_predictions(content: &str) -> Result<Vec<SamplePredictions>, DataError> {
    json_lines(content)
        .map(|(line, raw)| {
            let rec: IeRecord = parse_line(line, raw)?;
            let entities: Vec<PredEntity> = rec
                .entities
                .iter()
                .map(|e| PredEntity {
                    span: pred_span(e.start, e.end, &e.text),
                    entity_type: e.entity_type.clone(),
                })
                .collect();
            let relations = rec
                .relations
                .iter()
                .map(|r| {
                    let get = |i: usize| {
                        entities.get(i).cloned().ok_or_else(|| DataError::Malformed {
                            line,
                            message: format!("relation references entity #{i}"),
                        })
                    };
                    Ok(PredRelation {
                        head: get(r.head_idx)?,
                        tail: get(r.tail_idx)?,
                        label: r.label.clone(),
                    })
                })
                .collect::<Result<Vec<_>, DataError>>()?;
            Ok(SamplePredictions {
                sample_id: rec.id,
                text: rec.text,
                entities,
                events: rec
                    .events
                    .iter()
                    .map(|ev| PredEvent {
                        trigger: pred_span(ev.trigger.start, ev.trigger.end, &ev.trigger.text),
                        event_type: ev.event_type.clone(),
                        arguments: ev
                            .arguments
                            .iter()
                            .map(|a| PredArgument {
                                role: a.role.clone(),
                                span: pred_span(a.start, a.end, &a.text),
                            })
                            .collect(),
                    })
                    .collect(),
                relations,
            })
        })
        .collect()
}
