//! Fixtures and a brute-force counter shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slotie::codec::{PredSpan, SamplePredictions};
use slotie::data::{Direction, RelationLabel};
use slotie::synth::synthetic_corpus;
use slotie::Sample;

pub const ENTITY_TYPES: &[&str] = &["PER", "ORG", "LOC", "MISC"];
pub const EVENT_TYPES: &[&str] = &["attack", "demonstrate", "die", "elect", "meet", "transport"];
pub const ROLES: &[&str] = &["attacker", "target", "place", "agent", "entity", "victim"];

fn label(rng: &mut ChaCha8Rng) -> RelationLabel {
    let names = ["located-in", "founded-by", "born-in", "won", "partner-of"];
    match rng.random_range(0..3) {
        0 => RelationLabel::Other,
        1 => RelationLabel::typed(*names.choose(rng).unwrap(), Direction::Forward),
        _ => RelationLabel::typed(*names.choose(rng).unwrap(), Direction::Reverse),
    }
}

fn perturb(rng: &mut ChaCha8Rng, span: &mut PredSpan) {
    match rng.random_range(0..10) {
        0 => {
            if let Some((s, e)) = span.offsets {
                span.offsets = Some((s + 1, e + 1));
            }
        }
        1 => span.offsets = None,
        2 => span.text = format!(" {}  x", span.text),
        _ => {}
    }
}

/// Gold samples and a noisy prediction set over them.
pub fn random_fixture(seed: u64) -> (Vec<Sample>, Vec<SamplePredictions>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..6);
    let gold = synthetic_corpus(n, seed ^ 0x5eed);
    let mut preds = Vec::new();
    for s in &gold {
        let mut p = SamplePredictions::from_gold(s);
        p.entities.retain(|_| rng.random_bool(0.8));
        for e in &mut p.entities {
            if rng.random_bool(0.15) {
                e.entity_type = ENTITY_TYPES.choose(&mut rng).unwrap().to_string();
            }
            perturb(&mut rng, &mut e.span);
        }
        if let Some(e) = p.entities.first().cloned() {
            if rng.random_bool(0.3) {
                p.entities.push(e);
            }
        }
        p.events.retain(|_| rng.random_bool(0.85));
        for ev in &mut p.events {
            if rng.random_bool(0.15) {
                ev.event_type = EVENT_TYPES.choose(&mut rng).unwrap().to_string();
            }
            perturb(&mut rng, &mut ev.trigger);
            ev.arguments.retain(|_| rng.random_bool(0.8));
            for a in &mut ev.arguments {
                if rng.random_bool(0.15) {
                    a.role = ROLES.choose(&mut rng).unwrap().to_string();
                }
                perturb(&mut rng, &mut a.span);
            }
        }
        if let Some(ev) = p.events.first().cloned() {
            if rng.random_bool(0.3) {
                p.events.push(ev);
            }
        }
        p.relations.retain(|_| rng.random_bool(0.85));
        for r in &mut p.relations {
            if rng.random_bool(0.3) {
                r.label = label(&mut rng);
            }
            perturb(&mut rng, &mut r.head.span);
        }
        for _ in 0..rng.random_range(0..3) {
            let len = s.text.chars().count();
            let start = rng.random_range(0..len - 1);
            let end = rng.random_range(start + 1..=len);
            let text: String = s.text.chars().skip(start).take(end - start).collect();
            p.entities.push(slotie::codec::PredEntity {
                span: PredSpan {
                    text,
                    offsets: Some((start, end)),
                },
                entity_type: ENTITY_TYPES.choose(&mut rng).unwrap().to_string(),
            });
        }
        preds.push(p);
    }
    if rng.random_bool(0.2) {
        preds.pop();
    }
    (gold, preds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Trigger,
    Argument,
    Ner,
    Re { include_other: bool },
}

fn key(span: &PredSpan, offsets: bool) -> Option<String> {
    if offsets {
        span.offsets.map(|(s, e)| format!("{s}:{e}"))
    } else {
        Some(span.text.split_whitespace().collect::<Vec<_>>().join(" "))
    }
}

/// Rows as `(class, key)` strings, one per scored unit.
pub fn rows(preds: &[SamplePredictions], family: Family, offsets: bool) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for p in preds {
        let id = &p.sample_id;
        match family {
            Family::Trigger => {
                for ev in &p.events {
                    if let Some(k) = key(&ev.trigger, offsets) {
                        out.push((ev.event_type.clone(), format!("{id}\u{1}{k}")));
                    }
                }
            }
            Family::Argument => {
                for ev in &p.events {
                    for a in &ev.arguments {
                        if let Some(k) = key(&a.span, offsets) {
                            out.push((ev.event_type.clone(), format!("{id}\u{1}{}\u{1}{k}", a.role)));
                        }
                    }
                }
            }
            Family::Ner => {
                for e in &p.entities {
                    if let Some(k) = key(&e.span, offsets) {
                        out.push((e.entity_type.clone(), format!("{id}\u{1}{k}")));
                    }
                }
            }
            Family::Re { include_other } => {
                for r in &p.relations {
                    if r.label.is_other() && !include_other {
                        continue;
                    }
                    if let (Some(h), Some(t)) = (key(&r.head.span, offsets), key(&r.tail.span, offsets)) {
                        out.push((r.label.to_string(), format!("{id}\u{1}{h}\u{1}{t}")));
                    }
                }
            }
        }
    }
    out
}

/// `(tp, fp, fn)` by direct enumeration over deduplicated rows, optionally
/// restricted to one class.
pub fn brute_counts(
    gold: &[Sample],
    preds: &[SamplePredictions],
    family: Family,
    offsets: bool,
    class: Option<&str>,
) -> (usize, usize, usize) {
    let gold: Vec<SamplePredictions> = gold.iter().map(SamplePredictions::from_gold).collect();
    let keep = |rows: Vec<(String, String)>| {
        let mut v: Vec<(String, String)> = rows.into_iter().filter(|(c, _)| class.is_none_or(|k| c == k)).collect();
        v.sort();
        v.dedup();
        v
    };
    let g = keep(rows(&gold, family, offsets));
    let p = keep(rows(preds, family, offsets));
    let mut tp = 0;
    for row in &p {
        if g.iter().any(|x| x == row) {
            tp += 1;
        }
    }
    (tp, p.len() - tp, g.len() - tp)
}
