//! Precision/recall/F1 over trigger classification (T-C), argument
//! classification (A-C), entities, and relation labels.
//!
//! Gold and predictions are reduced to sets of tuples before counting, so
//! repeated predictions never change a score. Scores are generic over the
//! scalar type: `f64` for reports, `Ratio<u64>` when exact values matter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::codec::{PredSpan, SamplePredictions};
use crate::data::Sample;
use crate::grounding::normalize_phrase;
use crate::prompt::Task;

/// Numeric type a score can be computed in.
pub trait Scalar: Num + FromPrimitive + ToPrimitive + Copy + PartialOrd {}

impl<T> Scalar for T where T: Num + FromPrimitive + ToPrimitive + Copy + PartialOrd {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    /// Compare character offsets; ungrounded predictions are left out.
    #[default]
    Offset,
    /// Compare whitespace-normalized surface strings.
    String,
}

impl FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offset" => Ok(MatchMode::Offset),
            "string" => Ok(MatchMode::String),
            other => Err(format!("unknown match mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    #[default]
    Micro,
    /// Unweighted mean of per-class precision, recall and F1.
    Macro,
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Averaging::Micro),
            "macro" => Ok(Averaging::Macro),
            other => Err(format!("unknown averaging {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn merge(self, other: Counts) -> Counts {
        Counts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn score<S: Scalar>(self) -> FamilyScore<S> {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                S::zero()
            } else {
                cast::<S>(num) / cast::<S>(den)
            }
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        FamilyScore {
            counts: self,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }
}

fn cast<S: Scalar>(n: usize) -> S {
    S::from_usize(n).expect("count fits the scalar type")
}

fn f1<S: Scalar>(p: S, r: S) -> S {
    let sum = p + r;
    if sum == S::zero() {
        S::zero()
    } else {
        (S::one() + S::one()) * p * r / sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore<S> {
    #[serde(flatten)]
    pub counts: Counts,
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

impl<S: Scalar> FamilyScore<S> {
    /// Macro average of per-class scores; counts are summed.
    fn macro_average(parts: &[FamilyScore<S>]) -> FamilyScore<S> {
        if parts.is_empty() {
            return Counts::default().score();
        }
        let n = cast::<S>(parts.len());
        let mean = |f: fn(&FamilyScore<S>) -> S| parts.iter().map(f).fold(S::zero(), |a, b| a + b) / n;
        FamilyScore {
            counts: parts.iter().fold(Counts::default(), |a, p| a.merge(p.counts)),
            precision: mean(|p| p.precision),
            recall: mean(|p| p.recall),
            f1: mean(|p| p.f1),
        }
    }

    pub fn to_f64(&self) -> FamilyScore<f64> {
        FamilyScore {
            counts: self.counts,
            precision: self.precision.to_f64().unwrap_or(f64::NAN),
            recall: self.recall.to_f64().unwrap_or(f64::NAN),
            f1: self.f1.to_f64().unwrap_or(f64::NAN),
        }
    }
}

/// Family names used as report keys.
pub mod family {
    pub const TRIGGER: &str = "trigger_classification";
    pub const ARGUMENT: &str = "argument_classification";
    pub const NER: &str = "ner";
    pub const RE: &str = "re";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReportOf<S> {
    pub match_mode: MatchMode,
    pub averaging: Averaging,
    pub families: BTreeMap<String, FamilyScore<S>>,
    /// Breakdown per class (event type, entity type or relation label).
    pub per_type: BTreeMap<String, BTreeMap<String, FamilyScore<S>>>,
    /// Diagnostic tallies: scoring exclusions plus anything merged in by the pipeline.
    pub diagnostics: BTreeMap<String, usize>,
}

impl<S: Scalar> ScoreReportOf<S> {
    fn new(match_mode: MatchMode, averaging: Averaging) -> Self {
        Self {
            match_mode,
            averaging,
            families: BTreeMap::new(),
            per_type: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    fn absorb(&mut self, other: ScoreReportOf<S>) {
        self.families.extend(other.families);
        self.per_type.extend(other.per_type);
        for (k, v) in other.diagnostics {
            *self.diagnostics.entry(k).or_default() += v;
        }
    }

    pub fn family(&self, name: &str) -> Option<&FamilyScore<S>> {
        self.families.get(name)
    }

    pub fn to_f64(&self) -> ScoreReportOf<f64> {
        ScoreReportOf {
            match_mode: self.match_mode,
            averaging: self.averaging,
            families: self.families.iter().map(|(k, v)| (k.clone(), v.to_f64())).collect(),
            per_type: self
                .per_type
                .iter()
                .map(|(k, m)| (k.clone(), m.iter().map(|(c, v)| (c.clone(), v.to_f64())).collect()))
                .collect(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Plain-text table, one row per family and per class.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<40} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8}", "metric", "tp", "fp", "fn", "P", "R", "F1");
        let mut row = |name: &str, s: &FamilyScore<S>| {
            let s = s.to_f64();
            let _ = writeln!(
                out,
                "{:<40} {:>6} {:>6} {:>6} {:>8.4} {:>8.4} {:>8.4}",
                name, s.counts.tp, s.counts.fp, s.counts.fn_, s.precision, s.recall, s.f1
            );
        };
        for (name, s) in &self.families {
            row(name, s);
            if let Some(classes) = self.per_type.get(name) {
                for (class, cs) in classes {
                    row(&format!("  {class}"), cs);
                }
            }
        }
        for (code, n) in &self.diagnostics {
            let _ = writeln!(out, "diagnostic {code}: {n}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum SpanKey {
    Offsets(usize, usize),
    Text(String),
}

fn span_key(span: &PredSpan, mode: MatchMode) -> Option<SpanKey> {
    match mode {
        MatchMode::Offset => span.offsets.map(|(s, e)| SpanKey::Offsets(s, e)),
        MatchMode::String => Some(SpanKey::Text(normalize_phrase(&span.text))),
    }
}

/// A scored unit: its class (for breakdowns) and everything else that must match.
type Tuple = (String, Vec<String>, Vec<SpanKey>);

/// Receives `(class, extra key parts, spans)` for one predicted tuple.
type Emit<'a> = dyn FnMut(String, Vec<String>, Vec<&PredSpan>) + 'a;

struct Extracted {
    tuples: BTreeSet<Tuple>,
    excluded: usize,
}

fn extract(samples: &[SamplePredictions], mode: MatchMode, f: impl Fn(&SamplePredictions, &mut Emit<'_>)) -> Extracted {
    let mut tuples = BTreeSet::new();
    let mut excluded = 0;
    for s in samples {
        f(s, &mut |class, mut rest, spans| {
            let keys: Option<Vec<SpanKey>> = spans.iter().map(|sp| span_key(sp, mode)).collect();
            match keys {
                Some(keys) => {
                    rest.insert(0, s.sample_id.clone());
                    tuples.insert((class, rest, keys));
                }
                None => excluded += 1,
            }
        });
    }
    Extracted { tuples, excluded }
}

fn count(gold: &BTreeSet<Tuple>, pred: &BTreeSet<Tuple>) -> (Counts, BTreeMap<String, Counts>) {
    let mut per: BTreeMap<String, Counts> = BTreeMap::new();
    for t in gold {
        let c = per.entry(t.0.clone()).or_default();
        if pred.contains(t) {
            c.tp += 1;
        } else {
            c.fn_ += 1;
        }
    }
    for t in pred.difference(gold) {
        per.entry(t.0.clone()).or_default().fp += 1;
    }
    let total = per.values().fold(Counts::default(), |a, c| a.merge(*c));
    (total, per)
}

fn family_report<S: Scalar>(
    name: &str,
    gold: Extracted,
    pred: Extracted,
    mode: MatchMode,
    averaging: Averaging,
) -> ScoreReportOf<S> {
    let (total, per) = count(&gold.tuples, &pred.tuples);
    let per_scores: BTreeMap<String, FamilyScore<S>> = per.into_iter().map(|(k, c)| (k, c.score())).collect();
    let overall = match averaging {
        Averaging::Micro => total.score(),
        Averaging::Macro => FamilyScore::macro_average(&per_scores.values().copied().collect::<Vec<_>>()),
    };
    let mut report = ScoreReportOf::new(mode, averaging);
    report.families.insert(name.to_string(), overall);
    report.per_type.insert(name.to_string(), per_scores);
    if pred.excluded > 0 {
        report.diagnostics.insert(format!("{name}.ungrounded_excluded"), pred.excluded);
    }
    report
}

fn gold_view(gold: &[Sample]) -> Vec<SamplePredictions> {
    gold.iter().map(SamplePredictions::from_gold).collect()
}

/// T-C: trigger and event type. A-C: argument, role and event type.
pub fn score_event<S: Scalar>(gold: &[Sample], pred: &[SamplePredictions], mode: MatchMode) -> ScoreReportOf<S> {
    let gold = gold_view(gold);
    let triggers = |s: &SamplePredictions, emit: &mut Emit<'_>| {
        for ev in &s.events {
            emit(ev.event_type.clone(), vec![], vec![&ev.trigger]);
        }
    };
    let arguments = |s: &SamplePredictions, emit: &mut Emit<'_>| {
        for ev in &s.events {
            for a in &ev.arguments {
                emit(ev.event_type.clone(), vec![a.role.clone()], vec![&a.span]);
            }
        }
    };
    let mut report = family_report(
        family::TRIGGER,
        extract(&gold, mode, triggers),
        extract(pred, mode, triggers),
        mode,
        Averaging::Micro,
    );
    report.absorb(family_report(
        family::ARGUMENT,
        extract(&gold, mode, arguments),
        extract(pred, mode, arguments),
        mode,
        Averaging::Micro,
    ));
    report
}

/// Span and entity type, micro-averaged, with a per-type breakdown.
pub fn score_ner<S: Scalar>(gold: &[Sample], pred: &[SamplePredictions], mode: MatchMode) -> ScoreReportOf<S> {
    let gold = gold_view(gold);
    let entities = |s: &SamplePredictions, emit: &mut Emit<'_>| {
        for e in &s.entities {
            emit(e.entity_type.clone(), vec![], vec![&e.span]);
        }
    };
    family_report(
        family::NER,
        extract(&gold, mode, entities),
        extract(pred, mode, entities),
        mode,
        Averaging::Micro,
    )
}

/// Direction-sensitive relation labels per entity pair. `Other` is left out
/// unless `include_other` is set.
pub fn score_re<S: Scalar>(
    gold: &[Sample],
    pred: &[SamplePredictions],
    mode: MatchMode,
    averaging: Averaging,
    include_other: bool,
) -> ScoreReportOf<S> {
    let gold = gold_view(gold);
    let relations = |s: &SamplePredictions, emit: &mut Emit<'_>| {
        for r in &s.relations {
            if include_other || !r.label.is_other() {
                emit(r.label.to_string(), vec![], vec![&r.head.span, &r.tail.span]);
            }
        }
    };
    family_report(
        family::RE,
        extract(&gold, mode, relations),
        extract(pred, mode, relations),
        mode,
        averaging,
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    #[serde(default)]
    pub match_mode: MatchMode,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub include_other: bool,
}

/// Scores the families that belong to `task`.
pub fn score_task<S: Scalar>(task: Task, gold: &[Sample], pred: &[SamplePredictions], opts: ScoreOptions) -> ScoreReportOf<S> {
    match task {
        Task::Ee => score_event(gold, pred, opts.match_mode),
        Task::Ner => score_ner(gold, pred, opts.match_mode),
        Task::Re => score_re(gold, pred, opts.match_mode, opts.averaging, opts.include_other),
    }
}
