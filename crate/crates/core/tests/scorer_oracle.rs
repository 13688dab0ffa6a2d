mod common;

use common::{brute_counts, random_fixture, rows, Family};
use num_rational::Ratio;
use slotie::eval::{family, score_event, score_ner, score_re, Averaging, MatchMode};
use slotie::{ExactScoreReport, ScoreReport};

fn name(f: Family) -> &'static str {
    match f {
        Family::Trigger => family::TRIGGER,
        Family::Argument => family::ARGUMENT,
        Family::Ner => family::NER,
        Family::Re { .. } => family::RE,
    }
}

const FAMILIES: [Family; 5] = [
    Family::Trigger,
    Family::Argument,
    Family::Ner,
    Family::Re { include_other: false },
    Family::Re { include_other: true },
];

fn score(f: Family, gold: &[slotie::Sample], pred: &[slotie::SamplePredictions], mode: MatchMode, avg: Averaging) -> ExactScoreReport {
    match f {
        Family::Trigger | Family::Argument => score_event(gold, pred, mode),
        Family::Ner => score_ner(gold, pred, mode),
        Family::Re { include_other } => score_re(gold, pred, mode, avg, include_other),
    }
}

#[test]
fn counts_match_brute_force_on_random_fixtures() {
    for seed in 0..150 {
        let (gold, pred) = random_fixture(seed);
        for mode in [MatchMode::Offset, MatchMode::String] {
            for f in FAMILIES {
                let report = score(f, &gold, &pred, mode, Averaging::Micro);
                let c = report.family(name(f)).unwrap().counts;
                let want = brute_counts(&gold, &pred, f, mode == MatchMode::Offset, None);
                assert_eq!((c.tp, c.fp, c.fn_), want, "seed {seed} {mode:?} {f:?}");
                for (class, s) in &report.per_type[name(f)] {
                    let want = brute_counts(&gold, &pred, f, mode == MatchMode::Offset, Some(class));
                    assert_eq!((s.counts.tp, s.counts.fp, s.counts.fn_), want, "seed {seed} {f:?} {class}");
                }
            }
        }
    }
}

#[test]
fn exact_scores_follow_the_counts() {
    for seed in 0..60 {
        let (gold, pred) = random_fixture(seed);
        for f in FAMILIES {
            let (tp, fp, fn_) = brute_counts(&gold, &pred, f, true, None);
            let report = score(f, &gold, &pred, MatchMode::Offset, Averaging::Micro);
            let s = report.family(name(f)).unwrap();
            let ratio = |n: usize, d: usize| if d == 0 { Ratio::from_integer(0) } else { Ratio::new(n as u64, d as u64) };
            let p = ratio(tp, tp + fp);
            let r = ratio(tp, tp + fn_);
            let f1 = if p + r == Ratio::from_integer(0) { Ratio::from_integer(0) } else { Ratio::from_integer(2) * p * r / (p + r) };
            assert_eq!((s.precision, s.recall, s.f1), (p, r, f1), "seed {seed} {f:?}");
        }
    }
}

#[test]
fn macro_average_is_the_mean_of_class_scores() {
    for seed in 0..60 {
        let (gold, pred) = random_fixture(seed);
        let f = Family::Re { include_other: false };
        let report: ScoreReport = score_re(&gold, &pred, MatchMode::Offset, Averaging::Macro, false);
        let gold_view: Vec<_> = gold.iter().map(slotie::SamplePredictions::from_gold).collect();
        let mut classes: Vec<String> = rows(&gold_view, f, true)
            .into_iter()
            .chain(rows(&pred, f, true))
            .map(|(c, _)| c)
            .collect();
        classes.sort();
        classes.dedup();
        let fam = report.family(family::RE).unwrap();
        if classes.is_empty() {
            assert_eq!(fam.f1, 0.0);
            continue;
        }
        let f1s: Vec<f64> = classes
            .iter()
            .map(|c| {
                let (tp, fp, fn_) = brute_counts(&gold, &pred, f, true, Some(c));
                let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
                let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
                if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) }
            })
            .collect();
        let mean = f1s.iter().sum::<f64>() / f1s.len() as f64;
        assert!((fam.f1 - mean).abs() < 1e-12, "seed {seed}: {} vs {mean}", fam.f1);
    }
}

#[test]
fn ungrounded_predictions_are_tallied_in_offset_mode() {
    let mut seen = 0;
    for seed in 0..60 {
        let (gold, pred) = random_fixture(seed);
        let ungrounded: usize = pred
            .iter()
            .flat_map(|p| &p.entities)
            .filter(|e| e.span.offsets.is_none())
            .count();
        let report: ScoreReport = score_ner(&gold, &pred, MatchMode::Offset);
        assert_eq!(report.diagnostics.get("ner.ungrounded_excluded").copied().unwrap_or(0), ungrounded);
        seen += ungrounded;
        let report: ScoreReport = score_ner(&gold, &pred, MatchMode::String);
        assert!(report.diagnostics.is_empty());
    }
    assert!(seen > 0);
}
