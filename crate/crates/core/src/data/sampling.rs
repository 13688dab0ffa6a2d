//! Data-scarcity protocols: fractional subsets, k-shot per class, and the
//! zero-shot event-type partition.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` and the
//! Fisher-Yates `SliceRandom::shuffle` of `rand` 0.9, so selections depend
//! only on the input order, the parameters and the seed.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Sample;
use crate::error::DataError;

#[derive(Debug, Clone, PartialEq)]
pub struct FractionSample<T> {
    pub samples: Vec<T>,
    pub warnings: Vec<String>,
}

/// Keeps `round(fraction * N)` items chosen by a seeded shuffle, returned in
/// their original relative order.
pub fn sample_fraction<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<FractionSample<T>, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::FractionOutOfRange(fraction));
    }
    let n = items.len();
    let keep = (fraction * n as f64).round() as usize;
    let mut warnings = Vec::new();
    if keep == 0 && n > 0 {
        warnings.push(format!("fraction {fraction} of {n} samples rounds to 0; selection is empty"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if keep < n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        order.truncate(keep);
        order.sort_unstable();
    }
    Ok(FractionSample {
        samples: order.into_iter().map(|i| items[i].clone()).collect(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKey {
    RelationLabel,
    EntityType,
    EventType,
}

impl FromStr for ClassKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "relation-label" => Ok(Self::RelationLabel),
            "entity-type" => Ok(Self::EntityType),
            "event-type" => Ok(Self::EventType),
            other => Err(format!("unknown class key {other:?}")),
        }
    }
}

impl ClassKey {
    /// Class values carried by a sample. Relation labels keep their direction.
    pub fn classes(self, sample: &Sample) -> BTreeSet<String> {
        match self {
            ClassKey::RelationLabel => sample.relations.iter().map(|r| r.label.to_string()).collect(),
            ClassKey::EntityType => sample.entities.iter().map(|e| e.entity_type.clone()).collect(),
            ClassKey::EventType => sample.events.iter().map(|e| e.event_type.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotReport {
    pub class: String,
    pub requested: usize,
    pub available: usize,
    pub selected: usize,
}

impl ShotReport {
    pub fn shortfall(&self) -> usize {
        self.requested - self.selected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KShotSample {
    pub samples: Vec<Sample>,
    pub report: Vec<ShotReport>,
}

/// Selects `min(k, available)` samples per class value.
///
/// Classes are visited in lexicographic order; a sample already taken for an
/// earlier class is not counted as available for later ones, so each sample
/// is assigned to at most one class. `quota` overrides `k` per class.
pub fn sample_kshot(
    samples: &[Sample],
    k: usize,
    seed: u64,
    class_key: ClassKey,
    quota: &BTreeMap<String, usize>,
) -> Result<KShotSample, DataError> {
    if k == 0 {
        return Err(DataError::ZeroShots);
    }
    let classes: Vec<BTreeSet<String>> = samples.iter().map(|s| class_key.classes(s)).collect();
    let all: BTreeSet<&String> = classes.iter().flatten().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![false; samples.len()];
    let mut report = Vec::with_capacity(all.len());
    for class in all {
        let requested = quota.get(class).copied().unwrap_or(k);
        let mut pool: Vec<usize> = (0..samples.len())
            .filter(|&i| !taken[i] && classes[i].contains(class))
            .collect();
        pool.shuffle(&mut rng);
        let selected = requested.min(pool.len());
        for &i in &pool[..selected] {
            taken[i] = true;
        }
        if selected < requested {
            log::warn!("class {class:?}: {selected} of {requested} shots available");
        }
        report.push(ShotReport {
            class: class.clone(),
            requested,
            available: pool.len(),
            selected,
        });
    }
    Ok(KShotSample {
        samples: samples
            .iter()
            .zip(&taken)
            .filter(|(_, &t)| t)
            .map(|(s, _)| s.clone())
            .collect(),
        report,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroShotSplit {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// The `top_n` most frequent event types, most frequent first.
    pub seen_types: Vec<String>,
}

/// Trains on the `top_n` most frequent event types and tests on the rest.
///
/// A sample with any event outside the seen types goes to test; samples
/// without events go to train.
pub fn split_zero_shot(samples: &[Sample], top_n: usize) -> Result<ZeroShotSplit, DataError> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for ev in samples.iter().flat_map(|s| &s.events) {
        *freq.entry(ev.event_type.as_str()).or_default() += 1;
    }
    if top_n > freq.len() {
        return Err(DataError::TopNTooLarge {
            top_n,
            distinct: freq.len(),
        });
    }
    let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let seen: BTreeSet<&str> = ranked.iter().take(top_n).map(|(t, _)| *t).collect();
    let (train, test) = samples
        .iter()
        .cloned()
        .partition(|s| s.events.iter().all(|e| seen.contains(e.event_type.as_str())));
    Ok(ZeroShotSplit {
        train,
        test,
        seen_types: ranked.iter().take(top_n).map(|(t, _)| t.to_string()).collect(),
    })
}
