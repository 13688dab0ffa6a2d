use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Backend, Generation, GenerationRequest};
use crate::codec::{gold_slot_answers, render_target, SlotAnswers};
use crate::data::Sample;
use crate::error::BackendError;
use crate::prompt::{Prompt, SlotTarget};
use crate::schema::SchemaBundle;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionScope {
    /// Every slot is eligible.
    #[default]
    All,
    /// Only trigger slots of event prompts.
    Triggers,
}

/// Seeded degradation of the gold answers.
///
/// Each answer draws its own uniform numbers from a generator keyed by
/// `(seed, sample id, prompt, slot, answer position)`, so raising a
/// probability only ever adds deletions or substitutions on top of the ones
/// made at a lower probability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub delete_p: f64,
    #[serde(default)]
    pub substitute_p: f64,
    pub seed: u64,
    #[serde(default)]
    pub scope: CorruptionScope,
}

fn answer_rng(seed: u64, prompt: &Prompt, slot: usize, position: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(prompt.sample_id.as_bytes());
    h.update([0]);
    h.update(prompt.full_text.as_bytes());
    h.update((slot as u64).to_le_bytes());
    h.update((position as u64).to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn corrupt(prompt: &Prompt, clean: SlotAnswers, bundle: &SchemaBundle, cfg: &CorruptionConfig) -> SlotAnswers {
    let words: Vec<&str> = prompt
        .source_text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect();
    let vocab = &bundle.vocabulary;
    let answers = prompt
        .slots()
        .zip(clean.answers)
        .map(|(slot, list)| {
            let eligible = match cfg.scope {
                CorruptionScope::All => true,
                CorruptionScope::Triggers => matches!(slot.target, SlotTarget::Trigger { .. }),
            };
            if !eligible {
                return list;
            }
            let verdict = matches!(slot.target, SlotTarget::RelationVerdict { .. });
            list.into_iter()
                .enumerate()
                .filter_map(|(pos, answer)| {
                    let mut rng = answer_rng(cfg.seed, prompt, slot.index, pos);
                    let u_delete: f64 = rng.random();
                    let u_substitute: f64 = rng.random();
                    if u_delete < cfg.delete_p {
                        return None;
                    }
                    if u_substitute < cfg.substitute_p {
                        if verdict {
                            let flipped = if answer == vocab.positive_verdict {
                                &vocab.negative_verdict
                            } else {
                                &vocab.positive_verdict
                            };
                            return Some(flipped.clone());
                        }
                        let others: Vec<&&str> = words.iter().filter(|w| **w != answer).collect();
                        if !others.is_empty() {
                            return Some(others[rng.random_range(0..others.len())].to_string());
                        }
                    }
                    Some(answer)
                })
                .collect()
        })
        .collect();
    SlotAnswers { answers }
}

fn generation_for(prompt: &Prompt, answers: &SlotAnswers, bundle: &SchemaBundle) -> Generation {
    let target = render_target(prompt, answers, &bundle.vocabulary);
    let slot_scores = prompt
        .slots()
        .any(|s| matches!(s.target, SlotTarget::RelationVerdict { .. }))
        .then(|| prompt.slots().map(|s| (s.surface.clone(), 1.0)).collect::<BTreeMap<_, _>>());
    Generation {
        text: target.text,
        slot_scores,
    }
}

fn gold_answers(prompt: &Prompt, gold: &HashMap<&str, &Sample>, bundle: &SchemaBundle) -> Result<SlotAnswers, BackendError> {
    let sample = gold
        .get(prompt.sample_id.as_str())
        .ok_or_else(|| BackendError::UnknownSample(prompt.sample_id.clone()))?;
    Ok(gold_slot_answers(prompt, sample, &bundle.vocabulary, |r| bundle.is_directed(r))?)
}

/// The gold target of every prompt, verbatim. RE prompts carry a score of
/// 1.0 for the emitted verdict.
pub fn oracle_generate(prompts: &[Prompt], gold: &[Sample], bundle: &SchemaBundle) -> Result<Vec<Generation>, BackendError> {
    let index: HashMap<&str, &Sample> = gold.iter().map(|s| (s.id.as_str(), s)).collect();
    prompts
        .iter()
        .map(|p| Ok(generation_for(p, &gold_answers(p, &index, bundle)?, bundle)))
        .collect()
}

/// Serves precomputed gold (optionally corrupted) generations, looked up by
/// prompt text.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    name: String,
    table: HashMap<String, Generation>,
}

impl OracleBackend {
    pub fn new(prompts: &[Prompt], gold: &[Sample], bundle: &SchemaBundle) -> Result<Self, BackendError> {
        Self::build("oracle", prompts, gold, bundle, None)
    }

    pub fn corrupted(
        prompts: &[Prompt],
        gold: &[Sample],
        bundle: &SchemaBundle,
        config: CorruptionConfig,
    ) -> Result<Self, BackendError> {
        Self::build("corrupted-oracle", prompts, gold, bundle, Some(config))
    }

    fn build(
        name: &str,
        prompts: &[Prompt],
        gold: &[Sample],
        bundle: &SchemaBundle,
        corruption: Option<CorruptionConfig>,
    ) -> Result<Self, BackendError> {
        let index: HashMap<&str, &Sample> = gold.iter().map(|s| (s.id.as_str(), s)).collect();
        let mut table: HashMap<String, Generation> = HashMap::with_capacity(prompts.len());
        for p in prompts {
            let mut answers = gold_answers(p, &index, bundle)?;
            if let Some(cfg) = &corruption {
                answers = corrupt(p, answers, bundle, cfg);
            }
            let generation = generation_for(p, &answers, bundle);
            match table.get(&p.full_text) {
                Some(existing) if *existing != generation => {
                    return Err(BackendError::ConflictingPrompt(p.full_text.clone()));
                }
                Some(_) => {}
                None => {
                    table.insert(p.full_text.clone(), generation);
                }
            }
        }
        Ok(Self {
            name: name.to_string(),
            table,
        })
    }
}

impl Backend for OracleBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, request: &GenerationRequest) -> Result<Vec<Generation>, BackendError> {
        request.validate()?;
        request
            .prompts
            .iter()
            .map(|text| {
                self.table
                    .get(text)
                    .cloned()
                    .ok_or_else(|| BackendError::UnknownPrompt(text.clone()))
            })
            .collect()
    }
}
