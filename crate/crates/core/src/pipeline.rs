//! End-to-end runs: compile, generate, parse/aggregate, score, write artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::{Backend, CorruptionConfig, Generation, GenerationRequest, OracleBackend, RemoteBackend, RemoteConfig};
use crate::codec::{aggregate, encode_target, parse_output, DecodedPrompt, SamplePredictions};
use crate::data::{
    load_dataset, sample_fraction, sample_kshot, split_zero_shot, write_predictions_jsonl, ClassKey, DatasetFormat,
    Sample,
};
use crate::diagnostics::{tally, Diagnostic};
use crate::error::{BackendError, CodecError, CompileError, DataError, SchemaError};
use crate::eval::{score_task, ScoreOptions};
use crate::grounding::GroundingPolicy;
use crate::prompt::{CompileOptions, EventMode, MaskSurface, OverflowPolicy, Prompt, PromptCompiler, Task};
use crate::schema::{load_schema, SchemaBundle};
use crate::ScoreReport;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    #[default]
    Oracle,
    CorruptedOracle(CorruptionConfig),
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroShotPart {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SamplingSpec {
    Fraction {
        fraction: f64,
    },
    Kshot {
        k: usize,
        class_key: ClassKey,
        #[serde(default)]
        quota: BTreeMap<String, usize>,
    },
    ZeroShot {
        top_n: usize,
        #[serde(default)]
        part: ZeroShotPart,
    },
}

impl SamplingSpec {
    /// Applies the spec with `seed`; returns the selection and any warnings.
    pub fn apply(&self, samples: &[Sample], seed: u64) -> Result<(Vec<Sample>, Vec<String>), DataError> {
        match self {
            SamplingSpec::Fraction { fraction } => {
                let s = sample_fraction(samples, *fraction, seed)?;
                Ok((s.samples, s.warnings))
            }
            SamplingSpec::Kshot { k, class_key, quota } => {
                let s = sample_kshot(samples, *k, seed, *class_key, quota)?;
                let warnings = s
                    .report
                    .iter()
                    .filter(|r| r.shortfall() > 0)
                    .map(|r| format!("class {}: {} of {} requested", r.class, r.selected, r.requested))
                    .collect();
                Ok((s.samples, warnings))
            }
            SamplingSpec::ZeroShot { top_n, part } => {
                let s = split_zero_shot(samples, *top_n)?;
                Ok((
                    match part {
                        ZeroShotPart::Train => s.train,
                        ZeroShotPart::Test => s.test,
                    },
                    vec![],
                ))
            }
        }
    }
}

fn default_format() -> DatasetFormat {
    DatasetFormat::IeJsonl
}
fn default_workers() -> usize {
    1
}
fn default_max_new_tokens() -> usize {
    128
}

/// Everything a run depends on. Written to disk as JSON with these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: PathBuf,
    pub data: Vec<PathBuf>,
    #[serde(default = "default_format")]
    pub data_format: DatasetFormat,
    pub task: Task,
    #[serde(default)]
    pub mode: EventMode,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub mask_surface: MaskSurface,
    #[serde(default)]
    pub token_budget: Option<usize>,
    #[serde(default)]
    pub overflow: OverflowPolicy,
    #[serde(default)]
    pub re_framing: Option<String>,
    #[serde(default)]
    pub sampling: Option<SamplingSpec>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
    #[serde(default)]
    pub scoring: ScoreOptions,
    /// Opaque settings for the external trainer (learning rate, weight decay, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub trainer: BTreeMap<String, serde_json::Value>,
}

impl RunConfig {
    /// A config with defaults for everything but the required fields.
    pub fn new(schema: impl Into<PathBuf>, data: Vec<PathBuf>, task: Task, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            schema: schema.into(),
            data,
            data_format: default_format(),
            task,
            mode: EventMode::default(),
            backend: BackendConfig::default(),
            mask_surface: MaskSurface::default(),
            token_budget: None,
            overflow: OverflowPolicy::default(),
            re_framing: None,
            sampling: None,
            output_dir: output_dir.into(),
            seed: 0,
            workers: default_workers(),
            max_new_tokens: default_max_new_tokens(),
            scoring: ScoreOptions::default(),
            trainer: BTreeMap::new(),
        }
    }

    /// Reads a JSON config; relative paths resolve against the file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let err = |m: String| PipelineError::new(Stage::Config, None, PipelineErrorKind::Config(m));
        let raw = fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&raw).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.schema);
        cfg.data.iter_mut().for_each(resolve);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: String| Err(PipelineError::new(Stage::Config, None, PipelineErrorKind::Config(m)));
        if !self.schema.is_file() {
            return fail(format!("schema file {} does not exist", self.schema.display()));
        }
        if self.data.is_empty() {
            return fail("no data files given".into());
        }
        if let Some(missing) = self.data.iter().find(|p| !p.is_file()) {
            return fail(format!("data file {} does not exist", missing.display()));
        }
        if self.mode == EventMode::Composable && self.task != Task::Ee {
            return fail(format!("composable mode applies to event extraction only, task is {:?}", self.task));
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if self.max_new_tokens == 0 {
            return fail("max_new_tokens must be at least 1".into());
        }
        match &self.backend {
            BackendConfig::CorruptedOracle(c) => {
                for (name, p) in [("delete_p", c.delete_p), ("substitute_p", c.substitute_p)] {
                    if !(0.0..=1.0).contains(&p) {
                        return fail(format!("{name} = {p} is outside [0, 1]"));
                    }
                }
            }
            BackendConfig::Remote(r) if r.url.trim().is_empty() => return fail("remote backend needs a url".into()),
            _ => {}
        }
        match &self.sampling {
            Some(SamplingSpec::Fraction { fraction }) if !(*fraction > 0.0 && *fraction <= 1.0) => {
                fail(format!("sampling fraction {fraction} is outside (0, 1]"))
            }
            Some(SamplingSpec::Kshot { k: 0, .. }) => fail("k-shot sampling needs k >= 1".into()),
            _ => Ok(()),
        }
    }

    /// Hex SHA-256 of the canonical JSON form, leaving out `output_dir` and
    /// `workers` since neither changes any result.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output_dir");
            map.remove("workers");
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn compile_options(&self) -> CompileOptions {
        let mut o = CompileOptions {
            mask: self.mask_surface.clone(),
            token_budget: self.token_budget,
            overflow: self.overflow,
            ..CompileOptions::default()
        };
        if let Some(f) = &self.re_framing {
            o.re_framing = f.clone();
        }
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Load,
    Sample,
    Compile,
    Generate,
    Aggregate,
    Score,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("stage serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Error)]
pub enum PipelineErrorKind {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A failed stage, with the sample or prompt it failed on when known.
#[derive(Debug, Error)]
pub struct PipelineError {
    pub stage: Stage,
    pub id: Option<String>,
    #[source]
    pub kind: PipelineErrorKind,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed", self.stage)?;
        if let Some(id) = &self.id {
            write!(f, " at {id}")?;
        }
        write!(f, ": {}", self.kind)
    }
}

impl PipelineError {
    pub fn new(stage: Stage, id: Option<String>, kind: impl Into<PipelineErrorKind>) -> Self {
        Self {
            stage,
            id,
            kind: kind.into(),
        }
    }

    /// Process exit status: 2 config, 3 data, 4 backend, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            PipelineErrorKind::Config(_) | PipelineErrorKind::Schema(_) => 2,
            PipelineErrorKind::Data(_) | PipelineErrorKind::Compile(_) | PipelineErrorKind::Codec(_) => 3,
            PipelineErrorKind::Backend(_) => 4,
            PipelineErrorKind::Io { .. } => 1,
        }
    }
}

pub fn load_bundle(path: &Path) -> Result<SchemaBundle, PipelineError> {
    load_schema(path).map_err(|e| PipelineError::new(Stage::Load, Some(path.display().to_string()), e))
}

pub fn load_samples(paths: &[PathBuf], format: DatasetFormat) -> Result<Vec<Sample>, PipelineError> {
    let mut out = Vec::new();
    for p in paths {
        let samples = load_dataset(p, format).map_err(|e| PipelineError::new(Stage::Load, Some(p.display().to_string()), e))?;
        out.extend(samples);
    }
    Ok(out)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::new(Stage::Config, None, PipelineErrorKind::Config(e.to_string())))
}

/// Prompts for every sample, grouped per sample in input order.
pub fn compile_all(
    compiler: &PromptCompiler<'_>,
    samples: &[Sample],
    task: Task,
    mode: EventMode,
    workers: usize,
) -> Result<Vec<Vec<Prompt>>, PipelineError> {
    pool(workers)?.install(|| {
        samples
            .par_iter()
            .map(|s| {
                compiler
                    .compile_batch(s, task, mode)
                    .map_err(|e| PipelineError::new(Stage::Compile, Some(s.id.clone()), e))
            })
            .collect()
    })
}

/// One supervised example for the external trainer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainPair {
    pub input: String,
    pub target: String,
}

/// `(prompt text, gold target)` for every prompt of every sample.
pub fn train_pairs(bundle: &SchemaBundle, samples: &[Sample], prompts: &[Vec<Prompt>]) -> Result<Vec<TrainPair>, PipelineError> {
    let mut out = Vec::new();
    for (sample, group) in samples.iter().zip(prompts) {
        for p in group {
            let target = encode_target(p, sample, &bundle.vocabulary, |r| bundle.is_directed(r))
                .map_err(|e| PipelineError::new(Stage::Compile, Some(format!("{}/{}", sample.id, p.meta)), e))?;
            out.push(TrainPair {
                input: p.full_text.clone(),
                target: target.text,
            });
        }
    }
    Ok(out)
}

/// Instantiates the configured backend. Oracle variants answer from `gold`.
pub fn build_backend(
    config: &BackendConfig,
    prompts: &[Prompt],
    gold: &[Sample],
    bundle: &SchemaBundle,
) -> Result<Box<dyn Backend>, PipelineError> {
    let wrap = |e: BackendError| PipelineError::new(Stage::Generate, None, e);
    Ok(match config {
        BackendConfig::Oracle => Box::new(OracleBackend::new(prompts, gold, bundle).map_err(wrap)?),
        BackendConfig::CorruptedOracle(c) => Box::new(OracleBackend::corrupted(prompts, gold, bundle, *c).map_err(wrap)?),
        BackendConfig::Remote(r) => Box::new(RemoteBackend::new(r.clone())),
    })
}

/// Generations for `prompts`, in order.
pub fn generate_all(backend: &dyn Backend, prompts: &[Prompt], max_new_tokens: usize) -> Result<Vec<Generation>, PipelineError> {
    if prompts.is_empty() {
        return Ok(vec![]);
    }
    let request = GenerationRequest::new(prompts.iter().map(|p| p.full_text.clone()).collect(), max_new_tokens);
    backend.generate(&request).map_err(|e| {
        let id = match &e {
            BackendError::LengthOverflow { index } => prompts.get(*index).map(|p| format!("{}/{}", p.sample_id, p.meta)),
            BackendError::UnknownSample(s) => Some(s.clone()),
            BackendError::UnknownPrompt(t) => prompts.iter().find(|p| &p.full_text == t).map(|p| format!("{}/{}", p.sample_id, p.meta)),
            _ => None,
        };
        PipelineError::new(Stage::Generate, id, e)
    })
}

/// Parses and aggregates each sample's generations.
///
/// `generations` is flat and lines up with `prompts` concatenated in order.
pub fn decode_all(
    bundle: &SchemaBundle,
    mask: &MaskSurface,
    samples: &[Sample],
    prompts: &[Vec<Prompt>],
    generations: &[Generation],
    workers: usize,
) -> Result<(Vec<SamplePredictions>, Vec<Diagnostic>), PipelineError> {
    let total: usize = prompts.iter().map(Vec::len).sum();
    if total != generations.len() {
        return Err(PipelineError::new(
            Stage::Aggregate,
            None,
            BackendError::CountMismatch {
                expected: total,
                got: generations.len(),
            },
        ));
    }
    let mut offsets = Vec::with_capacity(prompts.len());
    let mut at = 0;
    for group in prompts {
        offsets.push(at);
        at += group.len();
    }
    let vocab = &bundle.vocabulary;
    let policy = GroundingPolicy::default();
    let per_sample: Vec<(SamplePredictions, Vec<Diagnostic>)> = pool(workers)?.install(|| {
        samples
            .par_iter()
            .zip(prompts.par_iter())
            .zip(offsets.par_iter())
            .map(|((sample, group), &start)| {
                let mut diagnostics = Vec::new();
                let decoded: Vec<DecodedPrompt<'_>> = group
                    .iter()
                    .zip(&generations[start..start + group.len()])
                    .map(|(p, g)| {
                        let parsed = parse_output(p, &g.text, mask, vocab);
                        diagnostics.extend(parsed.diagnostics);
                        DecodedPrompt {
                            prompt: p,
                            answers: parsed.answers,
                            slot_scores: g.slot_scores.clone(),
                        }
                    })
                    .collect();
                let (pred, more) = aggregate(&sample.id, &sample.text, &decoded, vocab, &policy);
                diagnostics.extend(more);
                (pred, diagnostics)
            })
            .collect()
    });
    let mut predictions = Vec::with_capacity(per_sample.len());
    let mut diagnostics = Vec::new();
    for (p, d) in per_sample {
        predictions.push(p);
        diagnostics.extend(d);
    }
    Ok((predictions, diagnostics))
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub config_hash: String,
    pub backend: String,
    pub samples: Vec<Sample>,
    pub prompts: Vec<Prompt>,
    pub predictions: Vec<SamplePredictions>,
    pub diagnostics: Vec<Diagnostic>,
    pub report: ScoreReport,
    pub warnings: Vec<String>,
    /// Files written, relative to `output_dir`.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub task: Task,
    pub mode: EventMode,
    pub backend: String,
    pub sample_count: usize,
    pub prompt_count: usize,
    pub warnings: Vec<String>,
    pub scores: ScoreReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub artifacts: Vec<ManifestEntry>,
}

/// Writes `lines` as JSON Lines.
pub fn write_jsonl<T: Serialize>(path: &Path, lines: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)
}

/// Runs every stage for `config` and writes the artifacts into its output directory.
pub fn run_pipeline(config: &RunConfig) -> Result<RunArtifacts, PipelineError> {
    config.validate()?;
    let config_hash = config.config_hash();
    let bundle = load_bundle(&config.schema)?;
    let loaded = load_samples(&config.data, config.data_format)?;
    let (samples, warnings) = match &config.sampling {
        Some(spec) => spec
            .apply(&loaded, config.seed)
            .map_err(|e| PipelineError::new(Stage::Sample, None, e))?,
        None => (loaded, vec![]),
    };
    for w in &warnings {
        log::warn!("{w}");
    }

    let compiler = PromptCompiler::new(&bundle, config.compile_options());
    let grouped = compile_all(&compiler, &samples, config.task, config.mode, config.workers)?;
    let flat: Vec<Prompt> = grouped.iter().flatten().cloned().collect();
    log::info!("compiled {} prompts for {} samples", flat.len(), samples.len());

    let backend = build_backend(&config.backend, &flat, &samples, &bundle)?;
    let generations = generate_all(backend.as_ref(), &flat, config.max_new_tokens)?;

    let (predictions, diagnostics) =
        decode_all(&bundle, &config.mask_surface, &samples, &grouped, &generations, config.workers)?;

    let mut report: ScoreReport = score_task(config.task, &samples, &predictions, config.scoring);
    for (code, n) in tally(&diagnostics) {
        *report.diagnostics.entry(code).or_default() += n;
    }

    let dir = &config.output_dir;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::new(Stage::Write, None, PipelineErrorKind::Io { path, source })
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let run_report = RunReport {
        config_hash: config_hash.clone(),
        seed: config.seed,
        task: config.task,
        mode: config.mode,
        backend: backend.name().to_string(),
        sample_count: samples.len(),
        prompt_count: flat.len(),
        warnings: warnings.clone(),
        scores: report.clone(),
    };

    let files = ["config.json", "prompts.jsonl", "predictions.jsonl", "diagnostics.jsonl", "report.json"];
    let path = |name: &str| dir.join(name);
    write_json(&path(files[0]), config).map_err(io(&path(files[0])))?;
    write_jsonl(&path(files[1]), flat.iter().map(Prompt::to_record)).map_err(io(&path(files[1])))?;
    fs::File::create(path(files[2]))
        .and_then(|f| {
            let mut w = BufWriter::new(f);
            write_predictions_jsonl(&mut w, &predictions)?;
            w.flush()
        })
        .map_err(io(&path(files[2])))?;
    write_jsonl(&path(files[3]), &diagnostics).map_err(io(&path(files[3])))?;
    write_json(&path(files[4]), &run_report).map_err(io(&path(files[4])))?;

    let mut artifacts = Vec::with_capacity(files.len());
    for name in files {
        let bytes = fs::read(path(name)).map_err(io(&path(name)))?;
        artifacts.push(ManifestEntry {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    let manifest = Manifest {
        config_hash: config_hash.clone(),
        seed: config.seed,
        artifacts,
    };
    write_json(&path("manifest.json"), &manifest).map_err(io(&path("manifest.json")))?;

    let mut written: Vec<String> = files.iter().map(|s| s.to_string()).collect();
    written.push("manifest.json".into());
    Ok(RunArtifacts {
        output_dir: dir.clone(),
        config_hash,
        backend: backend.name().to_string(),
        samples,
        prompts: flat,
        predictions,
        diagnostics,
        report,
        warnings,
        files: written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        RunConfig::new("schema.json", vec!["data.jsonl".into()], Task::Ee, "out")
    }

    #[test]
    fn hash_ignores_output_dir_and_workers() {
        let a = cfg();
        let mut b = cfg();
        b.output_dir = "elsewhere".into();
        b.workers = 8;
        assert_eq!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn hash_tracks_relevant_fields() {
        let base = cfg().config_hash();
        let mut changes: Vec<RunConfig> = Vec::new();
        let mut c = cfg();
        c.seed = 1;
        changes.push(c);
        let mut c = cfg();
        c.mode = EventMode::Composable;
        changes.push(c);
        let mut c = cfg();
        c.mask_surface = MaskSurface::new(MaskSurface::BRACKET).unwrap();
        changes.push(c);
        let mut c = cfg();
        c.backend = BackendConfig::CorruptedOracle(CorruptionConfig {
            delete_p: 0.5,
            seed: 3,
            ..Default::default()
        });
        changes.push(c);
        let mut c = cfg();
        c.trainer.insert("learning_rate".into(), serde_json::json!(1e-4));
        changes.push(c);
        let mut c = cfg();
        c.max_new_tokens = 64;
        changes.push(c);
        for c in changes {
            assert_ne!(c.config_hash(), base, "{c:?}");
        }
    }

    #[test]
    fn defaults_hash_like_explicit_defaults() {
        let parsed: RunConfig = serde_json::from_str(
            r#"{"schema":"schema.json","data":["data.jsonl"],"task":"ee","output_dir":"out"}"#,
        )
        .unwrap();
        let explicit: RunConfig = serde_json::from_str(
            r#"{"schema":"schema.json","data":["data.jsonl"],"task":"ee","output_dir":"x",
                "mode":"type-specific","backend":{"kind":"oracle"},"mask_surface":"<extra_id_{i}>",
                "seed":0,"workers":3,"max_new_tokens":128,"scoring":{"match_mode":"offset"}}"#,
        )
        .unwrap();
        assert_eq!(parsed.config_hash(), explicit.config_hash());
    }

    #[test]
    fn backend_config_wire_shape() {
        let v: BackendConfig =
            serde_json::from_str(r#"{"kind":"corrupted-oracle","delete_p":0.5,"seed":3,"scope":"triggers"}"#).unwrap();
        assert!(matches!(v, BackendConfig::CorruptedOracle(c) if c.delete_p == 0.5 && c.seed == 3));
        let v: BackendConfig = serde_json::from_str(r#"{"kind":"remote","url":"http://h:1"}"#).unwrap();
        assert!(matches!(v, BackendConfig::Remote(r) if r.batch_size == 16));
    }

    #[test]
    fn validation_reports_config_errors() {
        let err = cfg().validate().unwrap_err();
        assert_eq!(err.stage, Stage::Config);
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("schema.json"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<RunConfig, _> = serde_json::from_str(
            r#"{"schema":"s","data":[],"task":"ee","output_dir":"o","sed":1}"#,
        );
        assert!(r.is_err());
    }
}
