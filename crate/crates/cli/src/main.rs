use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use slotie::backend::{CorruptionConfig, CorruptionScope, RemoteConfig};
use slotie::data::{write_ie_jsonl, write_predictions_jsonl, ClassKey, DatasetFormat};
use slotie::eval::{score_task, Averaging, MatchMode, ScoreOptions};
use slotie::pipeline::{
    build_backend, compile_all, decode_all, generate_all, load_bundle, load_samples, run_pipeline, train_pairs,
    BackendConfig, PipelineError, PipelineErrorKind, RunConfig, SamplingSpec, Stage, ZeroShotPart,
};
use slotie::prompt::{CompileOptions, EventMode, MaskSurface, OverflowPolicy, Prompt, PromptCompiler, Task};
use slotie::{Sample, SchemaBundle, ScoreReport};

/// Parses a kebab-case enum value the same way config files spell it.
fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn mask(s: &str) -> Result<MaskSurface, String> {
    MaskSurface::new(s).map_err(|e| e.to_string())
}

#[derive(Parser)]
#[command(name = "slotie", version, about = "Slot-filling prompts for extraction tasks: compile, predict, score.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one JSON line per compiled prompt.
    Compile(CompileArgs),
    /// Write (input, target) JSON lines for an external trainer.
    TrainPairs(CompileArgs),
    /// Generate, parse and ground predictions with a backend.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Score(ScoreArgs),
    /// Draw a deterministic subset of a dataset.
    Sample(SampleArgs),
    /// Run every stage from a JSON config file.
    Run(RunArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    schema: PathBuf,
    /// Dataset file; repeat for several.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long, default_value = "ie-jsonl", value_parser = kebab::<DatasetFormat>)]
    data_format: DatasetFormat,
    #[arg(long, value_parser = kebab::<Task>)]
    task: Task,
    #[arg(long, default_value = "type-specific", value_parser = kebab::<EventMode>)]
    mode: EventMode,
    #[arg(long, default_value = MaskSurface::SENTINEL, value_parser = mask)]
    mask_surface: MaskSurface,
    /// Prompt budget in whitespace tokens.
    #[arg(long)]
    token_budget: Option<usize>,
    #[arg(long, default_value = "error", value_parser = kebab::<OverflowPolicy>)]
    overflow: OverflowPolicy,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

impl InputArgs {
    fn options(&self) -> CompileOptions {
        CompileOptions {
            mask: self.mask_surface.clone(),
            token_budget: self.token_budget,
            overflow: self.overflow,
            ..CompileOptions::default()
        }
    }

    fn load(&self) -> Result<(SchemaBundle, Vec<Sample>), PipelineError> {
        for p in std::iter::once(&self.schema).chain(&self.data) {
            if !p.exists() {
                return Err(config_error(format!("{} does not exist", p.display())));
            }
        }
        if self.task != Task::Ee && self.mode == EventMode::Composable {
            return Err(config_error("composable mode only applies to task ee".into()));
        }
        Ok((load_bundle(&self.schema)?, load_samples(&self.data, self.data_format)?))
    }

    fn compile(&self, bundle: &SchemaBundle, samples: &[Sample]) -> Result<Vec<Vec<Prompt>>, PipelineError> {
        let compiler = PromptCompiler::new(bundle, self.options());
        compile_all(&compiler, samples, self.task, self.mode, self.workers)
    }
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Oracle,
    CorruptedOracle,
    Remote,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "oracle")]
    backend: BackendKind,
    /// Deletion probability for the corrupted oracle.
    #[arg(long, default_value_t = 0.0)]
    delete_p: f64,
    /// Substitution probability for the corrupted oracle.
    #[arg(long, default_value_t = 0.0)]
    substitute_p: f64,
    #[arg(long, default_value = "all", value_parser = kebab::<CorruptionScope>)]
    corrupt_scope: CorruptionScope,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generation service base URL for the remote backend.
    #[arg(long)]
    url: Option<String>,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 128)]
    max_new_tokens: usize,
    /// Predictions file (ie-jsonl).
    #[arg(long)]
    out: PathBuf,
    /// Diagnostics sidecar; defaults to `<out>.diagnostics.jsonl`.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

impl PredictArgs {
    fn backend(&self) -> Result<BackendConfig, PipelineError> {
        Ok(match self.backend {
            BackendKind::Oracle => BackendConfig::Oracle,
            BackendKind::CorruptedOracle => BackendConfig::CorruptedOracle(CorruptionConfig {
                delete_p: self.delete_p,
                substitute_p: self.substitute_p,
                seed: self.seed,
                scope: self.corrupt_scope,
            }),
            BackendKind::Remote => {
                let url = self.url.clone().ok_or_else(|| config_error("--url is required for the remote backend".into()))?;
                BackendConfig::Remote(RemoteConfig {
                    batch_size: self.batch_size,
                    ..RemoteConfig::new(url)
                })
            }
        })
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, default_value = "ie-jsonl", value_parser = kebab::<DatasetFormat>)]
    gold_format: DatasetFormat,
    /// Predictions in ie-jsonl, as written by `predict`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, value_parser = kebab::<Task>)]
    task: Task,
    #[arg(long, default_value = "offset", value_parser = kebab::<MatchMode>)]
    match_mode: MatchMode,
    #[arg(long, default_value = "micro", value_parser = kebab::<Averaging>)]
    averaging: Averaging,
    /// Count `Other` as a relation class.
    #[arg(long)]
    include_other: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    #[arg(long, default_value = "ie-jsonl", value_parser = kebab::<DatasetFormat>)]
    data_format: DatasetFormat,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep this fraction of the samples.
    #[arg(long, conflicts_with_all = ["k", "zero_shot_top_n"])]
    fraction: Option<f64>,
    /// Keep `k` samples per class.
    #[arg(long, requires = "class_key", conflicts_with = "zero_shot_top_n")]
    k: Option<usize>,
    #[arg(long, value_parser = kebab::<ClassKey>)]
    class_key: Option<ClassKey>,
    /// JSON object mapping class to shot count, overriding `k`.
    #[arg(long, requires = "k")]
    quota: Option<PathBuf>,
    /// Split off the `n` most frequent event types as seen types.
    #[arg(long)]
    zero_shot_top_n: Option<usize>,
    #[arg(long, default_value = "test", value_parser = kebab::<ZeroShotPart>)]
    part: ZeroShotPart,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SampleArgs {
    fn spec(&self) -> Result<SamplingSpec, PipelineError> {
        if let Some(fraction) = self.fraction {
            return Ok(SamplingSpec::Fraction { fraction });
        }
        if let (Some(k), Some(class_key)) = (self.k, self.class_key) {
            let quota = match &self.quota {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| io_error(Stage::Config, path, e))?;
                    serde_json::from_str::<BTreeMap<String, usize>>(&text)
                        .map_err(|e| config_error(format!("{}: {e}", path.display())))?
                }
                None => BTreeMap::new(),
            };
            return Ok(SamplingSpec::Kshot { k, class_key, quota });
        }
        if let Some(top_n) = self.zero_shot_top_n {
            return Ok(SamplingSpec::ZeroShot { top_n, part: self.part });
        }
        Err(config_error("one of --fraction, --k or --zero-shot-top-n is required".into()))
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
}

fn config_error(msg: String) -> PipelineError {
    PipelineError::new(Stage::Config, None, PipelineErrorKind::Config(msg))
}

fn io_error(stage: Stage, path: &Path, source: io::Error) -> PipelineError {
    PipelineError::new(stage, None, PipelineErrorKind::Io { path: path.to_path_buf(), source })
}

fn write_output(
    out: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> Result<(), PipelineError> {
    let label = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"));
    let result = match out {
        Some(path) => (|| {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(fs::File::create(path)?);
            write(&mut w).and_then(|_| w.flush())
        })(),
        None => {
            let mut w = io::stdout().lock();
            write(&mut w).and_then(|_| w.flush())
        }
    };
    result.map_err(|e| io_error(Stage::Write, &label, e))
}

fn json_lines<T: serde::Serialize>(w: &mut dyn Write, items: impl IntoIterator<Item = T>) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *w, &item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn compile(args: CompileArgs) -> Result<(), PipelineError> {
    let (bundle, samples) = args.input.load()?;
    let prompts = args.input.compile(&bundle, &samples)?;
    write_output(args.out.as_deref(), |w| json_lines(w, prompts.iter().flatten().map(Prompt::to_record)))?;
    log::info!("{} prompts for {} samples", prompts.iter().map(Vec::len).sum::<usize>(), samples.len());
    Ok(())
}

fn emit_train_pairs(args: CompileArgs) -> Result<(), PipelineError> {
    let (bundle, samples) = args.input.load()?;
    let prompts = args.input.compile(&bundle, &samples)?;
    let pairs = train_pairs(&bundle, &samples, &prompts)?;
    write_output(args.out.as_deref(), |w| json_lines(w, &pairs))
}

fn predict(args: PredictArgs) -> Result<(), PipelineError> {
    let backend_config = args.backend()?;
    let (bundle, samples) = args.input.load()?;
    let grouped = args.input.compile(&bundle, &samples)?;
    let flat: Vec<Prompt> = grouped.iter().flatten().cloned().collect();
    let backend = build_backend(&backend_config, &flat, &samples, &bundle)?;
    let generations = generate_all(backend.as_ref(), &flat, args.max_new_tokens)?;
    let (predictions, diagnostics) =
        decode_all(&bundle, &args.input.mask_surface, &samples, &grouped, &generations, args.input.workers)?;
    let sidecar = args.diagnostics.clone().unwrap_or_else(|| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(".diagnostics.jsonl");
        PathBuf::from(name)
    });
    write_output(Some(&args.out), |w| write_predictions_jsonl(w, &predictions))?;
    write_output(Some(&sidecar), |w| json_lines(w, &diagnostics))?;
    log::info!("{} predictions, {} diagnostics from {}", predictions.len(), diagnostics.len(), backend.name());
    Ok(())
}

fn score(args: ScoreArgs) -> Result<(), PipelineError> {
    let gold = load_samples(std::slice::from_ref(&args.gold), args.gold_format)?;
    let pred = slotie::data::load_predictions(&args.pred)
        .map_err(|e| PipelineError::new(Stage::Load, Some(args.pred.display().to_string()), e))?;
    let opts = ScoreOptions {
        match_mode: args.match_mode,
        averaging: args.averaging,
        include_other: args.include_other,
    };
    let report: ScoreReport = score_task(args.task, &gold, &pred, opts);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(out) = &args.out {
        write_output(Some(out), |w| writeln!(w, "{json}"))?;
    }
    write_output(None, |w| writeln!(w, "{json}"))?;
    eprint!("{}", report.to_table());
    Ok(())
}

fn sample(args: SampleArgs) -> Result<(), PipelineError> {
    let spec = args.spec()?;
    for p in &args.data {
        if !p.exists() {
            return Err(config_error(format!("{} does not exist", p.display())));
        }
    }
    let samples = load_samples(&args.data, args.data_format)?;
    let (selected, warnings) = spec
        .apply(&samples, args.seed)
        .map_err(|e| PipelineError::new(Stage::Sample, None, e))?;
    for w in &warnings {
        log::warn!("{w}");
    }
    write_output(args.out.as_deref(), |w| write_ie_jsonl(w, &selected))?;
    log::info!("kept {} of {} samples", selected.len(), samples.len());
    Ok(())
}

fn run(args: RunArgs) -> Result<(), PipelineError> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(dir) = args.output_dir {
        config.output_dir = dir;
    }
    if let Some(n) = args.workers {
        config.workers = n;
    }
    let artifacts = run_pipeline(&config)?;
    print!("{}", artifacts.report.to_table());
    println!("config hash {}", artifacts.config_hash);
    println!("artifacts in {}", artifacts.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compile(a) => compile(a),
        Command::TrainPairs(a) => emit_train_pairs(a),
        Command::Predict(a) => predict(a),
        Command::Score(a) => score(a),
        Command::Sample(a) => sample(a),
        Command::Run(a) => run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
