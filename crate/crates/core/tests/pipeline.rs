use std::path::PathBuf;

use slotie::backend::{CorruptionConfig, CorruptionScope, RemoteConfig};
use slotie::eval::family;
use slotie::pipeline::{run_pipeline, BackendConfig, PipelineErrorKind, RunConfig, SamplingSpec, Stage};
use slotie::prompt::{EventMode, OverflowPolicy, Task};

fn assets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets")
}

fn config(task: Task, out: &std::path::Path) -> RunConfig {
    RunConfig::new(assets().join("schema.json"), vec![assets().join("corpus.jsonl")], task, out)
}

fn f1(report: &slotie::ScoreReport, fam: &str) -> f64 {
    report.family(fam).unwrap_or_else(|| panic!("family {fam} missing")).f1
}

#[test]
fn oracle_run_is_perfect_for_every_task() {
    let dir = tempfile::tempdir().unwrap();
    for mode in [EventMode::TypeSpecific, EventMode::Composable] {
        let mut c = config(Task::Ee, dir.path());
        c.mode = mode;
        let a = run_pipeline(&c).unwrap();
        assert_eq!(f1(&a.report, family::TRIGGER), 1.0);
        assert_eq!(f1(&a.report, family::ARGUMENT), 1.0);
        assert!(a.diagnostics.is_empty(), "{:?}", a.diagnostics.first());
    }
    let a = run_pipeline(&config(Task::Ner, dir.path())).unwrap();
    assert_eq!(f1(&a.report, family::NER), 1.0);
    let a = run_pipeline(&config(Task::Re, dir.path())).unwrap();
    assert_eq!(f1(&a.report, family::RE), 1.0);
}

#[test]
fn artifacts_are_byte_identical_across_reruns() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut c1 = config(Task::Ee, d1.path());
    c1.workers = 1;
    let mut c2 = config(Task::Ee, d2.path());
    c2.workers = 4;
    let a = run_pipeline(&c1).unwrap();
    let b = run_pipeline(&c2).unwrap();
    assert_eq!(a.config_hash, b.config_hash);
    for f in &a.files {
        if f == "config.json" || f == "manifest.json" {
            continue;
        }
        let x = std::fs::read(d1.path().join(f)).unwrap();
        let y = std::fs::read(d2.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let report = std::fs::read_to_string(d1.path().join("report.json")).unwrap();
    assert!(report.contains(&a.config_hash));
    let manifest = std::fs::read_to_string(d1.path().join("manifest.json")).unwrap();
    assert!(manifest.contains(&a.config_hash));
}

#[test]
fn identical_config_rerun_rewrites_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let c = config(Task::Re, dir.path());
    let a = run_pipeline(&c).unwrap();
    let before: Vec<Vec<u8>> = a.files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    run_pipeline(&c).unwrap();
    let after: Vec<Vec<u8>> = a.files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn corrupted_oracle_reruns_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Task::Ee, dir.path());
    c.backend = BackendConfig::CorruptedOracle(CorruptionConfig {
        delete_p: 0.5,
        substitute_p: 0.0,
        seed: 3,
        scope: CorruptionScope::All,
    });
    let a = run_pipeline(&c).unwrap();
    let first = std::fs::read(dir.path().join("report.json")).unwrap();
    let b = run_pipeline(&c).unwrap();
    let second = std::fs::read(dir.path().join("report.json")).unwrap();
    assert_eq!(first, second);
    assert_eq!(a.report, b.report);
    assert!(f1(&a.report, family::TRIGGER) < 1.0);
}

#[test]
fn sampling_is_applied_before_compilation() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Task::Ner, dir.path());
    c.sampling = Some(SamplingSpec::Fraction { fraction: 0.5 });
    c.seed = 11;
    let a = run_pipeline(&c).unwrap();
    assert_eq!(a.samples.len(), 30);
    assert_eq!(a.prompts.len(), 30 * 4);
}

#[test]
fn unreachable_remote_fails_in_generate_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Task::Ner, dir.path());
    let mut r = RemoteConfig::new("http://127.0.0.1:9");
    r.max_retries = 0;
    r.timeout_secs = 5;
    c.backend = BackendConfig::Remote(r);
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!(err.stage, Stage::Generate);
    assert_eq!(err.exit_code(), 4);
    assert!(err.to_string().contains("generate"), "{err}");
}

#[test]
fn compile_failure_names_the_sample() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Task::Ee, dir.path());
    c.token_budget = Some(5);
    c.overflow = OverflowPolicy::Error;
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!(err.stage, Stage::Compile);
    assert_eq!(err.id.as_deref(), Some("syn-0000"));
    assert!(matches!(err.kind, PipelineErrorKind::Compile(_)));
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn missing_data_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(Task::Ee, dir.path());
    c.data = vec![dir.path().join("nope.jsonl")];
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!((err.stage, err.exit_code()), (Stage::Config, 2));
}

#[test]
fn config_file_paths_resolve_relative_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(assets().join("schema.json"), dir.path().join("schema.json")).unwrap();
    std::fs::copy(assets().join("corpus.jsonl"), dir.path().join("corpus.jsonl")).unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"schema":"schema.json","data":["corpus.jsonl"],"task":"ee","mode":"composable","output_dir":"out",
            "trainer":{"learning_rate":0.0001,"weight_decay":0.01}}"#,
    )
    .unwrap();
    let c = RunConfig::from_file(dir.path().join("run.json")).unwrap();
    assert_eq!(c.output_dir, dir.path().join("out"));
    let a = run_pipeline(&c).unwrap();
    assert_eq!(f1(&a.report, family::TRIGGER), 1.0);
    assert!(dir.path().join("out/prompts.jsonl").is_file());
}
