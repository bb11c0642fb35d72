use std::path::Path;
use std::process::{Command, Output};

use auditbench::detect::ModelFile;
use auditbench::encode::FittedEncoder;
use auditbench::eval::EvalReport;
use auditbench::pipeline::{Layout, StageManifest};

fn auditbench(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_auditbench"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = auditbench(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn generate_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        ok(&["generate", "--seed", "7", "--rows", "2000"], dir.path());
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("dataset.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert!(a.path().join("dataset.csv.manifest.json").exists());
}

#[test]
fn onehot_som_pipeline_writes_full_report() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--seed", "42", "--rows", "10000"], dir.path());
    ok(&["pipeline", "-e", "onehot", "-d", "som", "--workers", "1"], dir.path());
    let layout = Layout::new(dir.path());
    let report = EvalReport::from_json(&std::fs::read_to_string(layout.report("onehot-som")).unwrap()).unwrap();
    assert_eq!(report.sweep.len(), 26);
    assert!(report.auc > 0.5, "auc {}", report.auc);
    assert!(dir.path().join("reports/summary.csv").exists());
}

#[test]
fn embedding_autoencoder_model_holds_sized_tables() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--seed", "3", "--rows", "1000"], dir.path());
    ok(&["pipeline", "-e", "embedding", "-d", "ae"], dir.path());
    let layout = Layout::new(dir.path());
    let encoder = FittedEncoder::load(&layout.encoder("embedding")).unwrap();
    let model = ModelFile::load(&layout.model("embedding-ae")).unwrap();
    let cards: Vec<usize> = encoder.schema.categorical().map(|c| c.cardinality()).collect();
    assert!(!cards.is_empty());
    for (j, n) in cards.iter().enumerate() {
        let (shape, _) = model.block(&format!("embedding{j}")).unwrap();
        assert_eq!(shape, &[n + 1, n.div_ceil(2).clamp(1, 50)][..], "attribute {j}");
    }
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = auditbench(&["pipeline", "-d", "knn"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = auditbench(&["generate", "--bogus"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = auditbench(&["train", "-e", "gel", "-d", "lof"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("train/gel-lof"));
}

#[test]
fn rerunning_a_stage_reproduces_manifest_hashes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--seed", "11", "--rows", "1000"], dir.path());
    let layout = Layout::new(dir.path());
    let mut runs = Vec::new();
    for _ in 0..2 {
        ok(&["encode", "-e", "label"], dir.path());
        ok(&["train", "-e", "label", "-d", "iforest"], dir.path());
        let enc = StageManifest::read_for(&layout.encoder("label")).unwrap();
        let model = StageManifest::read_for(&layout.model("label-iforest")).unwrap();
        runs.push((enc.outputs, model.outputs));
    }
    assert_eq!(runs[0], runs[1]);
    assert!(!runs[0].1.is_empty());
}
