use std::fs;
use std::path::{Path, PathBuf};

use perturbe::cli::run_command;
use perturbe::manifest::{sha256_file, Manifest, MANIFEST_FILE};
use perturbe::metrics::REPORT_HEADER;
use perturbe::perturb::{read_records, GateVerdict};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) {
    let mut argv = vec!["perturbe", "--jobs", "2"];
    argv.extend_from_slice(args);
    assert_eq!(run_command(&argv), 0, "perturbe {}", args.join(" "));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let text = fs::read_to_string(fixture("matrix.toml"))
        .unwrap()
        .replace("corpus = \"", &format!("corpus = \"{}/", fixture("").display()))
        .replace("vectors = \"", &format!("vectors = \"{}/", fixture("").display()));
    let path = dir.join("matrix.toml");
    fs::write(&path, format!("{text}{extra}")).unwrap();
    path
}

#[test]
fn step_by_step_commands_reproduce_matrix_cell() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = fixture("shellcode.jsonl");
    let vectors = fixture("shellcode_vectors.txt");
    let config = write_config(d, "");
    let matrix_out = d.join("matrix");
    run(&["matrix", "--config", s(&config), "--out", s(&matrix_out)]);

    let splits = d.join("splits");
    run(&["split", "--in", s(&corpus), "--out", s(&splits), "--seed", "42"]);
    let vocab = d.join("vocab.json");
    run(&["build-vocab", "--in", s(&corpus), "--out", s(&vocab)]);
    let records = d.join("substitution.jsonl");
    run(&[
        "perturb", "--kind", "substitution", "--in", s(&corpus), "--vocab", s(&vocab), "--out", s(&records), "--seed",
        "42", "--vectors", s(&vectors),
    ]);
    let gate = d.join("gate");
    run(&["gate", "--records", s(&records), "--out", s(&gate), "--vectors", s(&vectors)]);
    let train = d.join("train025.jsonl");
    run(&[
        "augment", "--in", s(&splits.join("train.jsonl")), "--records", s(&gate.join("passed.jsonl")), "--kind",
        "substitution", "--ratio", "0.25", "--seed", "42", "--out", s(&train), "--covered-only",
    ]);

    assert_eq!(
        sha256_file(&vocab).unwrap(),
        sha256_file(&matrix_out.join("vocab.json")).unwrap()
    );
    assert_eq!(
        sha256_file(&splits.join("train.jsonl")).unwrap(),
        sha256_file(&matrix_out.join("splits/train.jsonl")).unwrap()
    );
    assert_eq!(
        sha256_file(&train).unwrap(),
        sha256_file(&matrix_out.join("substitution/train025_test100/train.jsonl")).unwrap()
    );
    assert!(read_records(&gate.join("passed.jsonl"))
        .unwrap()
        .iter()
        .all(|r| r.gate_pass == GateVerdict::Pass && r.similarity.unwrap() > 0.8));
}

#[test]
fn matrix_manifest_lists_every_cell_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = write_config(dir.path(), "");
    run(&["matrix", "--config", s(&config), "--out", s(&out)]);
    let manifest = Manifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.cells.len(), 12);
    assert!(manifest.config_digest.is_some());
    for entry in &manifest.files {
        assert_eq!(sha256_file(&out.join(&entry.path)).unwrap(), entry.sha256, "{}", entry.path);
    }
    for cell in &manifest.cells {
        for path in [&cell.train, &cell.val, &cell.test] {
            assert!(manifest.files.iter().any(|f| &f.path == path), "{path} not listed");
        }
    }

    // A different seed changes the outputs and the digest.
    let other = dir.path().join("other");
    run(&["matrix", "--config", s(&config), "--out", s(&other), "--seed", "43"]);
    assert_ne!(Manifest::load(&other.join(MANIFEST_FILE)).unwrap().digest, manifest.digest);
}

#[test]
fn evaluate_and_report_with_exact_match_proxy() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let test = d.join("test.jsonl");
    fs::write(
        &test,
        concat!(
            "{\"id\":\"a\",\"intent\":\"Clear EAX\",\"snippet\":\"xor eax, eax\"}\n",
            "{\"id\":\"b\",\"intent\":\"Push EBX\",\"snippet\":\"push ebx\"}\n",
            "{\"id\":\"c\",\"intent\":\"Exit\",\"snippet\":\"mov al, 1\\\\nint 0x80\"}\n",
        ),
    )
    .unwrap();
    let before = d.join("before.jsonl");
    fs::write(
        &before,
        "{\"id\":\"a\",\"prediction\":\"xor eax,eax\"}\n{\"id\":\"b\",\"prediction\":\"push ebx\"}\n{\"id\":\"c\",\"prediction\":\"int 0x80\"}\n",
    )
    .unwrap();
    let after = d.join("after.jsonl");
    fs::write(
        &after,
        "{\"id\":\"a\",\"prediction\":\"xor eax, eax\"}\n{\"id\":\"b\",\"prediction\":\"push\"}\n{\"id\":\"c\",\"prediction\":\"int 0x80\"}\n",
    )
    .unwrap();

    let before_metrics = d.join("before.metrics.json");
    run(&[
        "evaluate", "--test", s(&test), "--predictions", s(&before), "--model", "toy", "--exact-match", "--no-syntax",
        "--out", s(&before_metrics),
    ]);
    let labels = d.join("before.metrics.labels.jsonl");
    assert!(labels.is_file());

    let after_metrics = d.join("after.metrics.json");
    run(&[
        "evaluate", "--test", s(&test), "--predictions", s(&after), "--model", "toy", "--kind", "substitution",
        "--test-p", "1", "--exact-match", "--no-syntax", "--before-labels", s(&labels), "--out", s(&after_metrics),
    ]);
    let metrics = [before_metrics, after_metrics];

    let report = d.join("report");
    let mut args = vec!["report", "--out", s(&report), "--metrics"];
    args.extend(metrics.iter().map(|p| s(p)));
    run(&args);
    let csv = fs::read_to_string(report.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(REPORT_HEADER));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.contains(&"toy,none,0,0,undefined,0.6667,undefined"), "{csv}");
    assert!(rows.contains(&"toy,substitution,0,1,undefined,0.3333,0.5000"), "{csv}");
}

#[test]
fn stats_reports_jsd_and_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stats.json");
    let corpus = fixture("shellcode.jsonl");
    run(&["stats", "--corpus", s(&corpus), "--compare", s(&corpus), "--out", s(&out)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["samples"], 100);
    assert_eq!(v["multi_line"], 18);
    assert_eq!(v["jsd"][0]["jsd"], 0.0);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = run_command([
        "perturbe",
        "split",
        "--in",
        s(&dir.path().join("absent.jsonl")),
        "--out",
        s(dir.path()),
        "--seed",
        "1",
    ]);
    assert_eq!(code, 2);
}
