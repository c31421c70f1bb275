use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn unravel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unravel")).args(args).output().expect("spawn unravel")
}

fn ok(args: &[&str]) -> Output {
    let out = unravel(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_gen_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let kg = dir.path().join("kg");
    ok(&[
        "synth", "--entities", "120", "--relations", "4", "--edges", "900", "--clusters", "4", "--seed", "5",
        "--out", s(&kg),
    ]);
    let (train, full) = (kg.join("train.tsv"), kg.join("full.tsv"));
    assert!(kg.join("synth.config.json").exists());

    let q = dir.path().join("tri");
    ok(&[
        "gen", "--type", "triangle", "--count", "8", "--train", s(&train), "--full", s(&full), "--allow-no-hard",
        "--out", s(&q),
    ]);
    let lines = fs::read_to_string(q.join("queries.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 8);

    let model = dir.path().join("m").join("model.bin");
    ok(&[
        "train", "--graph", s(&train), "--full", s(&full), "--dim", "8", "--epochs", "3", "--out", s(&model),
    ]);
    assert!(model.exists());
    assert!(dir.path().join("m").join("loss_trace.json").exists());

    let mut reports = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("eval{threads}"));
        ok(&[
            "eval", "--graph", s(&train), "--full", s(&full), "--queries", s(&q), "--predictor", "model",
            "--model", s(&model), "--depths", "2,3", "--scope", "all", "--parallel", threads, "--out", s(&out),
        ]);
        reports.push(fs::read(out.join("report_depth3.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);

    let sweep = dir.path().join("sweep");
    ok(&[
        "sweep", "--graph", s(&full), "--queries", s(&q), "--depths", "1,2", "--scope", "all", "--out", s(&sweep),
    ]);
    let csv = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("depth,type,mrr,spearmanr,mape,hits1"));
}

#[test]
fn exit_codes_separate_usage_from_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tsv");
    fs::write(&bad, "a\tr\tb\nonly two\n").unwrap();
    let out = unravel(&["load-check", "--graph", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.tsv:2:"));

    let good = dir.path().join("good.tsv");
    fs::write(&good, "a\tr\tb\n").unwrap();
    let out = unravel(&["eval", "--graph", s(&good), "--queries", s(dir.path()), "--depths", "", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));

    assert_eq!(unravel(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(unravel(&["--help"]).status.code(), Some(0));
}

#[test]
fn contains_reports_a_witness() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.json");
    let c = dir.path().join("c.json");
    fs::write(&q, r#"{"target":"x","atoms":[{"rel":"r","s":"x","o":"y"},{"rel":"r","s":"y","o":"x"}]}"#).unwrap();
    fs::write(&c, r#"{"target":"u","atoms":[{"rel":"r","s":"u","o":"v"}]}"#).unwrap();
    let out = ok(&["contains", "--query", s(&q), "--container", s(&c)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["contained"], true);
    assert_eq!(v["witness"]["u"], "x");

    let out = ok(&["contains", "--query", s(&c), "--container", s(&q)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["contained"], false);
}
