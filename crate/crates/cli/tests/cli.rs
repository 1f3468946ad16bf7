use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn hansel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hansel")).args(args).output().expect("spawn hansel")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = hansel(&["augment", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_is_io_error() {
    let out = hansel(&["stats", "--input", "/nonexistent/corpus.jsonl"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).contains("/nonexistent/corpus.jsonl"));
}

#[test]
fn malformed_line_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    std::fs::write(&input, "{\"id\":\"a\",\"source\":\"s\",\"reference\":\"one two\",\"task\":\"summarization\"}\n{oops\n").unwrap();
    let out = hansel(&["augment", "--input", input.to_str().unwrap(), "--out", dir.path().join("o.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn bad_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[hansel]\nstrid = 10\n").unwrap();
    let out = hansel(&["--config", cfg.to_str().unwrap(), "stats", "--input", fixture("synthetic_corpus.jsonl").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

fn opening_token(cfg: Option<&Path>, extra: &[&str]) -> String {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("o.jsonl");
    let mut args = Vec::new();
    if let Some(c) = cfg {
        args.extend(["--config", c.to_str().unwrap()]);
    }
    let input = fixture("cnndm_highlight.jsonl");
    args.extend(["augment", "--input", input.to_str().unwrap(), "--out", out_path.to_str().unwrap()]);
    args.extend(extra);
    let out = hansel(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let line = std::fs::read_to_string(&out_path).unwrap();
    let rec: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    rec["output"].as_str().unwrap().split(' ').next().unwrap().to_string()
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[hansel]\ndelta = 10\nresidual_max = 0\n").unwrap();
    // 25 words: default stride 20 gives 1:5, stride 10 gives 2:5, stride 5 gives 5.
    assert_eq!(opening_token(None, &["--residual-max", "0"]), "<|len:w:1:5|>");
    assert_eq!(opening_token(Some(&cfg), &[]), "<|len:w:2:5|>");
    assert_eq!(opening_token(Some(&cfg), &["--delta", "5"]), "<|len:w:5|>");
}

#[test]
fn validate_empty_file_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    std::fs::write(&input, "").unwrap();
    let out = hansel(&["validate", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn validate_flags_corrupted_record() {
    let dir = tempfile::tempdir().unwrap();
    let mix = dir.path().join("mix.jsonl");
    let input = fixture("cnndm_highlight.jsonl");
    let out = hansel(&["augment", "--input", input.to_str().unwrap(), "--delta", "10", "--out", mix.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(hansel(&["validate", "--input", mix.to_str().unwrap(), "--delta", "10"]).status.code(), Some(0));

    let text = std::fs::read_to_string(&mix).unwrap().replace("<|len:w:1|>", "<|len:w:3|>");
    std::fs::write(&mix, text).unwrap();
    let out = hansel(&["validate", "--input", mix.to_str().unwrap(), "--delta", "10"]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["line"], 1);
    assert_eq!(report["ok"], false);
}

#[test]
fn evaluate_reports_mae_and_infinite_count() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("gen.jsonl");
    let looped = "round and round we go ".repeat(20);
    let lines = [
        serde_json::json!({"id": "a", "generated": "<|len:w:0:3|> one two three <|len:w:0|>", "target_length": 3, "reference": "one two three"}),
        serde_json::json!({"id": "b", "generated": "one two three four five", "target_length": 3}),
        serde_json::json!({"id": "c", "generated": looped, "target_length": 3}),
    ];
    let body: String = lines.iter().map(|l| format!("{l}\n")).collect();
    std::fs::write(&input, body).unwrap();
    let out = hansel(&["evaluate", "--input", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mae"], 1.0);
    assert_eq!(report["n_scored"], 2);
    assert_eq!(report["n_infinite"], 1);
    assert_eq!(report["rouge1"], 1.0);
}

#[test]
fn bundled_fixtures_regenerate_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    for (kind, n, name) in [("template", "1000", "synthetic_corpus.jsonl"), ("dialogue", "6205", "dialogue_test.txt")] {
        let out_path = dir.path().join(name);
        let out = hansel(&["synth", "--kind", kind, "--n", n, "--seed", "0", "--out", out_path.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        assert!(std::fs::read(&out_path).unwrap() == std::fs::read(fixture(name)).unwrap(), "{name} drifted");
    }
}

#[test]
fn simulate_writes_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen.jsonl");
    let out = hansel(&["simulate", "--eval-size", "5", "--targets", "5,20", "--out", gen.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&gen).unwrap().lines().count(), 10);
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("gen.jsonl.run.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "simulate");
}
