use std::path::Path;
use std::process::{Command, Output};

fn synmark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synmark"))
        .args(args)
        .output()
        .unwrap()
}

fn demo() -> String {
    synmark::demo_dataset_path().display().to_string()
}

#[test]
fn evaluate_writes_a_fresh_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().display().to_string();
    let args = ["evaluate", "--dataset", &demo(), "--samples", "2", "--k", "1,2", "--max-tokens", "48", "--out-dir", &out];
    assert_eq!(synmark(&args).status.code(), Some(0));
    assert_eq!(synmark(&args).status.code(), Some(0));
    let first = tmp.path().join("run-0001");
    let second = tmp.path().join("run-0002");
    for f in ["report.jsonl", "summary.csv", "timings.json"] {
        assert!(first.join(f).is_file(), "{f}");
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&first, "report.jsonl"), read(&second, "report.jsonl"));
    assert_eq!(read(&first, "summary.csv"), read(&second, "summary.csv"));
}

#[test]
fn validation_errors_exit_with_one() {
    assert_eq!(synmark(&["classify", "--gamma", "1.5"]).status.code(), Some(1));
    assert_eq!(synmark(&["classify", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(synmark(&["stats"]).status.code(), Some(1));
    assert_eq!(synmark(&["evaluate", "--dataset", &demo(), "--samples", "1", "--k", "5"]).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    assert_eq!(synmark(&["stats", "--dataset", "/nonexistent/tasks.jsonl"]).status.code(), Some(2));
}

#[test]
fn unreachable_remote_fails_every_task() {
    let tmp = tempfile::tempdir().unwrap();
    let vocab = tmp.path().join("vocab.json");
    std::fs::write(&vocab, r#"[" ", "\n", " def", " v1", " (", " )", " :", "\t", " v2", " if", " >", " v3", " return"]"#).unwrap();
    let dataset = tmp.path().join("d.jsonl");
    std::fs::write(&dataset, r#"{"task_id":"a","prompt":" def v1 ( v2 ) :","reference_solution":" return v2","test_command":"true","language":"python"}"#).unwrap();
    let out = synmark(&[
        "evaluate",
        "--provider", "remote:http://127.0.0.1:9/logits",
        "--vocab", &vocab.display().to_string(),
        "--dataset", &dataset.display().to_string(),
        "--samples", "1", "--k", "1",
        "--out-dir", &tmp.path().join("runs").display().to_string(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("task a failed"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "gamma = 0.25\nseed_key = 99\n").unwrap();
    let cfg = cfg.display().to_string();
    let demo = |extra: &[&str]| {
        let mut args = vec!["partition-demo", "--config", &cfg, "--prev", "3"];
        args.extend_from_slice(extra);
        let out = synmark(&args);
        assert!(out.status.success());
        serde_json::from_slice::<serde_json::Value>(&out.stdout).unwrap()
    };
    let from_file = demo(&[]);
    let vocab = from_file["vocab_size"].as_u64().unwrap() as f64;
    assert_eq!(from_file["green_count"].as_u64().unwrap(), (0.25 * vocab + 0.5).floor() as u64);
    let overridden = demo(&["--gamma", "0.5"]);
    assert_eq!(overridden["green_count"].as_u64().unwrap(), (0.5 * vocab + 0.5).floor() as u64);
}

#[test]
fn generate_then_detect_round_trip() {
    let gen = synmark(&["generate", "--prompt", " def v1 ( v2 ) :", "--delta", "3", "--max-tokens", "120", "--seed", "4"]);
    assert!(gen.status.success());
    let record: serde_json::Value = serde_json::from_slice(&gen.stdout).unwrap();
    let text = record["text"].as_str().unwrap();
    let det = synmark(&["detect", "--text", text]);
    assert!(det.status.success());
    let report: serde_json::Value = serde_json::from_slice(&det.stdout).unwrap();
    assert_eq!(report["verdict"], true, "{report}");
}

#[test]
fn classify_prints_categories() {
    let out = synmark(&["classify", "--language", "cpp", " override", "::", " foo"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text.lines().map(|l| l.split('\t').nth(1).unwrap()).collect::<Vec<_>>(),
        ["keyword", "delimiter", "etc"]
    );
}

#[test]
fn stats_and_entropy_on_demo() {
    let out = synmark(&["stats", "--dataset", &demo()]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["problems"], 3);
    let out = synmark(&["entropy", "--dataset", &demo()]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["selection"].as_array().unwrap().len(), 5);
}
