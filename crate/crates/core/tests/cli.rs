use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dialogue-forge"))
        .args(args)
        .env_remove("DIALOGUE_FORGE_REGISTRY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    forge(&args)
}

#[test]
fn simulate_noiseless_prints_perfect_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), &["--episodes", "60"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("success_rate=1.000 inform_f1=1.000"), "{}", stdout(&out));
    let corpus = std::fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    assert_eq!(corpus.lines().count(), 60);
}

#[test]
fn simulate_is_byte_reproducible_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let flags = ["--episodes", "40", "--seed", "11", "--domain-confusion", "0.2"];
    assert!(simulate(a.path(), &flags).status.success());
    let mut parallel = flags.to_vec();
    parallel.extend(["--workers", "4"]);
    assert!(simulate(b.path(), &parallel).status.success());
    let read = |d: &Path| std::fs::read(d.join("corpus.jsonl")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(&config, r#"{"episodes": 5, "max_turns": 2, "base_seed": 4}"#).unwrap();
    let out = simulate(dir.path(), &["--config", config.to_str().unwrap(), "--max-turns", "20"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let corpus = std::fs::read_to_string(dir.path().join("corpus.jsonl")).unwrap();
    let logs: Vec<serde_json::Value> = corpus.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(logs.len(), 5);
    assert!(logs.iter().all(|l| l["max_turns"] == 20));
    assert_eq!(logs[0]["seed"], 4);
}

#[test]
fn validation_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(dir.path(), &["--pack", "/no/such/pack"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/pack"), "{}", stderr(&out));

    let out = simulate(dir.path(), &["--domain-confusion", "1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("domain_confusion_rate"), "{}", stderr(&out));

    let out = simulate(dir.path(), &["--nlu", "neural"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("system.nlu"), "{}", stderr(&out));

    let out = forge(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = simulate(&blocker.join("sub"), &["--episodes", "2"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn analyze_writes_reports_and_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate(dir.path(), &["--episodes", "30", "--domain-confusion", "0.2"]).status.success());
    let corpus = dir.path().join("corpus.jsonl");
    let out_dir = dir.path().join("report");
    let run = || forge(&["analyze", corpus.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    let out = run();
    assert!(out.status.success(), "{}", stderr(&out));
    let html = std::fs::read_to_string(out_dir.join("report.html")).unwrap();
    assert!(html.contains("Success rate and inform F1 for each domain"));
    let first = std::fs::read(out_dir.join("report.json")).unwrap();
    assert!(run().status.success());
    assert_eq!(first, std::fs::read(out_dir.join("report.json")).unwrap());

    let mut file = std::fs::OpenOptions::new().append(true).open(&corpus).unwrap();
    writeln!(file, "{{\"episode\": ").unwrap();
    let out = run();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains(":31:"), "{}", stderr(&out));
}

#[test]
fn compare_deltas_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean");
    let noisy = dir.path().join("noisy");
    let shifted = dir.path().join("shifted");
    assert!(simulate(&clean, &["--episodes", "80"]).status.success());
    assert!(simulate(&noisy, &["--episodes", "80", "--domain-confusion", "0.3"]).status.success());
    assert!(simulate(&shifted, &["--episodes", "80", "--seed", "1"]).status.success());
    let path = |d: &Path| d.join("corpus.jsonl").to_str().unwrap().to_string();
    let out_dir = dir.path().join("cmp");

    let out = forge(&[
        "compare",
        &path(&clean),
        &path(&clean),
        &path(&noisy),
        "--label",
        "a",
        "--label",
        "b",
        "--label",
        "noisy",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cmp: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(cmp["deltas"][0]["overall"]["success_rate"], 0.0);
    assert!(cmp["deltas"][1]["overall"]["success_rate"].as_f64().unwrap() < 0.0);
    assert!(out_dir.join("comparison.html").exists());

    let out = forge(&["compare", &path(&clean), &path(&shifted), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("mismatch"), "{}", stderr(&out));
}

#[test]
fn serve_rejects_a_bad_registry() {
    let dir = tempfile::tempdir().unwrap();
    let registry = dir.path().join("registry.json");
    std::fs::write(&registry, r#"{"stages": {"nlu": [{"name": "x", "implementation": "neural"}]}, "packs": []}"#).unwrap();
    let out = forge(&["serve", "--registry", registry.to_str().unwrap(), "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("neural"), "{}", stderr(&out));
}

#[test]
fn serve_on_an_ephemeral_port() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_dialogue-forge"))
        .args(["serve", "--port", "0"])
        .env_remove("DIALOGUE_FORGE_REGISTRY")
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect(&line).to_string();
    assert!(!addr.ends_with(":0"));

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /registry HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"synthetic\""));
}
