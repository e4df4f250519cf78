use std::path::Path;
use std::process::{Command, Output};

fn s2s(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_s2s"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &[&str] = &[
    "--seed",
    "7",
    "--set",
    "bin_minutes=60",
    "--set",
    "epochs=2",
    "--set",
    "lstm_hidden=4",
    "--set",
    "seq_dense=4",
    "--set",
    "batch_size=32",
];

fn stage(dir: &Path, name: &[&str]) -> Output {
    let args: Vec<&str> = name.iter().chain(SMALL).copied().collect();
    let o = s2s(dir, &args);
    assert!(o.status.success(), "{name:?}: {}", stderr(&o));
    o
}

#[test]
fn synth_writes_records_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = s2s(dir.path(), &["synth", "--agents", "1000", "--days", "8", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records = std::fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert!(records.lines().count() > 1000);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_synth.json")).unwrap()).unwrap();
    assert_eq!(m["stage"], "synth");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["config"]["agents"], "1000");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_input_exits_one_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = s2s(dir.path(), &["train"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("train") && msg.contains("general.csv"), "{msg}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["train", "--no-such-flag"],
        &["train", "--set", "no_such_key=1"],
        &["train", "--set", "epochs"],
        &["synth", "--set", "epochs=lots"],
    ] {
        let o = s2s(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_file_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small world\nagents = 50\ndays=2\n").unwrap();
    let o = s2s(dir.path(), &["synth", "--config", cfg.to_str().unwrap(), "--set", "days=3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run_synth.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["agents"], "50");
    assert_eq!(m["config"]["days"], "3");
    let first = std::fs::read(dir.path().join("records.csv")).unwrap();

    // replaying the manifest's overrides reproduces the stage
    let mut args = vec!["synth".to_string()];
    for (k, v) in m["config"].as_object().unwrap() {
        args.push("--set".into());
        args.push(format!("{k}={}", v.as_str().unwrap()));
    }
    let other = tempfile::tempdir().unwrap();
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    assert!(s2s(other.path(), &argv).status.success());
    assert_eq!(std::fs::read(other.path().join("records.csv")).unwrap(), first);
    assert_eq!(
        std::fs::read(other.path().join("run_synth.json")).unwrap(),
        std::fs::read(dir.path().join("run_synth.json")).unwrap()
    );

    std::fs::write(&cfg, "agents 50\n").unwrap();
    assert_eq!(s2s(dir.path(), &["synth", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn chained_run_produces_a_consistent_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    stage(d, &["synth", "--agents", "300"]);
    for s in ["ingest", "label", "features", "train", "eval", "report", "gradcheck"] {
        stage(d, &[s]);
    }
    let eval: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("eval_report.json")).unwrap()).unwrap();
    let train: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("train_report.json")).unwrap()).unwrap();
    // the reloaded checkpoint scores the held-out users exactly as training did
    assert_eq!(eval["macro_f1"], train["macro_f1"]);
    assert_eq!(eval["confusion"], train["confusion"]);
    let f1 = eval["macro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    let n: u64 = eval["confusion"].as_array().unwrap().iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(eval["n"].as_u64().unwrap(), n);
    let text = std::fs::read_to_string(d.join("eval_report.txt")).unwrap();
    assert!(text.contains(&format!("macro_f1 {f1:.6}")));
    assert!(std::fs::read_to_string(d.join("confusion.csv")).unwrap().starts_with("true\\predicted,low,middle,high\n"));
    let report = std::fs::read_to_string(d.join("report.txt")).unwrap();
    assert!(report.contains("random_guess_macro_f1"));
    let g: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(g["passed"], true);
    for s in ["synth", "ingest", "label", "features", "train", "eval", "report", "gradcheck"] {
        assert!(d.join(format!("run_{s}.json")).is_file(), "{s}");
    }
}

#[test]
fn separate_input_directory() {
    let src = tempfile::tempdir().unwrap();
    let dst = tempfile::tempdir().unwrap();
    stage(src.path(), &["synth", "--agents", "100"]);
    let o = s2s(dst.path(), &["ingest", "--in", src.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dst.path().join("frequent_records.csv").is_file());
    assert!(!dst.path().join("records.csv").exists());
}
