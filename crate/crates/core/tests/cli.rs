mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use babylon::llm::{EchoChat, RecordingChat};
use babylon::pipeline::OutcomeLine;
use babylon::rag::{interpret, Narrator};
use common::data_dir;

fn babylon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_babylon"))
        .args(args)
        .env_remove("BABYLON_ENDPOINT")
        .env_remove("BABYLON_EXTRACTOR")
        .env_remove("BABYLON_OUT")
        .env_remove("BABYLON_MODEL")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn apache() -> PathBuf {
    data_dir().join("Apache_2k.log_structured.csv")
}

#[test]
fn parse_raw_log_writes_outcomes() {
    let out = tempfile::tempdir().unwrap();
    let log = data_dir().join("Apache_2k.log");
    let o = babylon(&["parse", "--input", s(&log), "--extractor", "heuristic", "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let outcomes = fs::read_to_string(out.path().join("outcomes.jsonl")).unwrap();
    assert_eq!(outcomes.lines().count(), 2000);
    assert!(out.path().join("summary.json").exists());
}

#[test]
fn missing_input_exits_2() {
    let o = babylon(&["parse", "--input", "/definitely/not/here.log"]);
    assert_eq!(o.status.code(), Some(2));
    let o = babylon(&["report", "--input", "/definitely/not/here.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_census_and_evaluation() {
    let out = tempfile::tempdir().unwrap();
    let state = out.path().join("state.json");
    let log = data_dir().join("Apache_2k.log");
    let o = babylon(&[
        "parse", "--input", s(&log), "--extractor", "oracle", "--truth", s(&apache()),
        "--out", s(out.path()), "--state", s(&state),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["clusters"], 6);
    assert!(state.exists());

    let o = babylon(&["evaluate", "--truth", s(&apache()), "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(0));
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().next().unwrap().contains("GA      PA     FGA     FTA     GGD     PGD"));
    assert!(table.contains("1.000"));
    let metrics = fs::read_to_string(out.path().join("metrics.json")).unwrap();

    // shuffled outcome order gives the same numbers
    let text = fs::read_to_string(out.path().join("outcomes.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.reverse();
    lines.swap(3, 1500);
    let shuffled = out.path().join("shuffled");
    fs::create_dir(&shuffled).unwrap();
    let shuffled_file = shuffled.join("outcomes.jsonl");
    fs::write(&shuffled_file, lines.join("\n")).unwrap();
    let o = babylon(&["evaluate", "--input", s(&shuffled_file), "--truth", s(&apache()), "--out", s(&shuffled)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(shuffled.join("metrics.json")).unwrap(), metrics);

    // dropping a line breaks coverage
    let short = out.path().join("short.jsonl");
    fs::write(&short, text.lines().skip(1).collect::<Vec<_>>().join("\n")).unwrap();
    let o = babylon(&["evaluate", "--input", s(&short), "--truth", s(&apache()), "--out", s(out.path())]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn resume_from_snapshot_is_all_strict() {
    let out = tempfile::tempdir().unwrap();
    let state = out.path().join("state.json");
    let o = babylon(&["parse", "--input", s(&apache()), "--out", s(out.path()), "--state", s(&state)]);
    assert_eq!(o.status.code(), Some(0));
    let again = out.path().join("again");
    let o = babylon(&["parse", "--input", s(&apache()), "--out", s(&again), "--resume", s(&state)]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(again.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["extractor_calls"], 0);
    assert_eq!(summary["actions"]["strict_matched"], 2000);
}

fn write_lines(path: &Path, lines: &[&str]) {
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn verdict_labels(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("verdicts.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["label"].as_str().unwrap().to_owned())
        .collect()
}

#[test]
fn detect_labels_and_empty_store() {
    let dir = tempfile::tempdir().unwrap();
    let normal = dir.path().join("normal.log");
    write_lines(&normal, &["disk check ok", "fan speed nominal", "link up on eth0"]);

    let same = dir.path().join("same.log");
    write_lines(&same, &["disk check ok", "link up on eth0"]);
    let o = babylon(&["detect", "--input", s(&same), "--normal", s(&normal), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(verdict_labels(dir.path()), ["normal", "normal"]);
    let first: serde_json::Value = serde_json::from_str(
        fs::read_to_string(dir.path().join("verdicts.jsonl")).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    for key in ["line_id", "label", "explanation", "top_score"] {
        assert!(first.get(key).is_some(), "{key}");
    }

    let disjoint = dir.path().join("disjoint.log");
    write_lines(&disjoint, &["kernel panic", "segfault in worker"]);
    let o = babylon(&["detect", "--input", s(&disjoint), "--normal", s(&normal), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(verdict_labels(dir.path()), ["abnormal", "abnormal"]);

    let empty = dir.path().join("empty.log");
    fs::write(&empty, "\n\n").unwrap();
    let o = babylon(&["detect", "--input", s(&same), "--normal", s(&empty), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn store_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store.json");
    let normal = data_dir().join("anomaly/normal.log");
    let incoming = data_dir().join("anomaly/incoming.log");
    let o = babylon(&[
        "detect", "--input", s(&incoming), "--normal", s(&normal), "--store", s(&store), "--save-store",
        "--out", s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let built = fs::read_to_string(dir.path().join("verdicts.jsonl")).unwrap();
    let loaded_dir = dir.path().join("loaded");
    let o = babylon(&["detect", "--input", s(&incoming), "--store", s(&store), "--out", s(&loaded_dir)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(loaded_dir.join("verdicts.jsonl")).unwrap(), built);
}

#[test]
fn report_sections_and_canned_narrative() {
    let dir = tempfile::tempdir().unwrap();
    let o = babylon(&["parse", "--input", s(&apache()), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));

    let o = babylon(&["report", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("== Top templates =="));
    assert!(!text.contains("== Anomalies =="));
    assert!(!text.contains("== Narrative =="));

    let verdicts = dir.path().join("verdicts.jsonl");
    fs::write(
        &verdicts,
        "{\"line_id\":3,\"label\":\"abnormal\",\"explanation\":\"abnormal: odd\",\"top_score\":0.1}\n",
    )
    .unwrap();
    let o = babylon(&["report", "--verdicts", s(&verdicts), "--out", s(dir.path())]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("- line 3 (best match 0.1000): abnormal: odd"));

    // record the narrator exchange, then replay it through the binary
    let outcomes: Vec<OutcomeLine> = fs::read_to_string(dir.path().join("outcomes.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let recorder = RecordingChat::new(EchoChat("All quiet; no action needed.".into()));
    interpret(
        &outcomes,
        None,
        Some(&Narrator {
            transport: &recorder,
            model: "gpt-4".into(),
        }),
    );
    let fixtures = dir.path().join("narrator.jsonl");
    fs::write(&fixtures, recorder.to_jsonl()).unwrap();
    let o = babylon(&["report", "--fixtures", s(&fixtures), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("== Narrative ==\nAll quiet; no action needed."));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["narrative"], "All quiet; no action needed.");
}

#[test]
fn config_file_sits_below_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("babylon.toml");
    let cfg_out = dir.path().join("from-config");
    fs::write(
        &config,
        format!("out = {:?}\nextractor = \"oracle\"\ntruth = {:?}\n", s(&cfg_out), s(&apache())),
    )
    .unwrap();
    let o = babylon(&["parse", "--config", s(&config), "--input", s(&apache())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(cfg_out.join("outcomes.jsonl").exists());

    let flag_out = dir.path().join("from-flag");
    let o = babylon(&["parse", "--config", s(&config), "--input", s(&apache()), "--out", s(&flag_out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_out.join("outcomes.jsonl").exists());

    fs::write(&config, "temperature = -3.0\n").unwrap();
    let o = babylon(&["parse", "--config", s(&config), "--input", s(&apache())]);
    assert_eq!(o.status.code(), Some(1));
}
