// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn s298() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/s298.bench")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seufsm"))
        .args(args)
        .env_remove("SEUFSM_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn analyze_reports_irrecoverable_states() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analyze",
        s298().to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("candidate 0: state [cnt0 cnt1 cnt2 cnt3 cycle_odd] control [tick]"));
    assert!(text.contains("IRRECOVERABLE 22"));
    assert!(text.contains("IRRECOVERABLE states: "));

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s298.c0.json")).unwrap())
            .unwrap();
    assert!(json["counts"]["irrecoverable"].as_u64().unwrap() >= 1);
    assert_eq!(json["candidate"]["n"], 5);
    assert!(dir.path().join("s298.c0.dot").exists());
    assert!(dir.path().join("s298.c0.graphml").exists());
}

#[test]
fn fail_on_trap_sets_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "analyze",
        s298().to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--fail-on-trap",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["analyze", "does-not-exist.bench"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("does-not-exist.bench"));

    assert_eq!(run(&["analyze"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));

    let bad = dir.path().join("bad.bench");
    fs::write(&bad, "x = FROB(y)\n").unwrap();
    assert_eq!(run(&["stg", bad.to_str().unwrap()]).status.code(), Some(3));

    let out_dir = dir.path().join("out");
    let capped = run(&[
        "stg",
        s298().to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--max-state-bits",
        "3",
    ]);
    assert_eq!(capped.status.code(), Some(4));
    assert!(!out_dir.exists(), "no artifacts on failure");

    let bad_target = run(&["reach", s298().to_str().unwrap(), "--target", "2x"]);
    assert_eq!(bad_target.status.code(), Some(3));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&[
            "analyze",
            s298().to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let first = artifacts(a.path());
    assert!(first.len() >= 3);
    assert_eq!(first, artifacts(b.path()));
}

#[test]
fn reach_writes_vectors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "reach",
        s298().to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--target",
        "01010",
        "--budget",
        "1",
        "--vectors",
        "witness.csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("REACHABLE in 2 step(s) with 1 upset(s)"));
    let csv = fs::read_to_string(dir.path().join("witness.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cycle,tick,cnt0,cnt1,cnt2,cnt3,cycle_odd,seu_bit");
    assert!(lines.last().unwrap().ends_with(",3"));

    let unreachable = run(&["reach", s298().to_str().unwrap(), "--target", "01010"]);
    assert_eq!(unreachable.status.code(), Some(0));
    assert!(stdout(&unreachable).contains("UNREACHABLE"));
}

#[test]
fn reencode_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "reencode",
        s298().to_str().unwrap(),
        "--out-dir",
        d,
        "--scheme",
        "hamming3",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).contains("minimum distance 3, corrector yes"));
    let table = fs::read_to_string(dir.path().join("s298.hamming3.enc")).unwrap();
    assert_eq!(table.lines().count(), 10);

    let bench = dir.path().join("s298.hamming3.bench");
    let again = run(&[
        "stg",
        bench.to_str().unwrap(),
        "--out-dir",
        d,
        "--fail-on-trap",
    ]);
    assert_eq!(again.status.code(), Some(0), "{}", stdout(&again));
    assert!(stdout(&again)
        .contains("LEGAL 10, RECOVERABLE 118, CONDITIONAL 0, IRRECOVERABLE 0, DEADLOCK 0"));

    let seu = run(&["seu", bench.to_str().unwrap(), "--out-dir", d]);
    assert_eq!(seu.status.code(), Some(0));
    assert!(stdout(&seu).contains("70 events"));
    assert!(stdout(&seu).contains("corrected 70"));
}

#[test]
fn group_file_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let group = dir.path().join("group.txt");
    fs::write(&group, "cnt0\ncnt1\ncnt2\ncnt3\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "export",
        s298().to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--group-file",
        group.to_str().unwrap(),
        "--format",
        "dot",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let names: Vec<String> = artifacts(&out_dir).into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, ["s298.c0.dot"]);
    let dot = fs::read_to_string(out_dir.join("s298.c0.dot")).unwrap();
    assert_eq!(dot.lines().filter(|l| l.contains("fillcolor")).count(), 16);

    let extract = run(&[
        "extract",
        s298().to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(extract.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("s298.candidates.json")).unwrap())
            .unwrap();
    assert_eq!(
        json[0]["state_nets"],
        serde_json::json!(["cnt0", "cnt1", "cnt2", "cnt3", "cycle_odd"])
    );
}

#[test]
fn legal_file_and_reset_override() {
    let dir = tempfile::tempdir().unwrap();
    let legal = dir.path().join("legal.txt");
    fs::write(&legal, "00000\n10001\n").unwrap();
    let out = run(&[
        "stg",
        s298().to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--legal-file",
        legal.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("LEGAL 2,"));

    let reset = run(&[
        "stg",
        s298().to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--reset",
        "0x0a",
    ]);
    assert_eq!(reset.status.code(), Some(0));
    assert!(!stdout(&reset).contains("LEGAL 10,"));
}
