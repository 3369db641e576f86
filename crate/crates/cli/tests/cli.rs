use std::path::Path;
use std::process::{Command, Output};

fn hbcauth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbcauth")).args(args).output().expect("binary runs")
}

fn stdout_ok(args: &[&str]) -> String {
    let out = hbcauth(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(path).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn table2_matches_golden() {
    let out = stdout_ok(&["table2"]);
    assert_eq!(out, golden("table2.csv"));
    assert!(out.lines().any(|l| l == "capacitive,0.001,0.001,1.11,142.2"));
    let json: serde_json::Value = serde_json::from_str(&stdout_ok(&["table2", "--format", "json"])).unwrap();
    assert_eq!(json["rows"][1]["te_hub_hbc"], 142.2);
}

#[test]
fn figure4_matches_golden() {
    assert_eq!(stdout_ok(&["figure4"]), golden("figure4.csv"));
    let json: serde_json::Value = serde_json::from_str(&stdout_ok(&["figure4", "--format", "json"])).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 16);
}

#[test]
fn explore_defaults_match_golden() {
    let out = stdout_ok(&["explore"]);
    assert_eq!(out, golden("explore_default.json"));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["config"]["te_location"], "hub");
    let cloud: serde_json::Value =
        serde_json::from_str(&stdout_ok(&["explore", "--te", "cloud", "--sensor", "optical", "--power", "coin-cell"]))
            .unwrap();
    assert_eq!(cloud["hub_retries"].as_f64().unwrap().floor(), 18.0);
}

#[test]
fn channel_sweep_matches_golden_and_repeats() {
    let args = ["channel-sweep", "--hum", "0,2", "--seeds", "2"];
    let a = stdout_ok(&args);
    assert_eq!(a, golden("channel_sweep.csv"));
    assert_eq!(a, stdout_ok(&args));
}

#[test]
fn help_lists_every_subcommand() {
    let help = stdout_ok(&["--help"]);
    for cmd in [
        "table2",
        "figure4",
        "explore",
        "extract",
        "enroll",
        "match",
        "encrypt",
        "decrypt",
        "channel-sweep",
        "simulate",
        "synth",
    ] {
        assert!(help.contains(cmd), "{cmd} missing from help");
        assert!(hbcauth(&[cmd, "--help"]).status.success());
    }
}

#[test]
fn usage_errors_exit_2_and_domain_errors_exit_1() {
    let out = hbcauth(&["explore", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let out =
        hbcauth(&["extract", path_str(&dir.path().join("missing.pgm")), "-o", path_str(&dir.path().join("t.fpt"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");

    let out = hbcauth(&["encrypt", "--key", "123", path_str(dir.path()), "-o", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn blank_image_gives_header_only_template() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("blank.pgm");
    let mut pgm = b"P5\n64 48\n255\n".to_vec();
    pgm.extend([255u8; 64 * 48]);
    std::fs::write(&img, pgm).unwrap();
    let fpt = dir.path().join("blank.fpt");
    stdout_ok(&["extract", path_str(&img), "-o", path_str(&fpt)]);
    assert_eq!(std::fs::read(&fpt).unwrap().len(), 8);

    let raw = dir.path().join("blank.raw");
    std::fs::write(&raw, [0u8; 32 * 16]).unwrap();
    stdout_ok(&["extract", "--algo", "light", "--raw", "32x16", path_str(&raw), "-o", path_str(&fpt)]);
    assert_eq!(std::fs::read(&fpt).unwrap().len(), 8);
}

#[test]
fn enroll_then_match() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let gallery = p("gallery");
    for seed in ["1", "2"] {
        stdout_ok(&["synth", "--seed", seed, "--size", "160x160", "-o", path_str(&p(&format!("{seed}.pgm")))]);
        stdout_ok(&["extract", path_str(&p(&format!("{seed}.pgm"))), "-o", path_str(&p(&format!("{seed}.fpt")))]);
    }
    stdout_ok(&["enroll", "alice", path_str(&p("1.fpt")), path_str(&gallery)]);

    let hit: serde_json::Value =
        serde_json::from_str(&stdout_ok(&["match", path_str(&p("1.fpt")), path_str(&gallery)])).unwrap();
    assert_eq!(hit["decision"], "accept");
    assert_eq!(hit["label"], "alice");
    let miss: serde_json::Value =
        serde_json::from_str(&stdout_ok(&["match", path_str(&p("2.fpt")), path_str(&gallery)])).unwrap();
    assert_eq!(miss["decision"], "reject");

    let out = hbcauth(&["enroll", "../evil", path_str(&p("1.fpt")), path_str(&gallery)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn encrypt_decrypt_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let data: Vec<u8> = (0..1000u32).map(|i| (i * 7 + 3) as u8).collect();
    std::fs::write(p("plain"), &data).unwrap();
    let key = ["--key", "0123456789abcdef0123", "--nonce", "2a"];
    stdout_ok(&[&["encrypt"][..], &key, &[path_str(&p("plain")), "-o", path_str(&p("ct"))]].concat());
    let ct = std::fs::read(p("ct")).unwrap();
    assert_eq!(ct.len(), data.len());
    assert_ne!(ct, data);
    stdout_ok(&[&["decrypt"][..], &key, &[path_str(&p("ct")), "-o", path_str(&p("back"))]].concat());
    assert_eq!(std::fs::read(p("back")).unwrap(), data);
}

#[test]
fn simulate_scenario_with_trace_and_verification() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let (scenario_path, trace_path) = (p("scenario.json"), p("trace.csv"));
    stdout_ok(&["synth", "--seed", "5", "--size", "128x128", "-o", path_str(&p("probe.pgm"))]);
    stdout_ok(&["extract", path_str(&p("probe.pgm")), "-o", path_str(&p("probe.fpt"))]);
    stdout_ok(&["enroll", "dana", path_str(&p("probe.fpt")), path_str(&p("gallery"))]);
    let scenario = r#"{
        "config": {"te_location": "hub", "on_body_channel": "hbc", "sensor_type": "capacitive", "sensor_power": "rf_harvest"},
        "probe": "probe.pgm",
        "gallery": "gallery",
        "seed": 11
    }"#;
    std::fs::write(p("scenario.json"), scenario).unwrap();
    let args = ["simulate", path_str(&scenario_path), "--verify", "--trace", path_str(&trace_path)];
    let out = stdout_ok(&args);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["report"]["requests_completed"], 142);
    assert_eq!(v["verification"]["pass"], true);
    assert_eq!(v["report"]["outcomes"][0]["label"], "dana");
    let trace = std::fs::read_to_string(p("trace.csv")).unwrap();
    assert!(trace.starts_with("seq,request,node,event,joules\n"));
    assert_eq!(out, stdout_ok(&args));

    let limited: serde_json::Value =
        serde_json::from_str(&stdout_ok(&["simulate", path_str(&p("scenario.json")), "--requests", "3"])).unwrap();
    assert_eq!(limited["requests_completed"], 3);
}

#[test]
fn params_file_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.toml");
    std::fs::write(&params, "budget_rf_harvest = 0.0072\n").unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout_ok(&["explore", "--params", path_str(&params)])).unwrap();
    assert_eq!(v["sensor_retries"].as_f64().unwrap().floor(), 284.0);

    std::fs::write(&params, "no_such_field = 1\n").unwrap();
    assert_eq!(hbcauth(&["table2", "--params", path_str(&params)]).status.code(), Some(1));
}
