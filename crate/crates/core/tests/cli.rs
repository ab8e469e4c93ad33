//! The `rdars` binary driven as a subprocess.

use std::process::{Command, Output};

use rdars_core::harness::output::{parse_csv, parse_json};

fn rdars(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdars")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn run_writes_parseable_csv_and_json() {
    let csv = rdars(&["run", "--trials", "4", "--seed", "3"]);
    assert!(csv.status.success(), "{csv:?}");
    let (records, summary) = parse_csv(&stdout(&csv)).unwrap();
    assert_eq!((records.len(), summary.trials), (4, 4));

    let json = rdars(&["run", "--trials", "4", "--seed", "3", "--format", "json"]);
    assert!(json.status.success());
    assert_eq!(parse_json(&stdout(&json)).unwrap(), (records, summary));
}

#[test]
fn run_to_file_with_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let traces = dir.path().join("t.json");
    let o = rdars(&["run", "--trials", "2", "--out", out.to_str().unwrap(), "--traces", traces.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(o.stdout.is_empty());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&traces).unwrap()).unwrap();
    assert_eq!(doc.as_array().unwrap().len(), 2);
    assert_eq!(doc[1]["trace_ref"], "trial-00001");
}

#[test]
fn sweep_emits_every_probe() {
    let o = rdars(&["sweep", "--seed", "8"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("stage,az_deg,el_deg,rssi_dbm"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.iter().filter(|l| l.starts_with("coarse,")).count(), 169);
    assert!(rows.iter().any(|l| l.starts_with("fine,")));
}

#[test]
fn estimate_recovers_a_hand_built_case() {
    // d_br = 10, d_ur = 4, θ = 90°: d_ub = √116, α = 2
    let d_ub2: f64 = 116.0;
    let p_c = -10.0 * 16f64.log10();
    let p_b = -10.0 * d_ub2.log10();
    let o = rdars(&[
        "estimate",
        "--p-connected-dbm",
        &p_c.to_string(),
        "--p-bs-dbm",
        &p_b.to_string(),
        "--theta-deg",
        "90",
        "--d-br",
        "10",
    ]);
    assert!(o.status.success(), "{o:?}");
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["d_ur"].as_f64().unwrap() - 4.0).abs() < 1e-9, "{v}");
    assert!((v["d_ub"].as_f64().unwrap() - d_ub2.sqrt()).abs() < 1e-9, "{v}");
}

#[test]
fn frame_encode_decode_round_trip() {
    let o = rdars(&["frame", "encode", "--type", "nack", "--seq", "4660", "--status", "2"]);
    assert!(o.status.success());
    let hex = stdout(&o).trim().to_string();
    assert_eq!(hex, "52440104123400031234027f4c");
    let d = rdars(&["frame", "decode", &hex]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&d)).unwrap();
    assert_eq!(v, serde_json::json!({ "type": "nack", "seq": 4660, "payload": "123402" }));
}

#[test]
fn failures_report_structured_errors() {
    let bad_crc = rdars(&["frame", "decode", "52440104123400031234027f4d"]);
    assert_eq!(bad_crc.status.code(), Some(1));
    assert_eq!(error_json(&bad_crc)["error"]["kind"], "frame");

    let missing = rdars(&["run", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(missing.status.code(), Some(1));
    let e = error_json(&missing);
    assert!(e["error"]["message"].as_str().unwrap().contains("/nonexistent/scenario.toml"), "{e}");

    let usage = rdars(&["run", "--format", "xml"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_json(&usage)["error"]["kind"], "usage");

    let short = rdars(&["frame", "encode", "--type", "mode-mask", "--seq", "1", "--payload", "00"]);
    assert_eq!(short.status.code(), Some(1));
}
