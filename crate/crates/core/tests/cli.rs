use std::fs;
use std::process::Command;

use macbounds::sweep::{parse_csv, CSV_HEADER};

fn macbounds() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macbounds"))
}

const SMALL: [&str; 4] = ["--samples-outer", "300", "--samples-inner", "50"];

#[test]
fn writes_all_three_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json, svg) = (dir.path().join("r.csv"), dir.path().join("r.json"), dir.path().join("plots/r.svg"));
    let status = macbounds()
        .args(["--tau", "4", "--users", "2", "--rx", "2", "--snr-db", "0:10:20", "--bounds", "lb_ustm,ub_csi"])
        .args(SMALL)
        .args(["--no-timing", "--units", "bits"])
        .arg("--out-csv")
        .arg(&csv)
        .arg("--out-json")
        .arg(&json)
        .arg("--out-svg")
        .arg(&svg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = parse_csv(&csv).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.units == "bits" && r.tau == 4 && r.antennas == "1;1" && r.runtime_s == 0.0));
    assert_eq!(rows[0].bound_kind, "lb_ustm");
    assert_eq!(rows[5].bound_kind, "ub_csi");

    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let records = json["records"].as_array().unwrap();
    assert_eq!(records.len(), 6);
    assert!(records[0]["estimate"]["value"].is_f64());

    let svg = fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    fs::write(
        &cfg,
        r#"{"tau": 6, "users": 2, "rx": 3, "snr_db": [0, 5], "bounds": ["ub_csi"], "seed": 3, "samples_csi": 500}"#,
    )
    .unwrap();
    let out = macbounds().arg("--config").arg(&cfg).args(["--seed", "4", "--no-timing"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,ub_csi,"));
    assert!(lines[1].ends_with(",nats,6,2,1;1,3,4,500,0"), "{}", lines[1]);
}

#[test]
fn configuration_errors_exit_with_one() {
    let cases: [&[&str]; 6] = [
        &["--bounds", ""],
        &["--snr-db", "10,0"],
        &["--bounds", "ub_nonsense"],
        &["--users", "3", "--antennas", "1,1"],
        &["--tau", "2"],
        &["--no-such-flag"],
    ];
    for args in cases {
        let out = macbounds().args(args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"taus": 4}"#).unwrap();
    assert_eq!(macbounds().arg("--config").arg(&bad).status().unwrap().code(), Some(1));
    assert_eq!(macbounds().arg("--config").arg(dir.path().join("missing.json")).status().unwrap().code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = macbounds().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--config", "--snr-db", "--out-svg", "--cache-dir", "--samples-inner", "--threads"] {
        assert!(text.contains(flag), "{flag}");
    }
}
