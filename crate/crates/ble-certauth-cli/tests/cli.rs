//! End-to-end tests of the installed binary: every workflow is exercised
//! through argv exactly as a user would run it, against a throwaway
//! `--home` directory.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut command = Command::new(env!("CARGO_BIN_EXE_ble-certauth"));
    // Tests must not inherit a developer's real state directory.
    command.env_remove("BLE_CERTAUTH_HOME");
    command
}

fn run(home: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--home")
        .arg(home)
        .args(args)
        .output()
        .expect("binary spawns")
}

fn ok(home: &Path, args: &[&str]) -> String {
    let output = run(home, args);
    assert!(
        output.status.success(),
        "`{args:?}` failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).expect("utf-8 output")
}

fn json(home: &Path, args: &[&str]) -> serde_json::Value {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    serde_json::from_str(&ok(home, &full)).expect("one well-formed JSON document")
}

/// Provision a home with a root, a registered manufacturer, and one issued
/// device certificate; returns the paths that later steps need.
fn issue_fixture(home: &Path, work: &Path) -> (PathBuf, PathBuf) {
    ok(home, &["bleca", "init", "--seed", "1"]);
    let maker_key = work.join("maker.key");
    let maker_pub = work.join("maker.pub");
    ok(home, &[
        "keygen", "--seed", "2",
        "--out", maker_key.to_str().unwrap(),
        "--pub-out", maker_pub.to_str().unwrap(),
    ]);
    ok(home, &["bleca", "register", "--key", maker_pub.to_str().unwrap()]);

    let device_key = work.join("device.key");
    let device_pub = work.join("device.pub");
    ok(home, &[
        "keygen", "--seed", "3",
        "--out", device_key.to_str().unwrap(),
        "--pub-out", device_pub.to_str().unwrap(),
    ]);
    let request = work.join("request.hex");
    ok(home, &[
        "sign-request",
        "--key", maker_key.to_str().unwrap(),
        "--serial", "70:b8:f6:20:00:02",
        "--subject", device_pub.to_str().unwrap(),
        "--out", request.to_str().unwrap(),
    ]);
    let cert = work.join("device.cert");
    ok(home, &[
        "bleca", "issue",
        "--request", request.to_str().unwrap(),
        "--cert-out", cert.to_str().unwrap(),
    ]);
    (device_key, cert)
}

#[test]
fn issuance_flow_end_to_end() {
    let dir = TempDir::new().unwrap();
    let home = dir.path().join("home");
    let (_, cert) = issue_fixture(&home, dir.path());

    let looked_up = ok(&home, &["bleca", "lookup", "--serial", "70b8f6200002"]);
    let stored = std::fs::read_to_string(&cert).unwrap();
    assert_eq!(looked_up.trim(), stored.trim());

    let root_pub = home.join("root.pub");
    let info = json(&home, &[
        "certinfo",
        "--cert", cert.to_str().unwrap(),
        "--root", root_pub.to_str().unwrap(),
    ]);
    assert_eq!(info["version"], 1);
    assert_eq!(info["serial"], "70:b8:f6:20:00:02");
    assert_eq!(info["verified"], true);
    assert_eq!(info["subject_public_key"].as_str().unwrap().len(), 64);
}

#[test]
fn init_refuses_to_overwrite_an_authority() {
    let dir = TempDir::new().unwrap();
    let home = dir.path().join("home");
    ok(&home, &["bleca", "init", "--seed", "1"]);
    let second = run(&home, &["bleca", "init", "--seed", "2"]);
    assert_eq!(second.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&second.stderr).contains("refusing"));
}

#[test]
fn the_environment_variable_wins_over_the_flag() {
    let dir = TempDir::new().unwrap();
    let env_home = dir.path().join("from-env");
    let flag_home = dir.path().join("from-flag");
    let output = bin()
        .env("BLE_CERTAUTH_HOME", &env_home)
        .args(["--home", flag_home.to_str().unwrap(), "bleca", "init", "--seed", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(env_home.join("root.key").exists());
    assert!(!flag_home.exists());
}

#[test]
fn pair_demo_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let first = ok(dir.path(), &["pair-demo", "--seed", "7"]);
    let second = ok(dir.path(), &["pair-demo", "--seed", "7"]);
    assert_eq!(first, second);
    assert!(first.contains("central state:    Established"));
    assert!(first.contains("peripheral state: Established"));
    assert!(first.contains("ltk match:        yes"));
    // The seven-frame happy path, in order.
    for label in ["PAIRING_REQ", "PAIRING_RSP", "CERT_CENTRAL", "CERT_PERIPHERAL", "CONFIRM",
        "NONCE_CENTRAL", "NONCE_PERIPHERAL"]
    {
        assert!(first.contains(label), "missing {label}");
    }
}

#[test]
fn pair_demo_withholds_the_session_key() {
    let dir = TempDir::new().unwrap();
    let revealed = json(dir.path(), &["pair-demo", "--seed", "11", "--reveal-keys"]);
    let ltk = revealed["ltk"].as_str().expect("revealed key").to_owned();
    assert_eq!(ltk.len(), 32);

    let hidden_text = ok(dir.path(), &["pair-demo", "--seed", "11"]);
    assert!(!hidden_text.contains(&ltk), "session key printed without --reveal-keys");
    let hidden_json = json(dir.path(), &["pair-demo", "--seed", "11"]);
    assert!(hidden_json.get("ltk").is_none());
    assert!(!serde_json::to_string(&hidden_json).unwrap().contains(&ltk));
}

#[test]
fn attack_demo_baseline_key_substitution_compromises_every_trial() {
    let dir = TempDir::new().unwrap();
    let doc = json(dir.path(), &[
        "attack-demo", "--strategy", "key-sub", "--baseline", "--seed", "5", "--trials", "5",
    ]);
    assert_eq!(doc["protocol"], "just-works");
    assert_eq!(doc["trials"], 5);
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 5);
    for result in results {
        assert_eq!(result["outcome"], "CompromiseDetectedByHarness");
    }
}

#[test]
fn attack_demo_full_protocol_rejects_certificate_substitution() {
    let dir = TempDir::new().unwrap();
    let doc = json(dir.path(), &[
        "attack-demo", "--strategy", "cert-sub", "--seed", "4", "--trials", "4",
    ]);
    assert_eq!(doc["protocol"], "cert-auth");
    for result in doc["results"].as_array().unwrap() {
        assert_eq!(result["outcome"]["AbortedWithReason"], "InvalidCertificate");
    }
}

#[test]
fn attack_demo_json_is_stable_across_runs() {
    let dir = TempDir::new().unwrap();
    let args = ["attack-demo", "--strategy", "nonce-tamper", "--seed", "3", "--trials", "2"];
    let first = ok(dir.path(), &{
        let mut v = vec!["--format", "json"];
        v.extend_from_slice(&args);
        v
    });
    let second = ok(dir.path(), &{
        let mut v = vec!["--format", "json"];
        v.extend_from_slice(&args);
        v
    });
    assert_eq!(first, second);

    // Schema pin: exactly these top-level fields, so downstream parsers
    // don't silently drift.
    let doc: serde_json::Value = serde_json::from_str(&first).unwrap();
    let mut keys: Vec<&str> = doc.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        ["base_seed", "outcome_counts", "protocol", "results", "strategy", "trials"]
    );
    let mut result_keys: Vec<&str> =
        doc["results"][0].as_object().unwrap().keys().map(String::as_str).collect();
    result_keys.sort_unstable();
    assert_eq!(
        result_keys,
        ["abort_reason", "frames_exchanged", "ltk_match", "notes", "outcome", "protocol",
            "scenario", "seed", "transcript"]
    );
}

#[test]
fn certinfo_reports_truncation_with_a_reason() {
    let dir = TempDir::new().unwrap();
    let stub = dir.path().join("torn.cert");
    std::fs::write(&stub, [0x01u8; 50]).unwrap();
    let output = run(dir.path(), &["certinfo", "--cert", stub.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("must be 103 bytes, got 50"), "stderr: {stderr}");
}

#[test]
fn key_rotation_flow_and_stale_rejection() {
    let dir = TempDir::new().unwrap();
    let home = dir.path().join("home");
    let (device_key, cert) = issue_fixture(&home, dir.path());

    ok(&home, &[
        "key-update", "provision",
        "--serial", "70:b8:f6:20:00:02",
        "--secret", "00112233445566778899aabbccddeeff",
        "--device-key", device_key.to_str().unwrap(),
        "--cert", cert.to_str().unwrap(),
    ]);
    let package = dir.path().join("rotation.pkg");
    let built = json(&home, &[
        "key-update", "build",
        "--serial", "70:b8:f6:20:00:02",
        "--now", "50000",
        "--seed", "9",
        "--out", package.to_str().unwrap(),
    ]);
    assert_eq!(built["timestamp"], 50000);

    let applied = json(&home, &[
        "key-update", "apply",
        "--serial", "70:b8:f6:20:00:02",
        "--package", package.to_str().unwrap(),
        "--now", "50010",
    ]);
    assert_eq!(applied["outcome"], "applied");
    assert_eq!(applied["subject_public_key"], built["new_subject_public_key"]);

    // The registry now serves the rotated certificate.
    let lookup = json(&home, &["bleca", "lookup", "--serial", "70:b8:f6:20:00:02"]);
    assert_eq!(lookup["subject_public_key"], built["new_subject_public_key"]);

    // Replaying the same package outside the window is refused.
    let stale = run(&home, &[
        "key-update", "apply",
        "--serial", "70:b8:f6:20:00:02",
        "--package", package.to_str().unwrap(),
        "--now", "50500",
    ]);
    assert_eq!(stale.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&stale.stderr).contains("freshness"));

    // A wider window admits it again.
    let wide = run(&home, &[
        "key-update", "apply",
        "--serial", "70:b8:f6:20:00:02",
        "--package", package.to_str().unwrap(),
        "--now", "50500",
        "--window", "600",
    ]);
    assert!(wide.status.success());
}

#[test]
fn energy_report_matches_the_hand_fixture() {
    let dir = TempDir::new().unwrap();
    let params = dir.path().join("radio.txt");
    std::fs::write(&params, "e_wu = 0\ne_tx = 1\ne_rx = 1\ne_ifs = 0\ne_slp = 0\n").unwrap();

    let small = json(dir.path(), &["energy", "--params", params.to_str().unwrap()]);
    assert_eq!(small["cert_size"], 103);
    assert_eq!(small["fragments"], 1);
    assert_eq!(small["transfer_tx_uj"], 131.0);
    assert_eq!(small["transfer_rx_uj"], 131.0);
    let overhead = small["handshake_overhead_mj"]["verify_and_ecdh"].as_f64().unwrap();
    assert!((overhead - 69.22).abs() < 1e-9, "overhead {overhead}");

    let big = json(dir.path(), &[
        "energy", "--params", params.to_str().unwrap(), "--cert-size", "1518",
    ]);
    assert_eq!(big["fragments"], 7);

    let broken = dir.path().join("broken.txt");
    std::fs::write(&broken, "e_wu = 1\n").unwrap();
    let missing = run(dir.path(), &["energy", "--params", broken.to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("e_tx"));
}

#[test]
fn usage_errors_exit_two() {
    let unknown_strategy = bin()
        .args(["attack-demo", "--strategy", "jamming"])
        .output()
        .unwrap();
    assert_eq!(unknown_strategy.status.code(), Some(2));

    let unknown_flag = bin().args(["pair-demo", "--frobnicate"]).output().unwrap();
    assert_eq!(unknown_flag.status.code(), Some(2));
}

#[test]
fn missing_state_is_an_operational_error() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("nothing-here");
    let output = run(&empty, &["bleca", "lookup", "--serial", "70:b8:f6:20:00:02"]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}
