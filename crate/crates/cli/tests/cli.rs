//! End-to-end tests that drive the compiled binary the way a user would:
//! real argv, real files, real exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wptsim"))
}

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout is UTF-8")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).expect("stderr is UTF-8")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

const LASER_TECH: &str =
    r#"{"type":"laser","radiance_w_sr_m2":1000.0,"source_area_m2":0.01,"absorption":0.9}"#;
const IWPT_TECH: &str = r#"{"type":"iwpt","l1_h":1e-4,"l2_h":1e-4,"lm_h":2e-5,
                             "r1_ohm":0.1,"r2_ohm":0.1,"r_load_ohm":10.0,"omega_rad_s":1e5}"#;

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

#[test]
fn validate_accepts_every_shipped_scenario() {
    for name in [
        "static_charge.json",
        "formation_square.json",
        "multi_peer.json",
        "market_demo.json",
    ] {
        let output = bin()
            .args(["validate"])
            .arg(scenario_path(name))
            .output()
            .unwrap();
        assert_eq!(exit_code(&output), 0, "{name}: {}", stderr_of(&output));
        assert!(
            stdout_of(&output).starts_with("scenario OK"),
            "{name}: unexpected stdout {:?}",
            stdout_of(&output)
        );
    }
}

#[test]
fn validate_flags_unknown_fields_as_schema_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_path("static_charge.json")).unwrap();
    let broken = text.replacen("\"meta\"", "\"frobnicate\": 1, \"meta\"", 1);
    let path = dir.path().join("unknown_field.json");
    std::fs::write(&path, broken).unwrap();

    let output = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(exit_code(&output), 2, "schema breakage is an input error");
    assert!(
        stderr_of(&output).contains("frobnicate"),
        "message should name the offending field: {}",
        stderr_of(&output)
    );
}

#[test]
fn validate_reports_semantic_errors_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_path("static_charge.json")).unwrap();
    let broken = text.replace("\"agent\": \"rover\"", "\"agent\": \"ghost\"");
    let path = dir.path().join("bad_agent.json");
    std::fs::write(&path, broken).unwrap();

    let output = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(exit_code(&output), 1, "semantic problems are domain errors");
    let stderr = stderr_of(&output);
    assert!(stderr.contains("orders[0].agent"), "missing path: {stderr}");
    assert!(stderr.contains("unknown agent ghost"), "missing cause: {stderr}");
}

#[test]
fn strict_escalates_warnings_to_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario_path("static_charge.json")).unwrap();
    // A max-speed limit on a static agent is legal but pointless: warning.
    let warned = text.replacen(
        "\"kind\": \"static\",",
        "\"kind\": \"static\",\n      \"max_speed_m_s\": 3.0,",
        1,
    );
    let path = dir.path().join("warned.json");
    std::fs::write(&path, warned).unwrap();

    let relaxed = bin().arg("validate").arg(&path).output().unwrap();
    assert_eq!(exit_code(&relaxed), 0, "{}", stderr_of(&relaxed));
    assert!(
        stderr_of(&relaxed).contains("warning:"),
        "warning should be printed: {}",
        stderr_of(&relaxed)
    );

    let strict = bin()
        .arg("validate")
        .arg(&path)
        .arg("--strict")
        .output()
        .unwrap();
    assert_eq!(exit_code(&strict), 1, "--strict turns warnings into failure");
}

#[test]
fn validate_missing_file_is_an_input_error() {
    let output = bin()
        .args(["validate", "/nonexistent/nowhere.json"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
    assert!(stderr_of(&output).contains("cannot read"));
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[test]
fn run_writes_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = bin()
            .arg("run")
            .arg(scenario_path("static_charge.json"))
            .arg("--out")
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
        assert!(stdout_of(&output).contains("run complete"));
    }
    for name in ["metrics.csv", "ledger.jsonl", "summary.json"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert!(!a.is_empty(), "{name} should not be empty");
        assert_eq!(a, b, "{name} must be byte-identical across reruns");
    }
}

#[test]
fn run_seed_override_is_recorded_in_the_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seeded");
    let output = bin()
        .arg("run")
        .arg(scenario_path("formation_square.json"))
        .args(["--seed", "99"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
    let summary = std::fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(
        summary.contains("\"seed\": 99"),
        "summary should carry the effective seed: {summary}"
    );
}

// ---------------------------------------------------------------------------
// link-calc
// ---------------------------------------------------------------------------

#[test]
fn link_calc_matches_pinned_inductive_value() {
    let output = bin()
        .args(["link-calc", "--tech", IWPT_TECH])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("technology = iwpt"), "{stdout}");
    assert!(stdout.contains("eta_env = 0.790498211498"), "{stdout}");
}

#[test]
fn link_calc_matches_pinned_laser_value() {
    let output = bin()
        .args(["link-calc", "--tech", LASER_TECH, "--distance", "100"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    assert!(stdout.contains("eta_env = 0.000900000000000"), "{stdout}");
}

#[test]
fn link_calc_reads_technology_from_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let tech_file = dir.path().join("laser.json");
    std::fs::write(&tech_file, LASER_TECH).unwrap();
    let output = bin()
        .args(["link-calc", "--tech"])
        .arg(format!("@{}", tech_file.display()))
        .args(["--distance", "100"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
    assert!(stdout_of(&output).contains("eta_env = 0.000900000000000"));
}

#[test]
fn link_calc_rejects_malformed_technology_json() {
    let output = bin()
        .args(["link-calc", "--tech", r#"{"type":"warp_drive"}"#])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2, "bad parameters are an input error");
}

#[test]
fn blocked_line_of_sight_zeroes_the_far_field_link() {
    let output = bin()
        .args(["link-calc", "--tech", LASER_TECH, "--distance", "100", "--blocked"])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
    assert!(stdout_of(&output).contains("eta_env = 0"), "{}", stdout_of(&output));
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[test]
fn sweep_emits_a_header_and_monotone_laser_falloff() {
    let output = bin()
        .args([
            "sweep", "--tech", LASER_TECH, "--var", "distance", "--from", "10", "--to", "100",
            "--steps", "10",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 0, "{}", stderr_of(&output));
    let stdout = stdout_of(&output);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("distance,eta_env"));
    let values: Vec<f64> = lines
        .map(|line| line.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 10);
    for pair in values.windows(2) {
        assert!(
            pair[1] < pair[0],
            "efficiency must fall with distance: {values:?}"
        );
    }
}

#[test]
fn sweep_rejects_degenerate_step_counts() {
    let output = bin()
        .args([
            "sweep", "--tech", LASER_TECH, "--var", "distance", "--from", "1", "--to", "2",
            "--steps", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(exit_code(&output), 2);
}

// ---------------------------------------------------------------------------
// ledger-verify
// ---------------------------------------------------------------------------

#[test]
fn ledger_verify_accepts_run_output_and_rejects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let run = bin()
        .arg("run")
        .arg(scenario_path("market_demo.json"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(exit_code(&run), 0, "{}", stderr_of(&run));

    let ledger_file = out.join("ledger.jsonl");
    let verify = bin().arg("ledger-verify").arg(&ledger_file).output().unwrap();
    assert_eq!(exit_code(&verify), 0, "{}", stderr_of(&verify));
    assert!(stdout_of(&verify).contains("ledger OK"));

    // Tamper with one payload digit without breaking the JSON structure.
    // Payloads are embedded as JSON strings, so quotes appear escaped.
    let text = std::fs::read_to_string(&ledger_file).unwrap();
    let tampered = text.replacen(r#"\"quantity_wh\":20.0"#, r#"\"quantity_wh\":21.0"#, 1);
    assert_ne!(text, tampered, "fixture must actually change a record");
    let tampered_file = dir.path().join("tampered.jsonl");
    std::fs::write(&tampered_file, tampered).unwrap();

    let verify = bin()
        .arg("ledger-verify")
        .arg(&tampered_file)
        .output()
        .unwrap();
    assert_eq!(exit_code(&verify), 1, "tampering must be detected");
}

#[test]
fn ledger_verify_rejects_structurally_broken_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("garbage.jsonl");
    std::fs::write(&path, "this is not a ledger\n").unwrap();
    let output = bin().arg("ledger-verify").arg(&path).output().unwrap();
    assert_eq!(exit_code(&output), 1);
    assert!(stderr_of(&output).contains("ledger rejected"));
}

// ---------------------------------------------------------------------------
// argument handling
// ---------------------------------------------------------------------------

#[test]
fn missing_required_arguments_exit_with_usage_error() {
    let output = bin().arg("run").output().unwrap();
    assert_eq!(exit_code(&output), 2, "clap usage errors use exit code 2");
}
