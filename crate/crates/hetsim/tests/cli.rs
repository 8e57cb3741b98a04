//! End-to-end tests of the command-line interface as a subprocess: exit
//! codes, error wording, default-config round trips, and worker-count
//! independence of the output bytes.

use std::path::Path;
use std::process::{Command, Output};

fn hetsim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetsim"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn defaults_round_trip_through_validate_for_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    for tag in ["hybrid_vs_digital", "mobile_relay", "dual_band_sweep"] {
        let output = hetsim().args(["defaults", tag]).output().unwrap();
        assert!(output.status.success(), "defaults {tag} failed");
        let text = String::from_utf8(output.stdout).unwrap();
        assert!(text.starts_with(&format!("scenario = \"{tag}\"")), "{text}");

        let path = write(dir.path(), &format!("{tag}.toml"), &text);
        let validate = hetsim().arg("validate").arg(&path).output().unwrap();
        assert!(
            validate.status.success(),
            "validate rejected its own defaults for {tag}: {}",
            stderr_of(&validate)
        );
    }
}

#[test]
fn defaults_rejects_unknown_scenario_tags() {
    let output = hetsim().args(["defaults", "macro_only"]).output().unwrap();
    assert!(!output.status.success());
    let stderr = stderr_of(&output);
    assert!(stderr.contains("macro_only"), "{stderr}");
    assert!(stderr.contains("hybrid_vs_digital"), "{stderr}");
}

#[test]
fn run_emits_identical_bytes_for_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "exp.toml",
        "scenario = \"hybrid_vs_digital\"\nseed = 3\ntrials = 6\n\
         [hybrid_vs_digital]\nn_tx = 16\nn_rf_tx = 8\nn_rx = 4\nn_rf_rx = 2\n\
         users = 2\nstreams_per_user = 2\nscatterers = 8\nsnr_grid_db = [0.0, 10.0]\n",
    );
    let mut outputs = Vec::new();
    for workers in ["1", "2", "8"] {
        let out = dir.path().join(format!("out_{workers}.csv"));
        let status = hetsim()
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("HETSIM_WORKERS", workers)
            .stdout(std::process::Stdio::null())
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    assert!(text.starts_with("snr_db,"), "{text}");
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn run_honors_cli_overrides_over_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "exp.toml",
        "scenario = \"mobile_relay\"\nseed = 1\ntrials = 9\n\
         [mobile_relay]\nbs_antennas = 16\nusers = 2\nrelay_antenna_counts = [2]\n",
    );
    let out = dir.path().join("relay.csv");
    let output = hetsim()
        .arg("run")
        .arg(&config)
        .args(["--seed", "7", "--trials", "3"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("seed: 7"), "{stdout}");
    assert!(stdout.contains("trials: 3"), "{stdout}");
    let csv = std::fs::read_to_string(&out).unwrap();
    let last = csv.lines().last().unwrap();
    assert!(last.ends_with(",3"), "n column should be 3: {csv}");
}

#[test]
fn infeasible_configs_exit_nonzero_naming_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bad.toml",
        "scenario = \"hybrid_vs_digital\"\n[hybrid_vs_digital]\nusers = 9\n",
    );
    for subcommand in ["run", "validate"] {
        let output = hetsim().arg(subcommand).arg(&config).output().unwrap();
        assert!(!output.status.success(), "{subcommand} accepted an infeasible config");
        let stderr = stderr_of(&output);
        assert!(stderr.contains("n_rf_tx"), "{subcommand}: {stderr}");
    }
}

#[test]
fn malformed_toml_exits_nonzero_with_a_parse_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "broken.toml", "scenario = \"mobile_relay\ntrials");
    let output = hetsim().arg("validate").arg(&config).output().unwrap();
    assert!(!output.status.success());
    assert!(stderr_of(&output).contains("parse error"), "{}", stderr_of(&output));
}

#[test]
fn missing_config_files_exit_nonzero_naming_the_path() {
    let output = hetsim()
        .args(["run", "/nonexistent/exp.toml"])
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(
        stderr_of(&output).contains("/nonexistent/exp.toml"),
        "{}",
        stderr_of(&output)
    );
}

#[test]
fn invalid_worker_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "exp.toml", "scenario = \"mobile_relay\"\ntrials = 1\n[mobile_relay]\nbs_antennas = 16\nusers = 2\nrelay_antenna_counts = [2]\n");
    for bad in ["0", "many"] {
        let output = hetsim()
            .arg("run")
            .arg(&config)
            .env("HETSIM_WORKERS", bad)
            .output()
            .unwrap();
        assert!(!output.status.success(), "accepted HETSIM_WORKERS={bad}");
        assert!(
            stderr_of(&output).contains("HETSIM_WORKERS"),
            "{}",
            stderr_of(&output)
        );
    }
}

#[test]
fn single_trial_runs_print_the_degenerate_statistics_note() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "exp.toml",
        "scenario = \"mobile_relay\"\ntrials = 1\n\
         [mobile_relay]\nbs_antennas = 16\nusers = 2\nrelay_antenna_counts = [2]\n",
    );
    let out = dir.path().join("one.csv");
    let output = hetsim()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("note:") && stdout.contains("n = 1"), "{stdout}");
}
