//! End-to-end tests for the `pdc-sim` binary: artifact determinism, exit
//! codes, output-directory resolution, and the calibration round trip.
//!
//! All runs use the reduced-resolution checked-in config so the whole file
//! stays fast while still exercising the full pipeline.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pdc-sim");

fn fast_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference-fast.toml")
}

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    // Never inherit an output directory from the surrounding environment.
    cmd.env_remove("PDC_SIM_OUT");
    for (key, value) in envs {
        cmd.env(key, value);
    }
    cmd.output().expect("binary should spawn")
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn simulate_artifacts_are_byte_identical_across_runs() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let config = fast_config();
    let config = config.to_str().unwrap();

    let first = run(
        &["simulate", "--config", config, "--out", dir_a.path().to_str().unwrap()],
        &[],
    );
    assert!(first.status.success(), "stderr: {}", stderr_text(&first));
    let second = run(
        &["simulate", "--config", config, "--out", dir_b.path().to_str().unwrap()],
        &[],
    );
    assert!(second.status.success(), "stderr: {}", stderr_text(&second));

    assert_eq!(first.stdout, second.stdout, "stdout summaries differ");

    let artifacts = [
        "spectrum.csv",
        "jsi.csv",
        "temporal.csv",
        "diagnostics.csv",
        "state.bin",
        "summary.json",
    ];
    for name in artifacts {
        let bytes_a = std::fs::read(dir_a.path().join(name))
            .unwrap_or_else(|_| panic!("{name} missing from first run"));
        let bytes_b = std::fs::read(dir_b.path().join(name))
            .unwrap_or_else(|_| panic!("{name} missing from second run"));
        assert!(!bytes_a.is_empty(), "{name} is empty");
        assert_eq!(bytes_a, bytes_b, "{name} differs between identical runs");
    }

    let summary: serde_json::Value =
        serde_json::from_slice(&first.stdout).expect("stdout should be a JSON summary");
    for key in ["N_a", "N_b", "mu_ab", "g2_s_click", "g2_s_moment"] {
        assert!(summary.get(key).is_some(), "summary lacks key {key}");
    }
}

#[test]
fn unknown_config_keys_are_rejected_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config();
    let output = run(
        &[
            "g2",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--set",
            "waveguide.no_such_key=1",
        ],
        &[],
    );
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_text(&output));
    assert!(
        stderr_text(&output).starts_with("error:"),
        "diagnostic should go to stderr, got: {}",
        stderr_text(&output)
    );
}

#[test]
fn missing_config_is_rejected_with_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&["simulate", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_text(&output));
}

#[test]
fn impossible_inversion_exits_with_code_4() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config();
    // Click-based g2 of a zero-mean Gaussian state cannot exceed 2, so this
    // target lies outside every achievable forward map.
    let output = run(
        &[
            "invert",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--set",
            "invert.g2_signal=3.5",
            "--set",
            "invert.g2_idler=3.5",
            "--set",
            "invert.grid_alpha_points=4",
            "--set",
            "invert.grid_r_points=4",
        ],
        &[],
    );
    assert_eq!(output.status.code(), Some(4), "stderr: {}", stderr_text(&output));
    assert!(
        stderr_text(&output).contains("no"),
        "stderr should explain the empty intersection: {}",
        stderr_text(&output)
    );
}

#[test]
fn calibrate_writes_updated_config_and_hits_target() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config();
    let output = run(
        &[
            "calibrate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
            "--target",
            "1e-3",
        ],
        &[],
    );
    assert!(output.status.success(), "stderr: {}", stderr_text(&output));

    let report: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    let relative_error = report["relative_error"].as_f64().unwrap();
    assert!(
        relative_error.abs() < 1e-4,
        "calibration missed target: rel err {relative_error:e}"
    );
    let gamma = report["gamma_per_m"].as_f64().unwrap();
    assert!(gamma > 0.0);

    let text = std::fs::read_to_string(dir.path().join("calibrated.toml")).unwrap();
    let reparsed: toml::Value = toml::from_str(&text).expect("calibrated.toml should parse");
    let written = reparsed["waveguide"]["gamma_per_m"].as_float().unwrap();
    assert!(
        (written - gamma).abs() <= 1e-15 * gamma,
        "calibrated.toml pins a different gamma ({written} vs {gamma})"
    );
}

#[test]
fn out_flag_beats_environment_variable_which_beats_cwd() {
    let flag_dir = tempfile::tempdir().unwrap();
    let env_dir = tempfile::tempdir().unwrap();
    let config = fast_config();
    let config = config.to_str().unwrap();

    // --out wins over the environment variable.
    let output = run(
        &["g2", "--config", config, "--out", flag_dir.path().to_str().unwrap()],
        &[("PDC_SIM_OUT", env_dir.path().to_str().unwrap())],
    );
    assert!(output.status.success(), "stderr: {}", stderr_text(&output));
    assert!(flag_dir.path().join("g2.json").exists());
    assert!(!env_dir.path().join("g2.json").exists());

    // Without --out the environment variable decides.
    let output = run(
        &["g2", "--config", config],
        &[("PDC_SIM_OUT", env_dir.path().to_str().unwrap())],
    );
    assert!(output.status.success(), "stderr: {}", stderr_text(&output));
    assert!(env_dir.path().join("g2.json").exists());
}
