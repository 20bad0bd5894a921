//! End-to-end tests of the `phoncal` binary: spawn the built executable,
//! check stdout/stderr text and exit codes against the documented
//! contract (0 success, 1 error, 2 usage, 3 completed with failures).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

/// A command on the built binary with the data-directory variable
/// cleared, so an ambient `PHONCAL_DIR` can't leak into tests.
fn phoncal() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_phoncal"));
    cmd.env_remove("PHONCAL_DIR");
    cmd
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8(output.stderr.clone()).unwrap()
}

/// Writes the demo dataset into `dir` and returns the manifest path.
fn make_demo(dir: &Path) -> PathBuf {
    let output = phoncal().args(["make-demo", "--out"]).arg(dir).output().unwrap();
    assert!(
        output.status.success(),
        "make-demo failed: {}",
        stderr_of(&output)
    );
    dir.join("manifest.json")
}

#[test]
fn ocv_voltage_prints_worked_examples_exactly() {
    let cases: [(&[&str], &str); 3] = [
        (
            &["--sensitivity", "99.14", "--unit", "dbv", "--ref-spl", "94"],
            "0.5534 V\n",
        ),
        (
            &["--sensitivity", "94", "--unit", "dbv", "--ref-spl", "94"],
            "1.0000 V\n",
        ),
        (
            &[
                "--sensitivity",
                "96",
                "--unit",
                "dbmw",
                "--impedance",
                "1000",
                "--ref-spl",
                "94",
            ],
            "0.7943 V\n",
        ),
    ];
    for (args, expected) in cases {
        let output = phoncal().arg("ocv-voltage").args(args).output().unwrap();
        assert!(output.status.success(), "args {args:?}: {}", stderr_of(&output));
        assert_eq!(stdout_of(&output), expected, "args {args:?}");
    }
}

#[test]
fn ocv_voltage_dbmw_without_impedance_is_a_usage_error() {
    let output = phoncal()
        .args(["ocv-voltage", "--sensitivity", "96", "--unit", "dbmw"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(
        stderr_of(&output).contains("--impedance"),
        "stderr should name the missing option: {}",
        stderr_of(&output)
    );
}

#[test]
fn analyze_recovers_nominal_levels_of_the_demo_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_demo(dir.path());

    let output = phoncal().arg("analyze").arg(&manifest).output().unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));

    let text = stdout_of(&output);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "track_id,left_dba,right_dba,track_dba,nominal_dba,delta_db,error"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 27);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 7, "row {row}");
        assert!(fields[6].is_empty(), "unexpected error in row {row}");
        let delta: f64 = fields[5].parse().unwrap();
        assert!(
            delta.abs() <= 0.01,
            "track {} delta {delta} exceeds 0.01 dB",
            fields[0]
        );
    }
}

#[test]
fn analyze_isolates_an_unreadable_track() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_demo(dir.path());
    std::fs::write(dir.path().join("tracks/W09.wav"), b"not a wav file").unwrap();

    let output = phoncal().arg("analyze").arg(&manifest).output().unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr_of(&output));
    assert!(stderr_of(&output).contains("1 of 27"));

    let text = stdout_of(&output);
    let mut intact = 0usize;
    let mut failed = 0usize;
    for row in text.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        if fields[0] == "W09" {
            failed += 1;
            assert!(!fields[6].is_empty(), "W09 row should carry an error message");
            assert!(fields[1].is_empty(), "W09 row should have no levels");
        } else {
            intact += 1;
            assert!(fields[6].is_empty(), "row {row}");
            let _: f64 = fields[3].parse().unwrap();
        }
    }
    assert_eq!((intact, failed), (26, 1));
}

#[test]
fn calibrate_on_the_noisy_rig_reports_the_quiet_track_and_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = make_demo(dir.path());
    let session_path = dir.path().join("session.json");

    let output = phoncal()
        .arg("calibrate")
        .arg(&manifest)
        .arg("--rig")
        .arg(dir.path().join("rig_floor41.json"))
        .arg("--out")
        .arg(&session_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3), "{}", stderr_of(&output));

    let text = stdout_of(&output);
    assert!(
        text.contains("KT01: FAILED"),
        "summary should flag the track under the noise floor:\n{text}"
    );
    assert!(text.contains("below_noise_floor"), "{text}");

    // The session file is written even though one track failed, and it
    // round-trips through the library loader.
    let session = phoncal::manifest::load_session(&session_path).unwrap();
    assert_eq!(session.runs.len(), 3);
}

#[test]
fn report_renders_markdown_and_prints_retained_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let levels_path = dir.path().join("levels.csv");
    std::fs::write(&levels_path, phoncal::report::REFERENCE_LEVELS_CSV).unwrap();

    let output = phoncal()
        .arg("report")
        .arg(&levels_path)
        .args(["--exclude", "KT01"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));

    let table = stdout_of(&output);
    assert!(table.starts_with('|'), "markdown table expected:\n{table}");
    assert!(table.contains("KT01"));

    let stats = stderr_of(&output);
    assert!(stats.contains("|Δ_ocv|"), "{stats}");
    assert!(stats.contains("(retained)"), "{stats}");
    assert!(stats.contains("excluded KT01"), "{stats}");
}

#[test]
fn report_with_every_track_excluded_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let levels_path = dir.path().join("levels.csv");
    std::fs::write(&levels_path, phoncal::report::REFERENCE_LEVELS_CSV).unwrap();

    let rows = phoncal::report::parse_levels_csv(phoncal::report::REFERENCE_LEVELS_CSV).unwrap();
    let mut cmd = phoncal();
    cmd.arg("report").arg(&levels_path);
    for row in &rows {
        cmd.args(["--exclude", &row.track_id]);
    }
    let output = cmd.output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(
        stderr_of(&output).contains("excluded"),
        "{}",
        stderr_of(&output)
    );
}

#[test]
fn data_directory_variable_resolves_bare_filenames() {
    let dataset = tempfile::tempdir().unwrap();
    make_demo(dataset.path());
    let elsewhere = tempfile::tempdir().unwrap();

    let output = phoncal()
        .args(["analyze", "manifest.json"])
        .current_dir(elsewhere.path())
        .env("PHONCAL_DIR", dataset.path())
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", stderr_of(&output));
    assert_eq!(stdout_of(&output).lines().count(), 28);
}
