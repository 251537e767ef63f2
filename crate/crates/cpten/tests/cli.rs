//! End-to-end tests for the `cpten-bench` binary: argument handling, exit
//! codes, and report output in both formats.

use std::path::Path;
use std::process::{Command, Output};

use cpten::{write_tns, DuplicatePolicy, SparseTensor};

const BIN: &str = env!("CARGO_BIN_EXE_cpten-bench");

/// Runs the binary with `args` and returns the completed output.
fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("failed to spawn cpten-bench")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout was not UTF-8")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr was not UTF-8")
}

/// Small synthetic run: fast flags shared by most tests. Supplying
/// `--peak-gbps` skips the memory-bandwidth measurement, which would
/// otherwise dominate the test's runtime.
const FAST: &[&str] = &[
    "--dims",
    "12x13x14",
    "--nnz",
    "300",
    "--rank",
    "4",
    "--iters",
    "2",
    "--threads",
    "1",
    "--peak-gbps",
    "50",
];

#[test]
fn synthetic_run_emits_one_csv_row_per_variant_and_mode() {
    let out = run(FAST);
    assert!(
        out.status.success(),
        "expected success, stderr: {}",
        stderr_of(&out)
    );

    let stdout = stdout_of(&out);
    let mut lines = stdout.lines();
    let header = lines.next().expect("missing CSV header");
    assert_eq!(
        header,
        "variant,mode,threads,iters,seconds,gbps,peak_fraction,sort_seconds,\
         sort_ratio,storage_base_bytes,storage_perm_bytes"
    );
    // Three default variants, one thread count, three modes.
    assert_eq!(lines.count(), 3 * 1 * 3);
    assert!(stderr_of(&out).contains("peak bandwidth"));
}

#[test]
fn json_format_parses_and_has_expected_fields() {
    let mut args = FAST.to_vec();
    args.extend_from_slice(&["--format", "json", "--variant", "perm"]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let rows: serde_json::Value =
        serde_json::from_str(&stdout_of(&out)).expect("stdout was not valid JSON");
    let rows = rows.as_array().expect("expected a JSON array of rows");
    assert_eq!(rows.len(), 3); // one perm row per mode
    for row in rows {
        assert_eq!(row["variant"], "perm");
        assert!(row["gbps"].as_f64().expect("gbps should be a number") > 0.0);
        assert!(row["sort_ratio"].as_f64().is_some());
    }
}

#[test]
fn reads_tensor_from_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("small.tns");

    let coords = [
        [0, 0, 0],
        [1, 2, 3],
        [2, 1, 0],
        [3, 3, 2],
        [1, 0, 3],
        [0, 2, 1],
    ];
    let flat: Vec<usize> = coords.iter().flatten().copied().collect();
    let values: Vec<f64> = (1..=coords.len()).map(|i| i as f64).collect();
    let x = SparseTensor::from_coo(&[4, 4, 4], &flat, &values, DuplicatePolicy::Error)
        .expect("valid tensor");
    write_file(&path, &x);

    let out = run(&[
        "--input",
        path.to_str().expect("utf-8 path"),
        "--rank",
        "2",
        "--iters",
        "2",
        "--threads",
        "1",
        "--variant",
        "blocked",
        "--peak-gbps",
        "50",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let stdout = stdout_of(&out);
    // Header plus one blocked row per mode.
    assert_eq!(stdout.lines().count(), 1 + 3);
}

fn write_file(path: &Path, x: &SparseTensor) {
    let file = std::fs::File::create(path).expect("create tensor file");
    write_tns(x, std::io::BufWriter::new(file)).expect("write tensor file");
}

#[test]
fn out_flag_writes_report_to_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("report.csv");

    let mut args = FAST.to_vec();
    let path_str = path.to_str().expect("utf-8 path").to_owned();
    args.extend_from_slice(&["--variant", "atomic", "--out", &path_str]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stdout_of(&out).is_empty());

    let report = std::fs::read_to_string(&path).expect("report file");
    assert_eq!(report.lines().count(), 1 + 3);
}

#[test]
fn missing_input_specification_fails_with_diagnostic() {
    let out = run(&["--rank", "4"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = stderr_of(&out);
    assert!(
        stderr.contains("--input") && stderr.contains("--dims"),
        "stderr should point at the input flags: {stderr}"
    );
}

#[test]
fn nonexistent_input_file_fails() {
    let out = run(&["--input", "/nonexistent/tensor.tns"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).starts_with("error:"));
}

#[test]
fn malformed_dims_fail() {
    let out = run(&["--dims", "12xABCx14", "--nnz", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("ABC"));
}

#[test]
fn invalid_byte_width_is_a_usage_error() {
    let mut args = FAST.to_vec();
    args.extend_from_slice(&["--float-bytes", "6"]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2)); // clap usage error
    assert!(stderr_of(&out).contains("byte width must be 4 or 8"));
}

#[test]
fn dims_without_nnz_is_a_usage_error() {
    let out = run(&["--dims", "12x13x14"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sort_fields_present_only_for_permuted_rows() {
    let mut args = FAST.to_vec();
    args.extend_from_slice(&["--variant", "perm", "--variant", "atomic"]);
    let out = run(&args);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let stdout = stdout_of(&out);
    let mut reader = csv::Reader::from_reader(stdout.as_bytes());
    let mut saw_perm = false;
    let mut saw_atomic = false;
    for record in reader.records() {
        let record = record.expect("CSV record");
        let variant = &record[0];
        let sort_seconds = &record[7];
        match variant {
            "perm" => {
                saw_perm = true;
                assert!(!sort_seconds.is_empty(), "perm rows must carry sort time");
            }
            "atomic" => {
                saw_atomic = true;
                assert!(sort_seconds.is_empty(), "atomic rows have no sort time");
            }
            other => panic!("unexpected variant {other:?}"),
        }
    }
    assert!(saw_perm && saw_atomic);
}
