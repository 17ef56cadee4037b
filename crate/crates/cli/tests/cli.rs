use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[contract]
gaps = [0.2, 0.1]
[mc]
n_paths = 5000
steps_per_year = 100.0
outer_paths = 100
sub_paths = 200
"#;

fn fwdsmile(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fwdsmile"))
        .args(args)
        .current_dir(dir)
        .env_remove("FWDSMILE_SEED")
        .env_remove("FWDSMILE_THREADS")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn error_record(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let line = stderr.lines().last().expect("stderr has a record");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON: {line}: {e}"))
}

#[test]
fn price_writes_tables_with_header_and_config_echo() {
    let dir = setup(SMALL);
    let out = fwdsmile(&["price", "run.toml", "--out", "o", "--seed", "7"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let listed = String::from_utf8(out.stdout).unwrap();
    assert_eq!(listed.lines().count(), 2);

    let csv = fs::read_to_string(dir.path().join("o/fwdsmile_price.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with(&format!("# fwdsmile {} command=price config_hash=", env!("CARGO_PKG_VERSION"))));
    assert!(header.ends_with(" seed=7"));
    let columns: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(columns[0], "alpha");
    assert!(columns.contains(&"direct_se") && columns.contains(&"decomposition_se"));
    assert_eq!(lines.count(), 11);

    let echo = fs::read_to_string(dir.path().join("o/fwdsmile_price_config.toml")).unwrap();
    let (banner, body) = echo.split_once('\n').unwrap();
    assert_eq!(banner, header);
    let resolved = fwdsmile_cli::RunConfig::parse(body).unwrap();
    assert_eq!(resolved.mc.seed, 7);
    assert_eq!(format!("{:016x}", resolved.hash()), header.split("config_hash=").nth(1).unwrap()[..16]);
}

#[test]
fn same_seed_gives_identical_bytes_and_seed_changes_them() {
    let dir = setup(SMALL);
    let run = |seed: &str, out: &str| {
        let o = fwdsmile(&["smile", "run.toml", "--out", out, "--seed", seed], dir.path());
        assert!(o.status.success());
        fs::read(dir.path().join(out).join("fwdsmile_smile.csv")).unwrap()
    };
    assert_eq!(run("1", "a"), run("1", "b"));
    assert_ne!(run("1", "a"), run("2", "c"));
}

#[test]
fn seed_and_threads_are_read_from_the_environment() {
    let dir = setup(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_fwdsmile"))
        .args(["smile", "run.toml", "--out", "o"])
        .current_dir(dir.path())
        .env("FWDSMILE_SEED", "99")
        .env("FWDSMILE_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("o/fwdsmile_smile.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with(" seed=99"));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = setup(SMALL);
    let out = fwdsmile(&["price", "absent.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = error_record(&out);
    assert_eq!(r["error"], "io");
    assert_eq!(r["command"], "price");
    assert_eq!(r["exit_code"], 1);
}

#[test]
fn unknown_key_and_bad_values_are_config_errors() {
    for bad in ["[model]\nvolatility = 0.3\n", "[model]\nrho = -1.2\n", "[mc]\nn_paths = 0\n"] {
        let dir = setup(bad);
        let out = fwdsmile(&["limits", "run.toml"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{bad}");
        assert_eq!(error_record(&out)["error"], "config");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = setup(SMALL);
    assert_eq!(fwdsmile(&["frobnicate", "run.toml"], dir.path()).status.code(), Some(2));
    let out = fwdsmile(&["limits", "run.toml", "--dump-paths", "p.bin"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_record(&out)["error"], "usage");
    let out = fwdsmile(&["price", "run.toml", "--threads", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dump_paths_writes_a_summary_file() {
    let dir = setup(SMALL);
    let out = fwdsmile(&["price", "run.toml", "--out", "o", "--dump-paths", "paths.bin"], dir.path());
    assert!(out.status.success());
    let bytes = fs::read(dir.path().join("paths.bin")).unwrap();
    assert!(!bytes.is_empty());
}

#[test]
fn strict_turns_failed_comparison_rows_into_exit_three() {
    // A fixed FD step far wider than the smile biases the skew and curvature.
    let config = r#"
[contract]
s = 0.5
gaps = [0.4, 0.2]
[mc]
n_paths = 100000
steps_per_year = 100.0
outer_paths = 200
sub_paths = 500
[fd]
step = { fixed = 0.3 }
"#;
    let dir = setup(config);
    let relaxed = fwdsmile(&["compare", "run.toml", "--out", "o"], dir.path());
    assert!(relaxed.status.success());
    let csv = fs::read_to_string(dir.path().join("o/fwdsmile_compare.csv")).unwrap();
    assert!(csv.lines().any(|l| l.ends_with(",false")));

    let strict = fwdsmile(&["compare", "run.toml", "--out", "o", "--strict"], dir.path());
    assert_eq!(strict.status.code(), Some(3));
    let r = error_record(&strict);
    assert_eq!(r["error"], "comparison-failed");
    assert_eq!(r["command"], "compare");
    assert!(dir.path().join("o/fwdsmile_compare.csv").exists());
}
