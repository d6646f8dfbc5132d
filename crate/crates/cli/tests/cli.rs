//! End-to-end tests of the `normap` binary: exit codes, artifact bytes,
//! determinism across reruns and thread counts, and the refusal paths.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_normap")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("exp.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary launches")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn missing_config_flag_is_a_config_error() {
    let out = run(&["solve"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("--config"));
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "alpha = 1\nbath_size = 64\nepochs = 1\n");
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bath_size"), "stderr: {}", stderr_of(&out));
}

#[test]
fn missing_data_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "problem = libsvm\ndata_path = /nonexistent/file.libsvm\nalpha = 1\nepochs = 1\n",
    );
    let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("does not exist"), "stderr: {}", stderr_of(&out));
}

#[test]
fn malformed_data_fails_with_line_accurate_errors() {
    let cases = [
        ("bad_label.libsvm", "line 1", "label"),
        ("zero_index.libsvm", "line 1", "index 0"),
        ("nonascending.libsvm", "line 2", "strictly increasing"),
        ("bad_value.libsvm", "line 1", "feature value"),
        ("missing_colon.libsvm", "line 1", "index:value"),
    ];
    let tmp = TempDir::new().unwrap();
    for (name, want_line, want_msg) in cases {
        let cfg_text = format!(
            "problem = libsvm\ndata_path = {}\nalpha = 1\nepochs = 1\n",
            fixture(name).display()
        );
        let cfg = write_config(tmp.path(), &cfg_text);
        let out = run(&["solve", "--config", cfg.to_str().unwrap()]);
        let err = stderr_of(&out);
        assert_eq!(out.status.code(), Some(2), "{name}: {err}");
        assert!(err.contains(want_line), "{name}: expected {want_line} in: {err}");
        assert!(err.contains(want_msg), "{name}: expected {want_msg:?} in: {err}");
    }
}

const SMALL_SOLVE: &str = "\
problem = synthetic
loss = quadratic_l1
n = 12
d = 6
data_seed = 4
nu = 0.05
methods = norm_sgd,prox_sgd,det_prox_grad
alpha = 5
gamma = 0.8
batch_size = 3
epochs = 3
seeds = 0,1
record_every = 2
";

#[test]
fn solve_writes_identical_artifacts_across_reruns_and_threads() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SOLVE);
    let out1 = tmp.path().join("run1");
    let out2 = tmp.path().join("run2");

    let r1 = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert_eq!(r1.status.code(), Some(0), "stderr: {}", stderr_of(&r1));
    let r2 = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
        "--threads",
        "4",
    ]);
    assert_eq!(r2.status.code(), Some(0), "stderr: {}", stderr_of(&r2));

    let mut names: Vec<String> = fs::read_dir(&out1)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    // 3 methods x 2 seeds + the summary.
    assert_eq!(names.len(), 7, "{names:?}");
    assert!(names.contains(&"summary.json".to_string()));
    assert!(names.contains(&"norm_sgd_a5_s0.csv".to_string()));
    assert!(names.contains(&"det_prox_grad_a5_s1.csv".to_string()));
    for name in &names {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "artifact {name} differs across reruns/threads");
    }

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("summary.json")).unwrap()).unwrap();
    assert!(summary["reference_converged"].as_bool().unwrap());
    assert_eq!(summary["runs"].as_array().unwrap().len(), 6);
}

#[test]
fn seed_list_overrides_config_seeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_SOLVE);
    let out_dir = tmp.path().join("out");
    let r = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed-list",
        "7",
    ]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    assert!(out_dir.join("norm_sgd_a5_s7.csv").exists());
    assert!(!out_dir.join("norm_sgd_a5_s0.csv").exists());
}

#[test]
fn zero_epochs_records_the_initial_row_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "loss = quadratic_l1\nn = 8\nd = 4\nmethods = norm_sgd\nalpha = 1\n\
         batch_size = 2\nepochs = 0\nseeds = 3\n",
    );
    let out_dir = tmp.path().join("out");
    let r = run(&["solve", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    let csv = fs::read_to_string(out_dir.join("norm_sgd_a1_s3.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3, "header, columns, one data row: {csv}");
    assert!(lines[0].starts_with("# normap-trajectory"));
    assert!(lines[2].starts_with("0,"), "initial row has k = 0: {}", lines[2]);
}

#[test]
fn descent_check_refuses_without_diagnostic_mode() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "loss = quadratic_l1\nn = 8\nd = 8\nlambda = 1\nschedule = constant\n\
         alpha = auto\nmax_iters = 100\nbatch_size = 8\n",
    );
    let out = run(&["descent-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("diagnostic_mode"), "stderr: {}", stderr_of(&out));
}

#[test]
fn descent_check_reports_and_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "loss = quadratic_l1\nn = 8\nd = 8\ndata_seed = 1\nnu = 0.1\nlambda = 1\n\
         schedule = constant\nalpha = auto\nmax_iters = 400\nbatch_size = 8\n\
         diagnostic_mode = true\n",
    );
    let out_dir = tmp.path().join("audit");
    let r = run(&[
        "descent-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("descent_report.json")).unwrap())
            .unwrap();
    // Exact gradients and a just-inside-the-window step: clean audit.
    assert!(report["passed"].as_bool().unwrap(), "{report}");
    assert_eq!(report["violations"].as_array().unwrap().len(), 0);
    assert!(report["windows_checked"].as_u64().unwrap() > 0);
    assert_eq!(report["k_delta"].as_u64(), Some(0));
    assert!(out_dir.join("windows.csv").exists());
    assert!(out_dir.join("descent_trajectory.csv").exists());
}

#[test]
fn gen_data_roundtrip_and_empty_dataset() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("synth.libsvm");
    let cfg = write_config(
        tmp.path(),
        &format!(
            "n = 40\nd = 9\ndensity = 0.4\ndata_seed = 7\ndata_path = {}\n",
            data.display()
        ),
    );
    let r = run(&["gen-data", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    let bytes1 = fs::read(&data).unwrap();
    assert!(!bytes1.is_empty());

    // Same config writes the same bytes.
    let r = run(&["gen-data", "--config", cfg.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(fs::read(&data).unwrap(), bytes1);

    // n = 0 yields an empty but valid file.
    let empty = tmp.path().join("empty.libsvm");
    let cfg0 = tmp.path().join("empty.cfg");
    fs::write(&cfg0, format!("n = 0\ndata_path = {}\n", empty.display())).unwrap();
    let r = run(&["gen-data", "--config", cfg0.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    assert_eq!(fs::read(&empty).unwrap().len(), 0);
}

#[test]
fn rates_with_an_empty_grid_writes_header_only_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "gammas =\nthetas =\n");
    let out_dir = tmp.path().join("rates");
    let r = run(&["rates", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    for table in ["rate_map.csv", "rate_fit.csv"] {
        let text = fs::read_to_string(out_dir.join(table)).unwrap();
        assert_eq!(text.lines().count(), 1, "{table} should be header-only: {text}");
    }
}

#[test]
fn rates_fits_cells_on_a_small_problem() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "loss = power_abs\np = 2\nd = 6\nalpha = 1\ngammas = 0.75\n\
         thetas = 0,0.5\nmax_iters = 2000\nseeds = 0,1\nbatch_size = 1\n",
    );
    let out_dir = tmp.path().join("rates");
    let r = run(&["rates", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", stderr_of(&r));
    let fit = fs::read_to_string(out_dir.join("rate_fit.csv")).unwrap();
    let lines: Vec<&str> = fit.lines().collect();
    assert_eq!(lines.len(), 2, "one cell: {fit}");
    // Deterministic decay on the power objective: the iterate slope exists
    // and is negative.
    let fields: Vec<&str> = lines[1].split(',').collect();
    let slope_iterate: f64 = fields[3].parse().expect("iterate slope present");
    assert!(slope_iterate < 0.0, "slope: {slope_iterate}");
    let map = fs::read_to_string(out_dir.join("rate_map.csv")).unwrap();
    assert_eq!(map.lines().count(), 3, "header + 2 cells: {map}");
}
