use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_sadi");

const QUEUE_MODEL: &str = r#"seed = 5

[model]
kind = "queue"
lambda = [0.1, 0.2]
eta = [0.5, 0.8]
"#;

fn write_config(dir: &Path, sections: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, format!("{QUEUE_MODEL}\n{sections}")).unwrap();
    path
}

fn sadi(cmd: &str, config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args([cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env_remove("SADI_OUT_DIR")
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<_> = fs::read_dir(dir)
        .map(|d| d.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect())
        .unwrap_or_default();
    names.sort();
    names
}

#[test]
fn simulate_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\ngamma = 0.1\ninitial = [1.0, 1.0]\nsteps = 50\nseeds = [1, 2, 3]\n");
    let out = dir.path().join("out");
    assert_eq!(sadi("simulate", &cfg, &out).status.code(), Some(0));
    assert_eq!(listing(&out), ["trajectory_1.csv", "trajectory_2.csv", "trajectory_3.csv"]);
    let rows = read_csv(&out.join("trajectory_2.csv"));
    assert_eq!(rows[0], ["k", "t", "x_1", "x_2"]);
    assert_eq!(rows.len(), 52);
    assert_eq!(rows[1][2..], ["1.0000000000000000", "1.0000000000000000"]);
}

#[test]
fn simulate_zero_steps_gives_single_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\ngamma = 0.1\ninitial = [0.3, 0.0]\nsteps = 0\nreplicates = 2\n");
    let out = dir.path().join("out");
    assert_eq!(sadi("simulate", &cfg, &out).status.code(), Some(0));
    let files = listing(&out);
    assert_eq!(files.len(), 2);
    for f in files {
        assert_eq!(read_csv(&out.join(f)).len(), 2);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[converge]\ngammas = [0.1, 0.05]\ninitial = [1.0, 1.0]\nhorizon = 4.0\nreplicates = 12\neps = 0.25\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(sadi("converge", &cfg, &a).status.code(), Some(0));
    assert_eq!(sadi("converge", &cfg, &b).status.code(), Some(0));
    let files = listing(&a);
    assert_eq!(files, ["converge_records.csv", "converge_summary.csv"]);
    for f in &files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let summary = read_csv(&a.join("converge_summary.csv"));
    assert_eq!(summary[0], ["gamma", "exceedance", "median", "q90"]);
    assert_eq!(read_csv(&a.join("converge_records.csv")).len(), 1 + 2 * 12);
}

#[test]
fn di_solve_exact_reports_breakpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[di_solve]\nsolver = \"exact\"\ninitial = [1.0, 1.0]\nhorizon = 8.0\n");
    let out = dir.path().join("out");
    assert_eq!(sadi("di_solve", &cfg, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("di_solution.csv"));
    assert_eq!(rows[0], ["t", "x_1", "x_2", "segment_id"]);
    let times: Vec<f64> = rows[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    let expected = [0.0, 2.5, 2.5 + 1.5 / 0.44, 8.0];
    assert_eq!(times.len(), expected.len());
    for (t, e) in times.iter().zip(expected) {
        assert!((t - e).abs() < 1e-9, "{t} vs {e}");
    }
}

#[test]
fn di_solve_from_the_origin_stays_there() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[di_solve]\nsolver = \"exact\"\ninitial = [0.0, 0.0]\nhorizon = 5.0\n");
    let out = dir.path().join("out");
    assert_eq!(sadi("di-solve", &cfg, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("di_solution.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows[1..] {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[2].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn di_solve_reference_deviation_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[di_solve]\nsolver = \"reference\"\ninitial = [1.0, 1.0]\nhorizon = 8.0\nstep = 1e-4\n",
    );
    let out = dir.path().join("out");
    assert_eq!(sadi("di_solve", &cfg, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("di_summary.csv"));
    assert_eq!(rows[0], ["solver", "horizon", "step", "rows", "sup_deviation"]);
    assert_eq!(rows[1][0], "reference");
    let dev: f64 = rows[1][4].parse().unwrap();
    assert!(dev <= 1e-2, "{dev}");
}

#[test]
fn longrun_writes_summary_and_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[longrun]\ngammas = [0.05, 0.02]\ninitial = [0.0, 0.0]\niterations = 5000\nreplicates = 3\neps = 0.2\n",
    );
    let out = dir.path().join("out");
    assert_eq!(sadi("longrun", &cfg, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("longrun.csv"));
    assert_eq!(rows[0], ["gamma", "fraction_within_eps", "ergodic_distance"]);
    assert_eq!(rows.len(), 3);
    assert!(out.join("longrun_replicates.csv").exists());
}

const PH: &str = "[ph_check]\ngammas = [0.1]\nsamples = 20000\ngrid = { lower = 0.1, upper = 1.0, spacing = 0.1 }\n";

#[test]
fn ph_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let cfg = write_config(dir.path(), PH);
    let ok = sadi("ph_check", &cfg, &out);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let rows = read_csv(&out.join("ph_report.csv"));
    assert_eq!(rows[0], ["probe_id", "gamma", "x_1", "x_2", "gap", "stderr", "flag"]);
    assert_eq!(rows.len(), 101);

    let cfg = write_config(dir.path(), &format!("{PH}constant = 0.0\n"));
    assert_eq!(sadi("ph-check", &cfg, &out).status.code(), Some(1));

    let cfg = write_config(dir.path(), "[ph_check]\ngammas = [0.1]\nsamples = 20000\nprobes = []\n");
    let empty = sadi("ph_check", &cfg, &dir.path().join("empty"));
    assert_eq!(empty.status.code(), Some(2));
    assert!(!dir.path().join("empty").exists());
}

#[test]
fn invalid_config_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\ngamma = -0.1\ninitial = [1.0, 1.0]\nsteps = 5\n");
    let res = sadi("simulate", &cfg, &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&res.stderr);
    assert!(msg.contains("line 9"), "{msg}");
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\ngamma = 0.1\ninitial = [1.0, 1.0]\nsteps = 5\nseeds = [1]\n");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let res = sadi("simulate", &cfg, &blocker.join("out"));
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[simulate]\ngamma = 0.1\ninitial = [1.0, 1.0]\nsteps = 5\nseeds = [9]\n");
    let out = dir.path().join("from_env");
    let status = Command::new(BIN)
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .env("SADI_OUT_DIR", &out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(listing(&out), ["trajectory_9.csv"]);
}
