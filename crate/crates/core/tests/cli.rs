use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_feedopt"));
    cmd.env_remove("FEEDOPT_OUT_DIR");
    cmd
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().expect("spawn feedopt");
    (status.code().unwrap_or(-1), String::from_utf8(stdout).unwrap(), String::from_utf8(stderr).unwrap())
}

fn rewrite(src: &str, from: &str, to: &str, dir: &Path) -> PathBuf {
    let text = std::fs::read_to_string(scenario(src)).unwrap();
    assert!(text.contains(from));
    let path = dir.join(src);
    std::fs::write(&path, text.replace(from, to)).unwrap();
    path
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn bundled_scenarios_pass_check() {
    for name in ["scalar_gradient.toml", "scalar_nesterov.toml", "ctm.toml", "random_two_mode.toml"] {
        let (code, out, err) = run(bin().arg("check").arg(scenario(name)));
        assert_eq!(code, 0, "{name}: {out}{err}");
        assert!(!out.contains("FAIL"), "{name}: {out}");
    }
}

#[test]
fn single_mode_dwell_is_not_applicable() {
    let (code, out, _) = run(bin().arg("check").arg(scenario("scalar_gradient.toml")));
    assert_eq!(code, 0);
    let line = out.lines().find(|l| l.contains("dwell time")).unwrap();
    assert!(line.starts_with("N/A"), "{line}");
    assert!(out.contains("mode1.eps_bar = 5e-1"));
}

#[test]
fn oversized_epsilon_fails_with_mode_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = rewrite("scalar_gradient.toml", "epsilon = [0.25]", "epsilon = [1.0]", dir.path());
    let (code, out, _) = run(bin().arg("check").arg(&path));
    assert_eq!(code, 1);
    assert!(out.lines().any(|l| l.starts_with("FAIL mode 1 epsilon")), "{out}");

    let path = rewrite("random_two_mode.toml", "epsilon_fraction = 0.5", "epsilon_fraction = 2.0", dir.path());
    let (code, out, _) = run(bin().arg("check").arg(&path));
    assert_eq!(code, 1);
    for mode in [1, 2] {
        assert!(out.lines().any(|l| l.starts_with(&format!("FAIL mode {mode} epsilon"))), "{out}");
    }
}

#[test]
fn parse_errors_are_positioned() {
    let dir = tempfile::tempdir().unwrap();
    let path = rewrite("scalar_gradient.toml", "step = 0.025", "step = \"fast\"", dir.path());
    let (code, out, err) = run(bin().arg("check").arg(&path));
    assert_eq!(code, 2, "{out}");
    assert!(err.starts_with("error: ") && err.contains("line "), "{err}");

    let path = rewrite("scalar_gradient.toml", "A = [[-1.0]]", "A = [[-1.0, 0.0]]", dir.path());
    let (code, _, err) = run(bin().arg("check").arg(&path));
    assert_eq!(code, 2, "{err}");

    let (code, _, _) = run(bin().arg("check").arg(dir.path().join("missing.toml")));
    assert_eq!(code, 2);
}

#[test]
fn simulate_writes_deterministic_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(bin().arg("simulate").arg(scenario("random_two_mode.toml")).env("FEEDOPT_OUT_DIR", dir.path()));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("plant switches"));
    let first = std::fs::read(dir.path().join("random_two_mode.csv")).unwrap();
    let again = dir.path().join("again.csv");
    let (code, _, _) = run(bin().args(["-q", "simulate"]).arg(scenario("random_two_mode.toml")).arg("--out").arg(&again));
    assert_eq!(code, 0);
    assert_eq!(first, std::fs::read(&again).unwrap());
}

#[test]
fn equilibrium_start_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    // Scalar plant with R = Qy = 1/2, w = 1: u* = -1/2, x* = 1/2.
    let path = rewrite("scalar_gradient.toml", "x0 = [0.0]\nu0 = [0.0]", "x0 = [0.5]\nu0 = [-0.5]", dir.path());
    let csv = dir.path().join("eq.csv");
    let (code, _, err) = run(bin().arg("simulate").arg(&path).arg("--out").arg(&csv));
    assert_eq!(code, 0, "{err}");
    let errs = csv_column(&csv, "err_track");
    assert!(errs.iter().all(|e| *e <= 1e-6), "{:e}", errs.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn ctm_simulation_visits_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ctm.csv");
    let (code, _, err) = run(bin().arg("simulate").arg(scenario("ctm.toml")).arg("--out").arg(&csv));
    assert_eq!(code, 0, "{err}");
    let sigma = csv_column(&csv, "sigma");
    assert!(sigma.contains(&1.0) && sigma.contains(&2.0));
    assert!(sigma.iter().all(|s| *s == 1.0 || *s == 2.0));
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(bin().args(["experiment", "ctm", "--out-dir"]).arg(dir.path()));
    assert_eq!(code, 0, "{out}{err}");
    for file in ["controlled.csv", "uncontrolled.csv", "summary.toml"] {
        assert!(dir.path().join("ctm").join(file).is_file(), "{file}");
    }
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let (code, _, err) = run(bin().args(["experiment", "nope"]));
    assert_eq!(code, 2);
    assert!(err.contains("possible values"));
}
