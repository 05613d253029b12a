use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn nmqj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nmqj")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn jump_then_compare(name: &str, dir: &Path) -> Output {
    let (j, i): (PathBuf, PathBuf) = (dir.join("jump.csv"), dir.join("rk4.csv"));
    let out = nmqj(&["jump", &config(name), "--out", path_str(&j)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = nmqj(&["integrate", &config(name), "--out", path_str(&i)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    nmqj(&["compare", path_str(&j), path_str(&i)])
}

#[test]
fn shipped_two_band_config_agrees_with_integrator() {
    let dir = tempfile::tempdir().unwrap();
    let out = jump_then_compare("two_band_fig2_superposition.cfg", dir.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}");
    assert!(report.contains("coherence_re: pass"));
}

#[test]
fn shipped_spin_bath_config_agrees_with_integrator() {
    let dir = tempfile::tempdir().unwrap();
    let out = jump_then_compare("spin_bath_fig4.cfg", dir.path());
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{report}");
    assert!(report.contains("excited_population: pass"));
}

#[test]
fn validate_reports_ok() {
    let out = nmqj(&["validate", &config("two_band_fig2.cfg")]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

#[test]
fn validate_flags_non_hermitian_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(
        &cfg,
        r#"
[model]
kind = "explicit"
dimensions = { components = 1, hilbert_dim = 2 }
hamiltonians = [{ component = 0, entries = [[0, 1, 1.0, 0.0]] }]

[initial]
components = [[[1.0, 0.0], [0.0, 0.0]]]

[simulation]
dt = 1e-3
t_max = 1.0
n_traj = 1
"#,
    )
    .unwrap();
    let out = nmqj(&["validate", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("not Hermitian"));
}

#[test]
fn oversized_step_exits_with_two() {
    let out = nmqj(&["jump", &config("two_band_fig2.cfg"), "--dt", "0.6", "--traj", "4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("smaller --dt"));
}

#[test]
fn missing_config_is_an_error() {
    let out = nmqj(&["jump", "/nonexistent/run.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |file: &str| {
        let p = dir.path().join(file);
        let out = nmqj(&["jump", &config("two_band_fig3.cfg"), "--traj", "50", "--seed", "9", "--out", path_str(&p)]);
        assert!(out.status.success());
        std::fs::read(p).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("t,excited_population,excited_population_stderr,"));
    assert!(text.ends_with('\n'));
    assert_eq!(text.lines().count(), 102);
}

#[test]
fn stdout_output_and_compare_failure() {
    let out = nmqj(&["integrate", &config("two_band_fig2.cfg"), "--tmax", "0.1"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    std::fs::write(&a, &out.stdout).unwrap();
    let shifted = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(k, line)| {
            if k == 0 {
                line.to_string()
            } else {
                let mut cols: Vec<String> = line.split(',').map(str::to_string).collect();
                let v: f64 = cols[1].parse().unwrap();
                cols[1] = format!("{:.16e}", v + 0.2);
                cols.join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    let b = dir.path().join("b.csv");
    std::fs::write(&b, shifted).unwrap();
    assert!(nmqj(&["compare", path_str(&a), path_str(&a)]).status.success());
    let out = nmqj(&["compare", path_str(&a), path_str(&b)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("excited_population: FAIL"));
}
