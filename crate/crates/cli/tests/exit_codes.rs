use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
solvers = ["pb_apg", "pb_apg_sc"]

[problem]
kind = "synthetic"
family = "lrp"
rows = 40
cols = 8
seed = 3

# rho = 1 is too optimistic for so few rows of logistic data
[penalty]
gamma = 1e4
epsilon = 1e-2
beta = 1.0
rho = 100.0

[apg]
max_iters = 200000
epsilon = 1e-12
step_tolerance = 1e-10
restart = true

[output]
timing = false
"#;

fn bilevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bilevel")).args(args).output().unwrap()
}

fn run_config(dir: &Path, text: &str, extra: &[&str]) -> Output {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    let out_dir = dir.join("out");
    let mut args = vec!["run", "--config", path.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    bilevel(&args)
}

fn code(output: &Output) -> i32 {
    output.status.code().unwrap()
}

#[test]
fn passing_run_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), SMALL, &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/summary.csv").is_file());
    assert!(dir.path().join("out/pb_apg.csv").is_file());
}

#[test]
fn missed_certificate_exits_one() {
    // gamma = 1 leaves the lower-level gap far above the planned target
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(dir.path(), SMALL, &["--gamma", "1", "--epsilon", "1e-6", "--beta", "2"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",false")));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = run_config(dir.path(), &SMALL.replace("beta = 1.0", "betta = 1.0"), &[]);
    assert_eq!(code(&typo), 2);
    assert!(String::from_utf8_lossy(&typo.stderr).contains("penalty"));
    let empty = run_config(dir.path(), &SMALL.replace(r#"["pb_apg", "pb_apg_sc"]"#, "[]"), &[]);
    assert_eq!(code(&empty), 2);
    assert!(String::from_utf8_lossy(&empty.stderr).contains("`solvers`"));
    assert_eq!(code(&run_config(dir.path(), SMALL, &["--solver", "newton"])), 2);
    assert_eq!(code(&run_config(dir.path(), SMALL, &["--epsilon", "-1"])), 2);
    assert_eq!(code(&bilevel(&["run", "--preset", "nope"])), 2);
    assert_eq!(code(&bilevel(&["run", "--config", "/nonexistent.toml"])), 2);
    assert_eq!(code(&bilevel(&["run"])), 2);
}

#[test]
fn solver_errors_exit_three() {
    // the affine-dual reference does not apply to a logistic lower level
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[reference]\nupper = \"dual\"\n");
    let out = run_config(dir.path(), &text, &[]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn preset_and_plan_commands() {
    let list = bilevel(&["preset"]);
    assert_eq!(code(&list), 0);
    assert!(String::from_utf8_lossy(&list.stdout).contains("lsrp-full"));
    let shown = bilevel(&["preset", "lrp-full"]);
    assert!(String::from_utf8_lossy(&shown.stdout).contains("step_tolerance"));
    let plan = bilevel(&["plan", "--epsilon", "1e-2", "--beta", "2", "--lf", "1"]);
    assert_eq!(code(&plan), 0);
    // gamma_star = rho l_F^2 / (4 eps) = 25 and gamma = 25 + 2 l_F^2/eps = 225
    let text = String::from_utf8_lossy(&plan.stdout);
    assert!(text.contains("2.5e1") && text.contains("2.25e2"), "{text}");
    assert_eq!(code(&bilevel(&["plan", "--epsilon", "1e-2", "--beta", "2", "--lf", "1", "--alpha", "0.5"])), 2);
}
