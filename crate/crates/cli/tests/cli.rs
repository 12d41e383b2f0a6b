use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const RIDGE: &str = r#"
[problem]
loss = "squared"
regularizer = { kind = "l2", lambda = 0.05 }
data = { source = "synth_ridge", n = 30, d = 8, seed = 2 }

[solver]
methods = ["sdapd", "dapd"]
seeds = [1, 2]

[budget]
epochs = 4
"#;

fn dapd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dapd"))
        .args(args)
        .env_remove("DAPD_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn run_writes_traces_and_flags_override_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), RIDGE);
    let out = tmp.path().join("traces");
    let o = dapd(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "7",
        "--epochs",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["dapd.csv", "manifest.txt", "sdapd_seed7.csv"]);
    let csv = fs::read_to_string(out.join("sdapd_seed7.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "header plus one record per epoch");
    assert!(stdout(&o).contains("sdapd_seed7"));
}

#[test]
fn set_reaches_nested_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), RIDGE);
    let out = tmp.path().join("t");
    let o = dapd(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--set",
        "problem.regularizer.lambda=0.2",
        "--set",
        "solver.overrides.dapd.tau=0.5",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(
        manifest.contains("config.problem.regularizer.lambda = 2e-1"),
        "{manifest}"
    );
    assert!(
        manifest.contains("config.solver.overrides.dapd.tau = 5e-1"),
        "{manifest}"
    );
}

#[test]
fn divergence_gives_exit_status_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = RIDGE
        .replace(r#"["sdapd", "dapd"]"#, r#"["apgm"]"#)
        .replace("epochs = 4", "epochs = 2000");
    let cfg = write_config(tmp.path(), &body);
    let out = tmp.path().join("t");
    let o = dapd(&[
        "run",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--set",
        "solver.overrides.apgm.step=1e4",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("DIVERGED"));
    assert!(out.join("manifest.txt").exists());
}

#[test]
fn bad_configurations_give_exit_status_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &RIDGE.replace("epochs = 4", "epochs = 4\nbogus = 1"));
    let o = dapd(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let cfg = write_config(tmp.path(), RIDGE);
    let o = dapd(&["run", &cfg, "--methods", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dapd(&["run", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_reports_each_method() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &RIDGE.replace(r#"["sdapd", "dapd"]"#, r#"["dapd", "sdapd", "pdhg"]"#),
    );
    let o = dapd(&["validate", &cfg]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("regime StronglyConvexSmooth"), "{text}");
    assert!(text.contains("feasible"));
    assert!(text.contains("sdapd: eta="));
    assert!(text.contains("pdhg: no schedule conditions"));

    // without epsilon an l1 problem has no strong convexity, so SDAPD has no steps
    let o = dapd(&[
        "validate",
        &cfg,
        "--set",
        "problem.regularizer={ kind = \"l1\", lambda = 0.1 }",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("sdapd: infeasible"));
    assert!(stdout(&o).contains("regime SmoothOnly"));
    let o = dapd(&[
        "validate",
        &cfg,
        "--set",
        "problem.regularizer={ kind = \"l1\", lambda = 0.1 }",
        "--epsilon",
        "1e-3",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn reference_is_cached_and_then_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), RIDGE);
    let cache = tmp.path().join("refs").join("ridge.txt");
    let first = dapd(&["reference", &cfg, "--cache", cache.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert!(stdout(&first).contains("method = linear_solve"));
    assert!(cache.exists());
    let second = dapd(&["reference", &cfg, "--cache", cache.to_str().unwrap()]);
    assert!(stdout(&second).contains("cached in"));
    let p = |o: &Output| {
        stdout(o)
            .lines()
            .next()
            .unwrap()
            .split_whitespace()
            .nth(2)
            .unwrap()
            .to_string()
    };
    assert_eq!(p(&first), p(&second));

    // run picks up the same cache
    let out = tmp.path().join("t");
    let o = dapd(&[
        "run",
        &cfg,
        "--cache",
        cache.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("reference.source = cache"), "{manifest}");
}

#[test]
fn stats_reads_libsvm_relative_to_the_data_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("toy.svm"), "+1 1:3 2:4\n-1 3:1\n+1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dapd"))
        .args(["stats", "--libsvm", "toy.svm"])
        .env("DAPD_DATA_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    for line in [
        "n = 3",
        "d = 3",
        "nnz = 3",
        "R_bar = 5e0",
        "R = 5e0",
        "labels = +1: 2, -1: 1",
    ] {
        assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
    }

    // --data-dir works the same way from a config
    let cfg = write_config(
        tmp.path(),
        "[problem]\nloss = \"hinge\"\nregularizer = { kind = \"l2\", lambda = 0.1 }\ndata = { source = \"libsvm\", path = \"toy.svm\" }\n[solver]\nmethods = [\"dapd\"]\n",
    );
    let o = dapd(&["stats", &cfg, "--data-dir", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("density = 3.333"));
}
