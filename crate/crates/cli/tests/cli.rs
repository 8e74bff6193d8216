use std::path::Path;
use std::process::{Command, Output};

fn smd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smd")).args(args).current_dir(cwd).output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn run_writes_artifacts_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("pr.cfg");
    std::fs::write(&cfg, "bench = phase-retrieval\nn = 5\nm = 15\nn_grid = 50, 100, 200\ntrials = 10\ncheck_slope = false\n").unwrap();
    for out in ["a", "b"] {
        let o = smd(&["run", "pr.cfg", "--seed", "5", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    }
    let a = std::fs::read(dir.path().join("a/rates.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/rates.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("N,trials,mean_delta,stderr,theorem_rhs,bound_ok\n"));
    assert!(dir.path().join("a/trials.csv").is_file());
    assert!(dir.path().join("a/report.json").is_file());
}

#[test]
fn flags_override_file_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.cfg"), "n = 4\nm = 12\nn_grid = 40\ntrials = 50\n").unwrap();
    let o = smd(&["run", "c.cfg", "--trials", "3", "--set", "n_grid=20,30", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let rates = std::fs::read_to_string(dir.path().join("o/rates.csv")).unwrap();
    let rows: Vec<&str> = rates.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("3")));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "n = 4\n# fine\ngeometry = hyperbolic\n").unwrap();
    let o = smd(&["run", "bad.cfg"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("line 3"), "{}", text(&o));
}

#[test]
fn failing_slope_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // an impossible band forces the slope check to fail
    let o = smd(
        &[
            "sweep", "--bench", "phase-retrieval", "--n", "4", "--m", "12", "--geometry", "euclidean",
            "--n-grid", "30,100,300", "--trials", "5", "--seed", "1",
            "--set", "slope_min=5", "--set", "slope_max=6", "--out", "s",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    assert!(dir.path().join("s/rates.csv").is_file());
}

#[test]
fn verify_suite_and_mutation() {
    let dir = tempfile::tempdir().unwrap();
    let o = smd(&["verify", "three-point"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("PASS"));
    let o = smd(&["verify", "rwc", "--mutate-rho", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
    let o = smd(&["verify", "nonsense"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn prox_reads_points() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pts.csv"), "0.2,0.3,0.5\n0.1,0.1,0.8\n").unwrap();
    let o = smd(
        &["prox", "--bench", "entropy-toy", "--geometry", "entropy", "--n", "3", "--point-file", "pts.csv", "--lambda", "0.1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("point,lambda,envelope"));
    assert_eq!(lines.len(), 3);

    std::fs::write(dir.path().join("short.csv"), "0.5,0.5\n").unwrap();
    let o = smd(
        &["prox", "--bench", "entropy-toy", "--geometry", "entropy", "--n", "3", "--point-file", "short.csv", "--lambda", "0.1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for name in ["phase-retrieval.cfg", "entropy-toy.json"] {
        let path = configs.join(name);
        let o = smd(
            &[
                "run", path.to_str().unwrap(), "--trials", "3", "--set", "n_grid=20,40", "--set", "check_slope=false",
                "--out", name,
            ],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{name}: {}", text(&o));
    }
}
