use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

fn lab(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(args)
        .current_dir(dir)
        .env("LAB_THREADS", "2")
        .output()
        .expect("spawn lab")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn data_rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn matching_smoke_is_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "m.cfg",
        "experiment = matching\nreps = 1\nn = 64\nd = 2\n",
    );
    let t = Instant::now();
    let out = lab(&["run", &cfg, "--out", "res"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(t.elapsed().as_secs_f64() < 5.0);
    let csv = fs::read_to_string(dir.path().join("res/matching.csv")).unwrap();
    assert_eq!(data_rows(&csv).len(), 1);
    assert!(csv.lines().next().unwrap().starts_with("# ganlab"));
    assert!(csv.contains("# experiment = matching"));
}

#[test]
fn csv_is_reproducible_and_independent_of_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "m.cfg",
        "experiment = matching\nreps = 3\nn = 64,32,128\nd = 3\nseed = 11\n",
    );
    assert!(lab(&["run", &cfg, "--out", "a"], dir.path())
        .status
        .success());
    assert!(lab(&["run", &cfg, "--out", "b", "--svg"], dir.path())
        .status
        .success());
    let a = fs::read(dir.path().join("a/matching.csv")).unwrap();
    let b = fs::read(dir.path().join("b/matching.csv")).unwrap();
    assert_eq!(a, b);
    assert!(!dir.path().join("a/matching.svg").exists());
    let svg = fs::read_to_string(dir.path().join("b/matching.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    assert!(
        lab(&["run", &cfg, "--out", "c", "--seed", "12"], dir.path())
            .status
            .success()
    );
    let c = fs::read(dir.path().join("c/matching.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn duality_table_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "d.cfg",
        "experiment = duality-table\nk_diag = 2,1\n",
    );
    assert!(lab(&["run", &cfg, "--out", "."], dir.path())
        .status
        .success());
    let csv = fs::read_to_string(dir.path().join("duality-table.csv")).unwrap();
    assert_eq!(data_rows(&csv), vec![vec![1.0, 0.0, 1.0]]);
}

#[test]
fn naive_dynamics_a22_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "n.cfg", "experiment = dynamics-naive\n");
    assert!(lab(&["run", &cfg, "--out", "."], dir.path())
        .status
        .success());
    let csv = fs::read_to_string(dir.path().join("dynamics-naive.csv")).unwrap();
    let header: Vec<&str> = csv
        .lines()
        .find(|l| !l.starts_with('#'))
        .unwrap()
        .split(',')
        .collect();
    let j = header.iter().position(|&h| h == "a22").unwrap();
    let a22: Vec<f64> = data_rows(&csv).iter().map(|r| r[j]).collect();
    assert!(a22.len() > 100);
    assert!(a22.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_cfg(dir.path(), "bad.cfg", "experiment = matching\nfooo = 1\n");
    let out = lab(&["run", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fooo") && err.contains("line 2"), "{err}");

    let out = lab(&["run", "does-not-exist.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let fails = write_cfg(
        dir.path(),
        "f.cfg",
        "experiment = matching\ndistance = assignment-w2\nn = 5000\nd = 2\nreps = 1\n",
    );
    let out = lab(&["run", &fails, "--out", "."], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n = 5000, d = 2"));
}

#[test]
fn list_names_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["list"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in [
        "matching",
        "naive-vs-quadratic",
        "robust",
        "cascade",
        "dynamics-naive",
        "dynamics-shared",
        "duality-table",
        "sqrt2-ratio",
        "nn-rate",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name}");
    }
}
