//! End-to-end tests of the `htq` binary: command surface, exit codes,
//! deterministic output, metadata round-trips.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn htq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_htq"))
}

fn run(args: &[&str]) -> Output {
    htq().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("htq-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn assemble_emits_csv_matrix_of_expected_shape() {
    // N = 4 linear elements on (0, 1): M = 5
    let out = run(&[
        "assemble",
        "--kind",
        "M",
        "--mesh",
        "uniform:4",
        "--T",
        "1",
        "--degrees",
        "uniform:1",
        "--K",
        "12",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let rows: Vec<&str> = text.trim().lines().collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row.split(',').count(), 5);
        for v in row.split(',') {
            v.parse::<f64>().expect("numeric CSV");
        }
    }
}

#[test]
fn rules_dump_log_sixteen() {
    let out = run(&["rules", "dump", "--kind", "log", "--K", "16"]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.trim().lines();
    assert_eq!(lines.next(), Some("node,weight"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert_eq!(rows.len(), 16);
    // 18 significant digits, ascending nodes in (0,1), positive weights
    assert!(text.lines().nth(1).unwrap().split(',').all(|v| {
        let mantissa = v.split('e').next().unwrap().replace(['-', '.'], "");
        mantissa.len() == 18
    }));
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0);
    }
    assert!(rows.iter().all(|&(x, w)| x > 0.0 && x < 1.0 && w > 0.0));
    let wsum: f64 = rows.iter().map(|&(_, w)| w).sum();
    assert!((wsum - 1.0).abs() < 1e-14);
}

#[test]
fn quad_study_outputs_rows_plot_and_reruns_identically() {
    let dir = tempdir("study");
    let csv_path = dir.join("study.csv");
    let args = [
        "quad-study",
        "--mesh",
        "uniform:2",
        "--T",
        "1",
        "--degrees",
        "uniform:1",
        "--k-min",
        "2",
        "--k-max",
        "6",
        "--out",
        csv_path.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = std::fs::read(&csv_path).unwrap();
    let text = String::from_utf8_lossy(&first);
    assert_eq!(text.lines().count(), 6); // header + 5 rows
    assert!(text.starts_with("K,errM,errA,errB"));
    assert!(dir.join("study.json").exists());
    assert!(dir.join("study.py").exists());

    // byte-identical on re-execution
    assert!(run(&args).status.success());
    assert_eq!(first, std::fs::read(&csv_path).unwrap());

    // and byte-identical when repeated from the metadata sidecar
    let meta = dir.join("study.json");
    let out = run(&["rerun", meta.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(first, std::fs::read(&csv_path).unwrap());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn quad_study_default_has_nineteen_rows_and_length_one_ranges_work() {
    let dir = tempdir("study-default");
    let csv = dir.join("default.csv");
    // defaults: the benchmark configuration, K = 2..=20
    assert!(run(&["quad-study", "--out", csv.to_str().unwrap()])
        .status
        .success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 20); // header + 19 rows
    // errors decrease monotonically once K >= 4 and above the precision floor
    let errs: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for w in errs.windows(2).skip(2) {
        if w[0] > 1e-12 {
            assert!(w[1] < w[0], "errM not decreasing: {} -> {}", w[0], w[1]);
        }
    }
    // a K-range of length one yields a single data row
    let single = dir.join("single.csv");
    assert!(run(&[
        "quad-study",
        "--mesh",
        "uniform:2",
        "--T",
        "1",
        "--degrees",
        "uniform:1",
        "--k-min",
        "7",
        "--k-max",
        "7",
        "--out",
        single.to_str().unwrap(),
    ])
    .status
    .success());
    assert_eq!(std::fs::read_to_string(&single).unwrap().lines().count(), 2);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn thread_cap_does_not_change_bytes() {
    let dir = tempdir("threads");
    let single = dir.join("single.csv");
    let multi = dir.join("multi.csv");
    for (path, threads) in [(&single, "1"), (&multi, "8")] {
        let status = htq()
            .env("HTQ_THREADS", threads)
            .args([
                "assemble",
                "--kind",
                "B",
                "--mesh",
                "dyadic:4",
                "--T",
                "2",
                "--degrees",
                "uniform:2",
                "--out",
                path.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        std::fs::read(&single).unwrap(),
        std::fs::read(&multi).unwrap()
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn oracle_sidecar_carries_certificate() {
    let dir = tempdir("oracle");
    let csv = dir.join("b.csv");
    assert!(run(&[
        "oracle",
        "--kind",
        "B",
        "--mesh",
        "uniform:3",
        "--T",
        "1",
        "--degrees",
        "uniform:2",
        "--out",
        csv.to_str().unwrap(),
    ])
    .status
    .success());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("b.json")).unwrap()).unwrap();
    let cert = &meta["certificate"];
    assert_eq!(cert["satisfied"], serde_json::Value::Bool(true));
    assert!(cert["selfconsistency"].as_f64().unwrap() <= 1e-10);
    assert_eq!(meta["config"]["command"], "oracle");
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn solve_hp_study_has_expected_rows() {
    let dir = tempdir("solve");
    let csv = dir.join("hp.csv");
    assert!(run(&[
        "solve",
        "--kind",
        "parabolic",
        "--f",
        "t34",
        "--study",
        "hp",
        "--sigma",
        "0.17",
        "--Nmax",
        "10",
        "--T",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 10); // header + N = 2..10
    assert!(text.starts_with("N,M,L2,H1semi,bracket"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn exit_codes_and_partial_file_hygiene() {
    // usage problems exit with 2
    let out = run(&["assemble", "--kind", "Q", "--mesh", "uniform:2", "--degrees", "uniform:1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["nonsense"]);
    assert_eq!(out.status.code(), Some(2));

    // unwritable output path: exit 2 and no partial outputs anywhere
    let bogus = Path::new("/dev/null/cannot/exist/out.csv");
    let out = run(&[
        "assemble",
        "--kind",
        "M",
        "--mesh",
        "uniform:2",
        "--T",
        "1",
        "--degrees",
        "uniform:1",
        "--out",
        bogus.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!bogus.exists());

    // computational failure: oracle tolerance that cannot be certified
    let out = run(&[
        "oracle",
        "--kind",
        "B",
        "--mesh",
        "uniform:2",
        "--T",
        "1",
        "--degrees",
        "uniform:2",
        "--KF",
        "64",
        "--no-accelerate",
        "--tol",
        "1e-14",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn solve_single_mesh_reports_solution() {
    let out = run(&[
        "solve",
        "--kind",
        "hyperbolic",
        "--mu",
        "0",
        "--f",
        "one",
        "--mesh",
        "uniform:3",
        "--T",
        "1",
        "--degrees",
        "uniform:2",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert!(text.starts_with("index,coefficient"));
    assert_eq!(text.trim().lines().count(), 7); // header + M-1 = 6 coefficients
}
