//! End-to-end tests of the `fdi` binary: exit codes, output files and
//! reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fdi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdi"))
}

fn run(args: &[&str]) -> Output {
    fdi().args(args).output().expect("fdi runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(p: &Path) -> String {
    p.display().to_string()
}

fn write_tsv(dir: &Path, name: &str, content: &str) -> PathBuf {
    let file = dir.join(name);
    fs::write(&file, content).unwrap();
    file
}

/// A small weighted dataset with distinct profiles.
const EDGES: &str = "alice\tnews.site\t12\n\
alice\tmail.site\t30\n\
alice\twiki.site\t2\n\
bob\tmail.site\t5\n\
bob\tgames.site\t22\n\
carol\tnews.site\t4\n\
carol\tshop.site\t9\n\
dave\tgames.site\t3\n\
dave\twiki.site\t8\n\
dave\tshop.site\t1\n";

fn ingest_fixture(dir: &Path) -> PathBuf {
    let tsv = write_tsv(dir, "edges.tsv", EDGES);
    let archive = dir.join("data");
    let out = run(&[
        "ingest",
        "--format",
        "tsv",
        "--out",
        &path(&archive),
        &path(&tsv),
    ]);
    assert_success(&out);
    archive
}

#[test]
fn ingest_is_deterministic_and_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = write_tsv(dir.path(), "edges.tsv", EDGES);
    let out1 = dir.path().join("a1");
    let out2 = dir.path().join("a2");
    for out in [&out1, &out2] {
        let result = run(&["ingest", "--format", "tsv", "--out", &path(out), &path(&tsv)]);
        assert_success(&result);
        let text = String::from_utf8_lossy(&result.stdout).to_string();
        assert!(text.contains("4 users"), "stdout: {text}");
        assert!(text.contains("5 features"), "stdout: {text}");
        assert!(text.contains("10 relationships"), "stdout: {text}");
    }
    for name in ["features.tsv", "users.tsv", "profiles.tsv", "meta.json"] {
        assert_eq!(
            fs::read(out1.join(name)).unwrap(),
            fs::read(out2.join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
}

#[test]
fn ingest_strict_rejects_malformed_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let tsv = write_tsv(dir.path(), "bad.tsv", "a\tx\t1\nbroken\n");
    let out = run(&[
        "ingest",
        "--format",
        "tsv",
        "--strict",
        "--out",
        &path(&dir.path().join("data")),
        &path(&tsv),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // without --strict the bad line is skipped
    let out = run(&[
        "ingest",
        "--format",
        "tsv",
        "--out",
        &path(&dir.path().join("data")),
        &path(&tsv),
    ]);
    assert_success(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed"));
}

#[test]
fn ingest_snap_fixture() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("0.featnames"), "0 color red\n1 color blue\n").unwrap();
    fs::write(dir.path().join("0.feat"), "7 0 1\n8 1 1\n").unwrap();
    fs::write(dir.path().join("0.egofeat"), "1 0\n").unwrap();
    let archive = dir.path().join("snapdata");
    let out = run(&[
        "ingest",
        "--format",
        "snap",
        "--out",
        &path(&archive),
        &path(dir.path()),
    ]);
    assert_success(&out);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    // users: 7, 8 and the ego "0"; features: both names; edges: 1+2+1
    assert!(text.contains("3 users"), "stdout: {text}");
    assert!(text.contains("2 features"), "stdout: {text}");
    assert!(text.contains("4 relationships"), "stdout: {text}");
}

#[test]
fn ingest_http_extracts_domain_and_path_features() {
    let dir = tempfile::tempdir().unwrap();
    let log = write_tsv(
        dir.path(),
        "requests.tsv",
        "u1\twww.google.com/search?q=ndss+2016&ie=utf-8&oe=utf-8\nu2\thost.com/\n",
    );
    let archive = dir.path().join("httpdata");
    let out = run(&[
        "ingest",
        "--format",
        "http",
        "--out",
        &path(&archive),
        &path(&log),
    ]);
    assert_success(&out);
    let features = fs::read_to_string(archive.join("features.tsv")).unwrap();
    assert!(features.contains("D:www.google.com"));
    assert!(features.contains("P:utf-8"));
    assert!(features.contains("D:host.com"));
}

#[test]
fn stats_histograms_sum_to_counts() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let out_dir = dir.path().join("stats");
    let out = run(&["stats", "--data", &path(&archive), "--out", &path(&out_dir)]);
    assert_success(&out);
    let csv = fs::read_to_string(out_dir.join("stats.csv")).unwrap();
    let mut user_total = 0usize;
    let mut feature_total = 0usize;
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let count: usize = cells[2].parse().unwrap();
        match cells[0] {
            "user" => user_total += count,
            "feature" => feature_total += count,
            other => panic!("unexpected kind {other}"),
        }
    }
    assert_eq!(user_total, 4);
    assert_eq!(feature_total, 5);
}

#[test]
fn quantify_rejects_p_half_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let out = run(&[
        "quantify",
        "--train",
        &path(&archive),
        "--target",
        &path(&archive),
        "--model",
        "binary",
        "--p",
        "0.5",
        "--k",
        "1",
        "--delta",
        "0.5",
        "--out",
        &path(&dir.path().join("q")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("p must differ from 1/2"),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn quantify_delta_zero_is_inferable() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let out_dir = dir.path().join("q");
    let out = run(&[
        "quantify",
        "--train",
        &path(&archive),
        "--target",
        &path(&archive),
        "--model",
        "binary",
        "--p",
        "0.8",
        "--k",
        "2",
        "--delta",
        "0",
        "--out",
        &path(&out_dir),
    ]);
    assert_success(&out);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["inferable"], serde_json::Value::Bool(true));
    assert_eq!(summary["required"], 0);
    let verdicts = fs::read_to_string(out_dir.join("verdicts.csv")).unwrap();
    assert!(verdicts.starts_with("user,gamma_min,threshold,pass"));
    assert_eq!(verdicts.lines().count(), 5); // header + 4 overlap users
}

#[test]
fn quantify_distance_and_distribution_run() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    for (model, header) in [
        ("distance", "user,mu_min,zeta_max,threshold,pass"),
        ("distribution", "user,mu,h_minus_l,threshold,pass"),
    ] {
        let out_dir = dir.path().join(format!("q-{model}"));
        let out = run(&[
            "quantify",
            "--train",
            &path(&archive),
            "--target",
            &path(&archive),
            "--model",
            model,
            "--p",
            "0.8",
            "--k",
            "2",
            "--delta",
            "0.25",
            "--trials",
            "50",
            "--out",
            &path(&out_dir),
        ]);
        assert_success(&out);
        let verdicts = fs::read_to_string(out_dir.join("verdicts.csv")).unwrap();
        assert!(verdicts.starts_with(header), "got: {verdicts}");
    }
}

#[test]
fn sweep_single_cell_and_manifest_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let out1 = dir.path().join("s1");
    let out = run(&[
        "sweep",
        "--data",
        &path(&archive),
        "--model",
        "binary",
        "--p",
        "0.8",
        "--k",
        "2",
        "--reps",
        "1",
        "--seed",
        "123",
        "--out",
        &path(&out1),
    ]);
    assert_success(&out);
    let csv1 = fs::read_to_string(out1.join("sweep.csv")).unwrap();
    assert_eq!(csv1.lines().count(), 2); // header + one cell

    // rerun from the manifest alone
    let out2 = dir.path().join("s2");
    let out = run(&[
        "sweep",
        "--data",
        &path(&archive),
        "--config",
        &path(&out1.join("manifest.json")),
        "--out",
        &path(&out2),
    ]);
    assert_success(&out);
    let csv2 = fs::read_to_string(out2.join("sweep.csv")).unwrap();
    assert_eq!(csv1, csv2, "manifest rerun must reproduce the CSV exactly");
}

#[test]
fn sweep_from_kv_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let config = write_tsv(
        dir.path(),
        "sweep.conf",
        "p = 0.9\nk = 1,2\nmodel = binary\nreps = 2\nseed = 7\n",
    );
    let out_dir = dir.path().join("s");
    let out = run(&[
        "sweep",
        "--data",
        &path(&archive),
        "--config",
        &path(&config),
        "--reps",
        "1", // flag wins over the file's 2
        "--out",
        &path(&out_dir),
    ]);
    assert_success(&out);
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3); // header + two K cells
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["reps"], 1);
    assert_eq!(manifest["config"]["seed"], 7);
}

#[test]
fn sweep_delta_monotone_in_k() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let out_dir = dir.path().join("mono");
    let out = run(&[
        "sweep",
        "--data",
        &path(&archive),
        "--model",
        "distance",
        "--p",
        "0.7",
        "--k",
        "1,2,3,4",
        "--reps",
        "4",
        "--seed",
        "99",
        "--out",
        &path(&out_dir),
    ]);
    assert_success(&out);
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let deltas: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    for pair in deltas.windows(2) {
        assert!(pair[1] >= pair[0], "delta not monotone in K: {deltas:?}");
    }
}

#[test]
fn detect_flags_planted_intruder() {
    let dir = tempfile::tempdir().unwrap();
    let train_tsv = write_tsv(dir.path(), "train.tsv", EDGES);
    // target: returning users plus one user far from everyone
    let target_tsv = write_tsv(
        dir.path(),
        "target.tsv",
        &format!("{EDGES}intruder\tnews.site\t500\nintruder\tgames.site\t400\n"),
    );
    let train = dir.path().join("train");
    let target = dir.path().join("target");
    for (tsv, archive, role) in [(&train_tsv, &train, "training"), (&target_tsv, &target, "target")] {
        let out = run(&[
            "ingest", "--format", "tsv", "--role", role, "--out", &path(archive), &path(tsv),
        ]);
        assert_success(&out);
    }
    let out_dir = dir.path().join("det");
    let out = run(&[
        "detect",
        "--train",
        &path(&train),
        "--target",
        &path(&target),
        "--mode",
        "distance",
        "--xi",
        "0.5",
        "--p",
        "0.8",
        "--trials",
        "100",
        "--out",
        &path(&out_dir),
    ]);
    assert_success(&out);
    let csv = fs::read_to_string(out_dir.join("detections.csv")).unwrap();
    let verdict_of = |user: &str| -> String {
        csv.lines()
            .find(|l| l.starts_with(&format!("{user},")))
            .unwrap_or_else(|| panic!("no row for {user} in {csv}"))
            .split(',')
            .nth(4)
            .unwrap()
            .to_string()
    };
    assert_eq!(verdict_of("intruder"), "new");
    assert_eq!(verdict_of("alice"), "known");
}

#[test]
fn detect_empty_training_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty_tsv = write_tsv(dir.path(), "empty.tsv", "ghost\tx\t0\n");
    let train = dir.path().join("train");
    let out = run(&[
        "ingest", "--format", "tsv", "--out", &path(&train), &path(&empty_tsv),
    ]);
    assert_success(&out);
    let target = ingest_fixture(dir.path());
    let out = run(&[
        "detect",
        "--train",
        &path(&train),
        "--target",
        &path(&target),
        "--mode",
        "distance",
        "--out",
        &path(&dir.path().join("det")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_archive_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "stats",
        "--data",
        &path(&dir.path().join("nope")),
        "--out",
        &path(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_env_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let archive = ingest_fixture(dir.path());
    let out_flag = dir.path().join("sf");
    let out_env = dir.path().join("se");
    let result = run(&[
        "sweep", "--data", &path(&archive), "--model", "binary", "--p", "0.6", "--k", "2",
        "--reps", "2", "--seed", "31337", "--out", &path(&out_flag),
    ]);
    assert_success(&result);
    let result = fdi()
        .env("SEED", "31337")
        .args([
            "sweep", "--data", &path(&archive), "--model", "binary", "--p", "0.6", "--k", "2",
            "--reps", "2", "--out", &path(&out_env),
        ])
        .output()
        .unwrap();
    assert_success(&result);
    assert_eq!(
        fs::read(out_flag.join("sweep.csv")).unwrap(),
        fs::read(out_env.join("sweep.csv")).unwrap()
    );
}
