use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riss_reg::cohort::csv_header;
use riss_reg::manifest::{sha256_file, Manifest};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_riss-reg"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

// Rows of (id, age, albumin, ldh, b2m, label); other features left empty.
fn write_cohort(path: &Path, rows: &[(&str, f64, f64, f64, f64, u8)]) {
    let header = csv_header();
    let mut s = header.join(",");
    s.push('\n');
    for (id, age, alb, ldh, b2m, label) in rows {
        let mut cells = vec![
            id.to_string(),
            age.to_string(),
            alb.to_string(),
            ldh.to_string(),
            b2m.to_string(),
        ];
        cells.resize(header.len() - 1, String::new());
        cells.push(label.to_string());
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

fn generate(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("cohort_{n}_{seed}.csv"));
    let o = run(&[
        "generate",
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn generate_writes_requested_rows_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), 812, 7);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 813);
    assert_eq!(text.lines().next().unwrap(), csv_header().join(","));

    let b = dir.path().join("again.csv");
    let o = run(&["generate", "--n", "812", "--seed", "7", "--out", p(&b)]);
    assert!(o.status.success());
    assert_eq!(sha256_file(&a).unwrap(), sha256_file(&b).unwrap());

    let m = Manifest::load(dir.path().join("cohort_812_7.csv.manifest.txt")).unwrap();
    assert_eq!(m.get("output.sha256").unwrap(), sha256_file(&a).unwrap());
    assert!(dir.path().join("cohort_812_7.csv.spec.txt").exists());
}

#[test]
fn generate_from_spec_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.txt");
    let o = run(&["default-spec", "--out", p(&spec)]);
    assert!(o.status.success());
    let from_spec = dir.path().join("from_spec.csv");
    let o = run(&["generate", "--spec", p(&spec), "--n", "50", "--out", p(&from_spec)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_flags = generate(dir.path(), 50, 7);
    assert_eq!(sha256_file(&from_spec).unwrap(), sha256_file(&from_flags).unwrap());
}

#[test]
fn generate_zero_patients_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["generate", "--n", "0", "--out", p(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(
        run(&["pipeline", "--reg", "nope", "--cohort", "x.csv"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn stage_reports_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("four.csv");
    write_cohort(
        &cohort,
        &[
            ("a", 60.0, 40.0, 200.0, 2.0, 0),
            ("b", 60.0, 30.0, 300.0, 6.0, 1),
            ("c", 60.0, 40.0, 240.0, 2.0, 0),
            ("d", 75.0, 40.0, 240.0, 2.0, 1),
        ],
    );
    let out = dir.path().join("stages.csv");
    let o = run(&["stage", "--cohort", p(&cohort), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap(), "id,stage\na,1\nb,3\nc,2\nd,1\n");
}

#[test]
fn stage_on_empty_file_writes_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("empty.csv");
    fs::write(&cohort, "").unwrap();
    let out = dir.path().join("stages.csv");
    let o = run(&["stage", "--cohort", p(&cohort), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&out).unwrap().trim(), "id,stage");

    let header_only = dir.path().join("header.csv");
    write_cohort(&header_only, &[]);
    assert!(run(&["stage", "--cohort", p(&header_only), "--out", p(&out)])
        .status
        .success());
}

#[test]
fn stage_rejects_negative_ldh_naming_record() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("neg.csv");
    write_cohort(
        &cohort,
        &[("ok", 60.0, 40.0, 200.0, 2.0, 0), ("bad-17", 60.0, 40.0, -5.0, 2.0, 0)],
    );
    let o = run(&["stage", "--cohort", p(&cohort), "--out", p(&dir.path().join("s.csv"))]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("bad-17"), "{}", stderr(&o));
}

#[test]
fn missing_input_file_is_io_error() {
    let o = run(&["stage", "--cohort", "/nonexistent/c.csv", "--out", "/tmp/never.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn pipeline_rejects_cohort_without_b2m_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("no_b2m.csv");
    let header: Vec<&str> = csv_header().into_iter().filter(|c| *c != "b2m").collect();
    let mut row = vec!["p1", "60", "40", "200"];
    row.resize(header.len() - 1, "");
    row.push("0");
    fs::write(&cohort, format!("{}\n{}\n", header.join(","), row.join(","))).unwrap();
    let runs = dir.path().join("runs");
    let o = run(&[
        "pipeline",
        "--reg",
        "stage",
        "--cohort",
        p(&cohort),
        "--out-dir",
        p(&runs),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("b2m") && err.contains("load"), "{err}");

    let run_dir = fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    let m = Manifest::load(run_dir.join("manifest.txt")).unwrap();
    assert_eq!(m.get("status"), Some("failed"));
    assert_eq!(m.get("failed_stage"), Some("load"));
}

#[test]
fn pipeline_emits_outputs_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate(dir.path(), 240, 11);
    let runs = dir.path().join("runs");
    let args = [
        "pipeline",
        "--reg",
        "aa",
        "--cohort",
        p(&cohort),
        "--out-dir",
        p(&runs),
        "--alphas",
        "0:2:1",
        "--k",
        "2",
        "--hidden-grid",
        "4",
        "--shap-permutations",
        "50",
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    for f in [
        "aa_metr_test.csv",
        "aa_loss_test.csv",
        "shap_ranks_aa.csv",
        "baselines.csv",
        "id_flow.csv",
        "manifest.txt",
    ] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    let metr = fs::read_to_string(run_dir.join("aa_metr_test.csv")).unwrap();
    assert_eq!(metr.lines().next(), Some("alpha,accuracy,auc"));
    assert_eq!(metr.lines().count(), 4);
    let m = Manifest::load(run_dir.join("manifest.txt")).unwrap();
    assert_eq!(m.get("status"), Some("complete"));

    let o = run(&[
        "rerun",
        "--manifest",
        p(&run_dir.join("manifest.txt")),
        "--out-dir",
        p(&runs),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_dir(&runs).unwrap().count(), 2);
}
