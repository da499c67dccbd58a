use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gffpin(args: &[&str], workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gffpin"));
    cmd.args(args);
    match workers {
        Some(w) => cmd.env("GFFPIN_WORKERS", w),
        None => cmd.env_remove("GFFPIN_WORKERS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PSTAR: &str = r#"
experiment = "pstar-sweep"
beta = 1.0
h = { spacing = "log", from = 1e-4, to = 1e-1, points = 13 }
"#;

#[test]
fn pstar_sweep_is_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.toml", &format!("output = \"a\"\n{PSTAR}"));
    let b = write_config(tmp.path(), "b.toml", &format!("output = \"b\"\n{PSTAR}"));
    assert!(gffpin(&["run", &a], Some("2")).status.success());
    assert!(gffpin(&["run", &b], Some("1")).status.success());
    let csv_a = fs::read(tmp.path().join("a/pstar.csv")).unwrap();
    let csv_b = fs::read(tmp.path().join("b/pstar.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let text = String::from_utf8(csv_a).unwrap();
    assert!(text.starts_with("beta,h,pStar,pStar/(2chi*h),value\n"));
    assert_eq!(text.lines().count(), 14);

    // the manifest alone reproduces the run
    let manifest = tmp.path().join("a/manifest.json").to_string_lossy().into_owned();
    assert!(gffpin(&["run", &manifest], None).status.success());
    assert_eq!(fs::read(tmp.path().join("a/pstar.csv")).unwrap(), csv_b);
}

#[test]
fn config_errors_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "bad.toml", &format!("output = \"x\"\nsweeps2 = 3\n{PSTAR}"));
    let o = gffpin(&["run", &bad], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweeps2"), "{}", stderr(&o));

    let big = write_config(
        tmp.path(),
        "big.toml",
        "experiment = \"rho-vs-h\"\noutput = \"y\"\nn = 100\nh = 0.1\nsweeps = 100\n",
    );
    let o = gffpin(&["run", &big], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("reduce N"), "{}", stderr(&o));
    assert!(!tmp.path().join("y").exists());
}

#[test]
fn output_directories_are_not_shared() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_config(tmp.path(), "a.toml", &format!("output = \"same\"\n{PSTAR}"));
    let b = write_config(
        tmp.path(),
        "b.toml",
        &format!("output = \"same\"\n{}", PSTAR.replace("beta = 1.0", "beta = 0.5")),
    );
    assert!(gffpin(&["run", &a], None).status.success());
    let o = gffpin(&["run", &b], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("different configuration"));
}

#[test]
fn delocalized_anchor_warning_reaches_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "fe.toml",
        r#"
experiment = "free-energy"
output = "fe"
n = 6
beta = 0.0
h = [0.0, 0.05, 0.1]
replicas = 1
sweeps = 300
"#,
    );
    assert!(gffpin(&["run", &cfg], None).status.success());
    let manifest = fs::read_to_string(tmp.path().join("fe/manifest.json")).unwrap();
    assert!(manifest.contains("anchor invalid"), "{manifest}");

    let o = gffpin(&["tables", &tmp.path().to_string_lossy()], None);
    assert!(o.status.success());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("== free-energy") && out.contains("warning: beta=0"), "{out}");
}

#[test]
fn verify_runs_a_single_check() {
    let o = gffpin(&["verify", "c1"], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.starts_with("PASS C1 green-convergence"), "{out}");
    assert!(out.contains("1/1 checks passed"));
    assert_eq!(gffpin(&["verify", "nonsense"], None).status.code(), Some(2));
}

#[test]
fn worker_count_must_be_positive() {
    let o = gffpin(&["verify", "c1"], Some("0"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GFFPIN_WORKERS"));
}
