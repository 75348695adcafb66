use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use z2sync::io::{load_instance, read_records, Manifest};

const BIN: &str = env!("CARGO_BIN_EXE_z2sync");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("Z2SYNC_P")
        .output()
        .expect("binary runs")
}

const SMOKE: &[&str] = &["--d", "2", "--n", "20", "--scale", "6", "--kappa", "1", "--eta", "0.5"];

fn with(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = SMOKE.to_vec();
    v.extend_from_slice(extra);
    v
}

#[test]
fn smoke_sync_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = run(&with(&["--p", "0.05", "sync"]), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(start.elapsed() < Duration::from_secs(60));
    let rows = read_records(&dir.path().join("sync.csv")).unwrap();
    let risk = rows.iter().find(|r| r.quantity == "risk").unwrap();
    assert!((0.0..=1.0).contains(&risk.value));
    assert!(rows.iter().all(|r| r.params.contains("seed=1")));
    let m = Manifest::read(&dir.path().join("sync.manifest.json")).unwrap();
    assert_eq!(m.command, "sync");
    assert_eq!(m.params, rows[0].params);
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4", "1"]) {
        let out = run(&with(&["--p", "0.12", "--threads", threads, "sync"]), dir.path());
        assert!(out.status.success());
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    for f in ["sync.csv", "sync.manifest.json"] {
        assert_eq!(read(&dirs[0], f), read(&dirs[1], f), "{f}");
        assert_eq!(read(&dirs[0], f), read(&dirs[2], f), "{f}");
    }
}

#[test]
fn single_point_sweep_matches_sync() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(&with(&["--p", "0.1", "sync"]), a.path()).status.success());
    assert!(run(&with(&["sweep", "--over", "p", "--grid", "0.1"]), b.path()).status.success());
    let sync = std::fs::read(a.path().join("sync.csv")).unwrap();
    let sweep = std::fs::read(b.path().join("sweep_p.csv")).unwrap();
    assert_eq!(sync, sweep);
}

#[test]
fn invalid_parameter_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&with(&["--p", "0.6", "sync"]), dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["parameter"], "p");
    assert_eq!(err["error"]["kind"], "invalid_parameter");
    let out = run(&with(&["--p", "0.05", "sweep", "--over", "p"]), dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn env_overrides_are_beaten_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(with(&["--p", "0.1", "sync"]))
        .arg("--out-dir")
        .arg(dir.path())
        .env("Z2SYNC_P", "0.3")
        .env("Z2SYNC_SEED", "7")
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = read_records(&dir.path().join("sync.csv")).unwrap();
    assert!(rows[0].params.contains("p=0.1;") && rows[0].params.contains("seed=7"));
}

#[test]
fn gen_writes_a_loadable_instance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--n", "6", "--seed", "4", "gen"], dir.path());
    assert!(out.status.success());
    let inst = load_instance(&dir.path().join("instance.bin")).unwrap();
    assert_eq!(inst.num_vertices(), 169);
    assert_eq!(inst.params.seed, 4);
    let rows = read_records(&dir.path().join("gen.csv")).unwrap();
    assert_eq!(rows[0].value, 169.0);
}

#[test]
fn interrupted_sweep_leaves_complete_rows() {
    let dir = tempfile::tempdir().unwrap();
    let reference = tempfile::tempdir().unwrap();
    let base = ["--n", "30", "--kappa", "1", "--sweeps", "2000", "--burn-in", "500"];
    let single: Vec<&str> = base.iter().copied().chain(["--p", "0.1", "sync"]).collect();
    assert!(run(&single, reference.path()).status.success());
    let per_point = read_records(&reference.path().join("sync.csv")).unwrap().len();

    let grid = (0..40).map(|i| format!("{:.3}", 0.05 + 0.005 * i as f64)).collect::<Vec<_>>().join(",");
    let mut child = Command::new(BIN)
        .args(base)
        .args(["sweep", "--over", "p", "--grid", &grid, "--out-dir"])
        .arg(dir.path())
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let csv = dir.path().join("sweep_p.csv");
    let deadline = Instant::now() + Duration::from_secs(120);
    loop {
        let lines = std::fs::read_to_string(&csv).map(|s| s.lines().count()).unwrap_or(0);
        if lines > per_point || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    child.kill().unwrap();
    let status = child.wait().unwrap();
    assert!(!status.success(), "sweep finished before it was interrupted");
    let rows = read_records(&csv).unwrap();
    assert!(!rows.is_empty());
    assert_eq!(rows.len() % per_point, 0);
    assert!(rows.len() < 40 * per_point);
    assert!(!dir.path().join("sweep.manifest.json").exists());
}
