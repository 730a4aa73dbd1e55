use std::path::Path;
use std::process::{Command, Output};

fn mpmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpmd")).args(args).env_remove("MPMD_SEED").output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn odd_m_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mpmd(&["gen", "--m", "7", "--out", p(&dir.path().join("x.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("m must be even"));
    assert!(!dir.path().join("x.json").exists());
}

#[test]
fn unknown_metric_and_algorithm_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    assert_eq!(mpmd(&["gen", "--metric", "torus", "--m", "4", "--out", p(&inst)]).status.code(), Some(2));
    assert!(mpmd(&["gen", "--m", "4", "--out", p(&inst)]).status.success());
    assert_eq!(mpmd(&["run", "--algo", "magic", "--in", p(&inst)]).status.code(), Some(2));
    assert_eq!(mpmd(&["run", "--algo", "online", "--in", p(&dir.path().join("missing.json"))]).status.code(), Some(2));
}

#[test]
fn seed_env_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert!(mpmd(&["gen", "--m", "10", "--seed", "42", "--out", p(&a)]).status.success());
    let status = Command::new(env!("CARGO_BIN_EXE_mpmd"))
        .args(["gen", "--m", "10", "--seed", "1", "--out", p(&b)])
        .env("MPMD_SEED", "42")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn run_then_audit_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    assert!(mpmd(&["gen", "--metric", "line", "--m", "12", "--seed", "5", "--out", p(&inst)]).status.success());
    for algo in ["online", "greedy-online", "offline-opt", "offline-warmup"] {
        let res = dir.path().join(format!("{algo}.json"));
        let out = mpmd(&["run", "--algo", algo, "--in", p(&inst), "--out", p(&res), "--audit"]);
        assert!(out.status.success(), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
        let audit = mpmd(&["audit", "--instance", p(&inst), "--result", p(&res)]);
        assert!(audit.status.success(), "{algo}: {}", String::from_utf8_lossy(&audit.stderr));
        assert!(String::from_utf8_lossy(&audit.stdout).contains("audit passed"));
    }
}

#[test]
fn tampered_result_fails_audit() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    let res = dir.path().join("r.json");
    assert!(mpmd(&["gen", "--m", "8", "--seed", "2", "--out", p(&inst)]).status.success());
    assert!(mpmd(&["run", "--algo", "offline-opt", "--in", p(&inst), "--out", p(&res)]).status.success());
    let mut json: serde_json::Value = serde_json::from_slice(&std::fs::read(&res).unwrap()).unwrap();
    json["pairs"].as_array_mut().unwrap().pop();
    std::fs::write(&res, serde_json::to_vec(&json).unwrap()).unwrap();
    let out = mpmd(&["audit", "--instance", p(&inst), "--result", p(&res)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_result_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("i.json");
    assert!(mpmd(&["gen", "--metric", "two-point", "--m", "6", "--out", p(&inst)]).status.success());
    let out = mpmd(&["run", "--algo", "online", "--in", p(&inst)]);
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["pairs"].as_array().unwrap().len(), 3);
}

#[test]
fn bench_csv_shape() {
    let out =
        mpmd(&["bench", "--metric", "uniform", "--m-range", "2..=6", "--seeds", "2", "--algos", "online,offline-opt"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    // 3 values of m, 2 seeds, 2 algorithms
    assert_eq!(lines.len(), 1 + 12);
    assert!(lines[1..].iter().all(|l| l.starts_with("uniform-m")));
}

#[test]
fn bench_rejects_bad_range() {
    assert_eq!(mpmd(&["bench", "--m-range", "9..7"]).status.code(), Some(2));
}

#[test]
fn m_range_fuzz_seeds_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/m_range");
    for entry in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let ms = mpmd_cli::parse_m_range(&text).unwrap();
        assert!(ms.iter().all(|m| m % 2 == 0));
    }
}
