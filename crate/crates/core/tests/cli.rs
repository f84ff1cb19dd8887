use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onebit-feas"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const FIG3: &str = r#"
experiment = "fig3"
n = 4
k = 4
m = 24
m1 = [3]
trials = 2
seed = 9
out_dir = "unused"
log_stride = 5

[[solvers]]
algorithm = "skm"
max_iters = 20
"#;

#[test]
fn run_succeeds_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", FIG3);
    let out = dir.path().join("out");
    let run = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2", "--seed", "5"])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(0));
    assert!(String::from_utf8(run.stdout).unwrap().contains("final mean NMSE"));
    assert!(out.join("fig3_skm.csv").exists());
    let written = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(written.contains("seed = 5"));
    assert!(written.contains("workers = 2"));
}

#[test]
fn validate_prints_canonical_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", FIG3);
    let out = bin().args(["validate", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("experiment = \"fig3\""));
    assert!(text.contains("record_wall_time = false"));
}

#[test]
fn invalid_config_exits_2_and_lists_every_violation() {
    let dir = tempfile::tempdir().unwrap();
    let bad = FIG3.replace("trials = 2", "trials = 0").replace("max_iters = 20", "max_iters = 20\nlambda = 2.5");
    let cfg = write(dir.path(), "bad.toml", &bad);
    for sub in ["validate", "run"] {
        let out = bin().args([sub, cfg.to_str().unwrap()]).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{sub}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert!(err.contains("trials"), "{err}");
        assert!(err.contains("lambda"), "{err}");
    }
}

#[test]
fn malformed_toml_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "experiment = [");
    let out = bin().args(["validate", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_override_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", FIG3);
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--workers", "0", "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missed_table1_target_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.toml",
        r#"
experiment = "table1"
n = 8
k = 2
m = 40
m1 = [2]
kind = "rank_one"
trials = 1
seed = 1
out_dir = "unused"
log_stride = 5
target_nmse = 1e-12

[[solvers]]
algorithm = "block_skm"
k_prime = 4
max_iters = 20
"#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let json = fs::read_to_string(out_dir.join("table1.json")).unwrap();
    assert!(json.contains("\"converged\": false"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let out = bin().args(["validate", p.to_str().unwrap()]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", p.display());
        seen += 1;
    }
    assert!(seen >= 8);
}
