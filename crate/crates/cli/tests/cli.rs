use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iab-ta"))
}

#[test]
fn run_writes_outputs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--preset", "load-aware", "--seed", "4", "--duration-slots", "2000", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("seed 4: slots=2000"), "{stdout}");
    assert!(stdout.contains("checks=ok"));
    for f in ["throughput.csv", "buffers.csv", "connection_time.csv", "run_meta.toml"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let meta = fs::read_to_string(dir.path().join("run_meta.toml")).unwrap();
    assert!(meta.contains("policy = \"load_aware\""));
    assert!(meta.contains("seeds = [4]"));
}

#[test]
fn sweep_writes_per_seed_and_aggregate_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--seeds", "1..2", "--duration-slots", "800", "--snapshot-cadence", "80", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    for sub in ["seed_1", "seed_2", "aggregate"] {
        assert!(dir.path().join(sub).join("throughput.csv").exists(), "{sub}");
    }
    let buffers = fs::read_to_string(dir.path().join("seed_1/buffers.csv")).unwrap();
    // 10 snapshots of 6 series plus the header
    assert_eq!(buffers.lines().count(), 1 + 10 * 6);
}

#[test]
fn compare_with_itself_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let run = bin()
        .args(["run", "--duration-slots", "1200", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(run.status.success());
    let out = bin().arg("compare").arg(dir.path()).arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().filter(|l| l.ends_with('%')).collect();
    assert_eq!(rows.len(), 12, "{stdout}");
    assert!(rows.iter().all(|l| l.ends_with(" 0.00%")), "{stdout}");
}

#[test]
fn invalid_config_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[mac]\nn_rbs = 0\n[metrics]\nwindow_slots = 0\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("n_rbs") && err.contains("window_slots"), "{err}");
}

#[test]
fn compare_missing_dir_fails() {
    let out = bin().args(["compare", "/nonexistent/a", "/nonexistent/b"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn presets_differ_only_in_policy() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../presets");
    let a = fs::read_to_string(format!("{root}/standard.toml")).unwrap();
    let b = fs::read_to_string(format!("{root}/load_aware.toml")).unwrap();
    let diff: Vec<(&str, &str)> = a.lines().zip(b.lines()).filter(|(x, y)| x != y).collect();
    assert_eq!(a.lines().count(), b.lines().count());
    assert_eq!(diff, vec![("policy = \"standard\"", "policy = \"load_aware\"")]);
}
