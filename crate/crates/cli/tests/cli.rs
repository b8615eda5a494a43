use std::path::Path;
use std::process::{Command, Output};

fn fsesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsesim")).args(args).output().expect("spawn fsesim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn schedule_prints_table() {
    let o = fsesim(&["schedule", "--ny", "32", "--nx", "32", "--etl", "4", "--esp-ms", "10", "--events", "8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("tr,echo,line,te_ms"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 32);
    // first echo of first TR acquires the center line
    assert_eq!(rows[0], "0,0,16,10");
}

#[test]
fn invalid_etl_fails() {
    let o = fsesim(&["schedule", "--ny", "30", "--etl", "4"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn unknown_config_key_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    std::fs::write(&cfg, "etl = 8\nbogus = 1\n").unwrap();
    let o = fsesim(&["schedule", "--config", path(&cfg)]);
    assert!(!o.status.success());
}

#[test]
fn phantom_then_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let maps = dir.path().join("maps");
    let o = fsesim(&["phantom", "--ny", "48", "--nx", "40", "--events", "3", "--seed", "3", "--out", path(&maps)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["pd.fseimg", "t2.fseimg", "t1.fseimg"] {
        assert_eq!(std::fs::metadata(maps.join(f)).unwrap().len(), 24 + 4 * 48 * 40);
    }
    let pd = maps.join("pd.fseimg");
    let o = fsesim(&["metrics", path(&pd), path(&pd)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "ssim=1 nrmse=0");
}

#[test]
fn simulate_writes_images() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = fsesim(&[
        "simulate", "--ny", "48", "--nx", "48", "--etl", "4", "--events", "3", "--seed", "5", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("pipeline=fse_aware ssim="));
    assert!(text.contains("pipeline=fse_agnostic ssim="));
    for f in ["clean.fseimg", "fse_aware.fseimg", "fse_agnostic.fseimg"] {
        assert!(out.join(f).is_file());
    }
    let again = fsesim(&["simulate", "--ny", "48", "--nx", "48", "--etl", "4", "--events", "3", "--seed", "5"]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn dataset_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    let o = fsesim(&[
        "dataset", "--ny", "32", "--nx", "32", "--etl", "4", "--events", "2", "--samples", "3", "--pipeline",
        "fse_aware", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), format!("wrote 3 samples, 3 records to {}", out.display()));
    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("status: complete"));
}

#[test]
fn match_recovers_phantom() {
    let o = fsesim(&["match", "--ny", "32", "--nx", "32", "--events", "2", "--seed", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let nums: Vec<usize> =
        text.trim().split(' ').map(|kv| kv.split('=').nth(1).unwrap().parse().unwrap()).collect();
    assert!(nums[0] > 0);
    assert_eq!(nums[0], nums[1]);
}
