use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nvhp::parse_config;

fn nvhp(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nvhp"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("NVHP_THREADS", n),
        None => cmd.env_remove("NVHP_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn shipped_configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn same_config_and_seed_gives_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ens.toml",
        "experiment = \"ensemble\"\nseed = 4\n[ensemble]\nduration = 2e4\n[ensemble.lattice]\nn_sites = 3000\nseed = 2\n",
    );
    let cfg = cfg.to_str().unwrap();
    // The output directory is echoed into the CSV header, so keep it fixed.
    let out = tmp.path().join("run");
    let mut outputs = Vec::new();
    for threads in [None, Some("1"), Some("3")] {
        let o = nvhp(&["ensemble", "--config", cfg, "--out", out.to_str().unwrap()], threads);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("ensemble.csv")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let o = nvhp(
        &["ensemble", "--config", cfg, "--seed", "5", "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let reseeded = fs::read_to_string(out.join("ensemble.csv")).unwrap();
    let first = String::from_utf8(outputs[0].clone()).unwrap();
    let body = |s: &str| s.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    assert_ne!(body(&reseeded), body(&first));
}

#[test]
fn sidecar_records_replay_metadata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", "experiment = \"totals\"\nseed = 11\n");
    let out = tmp.path().join("o");
    let o = nvhp(
        &["totals", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("totals.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 11);
    assert_eq!(meta["experiment"], "totals");
    assert!(meta["wall_clock_s"].as_f64().unwrap() >= 0.0);
    let replay = parse_config(meta["config"].as_str().unwrap()).unwrap();
    assert_eq!(replay.seed, 11);

    let csv = fs::read_to_string(out.join("totals.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "#   seed = 11"));
    assert!(!csv.contains("wall_clock"));
}

#[test]
fn config_errors_exit_2_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        "experiment = \"cycle\"\ntypo = 1\n[constants]\nb = -1\n",
    );
    let o = nvhp(&["cycle", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let last = String::from_utf8_lossy(&o.stderr).lines().last().unwrap().to_string();
    let err: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(err["error"], "config");
    let fields: Vec<&str> = err["details"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["field"].as_str().unwrap())
        .collect();
    assert!(fields.contains(&"typo") && fields.contains(&"constants.b"), "{fields:?}");

    let o = nvhp(&["levels", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let o = nvhp(&["fig4", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mismatched_subcommand_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "t.toml", "experiment = \"totals\"\n");
    let o = nvhp(&["levels", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "p.toml",
        "experiment = \"prep\"\n[prep]\nspan = 100.0\n",
    );
    let out = tmp.path().join("o");
    let o = nvhp(
        &["prep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
    let last = String::from_utf8_lossy(&o.stderr).lines().last().unwrap().to_string();
    let err: serde_json::Value = serde_json::from_str(&last).unwrap();
    assert_eq!(err["error"], "numeric");
}

#[test]
fn shipped_configs_parse() {
    let configs = shipped_configs();
    assert_eq!(configs.len(), 10);
    let mut seen = std::collections::BTreeSet::new();
    for p in configs {
        let c = parse_config(&fs::read_to_string(&p).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        seen.insert(c.experiment.name());
    }
    assert_eq!(seen.len(), 10);
}

#[test]
fn levels_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = shipped_configs()
        .into_iter()
        .find(|p| p.ends_with("levels.toml"))
        .unwrap();
    let out = tmp.path().join("o");
    let o = nvhp(
        &["levels", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        None,
    );
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("levels.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "delta_mhz,e1,e2,e3,e4");
    assert_eq!(body.len(), 242);
    assert!(body[1].starts_with("-6,"));
}
