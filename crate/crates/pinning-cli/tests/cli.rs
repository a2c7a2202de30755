//! End-to-end tests of the `pinning` binary: exit codes, artifact layout,
//! worker-count independence, the overwrite guard, and table caching.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pinning"));
    cmd.env_remove("PINNING_WORKERS");
    cmd
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const GAP_CONFIG: &str = r#"
name = "gaps"
master_seed = 42

[law]
alpha = 2.0

[law.ell]
kind = "constant"
c = 1.0

[disorder]
kind = "gaussian"
sigma = 1.0
seed = 7

[experiment]
kind = "big_jump_gaps"
n = [30, 45]
target_fraction = 0.35
replicas = 2
samples_per_replica = 25
"#;

#[test]
fn validate_accepts_good_and_rejects_bad() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    write(&good, GAP_CONFIG);
    let out = bin().args(["validate", "--config"]).arg(&good).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("ok: gaps (big_jump_gaps)"), "{}", stdout(&out));

    let bad = dir.path().join("bad.toml");
    write(&bad, &GAP_CONFIG.replace("target_fraction = 0.35", "target_fraction = 1.2"));
    let out = bin().args(["validate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("(0, 1)"), "{}", stderr(&out));

    let out = bin()
        .args(["validate", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_is_worker_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    write(&config, GAP_CONFIG);

    let out1 = dir.path().join("w1");
    let out2 = dir.path().join("w2");
    let run1 = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out1)
        .env("PINNING_WORKERS", "1")
        .output()
        .unwrap();
    assert!(run1.status.success(), "{}", stderr(&run1));
    let run2 = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out2)
        .args(["--workers", "3"])
        .output()
        .unwrap();
    assert!(run2.status.success(), "{}", stderr(&run2));

    let a = std::fs::read(out1.join("gaps.csv")).unwrap();
    let b = std::fs::read(out2.join("gaps.csv")).unwrap();
    assert_eq!(a, b, "artifact bytes must not depend on the worker count");

    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# config_hash="), "{text}");
    assert!(text.contains("# master_seed=42"));
    // one row per (n, replica)
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
}

#[test]
fn overwrite_guard_refuses_mismatched_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    write(&config, GAP_CONFIG);
    let out_dir = dir.path().join("out");

    let first = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert!(first.status.success(), "{}", stderr(&first));

    // identical config: overwrite allowed, bytes unchanged
    let again = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert!(again.status.success(), "{}", stderr(&again));

    // different config, same name: refused without --force
    write(&config, &GAP_CONFIG.replace("master_seed = 42", "master_seed = 43"));
    let refused = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert_eq!(refused.status.code(), Some(1), "{}", stderr(&refused));
    assert!(stderr(&refused).contains("--force"), "{}", stderr(&refused));

    let forced = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .args(["--workers", "1", "--force"])
        .output()
        .unwrap();
    assert!(forced.status.success(), "{}", stderr(&forced));
    let text = std::fs::read_to_string(out_dir.join("gaps.csv")).unwrap();
    assert!(text.contains("# master_seed=43"));
}

#[test]
fn cache_dir_round_trips_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    write(&config, GAP_CONFIG);
    let cache = dir.path().join("cache");

    let cold = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("cold"))
        .arg("--cache-dir")
        .arg(&cache)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert!(cold.status.success(), "{}", stderr(&cold));
    let cached_files = std::fs::read_dir(&cache).unwrap().count();
    assert!(cached_files >= 2, "expected cached tables, found {cached_files}");

    let warm = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("warm"))
        .arg("--cache-dir")
        .arg(&cache)
        .args(["--workers", "1"])
        .output()
        .unwrap();
    assert!(warm.status.success(), "{}", stderr(&warm));
    let a = std::fs::read(dir.path().join("cold/gaps.csv")).unwrap();
    let b = std::fs::read(dir.path().join("warm/gaps.csv")).unwrap();
    assert_eq!(a, b, "cache hits must not change results");
}

#[test]
fn pure_curves_and_dp_dump_write_expected_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let law = dir.path().join("law.toml");
    write(&law, "alpha = 2.0\n\n[ell]\nkind = \"constant\"\nc = 1.0\n");
    let grid = dir.path().join("grid.toml");
    write(&grid, "h = [0.5, 1.0]\nr = [0.3, 0.9]\n");
    let out_dir = dir.path().join("out");

    let out = bin()
        .args(["pure-curves", "--law"])
        .arg(&law)
        .arg("--grid")
        .arg(&grid)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let curves = std::fs::read_to_string(out_dir.join("pure_curves.csv")).unwrap();
    assert_eq!(curves.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2);
    // frozen pure-model value: free energy at h = 0.5 for this law
    assert!(curves.contains("4.16314525900e-1"), "{curves}");
    let rates = std::fs::read_to_string(out_dir.join("pure_rates.csv")).unwrap();
    assert_eq!(rates.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);

    let dump_cfg = dir.path().join("dump.toml");
    write(
        &dump_cfg,
        r#"
name = "d"
n = 24
h = 0.5

[law]
alpha = 2.0

[law.ell]
kind = "constant"
c = 1.0

[disorder]
kind = "uniform"
b = 0.5
seed = 3
"#,
    );
    let out = bin()
        .args(["dp-dump", "--config"])
        .arg(&dump_cfg)
        .arg("--out-dir")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let dump = std::fs::read_to_string(out_dir.join("d.csv")).unwrap();
    for quantity in ["log_z_free", "log_w_suffix", "contact_marginal", "ln_contact_law"] {
        let rows = dump.lines().filter(|l| l.starts_with(&format!("{quantity},"))).count();
        assert_eq!(rows, 25, "{quantity} should have n+1 rows");
    }
    // endpoints are contacts by definition
    assert!(dump.contains("contact_marginal,0,1.00000000000e0"));
    assert!(dump.contains("contact_marginal,24,1.00000000000e0"));
}

#[test]
fn bad_workers_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    write(&config, GAP_CONFIG);
    let out = bin()
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .env("PINNING_WORKERS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("PINNING_WORKERS"), "{}", stderr(&out));
}
