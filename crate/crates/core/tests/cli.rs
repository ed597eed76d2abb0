use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"{
    "game": {"kind": "bilinear", "matrix": [[1.0]], "initial": [[1.0], [1.0]]},
    "noise": {"sigma_add": 0.5},
    "players": [
        {"algorithm": "optda_plus", "schedule": {"kind": "adaptive", "epsilon": 0.25}},
        {"algorithm": "og_plus", "schedule": {"kind": "constant", "scale_hat": 0.5, "scale": 0.1}}
    ],
    "horizon": 200,
    "seeds": [2, 1],
    "checks": ["energy_identity", "dual_averaging"]
}"#;

fn gamelab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gamelab"))
        .args(args)
        .current_dir(dir)
        .env("GAMELAB_THREADS", "2")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_output_is_identical_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let a = gamelab(&["run", &cfg, "--output", "a"], dir.path());
    let b = gamelab(&["run", &cfg, "--output", "b"], dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let fa = std::fs::read(dir.path().join("a/run_000_seed_1.csv")).unwrap();
    let fb = std::fs::read(dir.path().join("b/run_000_seed_1.csv")).unwrap();
    assert_eq!(fa, fb);
    let text = String::from_utf8(fa).unwrap();
    assert!(text.starts_with("run,seed,t,player,x,regret_lin,dist_eq,grad_energy_cum,gamma_hat,gamma\n"));
    assert_eq!(text.lines().count(), 1 + 200 * 2);
}

#[test]
fn suite_writes_per_run_and_aggregate_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = gamelab(
        &["suite", &cfg, "--output", "s", "--horizon-override", "30"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["run_000_seed_1.csv", "run_001_seed_2.csv", "aggregate.csv"] {
        assert!(dir.path().join("s").join(f).is_file(), "missing {f}");
    }
    let agg = std::fs::read_to_string(dir.path().join("s/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 30 * 2);
    assert!(agg.lines().nth(1).unwrap().ends_with(",2"));

    // emitted files are never overwritten
    let again = gamelab(
        &["suite", &cfg, "--output", "s", "--horizon-override", "30"],
        dir.path(),
    );
    assert_eq!(again.status.code(), Some(2));
}

#[test]
fn seed_override_selects_one_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = gamelab(
        &[
            "suite",
            &cfg,
            "--output",
            "o",
            "--seed-override",
            "9",
            "--horizon-override",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let names: Vec<String> = std::fs::read_dir(dir.path().join("o"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2);
    assert!(names.contains(&"run_000_seed_9.csv".to_string()));
}

#[test]
fn check_reports_pass_and_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = gamelab(&["check", &cfg, "adagrad-lemma", "--output", "c"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("[PASS]  9 adagrad-lemma"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    assert_eq!(
        gamelab(&["check", &cfg, "unknown-id"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(gamelab(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(gamelab(&["run", "missing.json"], dir.path()).status.code(), Some(2));

    let bad = write_config(dir.path(), &CONFIG.replace("\"horizon\"", "\"colour\": 1, \"horizon\""));
    let out = gamelab(&["run", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));

    let bad = write_config(dir.path(), &CONFIG.replace("\"horizon\": 200", "\"horizon\": 0"));
    assert_eq!(gamelab(&["suite", &bad], dir.path()).status.code(), Some(2));
}

#[test]
fn diverging_run_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = CONFIG
        .replace(
            "\"scale_hat\": 0.5, \"scale\": 0.1",
            "\"scale_hat\": 1e200, \"scale\": 1e200",
        )
        .replace(
            "\"kind\": \"adaptive\", \"epsilon\": 0.25",
            "\"kind\": \"constant\", \"scale_hat\": 1e200, \"scale\": 1e200",
        );
    let cfg = write_config(dir.path(), &text);
    let out = gamelab(&["run", &cfg, "--output", "d"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}
