//! Drives the `portnav` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn portnav(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_portnav"))
        .current_dir(dir)
        .env_remove("PORTNAV_OUT")
        .args(["--log-level", "warn"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small networks and an easy scene keep training runs to a few seconds.
const FAST: [&str; 10] = [
    "--set",
    "agent.hidden=[8, 8]",
    "--set",
    "agent.batch_size=16",
    "--set",
    "trainer.warmup_steps=100",
    "--set",
    "trainer.metrics_every=100",
    "--set",
    "world.static_count=[0, 0]",
];

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = portnav(dir.path(), &["--config", "absent.toml", "train", "--steps", "10"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("absent.toml"));
    assert_eq!(code(&portnav(dir.path(), &["train", "--bogus"])), 2);
    assert_eq!(code(&portnav(dir.path(), &["--set", "vessel.mass=-1", "audit"])), 2);
}

#[test]
fn zero_steps_writes_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = portnav(dir.path(), &["train", "--steps", "0", "--out", "run"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ckpts: Vec<_> = std::fs::read_dir(dir.path().join("run"))
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("ckpt_"))
        .collect();
    assert_eq!(ckpts, vec!["ckpt_000000000.json"]);
}

#[test]
fn single_worker_training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let mut args = vec!["train", "--steps", "400", "--workers", "1", "--seed", "7", "--out", out];
        args.extend(FAST);
        let o = portnav(dir.path(), &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("metrics.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(String::from_utf8(read("a")).unwrap().lines().count(), 5);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_portnav"))
        .current_dir(dir.path())
        .env("PORTNAV_OUT", "from_env")
        .args(["--log-level", "warn", "train", "--steps", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(dir.path().join("from_env/ckpt_000000000.json").is_file());
}

#[test]
fn sweep_default_turn_rate_grid_spans_two_decades() {
    let dir = tempfile::tempdir().unwrap();
    let o = portnav(
        dir.path(),
        &[
            "sweep",
            "--scripted",
            "--param",
            "turn_rate",
            "--episodes",
            "2",
            "--out",
            "s",
            "--plot",
            "svg",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s/sweep_turn_rate.csv")).unwrap();
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 11);
    assert_eq!(values[0], 7.0);
    assert_eq!(values[10], 700.0);
    assert!(dir.path().join("s/sweep_turn_rate.svg").is_file());
}

#[test]
fn single_point_sweep_matches_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--steps", "300", "--workers", "1", "--out", "t"];
    args.extend(FAST);
    assert_eq!(code(&portnav(dir.path(), &args)), 0);
    let ck = "t/ckpt_000000300.json";
    let o = portnav(
        dir.path(),
        &[
            "sweep",
            "--checkpoint",
            ck,
            "--param",
            "mass",
            "--grid",
            "175000",
            "--episodes",
            "3",
            "--seed",
            "40",
            "--out",
            "s",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("s/sweep_mass.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    let mean: f64 = rows[1].split(',').nth(2).unwrap().parse().unwrap();

    let o = portnav(
        dir.path(),
        &["evaluate", "--checkpoint", ck, "--episodes", "3", "--seed", "40"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["mean_return"].as_f64().unwrap(), mean);
}

#[test]
fn sweep_rejects_bad_requests() {
    let dir = tempfile::tempdir().unwrap();
    let o = portnav(dir.path(), &["sweep", "--scripted", "--param", "draft"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("draft"));
    let o = portnav(dir.path(), &["sweep", "--scripted", "--param", "mass", "--grid", "-5"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = portnav(
        dir.path(),
        &[
            "sweep",
            "--scripted",
            "--param",
            "mass",
            "--lo",
            "1",
            "--hi",
            "2",
            "--points",
            "0",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    let o = portnav(
        dir.path(),
        &["sweep", "--checkpoint", "missing.json", "--param", "mass"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn replay_checks_logs_from_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let o = portnav(
        dir.path(),
        &[
            "evaluate",
            "--scripted",
            "--episodes",
            "2",
            "--seed",
            "5",
            "--trace-dir",
            "tr",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = portnav(
        dir.path(),
        &[
            "replay",
            "--log",
            "tr/episode_5.jsonl",
            "--scene",
            "tr/scene_5.json",
            "--render",
            "r.svg",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
    assert!(std::fs::read_to_string(dir.path().join("r.svg"))
        .unwrap()
        .contains("<svg"));

    // Nudge one logged pose: the replay must name that step.
    let text = std::fs::read_to_string(dir.path().join("tr/episode_5.jsonl")).unwrap();
    let mut lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let target = lines
        .iter_mut()
        .find(|v| v["t"] == 4 && v.get("pose").is_some())
        .expect("episode has a fourth step");
    let x = target["pose"]["x"].as_f64().unwrap();
    target["pose"]["x"] = (x + 1e-6).into();
    let bad: String = lines.iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(dir.path().join("bad.jsonl"), bad).unwrap();
    let o = portnav(dir.path(), &["replay", "--log", "bad.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("step 4"), "{}", stderr(&o));

    let o = portnav(
        dir.path(),
        &["--set", "vessel.dt=0.25", "replay", "--log", "tr/episode_5.jsonl"],
    );
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("hash mismatch"), "{}", stderr(&o));
}

#[test]
fn audit_shows_override_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[vessel]\nmass = 200000.0\nturn_rate = 50.0\n",
    )
    .unwrap();
    let o = portnav(
        dir.path(),
        &[
            "--config",
            "c.toml",
            "--set",
            "vessel.mass=300000",
            "audit",
            "--scenes",
            "20",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    assert!(out.contains("mass = 300000"), "{out}");
    assert!(out.contains("turn_rate = 50"), "{out}");
    assert!(out.contains("0 problem(s)"));
}
