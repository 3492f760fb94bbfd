//! Parameter sweeps: grids, seed sharing, output files and scripted fidelity.

use portnav::agents::ScriptedPursuit;
use portnav::env::EnvConfig;
use portnav::kinematics::VesselParams;
use portnav::plot::PlotFormat;
use portnav::sweep::{default_grid, read_csv, run_sweep, write_outputs, Grid, SweepParam, SweepSpec, SWEEP_COLUMNS};
use portnav::trainer::evaluate;
use portnav::world::GenConfig;

fn free_env() -> EnvConfig {
    EnvConfig {
        world: GenConfig::obstacle_free(),
        ..EnvConfig::default()
    }
}

#[test]
fn default_grids_hit_their_endpoints() {
    let nominal = VesselParams::default();
    let tr = default_grid(SweepParam::TurnRate, 11).values().unwrap();
    assert_eq!(tr.len(), 11);
    assert_eq!(tr[0], 0.1 * nominal.turn_rate);
    assert_eq!(tr[10], 10.0 * nominal.turn_rate);
    let ratio = tr[1] / tr[0];
    for w in tr.windows(2) {
        assert!((w[1] / w[0] - ratio).abs() < 1e-12);
    }
    assert!(tr
        .iter()
        .any(|v| (v - nominal.turn_rate).abs() < 1e-9 * nominal.turn_rate));

    let m = default_grid(SweepParam::Mass, 11).values().unwrap();
    assert_eq!(m[0], 0.25 * nominal.mass);
    assert_eq!(m[10], 4.0 * nominal.mass);
    assert!(m.iter().any(|v| (v - nominal.mass).abs() < 1e-9 * nominal.mass));
    for w in m.windows(2) {
        assert!(w[1] > w[0]);
    }
}

#[test]
fn default_grids_contain_the_exact_nominal_values() {
    let nominal = VesselParams::default();
    for count in [3, 5, 11, 21] {
        let tr = default_grid(SweepParam::TurnRate, count).values().unwrap();
        assert!(tr.contains(&nominal.turn_rate), "{count} points: {tr:?}");
    }
    for count in [11, 21] {
        let m = default_grid(SweepParam::Mass, count).values().unwrap();
        assert!(m.contains(&nominal.mass), "{count} points: {m:?}");
    }
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(Grid::Linear {
        lo: 1.0,
        hi: 2.0,
        count: 0
    }
    .values()
    .is_err());
    assert!(Grid::Log {
        lo: -1.0,
        hi: 2.0,
        count: 3
    }
    .values()
    .is_err());
    assert!(Grid::Explicit { values: vec![] }.values().is_err());
    let policy = ScriptedPursuit::from_env(&free_env());
    let spec = SweepSpec {
        param: SweepParam::Mass,
        grid: Grid::Explicit { values: vec![0.0] },
        episodes: 2,
        seed: 0,
    };
    assert!(run_sweep(&policy, &free_env(), &spec).is_err());
    assert!("draft".parse::<SweepParam>().is_err());
}

#[test]
fn nominal_point_matches_plain_evaluation() {
    let env = EnvConfig::default();
    let policy = ScriptedPursuit::from_env(&env);
    let spec = SweepSpec {
        param: SweepParam::TurnRate,
        grid: Grid::Explicit {
            values: vec![35.0, VesselParams::default().turn_rate, 140.0],
        },
        episodes: 12,
        seed: 500,
    };
    let curve = run_sweep(&policy, &env, &spec).unwrap();
    let nominal = curve.nominal().unwrap();
    let plain = evaluate(&policy, &env, 12, 500, None).unwrap();
    assert_eq!(nominal.mean_return, plain.mean_return);
    assert_eq!(nominal.success_rate, plain.success_rate);
    assert_eq!(nominal.n_episodes, 12);
}

#[test]
fn outputs_are_reproducible_and_round_trip() {
    let env = free_env();
    let policy = ScriptedPursuit::from_env(&env);
    let spec = SweepSpec {
        param: SweepParam::TurnRate,
        grid: default_grid(SweepParam::TurnRate, 11),
        episodes: 4,
        seed: 9,
    };
    let dir = tempfile::tempdir().unwrap();
    let a = write_outputs(
        &run_sweep(&policy, &env, &spec).unwrap(),
        dir.path(),
        "a",
        Some(PlotFormat::Svg),
    )
    .unwrap();
    let curve = run_sweep(&policy, &env, &spec).unwrap();
    let b = write_outputs(&curve, dir.path(), "b", Some(PlotFormat::Png)).unwrap();
    let bytes = std::fs::read(&a.csv).unwrap();
    assert_eq!(bytes, std::fs::read(&b.csv).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert_eq!(text.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
    assert_eq!(read_csv(&a.csv).unwrap(), curve.records);
    let svg = std::fs::read_to_string(a.plot.unwrap()).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(image::open(b.plot.unwrap()).is_ok());
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.meta).unwrap()).unwrap();
    assert_eq!(meta["env_hash"], env.hash());
}

#[test]
fn scripted_controller_handles_mass_changes_in_open_water() {
    let env = free_env();
    let policy = ScriptedPursuit::from_env(&env);
    let nominal = VesselParams::default().mass;
    let spec = SweepSpec {
        param: SweepParam::Mass,
        grid: Grid::Explicit {
            values: vec![0.5 * nominal, nominal, 2.0 * nominal, 4.0 * nominal],
        },
        episodes: 40,
        seed: 50_000,
    };
    let curve = run_sweep(&policy, &env, &spec).unwrap();
    assert_eq!(curve.records.len(), 4);
    for r in &curve.records[..2] {
        assert!(r.success_rate >= 0.9, "mass {}: success {}", r.value, r.success_rate);
    }
}
