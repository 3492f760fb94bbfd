//! Browser bindings for the static demo page in `www/`.
//!
//! Each export takes plain numbers and returns a JSON string, so the page
//! needs no bundler or generated type definitions. The JSON builders are
//! ordinary Rust functions and are tested natively.

use portnav::agents::ScriptedPursuit;
use portnav::env::{Env, EnvConfig};
use portnav::kinematics::VesselState;
use portnav::sensor::scan;
use portnav::sweep::{default_grid, run_sweep, SweepParam, SweepSpec};
use portnav::trainer::run_episode;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn to_js(r: portnav::Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

fn pose_json(p: &VesselState) -> Value {
    json!({ "x": p.x, "y": p.y, "heading": p.heading, "speed": p.speed })
}

/// The generated scene for `seed` plus a range scan from the spawn pose.
pub fn scene_value(seed: u64) -> portnav::Result<Value> {
    let cfg = EnvConfig::default();
    let mut env = Env::new(cfg.clone())?;
    env.reset(seed)?;
    let scene = env.scene();
    let pose = scene.spawn_pose;
    let ranges = scan(scene, &pose, &cfg.sensor).ranges;
    let rays: Vec<Value> = cfg
        .sensor
        .ray_offsets()
        .iter()
        .zip(&ranges)
        .map(|(off, r)| json!({ "bearing": pose.heading + off, "range": r }))
        .collect();
    Ok(json!({
        "scene": serde_json::to_value(scene)?,
        "pose": pose_json(&pose),
        "max_range": cfg.sensor.max_range,
        "rays": rays,
    }))
}

/// One scripted episode on `seed` with mass and turn rate scaled from
/// nominal. The controller is tuned for the nominal vessel, so the track
/// shows how it copes with the changed dynamics.
pub fn simulate_value(seed: u64, mass_scale: f64, turn_rate_scale: f64) -> portnav::Result<Value> {
    let cfg = EnvConfig::default();
    let policy = ScriptedPursuit::from_env(&cfg);
    let params = cfg
        .vessel
        .with_mass(cfg.vessel.mass * mass_scale)
        .with_turn_rate(cfg.vessel.turn_rate * turn_rate_scale);
    params.validate()?;
    let mut env = Env::new(cfg)?;
    env.set_recording(true);
    let result = run_episode(&mut env, &policy, seed, Some(params))?;
    let track: Vec<Value> = env
        .take_log()
        .iter()
        .filter_map(|r| match r {
            portnav::env::LogRecord::Step { pose, .. } => Some(pose_json(pose)),
            _ => None,
        })
        .collect();
    Ok(json!({
        "scene": serde_json::to_value(env.scene())?,
        "spawn": pose_json(&env.scene().spawn_pose),
        "track": track,
        "mass": params.mass,
        "turn_rate": params.turn_rate,
        "outcome": result.outcome,
        "return": result.episode_return,
        "steps": result.length,
    }))
}

/// Scripted-controller sweep over the default grid for `param`
/// (`"mass"` or `"turn_rate"`).
pub fn sweep_value(param: &str, seed: u64, episodes: usize, points: usize) -> portnav::Result<Value> {
    let param: SweepParam = param.parse()?;
    let cfg = EnvConfig::default();
    let policy = ScriptedPursuit::from_env(&cfg);
    let spec = SweepSpec {
        param,
        grid: default_grid(param, points),
        episodes,
        seed,
    };
    let curve = run_sweep(&policy, &cfg, &spec)?;
    Ok(json!({
        "param": param.as_str(),
        "nominal": param.nominal(),
        "records": serde_json::to_value(&curve.records)?,
    }))
}

#[wasm_bindgen]
pub fn scene(seed: u32) -> Result<String, JsValue> {
    to_js(scene_value(seed.into()))
}

#[wasm_bindgen]
pub fn simulate(seed: u32, mass_scale: f64, turn_rate_scale: f64) -> Result<String, JsValue> {
    to_js(simulate_value(seed.into(), mass_scale, turn_rate_scale))
}

#[wasm_bindgen]
pub fn sweep(param: &str, seed: u32, episodes: u32, points: u32) -> Result<String, JsValue> {
    to_js(sweep_value(param, seed.into(), episodes as usize, points as usize))
}
