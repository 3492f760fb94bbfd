//! Episodic navigation task: kinematics + world + sensor behind reset/step.
//!
//! Each step clamps the action, advances traffic, integrates the vessel one
//! tick and then scores the new pose. Goal contact pays `goal`, any collision
//! pays `collision` (collision wins if both happen on the same tick),
//! otherwise the step costs `step` plus `progress` per meter gained towards
//! the goal centre.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::content_hash;
use crate::geometry::Vec2;
use crate::kinematics::{wrap_signed, ControlInput, Vessel, VesselParams, VesselState};
use crate::sensor::{scan_noisy, SensorConfig};
use crate::world::{generate, GenConfig, WorldScene};
use crate::{Error, Result};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub goal: f64,
    pub collision: f64,
    pub step: f64,
    /// Reward per meter of progress towards the goal centre.
    pub progress: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal: 100.0,
            collision: -100.0,
            step: -0.05,
            progress: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub gamma: f64,
    pub horizon: usize,
    /// Ego footprint disc radius, meters.
    pub ego_radius: f64,
    pub rewards: RewardConfig,
    pub world: GenConfig,
    pub sensor: SensorConfig,
    pub vessel: VesselParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            horizon: 600,
            ego_radius: 4.0,
            rewards: RewardConfig::default(),
            world: GenConfig::default(),
            sensor: SensorConfig::default(),
            vessel: VesselParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "env.gamma must be in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("env.horizon must be >= 1".into()));
        }
        if !(self.ego_radius.is_finite() && self.ego_radius > 0.0) {
            return Err(Error::Config("env.ego_radius must be > 0".into()));
        }
        let r = &self.rewards;
        if ![r.goal, r.collision, r.step, r.progress].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("env.rewards must be finite".into()));
        }
        if self.world.clearance < self.ego_radius {
            return Err(Error::Config("world.clearance must be at least env.ego_radius".into()));
        }
        self.world.validate()?;
        self.sensor.validate()?;
        self.vessel.validate()
    }

    /// Provenance hash over every field that affects simulation.
    pub fn hash(&self) -> String {
        content_hash(self)
    }

    pub fn obs_dim(&self) -> usize {
        self.sensor.n_rays + 4
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Ranges divided by `max_range`, each in `(0, 1]`.
    pub normalized_ranges: Vec<f64>,
    /// Distance to the goal centre divided by the scene diagonal.
    pub goal_distance: f64,
    /// Degrees in `[-180, 180)`, positive to starboard.
    pub goal_bearing: f64,
    /// Speed divided by `speed_max`.
    pub speed: f64,
    /// Angular rate divided by `angular_rate_max`.
    pub angular_rate: f64,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.normalized_ranges.len() + 4
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat policy input: ranges, then distance, bearing/180, speed, angular rate.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.normalized_ranges);
        v.push(self.goal_distance);
        v.push(self.goal_bearing / 180.0);
        v.push(self.speed);
        v.push(self.angular_rate);
        v
    }

    /// Inverse of [`Observation::to_vec`].
    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 5 {
            return Err(Error::Shape(format!(
                "observation needs at least 5 entries, got {}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("observation contains non-finite entries".into()));
        }
        let n = v.len() - 4;
        Ok(Self {
            normalized_ranges: v[..n].to_vec(),
            goal_distance: v[n],
            goal_bearing: v[n + 1] * 180.0,
            speed: v[n + 2],
            angular_rate: v[n + 3],
        })
    }

    pub fn is_valid(&self) -> bool {
        self.normalized_ranges
            .iter()
            .all(|r| r.is_finite() && *r > 0.0 && *r <= 1.0)
            && self.goal_distance.is_finite()
            && self.goal_distance >= 0.0
            && (-180.0..180.0).contains(&self.goal_bearing)
            && (-1.0..=1.0).contains(&self.speed)
            && (-1.0..=1.0).contains(&self.angular_rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub collision: bool,
    pub goal: bool,
    /// Meters to the goal centre after the step.
    pub goal_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    Collision,
    Timeout,
}

/// One line of a trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header {
        schema_version: u32,
        config_hash: String,
        episode: u64,
        seed: u64,
        spawn: VesselState,
    },
    /// Vessel parameters changed; applies from step `t` onwards.
    Params {
        episode: u64,
        t: usize,
        params: VesselParams,
    },
    Step {
        episode: u64,
        t: usize,
        pose: VesselState,
        action: ControlInput,
        reward: f64,
        terminated: bool,
        truncated: bool,
        collision: bool,
        goal: bool,
    },
    Summary {
        episode: u64,
        #[serde(rename = "return")]
        episode_return: f64,
        length: usize,
        outcome: Outcome,
    },
}

pub struct Env {
    cfg: EnvConfig,
    cfg_hash: String,
    scene: WorldScene,
    vessel: Vessel,
    rng: ChaCha8Rng,
    t: usize,
    done: bool,
    started: bool,
    goal_distance: f64,
    episode: u64,
    episode_return: f64,
    recording: bool,
    log: Vec<LogRecord>,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let vessel = Vessel::new(VesselState::default(), cfg.vessel)?;
        let scene = WorldScene::empty(cfg.world.width, cfg.world.height);
        Ok(Self {
            cfg_hash: cfg.hash(),
            cfg,
            scene,
            vessel,
            rng: ChaCha8Rng::seed_from_u64(0),
            t: 0,
            done: true,
            started: false,
            goal_distance: 0.0,
            episode: 0,
            episode_return: 0.0,
            recording: false,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn config_hash(&self) -> &str {
        &self.cfg_hash
    }

    pub fn scene(&self) -> &WorldScene {
        &self.scene
    }

    pub fn state(&self) -> &VesselState {
        &self.vessel.state
    }

    pub fn vessel_params(&self) -> &VesselParams {
        self.vessel.params()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Turns per-step trajectory recording on or off; takes effect at the next reset.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn take_log(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.log)
    }

    /// Starts an episode in a freshly generated scene.
    pub fn reset(&mut self, seed: u64) -> Result<Observation> {
        let scene = generate(seed, &self.cfg.world)?;
        Ok(self.reset_with_scene(scene, seed))
    }

    /// Starts an episode in a given scene. `seed` drives sensor noise and
    /// names the episode in logs.
    pub fn reset_with_scene(&mut self, scene: WorldScene, seed: u64) -> Observation {
        self.vessel.state = VesselState::at_rest(scene.spawn_pose.x, scene.spawn_pose.y, scene.spawn_pose.heading);
        self.scene = scene;
        self.rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5e45_0b5e_7e01);
        self.t = 0;
        self.done = false;
        self.started = true;
        self.episode = seed;
        self.episode_return = 0.0;
        self.goal_distance = self.distance_to_goal();
        self.log.clear();
        if self.recording {
            self.log.push(LogRecord::Header {
                schema_version: LOG_SCHEMA_VERSION,
                config_hash: self.cfg_hash.clone(),
                episode: seed,
                seed,
                spawn: self.vessel.state,
            });
            self.log.push(LogRecord::Params {
                episode: seed,
                t: 0,
                params: *self.vessel.params(),
            });
        }
        self.observe()
    }

    /// Swaps the vessel parameters; the change applies from the next step.
    pub fn set_vessel_params(&mut self, params: VesselParams) -> Result<()> {
        self.vessel.set_params(params)?;
        if self.recording && self.started && !self.done {
            self.log.push(LogRecord::Params {
                episode: self.episode,
                t: self.t,
                params,
            });
        }
        Ok(())
    }

    pub fn step(&mut self, action: ControlInput) -> Result<StepResult> {
        if !self.started {
            return Err(Error::Usage("step called before reset".into()));
        }
        if self.done {
            return Err(Error::Usage("step called after the episode finished".into()));
        }
        let applied = crate::kinematics::clamp(action, self.vessel.params())?;
        self.scene.advance_dynamics(self.vessel.params().dt);
        self.vessel.step(applied)?;
        self.t += 1;

        let pose = self.vessel.state;
        let collision = self.scene.check_collision(&pose, self.cfg.ego_radius);
        let goal = !collision && self.scene.check_goal(&pose);
        let new_distance = self.distance_to_goal();
        let r = &self.cfg.rewards;
        let reward = if collision {
            r.collision
        } else if goal {
            r.goal
        } else {
            r.step + r.progress * (self.goal_distance - new_distance)
        };
        self.goal_distance = new_distance;
        let terminated = collision || goal;
        let truncated = !terminated && self.t >= self.cfg.horizon;
        self.done = terminated || truncated;
        self.episode_return += reward;

        if self.recording {
            self.log.push(LogRecord::Step {
                episode: self.episode,
                t: self.t,
                pose,
                action: applied,
                reward,
                terminated,
                truncated,
                collision,
                goal,
            });
            if self.done {
                let outcome = if collision {
                    Outcome::Collision
                } else if goal {
                    Outcome::Goal
                } else {
                    Outcome::Timeout
                };
                self.log.push(LogRecord::Summary {
                    episode: self.episode,
                    episode_return: self.episode_return,
                    length: self.t,
                    outcome,
                });
            }
        }

        Ok(StepResult {
            observation: self.observe(),
            reward,
            terminated,
            truncated,
            info: StepInfo {
                collision,
                goal,
                goal_distance: new_distance,
            },
        })
    }

    fn distance_to_goal(&self) -> f64 {
        Vec2::new(self.vessel.state.x, self.vessel.state.y).dist(self.scene.goal.center)
    }

    fn observe(&mut self) -> Observation {
        let pose = self.vessel.state;
        let sensor: &SensorConfig = &self.cfg.sensor;
        let scan = scan_noisy(&self.scene, &pose, sensor, &mut self.rng);
        let params = self.vessel.params();
        let here = Vec2::new(pose.x, pose.y);
        Observation {
            normalized_ranges: scan.ranges.iter().map(|r| r / sensor.max_range).collect(),
            goal_distance: self.distance_to_goal() / self.scene.diagonal(),
            goal_bearing: wrap_signed(here.bearing_to(self.scene.goal.center) - pose.heading),
            speed: (pose.speed / params.speed_max).clamp(-1.0, 1.0),
            angular_rate: (pose.angular_rate / params.angular_rate_max).clamp(-1.0, 1.0),
        }
    }
}

/// `Σ γ^t r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    // Horner form from the back keeps one multiply per term.
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

pub fn write_log(path: &Path, records: &[LogRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogRecord =
            serde_json::from_str(&line).map_err(|e| Error::Serde(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub episode: u64,
    pub steps: usize,
    pub poses: Vec<VesselState>,
}

/// Re-simulates a logged episode and checks every pose, reward and flag
/// bit-for-bit. `scene` overrides regeneration from the logged seed.
pub fn replay(cfg: &EnvConfig, scene: Option<WorldScene>, records: &[LogRecord]) -> Result<ReplayReport> {
    let (logged_hash, seed, spawn) = match records.first() {
        Some(LogRecord::Header {
            schema_version,
            config_hash,
            seed,
            spawn,
            ..
        }) => {
            if *schema_version != LOG_SCHEMA_VERSION {
                return Err(Error::Serde(format!("unsupported log schema version {schema_version}")));
            }
            (config_hash.clone(), *seed, *spawn)
        }
        _ => return Err(Error::Serde("trajectory log does not start with a header".into())),
    };
    let mut env = Env::new(cfg.clone())?;
    if env.config_hash() != logged_hash {
        return Err(Error::HashMismatch {
            expected: logged_hash,
            actual: env.config_hash().to_string(),
        });
    }
    match scene {
        Some(s) => {
            env.reset_with_scene(s, seed);
        }
        None => {
            env.reset(seed)?;
        }
    }
    if env.state() != &spawn {
        return Err(Error::Divergence {
            step: 0,
            detail: format!("spawn {:?} != logged {:?}", env.state(), spawn),
        });
    }

    let mut poses = vec![*env.state()];
    for rec in &records[1..] {
        match rec {
            LogRecord::Header { .. } => return Err(Error::Serde("multiple headers in one trajectory log".into())),
            LogRecord::Params { params, .. } => env.set_vessel_params(*params)?,
            LogRecord::Step {
                t,
                pose,
                action,
                reward,
                terminated,
                truncated,
                collision,
                goal,
                ..
            } => {
                let r = env.step(*action).map_err(|e| Error::Divergence {
                    step: *t,
                    detail: e.to_string(),
                })?;
                let got = env.state();
                let bits = |s: &VesselState| [s.x, s.y, s.heading, s.speed, s.angular_rate].map(f64::to_bits);
                if env.t() != *t || bits(got) != bits(pose) {
                    return Err(Error::Divergence {
                        step: *t,
                        detail: format!("pose {got:?} != logged {pose:?}"),
                    });
                }
                if r.reward.to_bits() != reward.to_bits()
                    || r.terminated != *terminated
                    || r.truncated != *truncated
                    || r.info.collision != *collision
                    || r.info.goal != *goal
                {
                    return Err(Error::Divergence {
                        step: *t,
                        detail: format!(
                            "reward/flags ({}, {}, {}, {}, {}) != logged ({reward}, {terminated}, {truncated}, {collision}, {goal})",
                            r.reward, r.terminated, r.truncated, r.info.collision, r.info.goal
                        ),
                    });
                }
                poses.push(*got);
            }
            LogRecord::Summary { .. } => {}
        }
    }
    Ok(ReplayReport {
        episode: seed,
        steps: env.t(),
        poses,
    })
}
