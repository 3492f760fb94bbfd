//! Experience collection and the learner loop.
//!
//! `W` rollout workers each own an environment and a read-only actor
//! snapshot, refreshed at every episode start. Their transitions flow over a
//! channel to the single learner, which owns the replay buffer and is the
//! only writer of network parameters. With one worker the loop runs inline,
//! which makes a run a pure function of the master seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    from_control, ActMode, ActorSnapshot, Agent, Checkpoint, LossReport, Policy, ReplayBuffer, Transition, ACT_DIM,
};
use crate::config::Config;
use crate::env::{Env, EnvConfig, Outcome};
use crate::kinematics::VesselParams;
use crate::stats::{mean, std_dev};
use crate::{Error, Result};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const METRICS_COLUMNS: [&str; 12] = [
    "env_steps",
    "episodes",
    "mean_return",
    "std_return",
    "success_rate",
    "collision_rate",
    "episode_len",
    "critic_loss",
    "actor_loss",
    "alpha",
    "entropy",
    "updates",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub workers: usize,
    /// Environment-step budget across all workers.
    pub total_steps: u64,
    /// Uniform-random actions for this many initial steps.
    pub warmup_steps: u64,
    pub updates_per_step: usize,
    pub checkpoint_every: u64,
    pub metrics_every: u64,
    /// Episodes in the rolling window behind each metrics row.
    pub metrics_window: usize,
    /// Learner publishes a fresh actor snapshot every this many updates (multi-worker only).
    pub snapshot_every: u64,
    /// Deterministic evaluation cadence in env steps; 0 disables it.
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_seed: u64,
    /// Stop once a periodic evaluation reaches this success rate; 0 disables it.
    pub target_success: f64,
    pub seed: u64,
    pub out_dir: String,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            workers: 20,
            total_steps: 200_000,
            warmup_steps: 2_000,
            updates_per_step: 1,
            checkpoint_every: 25_000,
            metrics_every: 1_000,
            metrics_window: 20,
            snapshot_every: 50,
            eval_every: 0,
            eval_episodes: 20,
            eval_seed: 1_000_000,
            target_success: 0.0,
            seed: 0,
            out_dir: "runs/default".into(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Config("trainer.workers must be >= 1".into()));
        }
        if self.checkpoint_every == 0 || self.metrics_every == 0 || self.snapshot_every == 0 {
            return Err(Error::Config(
                "trainer cadences (checkpoint_every, metrics_every, snapshot_every) must be >= 1".into(),
            ));
        }
        if self.metrics_window == 0 || self.eval_episodes == 0 {
            return Err(Error::Config(
                "trainer.metrics_window and trainer.eval_episodes must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.target_success) {
            return Err(Error::Config("trainer.target_success must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub seed: u64,
    #[serde(rename = "return")]
    pub episode_return: f64,
    pub length: usize,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub n_episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub mean_length: f64,
    pub episodes: Vec<EpisodeResult>,
}

impl EvalStats {
    pub fn from_episodes(episodes: Vec<EpisodeResult>) -> Self {
        let returns: Vec<f64> = episodes.iter().map(|e| e.episode_return).collect();
        let lengths: Vec<f64> = episodes.iter().map(|e| e.length as f64).collect();
        let n = episodes.len() as f64;
        let count = |o: Outcome| episodes.iter().filter(|e| e.outcome == o).count() as f64 / n;
        Self {
            n_episodes: episodes.len(),
            mean_return: mean(&returns),
            std_return: std_dev(&returns),
            success_rate: count(Outcome::Goal),
            collision_rate: count(Outcome::Collision),
            mean_length: mean(&lengths),
            episodes,
        }
    }
}

/// Runs one deterministic-policy episode. `params`, when given, replaces the
/// vessel parameters right after reset.
pub fn run_episode(
    env: &mut Env,
    policy: &dyn Policy,
    seed: u64,
    params: Option<VesselParams>,
) -> Result<EpisodeResult> {
    let mut obs = env.reset(seed)?;
    if let Some(p) = params {
        env.set_vessel_params(p)?;
    }
    let mut total = 0.0;
    loop {
        let action = policy.act(&obs.to_vec())?;
        let r = env.step(action)?;
        total += r.reward;
        if r.done() {
            let outcome = if r.info.collision {
                Outcome::Collision
            } else if r.info.goal {
                Outcome::Goal
            } else {
                Outcome::Timeout
            };
            return Ok(EpisodeResult {
                seed,
                episode_return: total,
                length: env.t(),
                outcome,
            });
        }
        obs = r.observation;
    }
}

/// Deterministic evaluation on seeds `seed..seed+n`. Returns are undiscounted sums.
pub fn evaluate(
    policy: &dyn Policy,
    env_cfg: &EnvConfig,
    n_episodes: usize,
    seed: u64,
    params: Option<VesselParams>,
) -> Result<EvalStats> {
    if n_episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    env_cfg.validate()?;
    let episodes = (0..n_episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = Env::new(env_cfg.clone())?;
            run_episode(&mut env, policy, seed + i, params)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalStats::from_episodes(episodes))
}

/// Evaluates a checkpoint after confirming it was trained on `env_cfg`.
pub fn evaluate_checkpoint(ck: &Checkpoint, env_cfg: &EnvConfig, n_episodes: usize, seed: u64) -> Result<EvalStats> {
    ck.check_env(env_cfg)?;
    evaluate(&ck.agent, env_cfg, n_episodes, seed, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub env_steps: u64,
    pub episodes: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub episode_len: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    pub updates: u64,
}

impl MetricsRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.env_steps,
            self.episodes,
            self.mean_return,
            self.std_return,
            self.success_rate,
            self.collision_rate,
            self.episode_len,
            self.critic_loss,
            self.actor_loss,
            self.alpha,
            self.entropy,
            self.updates
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub env_steps: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub env_steps: u64,
    pub buffer_insertions: u64,
    pub episodes: u64,
    pub updates: u64,
    pub checkpoints: Vec<PathBuf>,
    pub evals: Vec<EvalRow>,
    pub metrics_path: PathBuf,
    pub stopped_early: bool,
}

impl TrainSummary {
    pub fn final_checkpoint(&self) -> &Path {
        self.checkpoints.last().expect("training always writes a checkpoint")
    }

    pub fn best_eval_success(&self) -> Option<f64> {
        self.evals.iter().map(|e| e.success_rate).reduce(f64::max)
    }
}

/// Bookkeeping shared by the inline and threaded loops; owned by the learner.
struct Learner<'a> {
    cfg: &'a Config,
    env_cfg: EnvConfig,
    out: PathBuf,
    agent: Agent,
    buffer: ReplayBuffer,
    metrics: BufWriter<File>,
    metrics_path: PathBuf,
    evals: BufWriter<File>,
    steps: u64,
    episodes: u64,
    updates: u64,
    recent: Vec<EpisodeResult>,
    losses: Vec<LossReport>,
    checkpoints: Vec<PathBuf>,
    eval_rows: Vec<EvalRow>,
    last_checkpoint_step: Option<u64>,
    stop: bool,
}

impl<'a> Learner<'a> {
    fn new(cfg: &'a Config, out: &Path) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let env_cfg = cfg.env_config();
        let t = &cfg.trainer;
        let agent = Agent::new(
            &cfg.agent,
            env_cfg.obs_dim(),
            env_cfg.gamma,
            env_cfg.vessel.thrust_max,
            t.seed,
        )?;
        let buffer = ReplayBuffer::new(cfg.agent.buffer_capacity, env_cfg.obs_dim(), t.seed ^ 0x00b0_ffe4);

        let meta = serde_json::json!({
            "schema_version": METRICS_SCHEMA_VERSION,
            "columns": METRICS_COLUMNS,
            "config_hash": cfg.hash(),
            "env_hash": env_cfg.hash(),
            "algorithm": cfg.agent.algorithm.to_string(),
        });
        let meta_path = out.join("metrics.meta.json");
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;
        let config_path = out.join("config.toml");
        std::fs::write(&config_path, cfg.to_toml()).map_err(|e| Error::io(&config_path, e))?;

        let metrics_path = out.join("metrics.csv");
        let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?);
        writeln!(metrics, "{}", METRICS_COLUMNS.join(",")).map_err(|e| Error::io(&metrics_path, e))?;
        let eval_path = out.join("eval.csv");
        let mut evals = BufWriter::new(File::create(&eval_path).map_err(|e| Error::io(&eval_path, e))?);
        writeln!(
            evals,
            "env_steps,mean_return,std_return,success_rate,collision_rate,mean_length"
        )
        .map_err(|e| Error::io(&eval_path, e))?;

        Ok(Self {
            cfg,
            env_cfg,
            out: out.to_path_buf(),
            agent,
            buffer,
            metrics,
            metrics_path,
            evals,
            steps: 0,
            episodes: 0,
            updates: 0,
            recent: Vec::new(),
            losses: Vec::new(),
            checkpoints: Vec::new(),
            eval_rows: Vec::new(),
            last_checkpoint_step: None,
            stop: false,
        })
    }

    fn checkpoint(&mut self) -> Result<()> {
        if self.last_checkpoint_step == Some(self.steps) {
            return Ok(());
        }
        let path = self.out.join(format!("ckpt_{:09}.json", self.steps));
        Checkpoint::new(self.cfg, self.agent.clone(), self.steps, self.episodes).save(&path)?;
        log::info!("checkpoint {}", path.display());
        self.checkpoints.push(path);
        self.last_checkpoint_step = Some(self.steps);
        Ok(())
    }

    /// Inserts one transition, runs the learner and emits any due artifacts.
    fn absorb(&mut self, t: Transition, finished: Option<EpisodeResult>) -> Result<()> {
        self.buffer.push(t)?;
        self.steps += 1;
        let tc = &self.cfg.trainer;
        if self.steps > tc.warmup_steps && self.buffer.len() >= self.cfg.agent.batch_size {
            for _ in 0..tc.updates_per_step {
                let batch = self.buffer.sample(self.cfg.agent.batch_size)?;
                let report = self.agent.update(&batch)?;
                self.losses.push(report);
                self.updates += 1;
            }
        }
        if let Some(ep) = finished {
            self.episodes += 1;
            self.recent.push(ep);
            let w = tc.metrics_window;
            if self.recent.len() > w {
                self.recent.drain(..self.recent.len() - w);
            }
        }
        if self.steps.is_multiple_of(tc.metrics_every) {
            self.write_metrics()?;
        }
        if self.steps.is_multiple_of(tc.checkpoint_every) {
            self.checkpoint()?;
        }
        if tc.eval_every > 0 && self.steps.is_multiple_of(tc.eval_every) {
            self.periodic_eval()?;
        }
        Ok(())
    }

    fn write_metrics(&mut self) -> Result<()> {
        let returns: Vec<f64> = self.recent.iter().map(|e| e.episode_return).collect();
        let lens: Vec<f64> = self.recent.iter().map(|e| e.length as f64).collect();
        let n = self.recent.len() as f64;
        let rate = |o: Outcome| {
            if self.recent.is_empty() {
                f64::NAN
            } else {
                self.recent.iter().filter(|e| e.outcome == o).count() as f64 / n
            }
        };
        let avg = |f: fn(&LossReport) -> f64| {
            if self.losses.is_empty() {
                f64::NAN
            } else {
                self.losses.iter().map(f).sum::<f64>() / self.losses.len() as f64
            }
        };
        let row = MetricsRow {
            env_steps: self.steps,
            episodes: self.episodes,
            mean_return: mean(&returns),
            std_return: std_dev(&returns),
            success_rate: rate(Outcome::Goal),
            collision_rate: rate(Outcome::Collision),
            episode_len: mean(&lens),
            critic_loss: avg(|l| l.critic_loss),
            actor_loss: avg(|l| l.actor_loss),
            alpha: avg(|l| l.alpha),
            entropy: avg(|l| l.entropy),
            updates: self.updates,
        };
        self.losses.clear();
        self.metrics
            .write_all(row.csv_line().as_bytes())
            .and_then(|_| self.metrics.flush())
            .map_err(|e| Error::io(&self.metrics_path, e))
    }

    fn periodic_eval(&mut self) -> Result<()> {
        let tc = &self.cfg.trainer;
        let stats = evaluate(&self.agent, &self.env_cfg, tc.eval_episodes, tc.eval_seed, None)?;
        let row = EvalRow {
            env_steps: self.steps,
            mean_return: stats.mean_return,
            std_return: stats.std_return,
            success_rate: stats.success_rate,
            collision_rate: stats.collision_rate,
            mean_length: stats.mean_length,
        };
        log::info!(
            "eval @{}: return {:.2} ± {:.2}, success {:.2}",
            row.env_steps,
            row.mean_return,
            row.std_return,
            row.success_rate
        );
        writeln!(
            self.evals,
            "{},{},{},{},{},{}",
            row.env_steps, row.mean_return, row.std_return, row.success_rate, row.collision_rate, row.mean_length
        )
        .and_then(|_| self.evals.flush())
        .map_err(|e| Error::io(self.out.join("eval.csv"), e))?;
        if tc.target_success > 0.0 && row.success_rate >= tc.target_success {
            self.stop = true;
        }
        self.eval_rows.push(row);
        Ok(())
    }

    fn finish(mut self, stopped_early: bool) -> Result<TrainSummary> {
        self.checkpoint()?;
        self.metrics.flush().map_err(|e| Error::io(&self.metrics_path, e))?;
        Ok(TrainSummary {
            env_steps: self.steps,
            buffer_insertions: self.buffer.inserted(),
            episodes: self.episodes,
            updates: self.updates,
            checkpoints: self.checkpoints,
            evals: self.eval_rows,
            metrics_path: self.metrics_path,
            stopped_early,
        })
    }
}

/// Seed for worker `w`'s episode stream.
fn worker_seed(master: u64, w: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(w as u64 + 1);
    rng.next_u64()
}

/// Per-worker rollout state: an environment, a policy snapshot and the
/// generator for episode seeds and exploration.
struct Rollout {
    env: Env,
    rng: ChaCha8Rng,
    obs: Option<Vec<f64>>,
    episode_seed: u64,
    episode_return: f64,
}

impl Rollout {
    fn new(env_cfg: &EnvConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            env: Env::new(env_cfg.clone())?,
            rng: ChaCha8Rng::seed_from_u64(seed),
            obs: None,
            episode_seed: 0,
            episode_return: 0.0,
        })
    }

    fn needs_reset(&self) -> bool {
        self.obs.is_none()
    }

    /// Advances one step; `random` selects uniform warm-up actions.
    fn step(&mut self, snapshot: &ActorSnapshot, random: bool) -> Result<(Transition, Option<EpisodeResult>)> {
        let obs = match self.obs.take() {
            Some(o) => o,
            None => {
                self.episode_seed = self.rng.next_u64();
                self.episode_return = 0.0;
                self.env.reset(self.episode_seed)?.to_vec()
            }
        };
        let action: [f64; ACT_DIM] = if random {
            [self.rng.random_range(-1.0..=1.0), self.rng.random_range(-1.0..=1.0)]
        } else {
            snapshot.sample(&obs, ActMode::Stochastic, &mut self.rng)?
        };
        let r = self.env.step(snapshot.to_control(action))?;
        self.episode_return += r.reward;
        let next = r.observation.to_vec();
        let t = Transition {
            obs,
            action: from_control(snapshot.to_control(action), snapshot.thrust_max()),
            reward: r.reward,
            next_obs: next.clone(),
            done: r.terminated,
        };
        let finished = if r.done() {
            Some(EpisodeResult {
                seed: self.episode_seed,
                episode_return: self.episode_return,
                length: self.env.t(),
                outcome: if r.info.collision {
                    Outcome::Collision
                } else if r.info.goal {
                    Outcome::Goal
                } else {
                    Outcome::Timeout
                },
            })
        } else {
            self.obs = Some(next);
            None
        };
        Ok((t, finished))
    }
}

/// Trains per `cfg` and writes checkpoints, `metrics.csv` and `eval.csv`
/// under `out`.
pub fn train(cfg: &Config, out: &Path) -> Result<TrainSummary> {
    train_until(cfg, out, &AtomicBool::new(false))
}

/// Like [`train`], but also stops once `interrupt` is set (e.g. from a
/// signal handler). Open files are flushed and a final checkpoint written,
/// and the summary reports `stopped_early`.
pub fn train_until(cfg: &Config, out: &Path, interrupt: &AtomicBool) -> Result<TrainSummary> {
    if cfg.trainer.workers == 1 {
        train_inline(cfg, out, interrupt)
    } else {
        train_threaded(cfg, out, interrupt)
    }
}

fn train_inline(cfg: &Config, out: &Path, interrupt: &AtomicBool) -> Result<TrainSummary> {
    let mut learner = Learner::new(cfg, out)?;
    learner.checkpoint()?;
    let total = cfg.trainer.total_steps;
    let mut worker = Rollout::new(&learner.env_cfg, worker_seed(cfg.trainer.seed, 0))?;
    let mut snapshot = learner.agent.snapshot();
    while learner.steps < total && !learner.stop {
        if interrupt.load(Ordering::Relaxed) {
            learner.stop = true;
            break;
        }
        if worker.needs_reset() {
            snapshot = learner.agent.snapshot();
        }
        let random = learner.steps < cfg.trainer.warmup_steps;
        let (t, finished) = worker.step(&snapshot, random)?;
        learner.absorb(t, finished)?;
    }
    let stopped = learner.stop;
    learner.finish(stopped)
}

enum Msg {
    Step(Transition, Option<EpisodeResult>),
    Failed(usize, String),
}

fn train_threaded(cfg: &Config, out: &Path, interrupt: &AtomicBool) -> Result<TrainSummary> {
    let mut learner = Learner::new(cfg, out)?;
    learner.checkpoint()?;
    let tc = cfg.trainer.clone();
    let claimed = Arc::new(AtomicU64::new(0));
    let stop = Arc::new(AtomicBool::new(false));
    let latest = Arc::new(RwLock::new(Arc::new(learner.agent.snapshot())));
    let (tx, rx) = crossbeam_channel::bounded::<Msg>(4 * tc.workers);

    let result = std::thread::scope(|scope| -> Result<()> {
        for w in 0..tc.workers {
            let tx = tx.clone();
            let claimed = Arc::clone(&claimed);
            let stop = Arc::clone(&stop);
            let latest = Arc::clone(&latest);
            let env_cfg = learner.env_cfg.clone();
            let seed = worker_seed(tc.seed, w);
            let (total, warmup) = (tc.total_steps, tc.warmup_steps);
            scope.spawn(move || {
                let run = || -> Result<()> {
                    let mut worker = Rollout::new(&env_cfg, seed)?;
                    let mut snapshot = Arc::clone(&latest.read().expect("snapshot lock"));
                    loop {
                        if stop.load(Ordering::Acquire) {
                            return Ok(());
                        }
                        let k = claimed.fetch_add(1, Ordering::AcqRel);
                        if k >= total {
                            return Ok(());
                        }
                        if worker.needs_reset() {
                            snapshot = Arc::clone(&latest.read().expect("snapshot lock"));
                        }
                        let (t, finished) = worker.step(&snapshot, k < warmup)?;
                        if tx.send(Msg::Step(t, finished)).is_err() {
                            return Ok(());
                        }
                    }
                };
                if let Err(e) = run() {
                    let _ = tx.send(Msg::Failed(w, e.to_string()));
                }
            });
        }
        drop(tx);

        let mut failure = None;
        for msg in rx.iter() {
            match msg {
                Msg::Step(t, finished) => {
                    if failure.is_some() {
                        continue;
                    }
                    if let Err(e) = learner.absorb(t, finished) {
                        stop.store(true, Ordering::Release);
                        failure = Some(e);
                        continue;
                    }
                    if interrupt.load(Ordering::Relaxed) {
                        learner.stop = true;
                    }
                    if learner.stop {
                        stop.store(true, Ordering::Release);
                    }
                    if learner.updates > 0 && learner.updates % tc.snapshot_every == 0 {
                        *latest.write().expect("snapshot lock") = Arc::new(learner.agent.snapshot());
                    }
                }
                Msg::Failed(worker, message) => {
                    stop.store(true, Ordering::Release);
                    failure.get_or_insert(Error::Worker { worker, message });
                }
            }
        }
        match failure {
            Some(e) => Err(e),
            None => Ok(()),
        }
    });
    result?;
    let stopped = learner.stop;
    learner.finish(stopped)
}
