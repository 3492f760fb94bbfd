//! Policies and learners.
//!
//! [`SacAgent`] is the maximum-entropy learner. [`BaselineAgent`] is a
//! deterministic twin-critic actor-critic used as the non-entropy comparator
//! (it stands in for a model-based planner, which this crate does not
//! implement). [`ScriptedPursuit`] is a hand-written controller for sanity
//! checks. Networks act in normalized `[-1, 1]²` action space; thrust is
//! scaled by `thrust_max` at the environment boundary.

mod baseline;
mod checkpoint;
mod replay;
mod rng_state;
pub mod sac;
mod scripted;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::kinematics::ControlInput;
use crate::nn::Mlp;
use crate::{Error, Result};

pub use baseline::BaselineAgent;
pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};
pub use replay::{Batch, ReplayBuffer, Transition, ACT_DIM};
pub use sac::SacAgent;
pub use scripted::ScriptedPursuit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sac,
    Baseline,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Sac => f.write_str("sac"),
            Algorithm::Baseline => f.write_str("baseline"),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sac" => Ok(Algorithm::Sac),
            "baseline" | "td3" => Ok(Algorithm::Baseline),
            other => Err(Error::Usage(format!(
                "unknown algorithm '{other}' (expected sac or baseline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub hidden: Vec<usize>,
    pub lr: f64,
    /// Polyak factor for target networks.
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// SAC entropy target; the usual choice is minus the action dimension.
    pub target_entropy: f64,
    pub initial_alpha: f64,
    pub autotune_alpha: bool,
    /// Baseline: Gaussian exploration noise on normalized actions.
    pub exploration_noise: f64,
    /// Baseline: target-policy smoothing noise and its clip.
    pub target_noise: f64,
    pub noise_clip: f64,
    /// Baseline: actor and target updates happen every this many critic updates.
    pub policy_delay: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Sac,
            hidden: vec![256, 256],
            lr: 3e-4,
            tau: 0.005,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            target_entropy: -(ACT_DIM as f64),
            initial_alpha: 0.2,
            autotune_alpha: true,
            exploration_noise: 0.1,
            target_noise: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::Config("agent.hidden sizes must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config("agent.lr must be > 0".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config("agent.tau must be in (0, 1)".into()));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return Err(Error::Config(
                "agent.batch_size must be >= 1 and <= agent.buffer_capacity".into(),
            ));
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return Err(Error::Config("agent.initial_alpha must be > 0".into()));
        }
        if !self.target_entropy.is_finite() {
            return Err(Error::Config("agent.target_entropy must be finite".into()));
        }
        if !(self.exploration_noise >= 0.0 && self.target_noise >= 0.0 && self.noise_clip >= 0.0) {
            return Err(Error::Config("agent noise parameters must be >= 0".into()));
        }
        if self.policy_delay == 0 {
            return Err(Error::Config("agent.policy_delay must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// Losses and diagnostics from one learner update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    /// Mean `-log π(a|s)` over the batch (SAC); zero for the baseline.
    pub entropy: f64,
}

/// Anything that maps an observation vector to a control input.
pub trait Policy: Send + Sync {
    fn name(&self) -> String;
    fn act(&self, obs: &[f64]) -> Result<ControlInput>;
}

/// A read-only copy of an actor, handed to rollout workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActorSnapshot {
    /// Squashed Gaussian: the network emits means then raw log-stds.
    Sac { actor: Mlp, thrust_max: f64 },
    /// Deterministic tanh actor with additive exploration noise.
    Baseline { actor: Mlp, thrust_max: f64, noise: f64 },
}

fn check_obs(net: &Mlp, obs: &[f64]) -> Result<()> {
    if obs.len() != net.input_dim() {
        return Err(Error::Shape(format!(
            "observation of length {}, policy expects {}",
            obs.len(),
            net.input_dim()
        )));
    }
    if obs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("observation contains non-finite entries".into()));
    }
    Ok(())
}

impl ActorSnapshot {
    pub fn actor(&self) -> &Mlp {
        match self {
            ActorSnapshot::Sac { actor, .. } | ActorSnapshot::Baseline { actor, .. } => actor,
        }
    }

    pub fn thrust_max(&self) -> f64 {
        match self {
            ActorSnapshot::Sac { thrust_max, .. } | ActorSnapshot::Baseline { thrust_max, .. } => *thrust_max,
        }
    }

    /// Mean of the action distribution in `[-1, 1]²`. For SAC this is the
    /// mean of the squashed Gaussian, not `tanh` of the Gaussian mean.
    pub fn mean_action(&self, obs: &[f64]) -> Result<[f64; ACT_DIM]> {
        check_obs(self.actor(), obs)?;
        let out = self.actor().forward(obs)?;
        let mut a = [0.0; ACT_DIM];
        for (i, ai) in a.iter_mut().enumerate() {
            *ai = match self {
                ActorSnapshot::Sac { .. } => sac::squashed_mean(out[i], sac::squash_log_std(out[ACT_DIM + i]).exp()),
                ActorSnapshot::Baseline { .. } => out[i].tanh(),
            };
        }
        Ok(a)
    }

    /// Normalized action in `[-1, 1]²`.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], mode: ActMode, rng: &mut R) -> Result<[f64; ACT_DIM]> {
        if mode == ActMode::Deterministic {
            return self.mean_action(obs);
        }
        check_obs(self.actor(), obs)?;
        let out = self.actor().forward(obs)?;
        let mut a = [0.0; ACT_DIM];
        match self {
            ActorSnapshot::Sac { .. } => {
                for i in 0..ACT_DIM {
                    let mean = out[i];
                    let std = sac::squash_log_std(out[ACT_DIM + i]).exp();
                    let eps: f64 = rng.sample(StandardNormal);
                    a[i] = (mean + std * eps).tanh();
                }
            }
            ActorSnapshot::Baseline { noise, .. } => {
                for i in 0..ACT_DIM {
                    let eps: f64 = rng.sample(StandardNormal);
                    a[i] = (out[i].tanh() + noise * eps).clamp(-1.0, 1.0);
                }
            }
        }
        Ok(a)
    }

    pub fn to_control(&self, a: [f64; ACT_DIM]) -> ControlInput {
        to_control(a, self.thrust_max())
    }

    pub fn act_with<R: Rng + ?Sized>(&self, obs: &Observation, mode: ActMode, rng: &mut R) -> Result<ControlInput> {
        let a = self.sample(&obs.to_vec(), mode, rng)?;
        Ok(self.to_control(a))
    }
}

impl Policy for ActorSnapshot {
    fn name(&self) -> String {
        match self {
            ActorSnapshot::Sac { .. } => "sac".into(),
            ActorSnapshot::Baseline { .. } => "baseline".into(),
        }
    }

    fn act(&self, obs: &[f64]) -> Result<ControlInput> {
        Ok(self.to_control(self.mean_action(obs)?))
    }
}

pub fn to_control(a: [f64; ACT_DIM], thrust_max: f64) -> ControlInput {
    ControlInput::new(a[0] * thrust_max, a[1])
}

pub fn from_control(u: ControlInput, thrust_max: f64) -> [f64; ACT_DIM] {
    [(u.thrust / thrust_max).clamp(-1.0, 1.0), u.rudder.clamp(-1.0, 1.0)]
}

/// A learner of either kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Agent {
    Sac(SacAgent),
    Baseline(BaselineAgent),
}

impl Agent {
    pub fn new(cfg: &AgentConfig, obs_dim: usize, gamma: f64, thrust_max: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.algorithm {
            Algorithm::Sac => Agent::Sac(SacAgent::new(cfg.clone(), obs_dim, gamma, thrust_max, seed)?),
            Algorithm::Baseline => Agent::Baseline(BaselineAgent::new(cfg.clone(), obs_dim, gamma, thrust_max, seed)?),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Agent::Sac(_) => Algorithm::Sac,
            Agent::Baseline(_) => Algorithm::Baseline,
        }
    }

    pub fn snapshot(&self) -> ActorSnapshot {
        match self {
            Agent::Sac(a) => a.snapshot(),
            Agent::Baseline(a) => a.snapshot(),
        }
    }

    pub fn update(&mut self, batch: &Batch) -> Result<LossReport> {
        match self {
            Agent::Sac(a) => a.update(batch),
            Agent::Baseline(a) => a.update(batch),
        }
    }

    pub fn act(&mut self, obs: &Observation, mode: ActMode) -> Result<ControlInput> {
        match self {
            Agent::Sac(a) => a.act(obs, mode),
            Agent::Baseline(a) => a.act(obs, mode),
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.snapshot().actor().input_dim()
    }

    /// All network shapes the agent trains, as `(name, sizes)`.
    pub fn network_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match self {
            Agent::Sac(a) => a.network_shapes(),
            Agent::Baseline(a) => a.network_shapes(),
        }
    }
}

impl Policy for Agent {
    fn name(&self) -> String {
        self.algorithm().to_string()
    }

    fn act(&self, obs: &[f64]) -> Result<ControlInput> {
        self.snapshot().act(obs)
    }
}

pub(crate) fn critic_input(obs: &[f64], actions: &[f64], batch: usize, obs_dim: usize) -> Vec<f64> {
    let mut x = Vec::with_capacity(batch * (obs_dim + ACT_DIM));
    for b in 0..batch {
        x.extend_from_slice(&obs[b * obs_dim..(b + 1) * obs_dim]);
        x.extend_from_slice(&actions[b * ACT_DIM..(b + 1) * ACT_DIM]);
    }
    x
}

/// Mean of `0.5·(Q(s,a) − y)²` and its parameter gradient.
pub fn critic_loss_grad(critic: &Mlp, batch: &Batch, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let x = critic_input(&batch.obs, &batch.actions, batch.size, batch.obs_dim);
    let cache = critic.forward_batch(&x, batch.size)?;
    let q = cache.output();
    let n = batch.size as f64;
    let mut loss = 0.0;
    let mut out_grad = vec![0.0; batch.size];
    for b in 0..batch.size {
        let err = q[b] - targets[b];
        loss += 0.5 * err * err;
        out_grad[b] = err / n;
    }
    let mut grads = vec![0.0; critic.n_params()];
    critic.backward(&cache, &out_grad, &mut grads)?;
    Ok((loss / n, grads))
}

pub(crate) fn all_finite(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite())
}
