//! Deterministic twin-critic actor-critic (TD3-style): clipped double-Q
//! targets, target-policy smoothing and delayed actor updates. No entropy term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    all_finite, critic_input, critic_loss_grad, ActMode, ActorSnapshot, AgentConfig, Batch, LossReport, ACT_DIM,
};
use crate::env::Observation;
use crate::kinematics::ControlInput;
use crate::nn::{soft_update, Adam, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineAgent {
    pub cfg: AgentConfig,
    pub gamma: f64,
    pub thrust_max: f64,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
    pub updates: u64,
    last_actor_loss: f64,
}

/// `-mean Q1(s, tanh(actor(s)))` and its actor gradient.
pub fn actor_loss_grad(actor: &Mlp, critic: &Mlp, obs: &[f64], batch: usize) -> Result<(f64, Vec<f64>)> {
    let obs_dim = actor.input_dim();
    let cache = actor.forward_batch(obs, batch)?;
    let actions: Vec<f64> = cache.output().iter().map(|z| z.tanh()).collect();
    let x = critic_input(obs, &actions, batch, obs_dim);
    let qc = critic.forward_batch(&x, batch)?;
    let n = batch as f64;
    let loss = -qc.output().iter().sum::<f64>() / n;
    let mut scratch = vec![0.0; critic.n_params()];
    let dx = critic.backward(&qc, &vec![1.0; batch], &mut scratch)?;
    let width = obs_dim + ACT_DIM;
    let mut out_grad = vec![0.0; batch * ACT_DIM];
    for b in 0..batch {
        for i in 0..ACT_DIM {
            let a = actions[b * ACT_DIM + i];
            out_grad[b * ACT_DIM + i] = -dx[b * width + obs_dim + i] * (1.0 - a * a) / n;
        }
    }
    let mut grads = vec![0.0; actor.n_params()];
    actor.backward(&cache, &out_grad, &mut grads)?;
    Ok((loss, grads))
}

impl BaselineAgent {
    pub fn new(cfg: AgentConfig, obs_dim: usize, gamma: f64, thrust_max: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(ACT_DIM);
        let mut critic_sizes = vec![obs_dim + ACT_DIM];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, &mut rng)?;
        let critic1 = Mlp::new(&critic_sizes, &mut rng)?;
        let critic2 = Mlp::new(&critic_sizes, &mut rng)?;
        Ok(Self {
            actor_opt: Adam::new(actor.n_params(), cfg.lr),
            critic1_opt: Adam::new(critic1.n_params(), cfg.lr),
            critic2_opt: Adam::new(critic2.n_params(), cfg.lr),
            actor_target: actor.clone(),
            target1: critic1.clone(),
            target2: critic2.clone(),
            actor,
            critic1,
            critic2,
            gamma,
            thrust_max,
            cfg,
            rng,
            updates: 0,
            last_actor_loss: 0.0,
        })
    }

    pub fn snapshot(&self) -> ActorSnapshot {
        ActorSnapshot::Baseline {
            actor: self.actor.clone(),
            thrust_max: self.thrust_max,
            noise: self.cfg.exploration_noise,
        }
    }

    pub fn network_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("actor", self.actor.sizes().to_vec()),
            ("critic1", self.critic1.sizes().to_vec()),
            ("critic2", self.critic2.sizes().to_vec()),
        ]
    }

    pub fn act(&mut self, obs: &Observation, mode: ActMode) -> Result<ControlInput> {
        let snap = self.snapshot();
        snap.act_with(obs, mode, &mut self.rng)
    }

    pub fn critic_targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let n = batch.size;
        let cache = self.actor_target.forward_batch(&batch.next_obs, n)?;
        let clip = self.cfg.noise_clip;
        let next: Vec<f64> = cache
            .output()
            .iter()
            .map(|z| {
                let e: f64 = self.rng.sample(StandardNormal);
                (z.tanh() + (self.cfg.target_noise * e).clamp(-clip, clip)).clamp(-1.0, 1.0)
            })
            .collect();
        let x = critic_input(&batch.next_obs, &next, n, batch.obs_dim);
        let t1 = self.target1.forward_batch(&x, n)?;
        let t2 = self.target2.forward_batch(&x, n)?;
        Ok((0..n)
            .map(|b| {
                let q = t1.output()[b].min(t2.output()[b]);
                batch.rewards[b] + self.gamma * (1.0 - batch.dones[b]) * q
            })
            .collect())
    }

    pub fn update(&mut self, batch: &Batch) -> Result<LossReport> {
        if batch.obs_dim != self.actor.input_dim() {
            return Err(Error::Shape(format!(
                "batch observation width {} for actor input {}",
                batch.obs_dim,
                self.actor.input_dim()
            )));
        }
        let saved = self.clone();
        match self.try_update(batch) {
            Ok(r) => Ok(r),
            Err(e) => {
                *self = saved;
                Err(e)
            }
        }
    }

    fn try_update(&mut self, batch: &Batch) -> Result<LossReport> {
        let targets = self.critic_targets(batch)?;
        let (l1, g1) = critic_loss_grad(&self.critic1, batch, &targets)?;
        let (l2, g2) = critic_loss_grad(&self.critic2, batch, &targets)?;
        if !(l1.is_finite() && l2.is_finite() && all_finite(&g1) && all_finite(&g2)) {
            return Err(Error::NonFiniteLoss(format!("critic (losses {l1}, {l2})")));
        }
        self.critic1_opt.update(self.critic1.params_mut(), &g1)?;
        self.critic2_opt.update(self.critic2.params_mut(), &g2)?;
        self.updates += 1;

        if self.updates.is_multiple_of(self.cfg.policy_delay as u64) {
            let (loss, ga) = actor_loss_grad(&self.actor, &self.critic1, &batch.obs, batch.size)?;
            if !(loss.is_finite() && all_finite(&ga)) {
                return Err(Error::NonFiniteLoss(format!("actor (loss {loss})")));
            }
            self.actor_opt.update(self.actor.params_mut(), &ga)?;
            self.last_actor_loss = loss;
            soft_update(&mut self.actor_target, &self.actor, self.cfg.tau)?;
            soft_update(&mut self.target1, &self.critic1, self.cfg.tau)?;
            soft_update(&mut self.target2, &self.critic2, self.cfg.tau)?;
        }

        Ok(LossReport {
            critic_loss: l1 + l2,
            actor_loss: self.last_actor_loss,
            alpha_loss: 0.0,
            alpha: 0.0,
            entropy: 0.0,
        })
    }
}
