//! Soft actor-critic with twin critics and automatic temperature tuning.
//!
//! The actor emits a mean and a raw log-std per action dimension. Actions are
//! `tanh(μ + σ·ε)`; the raw log-std is squashed smoothly into
//! `[LOG_STD_MIN, LOG_STD_MAX]` so the map stays differentiable everywhere.

use std::sync::OnceLock;

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

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn squash_log_std(raw: f64) -> f64 {
    LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 − tanh²u)`, stable for large `|u|`.
fn log1m_tanh2(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Gauss-Hermite nodes and weights for `∫ e^{-x²} f(x) dx`.
fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(32))
}

fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-0.16667),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `E[tanh(μ + σ·ε)]` for `ε ~ N(0, 1)`.
pub fn squashed_mean(mean: f64, std: f64) -> f64 {
    let (x, w) = hermite_rule();
    let s = std::f64::consts::SQRT_2 * std;
    x.iter().zip(w).map(|(xi, wi)| wi * (mean + s * xi).tanh()).sum::<f64>() / std::f64::consts::PI.sqrt()
}

/// A reparameterized batch of actions drawn from the actor's output.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Builds `a = tanh(μ + σ·ε)` and `log π(a|s)` from actor outputs and fixed noise.
pub fn sample_policy(out: &[f64], eps: &[f64], batch: usize) -> PolicySample {
    let mut s = PolicySample {
        actions: vec![0.0; batch * ACT_DIM],
        log_probs: vec![0.0; batch],
        stds: vec![0.0; batch * ACT_DIM],
    };
    for b in 0..batch {
        let row = &out[b * 2 * ACT_DIM..(b + 1) * 2 * ACT_DIM];
        let mut lp = 0.0;
        for i in 0..ACT_DIM {
            let log_std = squash_log_std(row[ACT_DIM + i]);
            let std = log_std.exp();
            let e = eps[b * ACT_DIM + i];
            let u = row[i] + std * e;
            s.actions[b * ACT_DIM + i] = u.tanh();
            s.stds[b * ACT_DIM + i] = std;
            lp += -0.5 * e * e - log_std - HALF_LN_2PI - log1m_tanh2(u);
        }
        s.log_probs[b] = lp;
    }
    s
}

/// Actor objective `mean(α·log π(a|s) − min(Q1, Q2)(s, a))` for fixed noise
/// `eps`, with its gradient w.r.t. the actor parameters.
pub fn actor_loss_grad(
    actor: &Mlp,
    critic1: &Mlp,
    critic2: &Mlp,
    obs: &[f64],
    eps: &[f64],
    alpha: f64,
    batch: usize,
) -> Result<(f64, Vec<f64>, PolicySample)> {
    let obs_dim = actor.input_dim();
    let cache = actor.forward_batch(obs, batch)?;
    let out = cache.output();
    let sample = sample_policy(out, eps, batch);
    let x = critic_input(obs, &sample.actions, batch, obs_dim);
    let c1 = critic1.forward_batch(&x, batch)?;
    let c2 = critic2.forward_batch(&x, batch)?;
    let (q1, q2) = (c1.output(), c2.output());

    let mut pick1 = vec![0.0; batch];
    let mut pick2 = vec![0.0; batch];
    let mut loss = 0.0;
    for b in 0..batch {
        let q = if q1[b] <= q2[b] {
            pick1[b] = 1.0;
            q1[b]
        } else {
            pick2[b] = 1.0;
            q2[b]
        };
        loss += alpha * sample.log_probs[b] - q;
    }
    let n = batch as f64;
    let mut scratch = vec![0.0; critic1.n_params()];
    let dx1 = critic1.backward(&c1, &pick1, &mut scratch)?;
    let mut scratch = vec![0.0; critic2.n_params()];
    let dx2 = critic2.backward(&c2, &pick2, &mut scratch)?;

    let width = obs_dim + ACT_DIM;
    let mut out_grad = vec![0.0; batch * 2 * ACT_DIM];
    for b in 0..batch {
        let raw_row = &out[b * 2 * ACT_DIM..(b + 1) * 2 * ACT_DIM];
        for i in 0..ACT_DIM {
            let a = sample.actions[b * ACT_DIM + i];
            let std = sample.stds[b * ACT_DIM + i];
            let e = eps[b * ACT_DIM + i];
            let dq_da = dx1[b * width + obs_dim + i] + dx2[b * width + obs_dim + i];
            let dq_du = dq_da * (1.0 - a * a);
            // d log π / du through the squash correction is 2·tanh(u)
            let d_mean = alpha * 2.0 * a - dq_du;
            let d_log_std = alpha * (-1.0 + 2.0 * a * std * e) - dq_du * std * e;
            let t = raw_row[ACT_DIM + i].tanh();
            let d_raw = d_log_std * 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - t * t);
            out_grad[b * 2 * ACT_DIM + i] = d_mean / n;
            out_grad[b * 2 * ACT_DIM + ACT_DIM + i] = d_raw / n;
        }
    }
    let mut grads = vec![0.0; actor.n_params()];
    actor.backward(&cache, &out_grad, &mut grads)?;
    Ok((loss / n, grads, sample))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SacAgent {
    pub cfg: AgentConfig,
    pub gamma: f64,
    pub thrust_max: f64,
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_alpha: f64,
    actor_opt: Adam,
    critic1_opt: Adam,
    critic2_opt: Adam,
    alpha_opt: Adam,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
    pub updates: u64,
}

impl SacAgent {
    pub fn new(cfg: AgentConfig, obs_dim: usize, gamma: f64, thrust_max: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(2 * ACT_DIM);
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
            alpha_opt: Adam::new(1, cfg.lr),
            log_alpha: cfg.initial_alpha.ln(),
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
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn snapshot(&self) -> ActorSnapshot {
        ActorSnapshot::Sac {
            actor: self.actor.clone(),
            thrust_max: self.thrust_max,
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

    /// Mean policy entropy estimate `-E[log π(a|s)]` over a batch of observations.
    pub fn entropy_estimate(&mut self, obs: &[f64], batch: usize, draws: usize) -> Result<f64> {
        let cache = self.actor.forward_batch(obs, batch)?;
        let mut total = 0.0;
        for _ in 0..draws {
            let eps: Vec<f64> = (0..batch * ACT_DIM).map(|_| self.rng.sample(StandardNormal)).collect();
            let s = sample_policy(cache.output(), &eps, batch);
            total -= s.log_probs.iter().sum::<f64>();
        }
        Ok(total / (draws * batch) as f64)
    }

    /// Bellman targets `r + γ(1−d)(min Q̄(s', a') − α log π(a'|s'))`.
    pub fn critic_targets(&mut self, batch: &Batch) -> Result<Vec<f64>> {
        let n = batch.size;
        let cache = self.actor.forward_batch(&batch.next_obs, n)?;
        let eps: Vec<f64> = (0..n * ACT_DIM).map(|_| self.rng.sample(StandardNormal)).collect();
        let next = sample_policy(cache.output(), &eps, n);
        let x = critic_input(&batch.next_obs, &next.actions, n, batch.obs_dim);
        let t1 = self.target1.forward_batch(&x, n)?;
        let t2 = self.target2.forward_batch(&x, n)?;
        let alpha = self.alpha();
        Ok((0..n)
            .map(|b| {
                let soft = t1.output()[b].min(t2.output()[b]) - alpha * next.log_probs[b];
                batch.rewards[b] + self.gamma * (1.0 - batch.dones[b]) * soft
            })
            .collect())
    }

    /// One gradient step on both critics, the actor and the temperature, then
    /// Polyak-averages the target critics. On a non-finite loss every
    /// parameter is restored and an error returned.
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
        let n = batch.size;
        let targets = self.critic_targets(batch)?;

        let (l1, g1) = critic_loss_grad(&self.critic1, batch, &targets)?;
        let (l2, g2) = critic_loss_grad(&self.critic2, batch, &targets)?;
        if !(l1.is_finite() && l2.is_finite() && all_finite(&g1) && all_finite(&g2)) {
            return Err(Error::NonFiniteLoss(format!("critic (losses {l1}, {l2})")));
        }
        self.critic1_opt.update(self.critic1.params_mut(), &g1)?;
        self.critic2_opt.update(self.critic2.params_mut(), &g2)?;

        let alpha = self.alpha();
        let eps: Vec<f64> = (0..n * ACT_DIM).map(|_| self.rng.sample(StandardNormal)).collect();
        let (actor_loss, ga, sample) =
            actor_loss_grad(&self.actor, &self.critic1, &self.critic2, &batch.obs, &eps, alpha, n)?;
        if !(actor_loss.is_finite() && all_finite(&ga)) {
            return Err(Error::NonFiniteLoss(format!("actor (loss {actor_loss})")));
        }
        self.actor_opt.update(self.actor.params_mut(), &ga)?;

        let mean_log_prob = sample.log_probs.iter().sum::<f64>() / n as f64;
        let alpha_loss = -self.log_alpha * (mean_log_prob + self.cfg.target_entropy);
        if self.cfg.autotune_alpha {
            let grad = -(mean_log_prob + self.cfg.target_entropy);
            let mut p = [self.log_alpha];
            self.alpha_opt.update(&mut p, &[grad])?;
            self.log_alpha = p[0];
        }
        if !self.log_alpha.is_finite() {
            return Err(Error::NonFiniteLoss("temperature".into()));
        }

        soft_update(&mut self.target1, &self.critic1, self.cfg.tau)?;
        soft_update(&mut self.target2, &self.critic2, self.cfg.tau)?;
        self.updates += 1;

        Ok(LossReport {
            critic_loss: l1 + l2,
            actor_loss,
            alpha_loss,
            alpha: self.alpha(),
            entropy: -mean_log_prob,
        })
    }
}
