use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const ACT_DIM: usize = 2;

/// One environment transition with the action in normalized `[-1, 1]` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: [f64; ACT_DIM],
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// True only on termination (goal or collision), not on truncation.
    pub done: bool,
}

/// Row-major minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub obs_dim: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Result<Self> {
        let obs_dim = ts
            .first()
            .map(|t| t.obs.len())
            .ok_or_else(|| Error::Shape("empty batch".into()))?;
        let mut b = Batch {
            size: ts.len(),
            obs_dim,
            obs: Vec::with_capacity(ts.len() * obs_dim),
            actions: Vec::with_capacity(ts.len() * ACT_DIM),
            rewards: Vec::with_capacity(ts.len()),
            next_obs: Vec::with_capacity(ts.len() * obs_dim),
            dones: Vec::with_capacity(ts.len()),
        };
        for t in ts {
            if t.obs.len() != obs_dim || t.next_obs.len() != obs_dim {
                return Err(Error::Shape("inconsistent observation lengths in batch".into()));
            }
            b.obs.extend_from_slice(&t.obs);
            b.actions.extend_from_slice(&t.action);
            b.rewards.push(t.reward);
            b.next_obs.extend_from_slice(&t.next_obs);
            b.dones.push(if t.done { 1.0 } else { 0.0 });
        }
        Ok(b)
    }
}

/// Fixed-capacity ring buffer with its own seeded sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
    len: usize,
    head: usize,
    inserted: u64,
    #[serde(with = "super::rng_state")]
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, seed: u64) -> Self {
        Self {
            capacity,
            obs_dim,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
            len: 0,
            head: 0,
            inserted: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of transitions ever pushed, including overwritten ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.obs.len() != self.obs_dim || t.next_obs.len() != self.obs_dim {
            return Err(Error::Shape(format!(
                "transition observation length {} / {}, buffer expects {}",
                t.obs.len(),
                t.next_obs.len(),
                self.obs_dim
            )));
        }
        let d = self.obs_dim;
        if self.len < self.capacity {
            self.obs.extend_from_slice(&t.obs);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.dones.push(if t.done { 1.0 } else { 0.0 });
            self.len += 1;
        } else {
            let i = self.head;
            self.obs[i * d..(i + 1) * d].copy_from_slice(&t.obs);
            self.actions[i * ACT_DIM..(i + 1) * ACT_DIM].copy_from_slice(&t.action);
            self.rewards[i] = t.reward;
            self.next_obs[i * d..(i + 1) * d].copy_from_slice(&t.next_obs);
            self.dones[i] = if t.done { 1.0 } else { 0.0 };
        }
        self.head = (self.head + 1) % self.capacity;
        self.inserted += 1;
        Ok(())
    }

    /// Uniform sample with replacement.
    pub fn sample(&mut self, batch_size: usize) -> Result<Batch> {
        if self.len < batch_size || batch_size == 0 {
            return Err(Error::Usage(format!(
                "cannot sample {batch_size} from a buffer holding {}",
                self.len
            )));
        }
        let d = self.obs_dim;
        let mut b = Batch {
            size: batch_size,
            obs_dim: d,
            obs: Vec::with_capacity(batch_size * d),
            actions: Vec::with_capacity(batch_size * ACT_DIM),
            rewards: Vec::with_capacity(batch_size),
            next_obs: Vec::with_capacity(batch_size * d),
            dones: Vec::with_capacity(batch_size),
        };
        for _ in 0..batch_size {
            let i = self.rng.random_range(0..self.len);
            b.obs.extend_from_slice(&self.obs[i * d..(i + 1) * d]);
            b.actions
                .extend_from_slice(&self.actions[i * ACT_DIM..(i + 1) * ACT_DIM]);
            b.rewards.push(self.rewards[i]);
            b.next_obs.extend_from_slice(&self.next_obs[i * d..(i + 1) * d]);
            b.dones.push(self.dones[i]);
        }
        Ok(b)
    }
}
