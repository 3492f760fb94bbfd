//! Dense tanh networks with hand-written reverse mode and Adam.
//!
//! Parameters live in one flat vector, layer by layer: the `out × in`
//! row-major weight matrix followed by the `out` biases. Flat storage keeps
//! optimizer state, Polyak averaging and checkpoints trivial.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations of a batched forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    /// `acts[0]` is the input, `acts[L]` the linear output; hidden entries are post-tanh.
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache has at least the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Uniform fan-in initialisation, `U(-1/√in, 1/√in)` for weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            let n = w[0] * w[1] + w[1];
            for p in &mut net.params[off..off + n] {
                *p = rng.random_range(-bound..bound);
            }
            off += n;
        }
        Ok(net)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!(
                "network needs >= 2 non-zero layer sizes, got {sizes:?}"
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters for layer sizes {sizes:?}, expected {}",
                params.len(),
                net.params.len()
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Offsets of `(weights, biases)` for layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let cache = self.forward_batch(input, 1)?;
        Ok(cache.output().to_vec())
    }

    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<ForwardCache> {
        if input.len() != batch * self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {} for batch {batch} × {}",
                input.len(),
                self.input_dim()
            )));
        }
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(input.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let weights = &self.params[w_off..b_off];
            let bias = &self.params[b_off..b_off + n_out];
            let x = &acts[l];
            let mut y = vec![0.0; batch * n_out];
            let hidden = l + 1 < n_layers;
            for b in 0..batch {
                let xb = &x[b * n_in..(b + 1) * n_in];
                let yb = &mut y[b * n_out..(b + 1) * n_out];
                for (o, out) in yb.iter_mut().enumerate() {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + dot(row, xb);
                    *out = if hidden { z.tanh() } else { z };
                }
            }
            acts.push(y);
        }
        Ok(ForwardCache { batch, acts })
    }

    /// Reverse pass for the scalar `Σ output·out_grad`. Parameter gradients are
    /// accumulated into `grads`; the input gradient is returned.
    pub fn backward(&self, cache: &ForwardCache, out_grad: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        let batch = cache.batch;
        if out_grad.len() != batch * self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient of length {} for batch {batch} × {}",
                out_grad.len(),
                self.output_dim()
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "gradient buffer of length {}, expected {}",
                grads.len(),
                self.params.len()
            )));
        }
        let n_layers = self.sizes.len() - 1;
        let mut delta = out_grad.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let x = &cache.acts[l];
            let mut dx = vec![0.0; batch * n_in];
            {
                let (gw, rest) = grads[w_off..].split_at_mut(b_off - w_off);
                let gb = &mut rest[..n_out];
                let weights = &self.params[w_off..b_off];
                for b in 0..batch {
                    let xb = &x[b * n_in..(b + 1) * n_in];
                    let dxb = &mut dx[b * n_in..(b + 1) * n_in];
                    for o in 0..n_out {
                        let d = delta[b * n_out + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        axpy(d, xb, &mut gw[o * n_in..(o + 1) * n_in]);
                        axpy(d, &weights[o * n_in..(o + 1) * n_in], dxb);
                    }
                }
            }
            if l > 0 {
                // previous activation is tanh: d/dz = 1 - a²
                for (g, a) in dx.iter_mut().zip(&cache.acts[l]) {
                    *g *= 1.0 - a * a;
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Gradients of `output·out_grad` for a single input.
    pub fn gradients(&self, input: &[f64], out_grad: &[f64]) -> Result<Gradients> {
        let cache = self.forward_batch(input, 1)?;
        let mut params = vec![0.0; self.params.len()];
        let input = self.backward(&cache, out_grad, &mut params)?;
        Ok(Gradients { params, input })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * i + k] * b[4 * i + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn axpy(k: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

/// `target ← τ·online + (1−τ)·target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    if target.sizes != online.sizes {
        return Err(Error::Shape(format!(
            "soft update between {:?} and {:?}",
            target.sizes, online.sizes
        )));
    }
    for (t, o) in target.params.iter_mut().zip(&online.params) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One descent step on `params` along `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state for {} params got params {} / grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
