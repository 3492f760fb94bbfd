//! Network forward passes against a scalar reimplementation, and all
//! reverse-mode gradients against central finite differences.

use portnav::agents::{Agent, AgentConfig, Algorithm};
use portnav::nn::{Adam, Mlp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

/// Forward pass written directly from the documented parameter layout.
fn naive_forward(sizes: &[usize], params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut x = input.to_vec();
    let mut k = 0;
    for l in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[k..k + n_in * n_out];
        let b = &params[k + n_in * n_out..k + n_in * n_out + n_out];
        k += n_in * n_out + n_out;
        let mut y = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let mut z = b[o];
            for i in 0..n_in {
                z += w[o * n_in + i] * x[i];
            }
            y.push(if l + 2 < sizes.len() { z.tanh() } else { z });
        }
        x = y;
    }
    x
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

fn scalar_out(net: &Mlp, input: &[f64], w: &[f64]) -> f64 {
    net.forward(input).unwrap().iter().zip(w).map(|(o, g)| o * g).sum()
}

/// Max relative error between analytic and central-difference gradients of
/// `Σ out·w`, over the given parameter indices and every input coordinate.
fn check_gradients(net: &Mlp, input: &[f64], w: &[f64], indices: &[usize]) -> f64 {
    let g = net.gradients(input, w).unwrap();
    let mut worst = 0.0f64;
    for &i in indices {
        let mut p = net.clone();
        p.params_mut()[i] += H;
        let mut m = net.clone();
        m.params_mut()[i] -= H;
        let fd = (scalar_out(&p, input, w) - scalar_out(&m, input, w)) / (2.0 * H);
        worst = worst.max(rel_err(fd, g.params[i]));
    }
    for i in 0..input.len() {
        let mut xp = input.to_vec();
        xp[i] += H;
        let mut xm = input.to_vec();
        xm[i] -= H;
        let fd = (scalar_out(net, &xp, w) - scalar_out(net, &xm, w)) / (2.0 * H);
        worst = worst.max(rel_err(fd, g.input[i]));
    }
    worst
}

#[test]
fn forward_matches_scalar_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let depth = rng.random_range(2..5);
        let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..12)).collect();
        let net = Mlp::new(&sizes, &mut rng).unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = net.forward(&x).unwrap();
        let want = naive_forward(&sizes, net.params(), &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12, "{g} vs {w}");
        }
    }
}

#[test]
fn random_small_nets_pass_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let depth = rng.random_range(2..5);
        let sizes: Vec<usize> = (0..depth).map(|_| rng.random_range(1..9)).collect();
        let net = Mlp::new(&sizes, &mut rng).unwrap();
        let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.5..1.5)).collect();
        let w: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let all: Vec<usize> = (0..net.n_params()).collect();
        let err = check_gradients(&net, &x, &w, &all);
        assert!(err < 1e-4, "sizes {sizes:?}: max relative error {err}");
    }
}

fn agent_nets(cfg: &AgentConfig, obs_dim: usize) -> Vec<(String, Mlp)> {
    let agent = Agent::new(cfg, obs_dim, 0.99, 400_000.0, 3).unwrap();
    match agent {
        Agent::Sac(a) => vec![
            ("sac actor".into(), a.actor),
            ("sac critic1".into(), a.critic1),
            ("sac critic2".into(), a.critic2),
        ],
        Agent::Baseline(a) => vec![
            ("baseline actor".into(), a.actor),
            ("baseline critic1".into(), a.critic1),
            ("baseline critic2".into(), a.critic2),
        ],
    }
}

#[test]
fn every_agent_network_passes_gradient_check() {
    let obs_dim = 36;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for algorithm in [Algorithm::Sac, Algorithm::Baseline] {
        // Every parameter of the reduced-width nets, and a random subset of the full-width ones.
        for (hidden, sample) in [(vec![16, 16], None), (vec![256, 256], Some(400))] {
            let cfg = AgentConfig {
                algorithm,
                hidden,
                ..AgentConfig::default()
            };
            for (name, net) in agent_nets(&cfg, obs_dim) {
                let x: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let w: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let idx: Vec<usize> = match sample {
                    None => (0..net.n_params()).collect(),
                    Some(k) => (0..k).map(|_| rng.random_range(0..net.n_params())).collect(),
                };
                let err = check_gradients(&net, &x, &w, &idx);
                assert!(err < 1e-4, "{name} {:?}: max relative error {err}", net.sizes());
            }
        }
    }
}

#[test]
fn first_adam_step_is_bounded_by_learning_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let lr = 1e-3;
    let mut params: Vec<f64> = (0..100).map(|_| rng.random_range(-1.0..1.0)).collect();
    let before = params.clone();
    let grads: Vec<f64> = (0..100).map(|_| rng.random_range(-10.0..10.0)).collect();
    let mut adam = Adam::new(100, lr);
    adam.update(&mut params, &grads).unwrap();
    for ((p, b), g) in params.iter().zip(&before).zip(&grads) {
        let d = p - b;
        assert!(d.abs() <= lr * (1.0 + 1e-8));
        assert!(d * g <= 0.0);
    }
}

proptest! {
    #[test]
    fn zero_output_gradient_gives_zero_gradients(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, c in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::new(&[a, b, c], &mut rng).unwrap();
        let x: Vec<f64> = (0..a).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = net.gradients(&x, &vec![0.0; c]).unwrap();
        prop_assert!(g.params.iter().chain(&g.input).all(|v| *v == 0.0));
    }

    #[test]
    fn same_seed_same_network(seed in any::<u64>()) {
        let a = Mlp::new(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let b = Mlp::new(&[4, 8, 2], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(a, b);
    }
}
