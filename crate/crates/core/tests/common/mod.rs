//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use edgesel::ddpg::{Activation, Mlp};
use edgesel::harness::RunConfig;
use ndarray::Array2;
use rand::Rng;

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn load_config(rel: &str) -> RunConfig {
    RunConfig::load(&repo_path(rel)).expect("bundled config parses")
}

/// Network with every parameter drawn from U(-1, 1), so that no layer is
/// near-degenerate the way a freshly initialised head is.
pub fn random_net<R: Rng>(dims: &[usize], acts: &[Activation], rng: &mut R) -> Mlp {
    let mut net = Mlp::zeros(dims, acts).unwrap();
    for layer in net.layers_mut() {
        layer.weights.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        layer.biases.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    net
}

/// L(net, x) = sum(c * net(x)).
fn weighted_output(net: &Mlp, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (net.forward(x.view()).unwrap() * c).sum()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na + nb < 1e-10 {
        diff
    } else {
        diff / (na + nb)
    }
}

/// Relative error between back-propagated and central-difference
/// gradients of `sum(c * net(x))`, for the parameters and for the input.
pub fn gradient_errors(net: &Mlp, x: &Array2<f64>, c: &Array2<f64>) -> (f64, f64) {
    const H: f64 = 1e-6;
    let mut tape = net.clone();
    tape.forward_cached(x.view()).unwrap();
    let (grads, dx) = tape.backward(c.view()).unwrap();

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut probe = net.clone();
    for k in 0..net.layers().len() {
        for idx in 0..net.layers()[k].weights.len() {
            let (r, col) = (idx / net.layers()[k].weights.ncols(), idx % net.layers()[k].weights.ncols());
            let orig = net.layers()[k].weights[[r, col]];
            probe.layers_mut()[k].weights[[r, col]] = orig + H;
            let up = weighted_output(&probe, x, c);
            probe.layers_mut()[k].weights[[r, col]] = orig - H;
            let down = weighted_output(&probe, x, c);
            probe.layers_mut()[k].weights[[r, col]] = orig;
            analytic.push(grads.weights[k][[r, col]]);
            numeric.push((up - down) / (2.0 * H));
        }
        for j in 0..net.layers()[k].biases.len() {
            let orig = net.layers()[k].biases[j];
            probe.layers_mut()[k].biases[j] = orig + H;
            let up = weighted_output(&probe, x, c);
            probe.layers_mut()[k].biases[j] = orig - H;
            let down = weighted_output(&probe, x, c);
            probe.layers_mut()[k].biases[j] = orig;
            analytic.push(grads.biases[k][j]);
            numeric.push((up - down) / (2.0 * H));
        }
    }
    let param_err = rel_err(&analytic, &numeric);

    let mut xa = Vec::new();
    let mut xn = Vec::new();
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (r, col) = (idx / x.ncols(), idx % x.ncols());
        let orig = x[[r, col]];
        xp[[r, col]] = orig + H;
        let up = weighted_output(net, &xp, c);
        xp[[r, col]] = orig - H;
        let down = weighted_output(net, &xp, c);
        xp[[r, col]] = orig;
        xa.push(dx[[r, col]]);
        xn.push((up - down) / (2.0 * H));
    }
    (param_err, rel_err(&xa, &xn))
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

/// True when some ReLU pre-activation sits within `tol` of its kink, where
/// finite differences are meaningless.
pub fn near_kink(net: &Mlp, x: &Array2<f64>, tol: f64) -> bool {
    let mut h = x.clone();
    for layer in net.layers() {
        let z = h.dot(&layer.weights) + &layer.biases;
        if layer.activation == Activation::Relu && z.iter().any(|v| v.abs() < tol) {
            return true;
        }
        h = match layer.activation {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Sigmoid => z.mapv(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Identity => z,
        };
    }
    false
}

/// Worst gradient error over `draws` random small actor-style networks
/// (ReLU hidden layers, sigmoid head) and critic-style networks (ReLU
/// hidden layers, linear scalar head), all widths at most 16.
pub fn gradient_suite<R: Rng>(draws: usize, rng: &mut R) -> (f64, f64) {
    let mut worst_actor: f64 = 0.0;
    let mut worst_critic: f64 = 0.0;
    for d in 0..draws {
        let critic = d % 2 == 1;
        let hidden = rng.random_range(1..=2);
        let mut dims = vec![rng.random_range(1..=16)];
        for _ in 0..hidden {
            dims.push(rng.random_range(1..=16));
        }
        dims.push(if critic { 1 } else { rng.random_range(1..=16) });
        let mut acts = vec![Activation::Relu; hidden];
        acts.push(if critic { Activation::Identity } else { Activation::Sigmoid });
        let net = random_net(&dims, &acts, rng);
        let batch = rng.random_range(1..=4);
        let mut x = random_matrix(batch, dims[0], -1.0, 1.0, rng);
        while near_kink(&net, &x, 1e-4) {
            x = random_matrix(batch, dims[0], -1.0, 1.0, rng);
        }
        let c = random_matrix(batch, *dims.last().unwrap(), -1.0, 1.0, rng);
        let (p, i) = gradient_errors(&net, &x, &c);
        let e = p.max(i);
        if critic {
            worst_critic = worst_critic.max(e);
        } else {
            worst_actor = worst_actor.max(e);
        }
    }
    (worst_actor, worst_critic)
}

/// Row-wise argmax by exhaustive comparison, lowest index on ties.
pub fn brute_argmax(m: &Array2<f64>) -> Vec<usize> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        let mut best = 0;
        for j in 0..m.ncols() {
            let beats_all = (0..m.ncols()).all(|k| m[[r, j]] >= m[[r, k]]);
            let first = (0..j).all(|k| m[[r, k]] < m[[r, j]]);
            if beats_all && first {
                best = j;
                break;
            }
        }
        out.push(best);
    }
    out
}

/// Least-loaded-first written from its description: vehicles decide in
/// index order; loads are recounted from the current assignment before each
/// decision; a vehicle keeps its AP when that AP is among the least loaded,
/// otherwise it moves to the lowest-indexed least-loaded AP.
pub fn brute_llf(n_aps: usize, prev: &[usize]) -> Vec<usize> {
    let mut assign = prev.to_vec();
    for i in 0..assign.len() {
        let loads: Vec<usize> = (0..n_aps)
            .map(|j| assign.iter().filter(|&&a| a == j).count())
            .collect();
        let min = *loads.iter().min().unwrap();
        if loads[assign[i]] != min {
            assign[i] = (0..n_aps).find(|&j| loads[j] == min).unwrap();
        }
    }
    assign
}

/// Pearson's chi-square statistic against a uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}
