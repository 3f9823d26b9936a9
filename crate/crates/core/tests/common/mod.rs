//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use qarch::agent::{Agent, AgentConfig, EpsilonSchedule, Transition};
use qarch::datasets::Dataset;
use qarch::nn::Mlp;
use qarch::optim::AdamConfig;
use qarch::qsim::{Axis, GateOp};
use qarch::rng::{seeded, standard_normal};
use qarch::vqc::{bce_mean, predict_prob, CircuitSpec};
use rand::{Rng, RngExt};

pub type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> Matrix {
    (0..dim).map(|i| (0..dim).map(|j| c(if i == j { 1.0 } else { 0.0 }, 0.0)).collect()).collect()
}

pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

pub fn matvec(a: &Matrix, v: &[Complex64]) -> Vec<Complex64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

/// Textbook single-qubit rotation `exp(-i angle P / 2)`.
pub fn rotation_matrix(axis: Axis, angle: f64) -> Matrix {
    let (co, si) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match axis {
        Axis::X => vec![vec![c(co, 0.0), c(0.0, -si)], vec![c(0.0, -si), c(co, 0.0)]],
        Axis::Y => vec![vec![c(co, 0.0), c(-si, 0.0)], vec![c(si, 0.0), c(co, 0.0)]],
        Axis::Z => vec![vec![c(co, -si), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, si)]],
    }
}

/// Full `2^n x 2^n` unitary of one gate, qubit 0 as the leftmost factor.
pub fn gate_unitary(gate: &GateOp, n: usize) -> Matrix {
    match *gate {
        GateOp::Rot { axis, qubit, angle } => {
            let mut u = identity(1);
            for q in 0..n {
                let f = if q == qubit { rotation_matrix(axis, angle) } else { identity(2) };
                u = kron(&u, &f);
            }
            u
        }
        GateOp::Cnot { control, target } => {
            // |0><0|_c (x) I + |1><1|_c (x) X_t
            let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
            let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
            let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
            let (mut a, mut b) = (identity(1), identity(1));
            for q in 0..n {
                let (fa, fb) = if q == control {
                    (p0.clone(), p1.clone())
                } else if q == target {
                    (identity(2), x.clone())
                } else {
                    (identity(2), identity(2))
                };
                a = kron(&a, &fa);
                b = kron(&b, &fb);
            }
            a.iter().zip(&b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect()).collect()
        }
    }
}

pub fn circuit_unitary(gates: &[GateOp], n: usize) -> Matrix {
    gates.iter().fold(identity(1 << n), |u, g| matmul(&gate_unitary(g, n), &u))
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> GateOp {
    if n >= 2 && rng.random_range(0..4) == 0 {
        let control = rng.random_range(0..n);
        let mut target = rng.random_range(0..n - 1);
        if target >= control {
            target += 1;
        }
        GateOp::cnot(control, target)
    } else {
        let axis = Axis::ALL[rng.random_range(0..3)];
        GateOp::Rot { axis, qubit: rng.random_range(0..n), angle: rng.random_range(-7.0..7.0) }
    }
}

pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, gates: usize) -> CircuitSpec {
    let mut circuit = CircuitSpec::new(n).unwrap();
    for _ in 0..gates {
        circuit.push_gate(random_gate(rng, n)).unwrap();
    }
    circuit
}

pub fn random_dataset<R: Rng>(rng: &mut R, n_features: usize, rows: usize) -> Dataset {
    let features = (0..rows).map(|_| (0..n_features).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels = (0..rows).map(|i| (i % 2) as u8).collect();
    Dataset::new(n_features, features, labels, 0).unwrap()
}

pub fn mean_loss(circuit: &CircuitSpec, data: &Dataset) -> f64 {
    let preds: Vec<f64> = data.features.iter().map(|x| predict_prob(circuit, x).unwrap()).collect();
    bce_mean(&data.labels, &preds)
}

/// Central finite differences of the mean BCE with respect to each angle.
pub fn finite_difference_grad(circuit: &CircuitSpec, data: &Dataset, h: f64) -> Vec<f64> {
    (0..circuit.n_params())
        .map(|j| {
            let mut plus = circuit.clone();
            plus.params_mut()[j] += h;
            let mut minus = circuit.clone();
            minus.params_mut()[j] -= h;
            (mean_loss(&plus, data) - mean_loss(&minus, data)) / (2.0 * h)
        })
        .collect()
}

/// Two-state deterministic chain. From s0, action 0 ends with 0.3 and
/// action 1 moves to s1 with 0; from s1, action 0 ends with 0 and action 1
/// ends with 1.
pub struct Chain;

impl Chain {
    pub const GAMMA: f64 = 0.9;

    pub fn obs(state: usize) -> Vec<f64> {
        match state {
            0 => vec![1.0, 0.0],
            1 => vec![0.0, 1.0],
            _ => vec![0.0, 0.0],
        }
    }

    /// `(next_state, reward, done)`; state 2 is terminal.
    pub fn step(state: usize, action: usize) -> (usize, f64, bool) {
        match (state, action) {
            (0, 0) => (2, 0.3, true),
            (0, _) => (1, 0.0, false),
            (1, 0) => (2, 0.0, true),
            _ => (2, 1.0, true),
        }
    }

    /// Greedy action per non-terminal state from value iteration.
    pub fn optimal_policy() -> [usize; 2] {
        let mut v = [0.0f64; 3];
        for _ in 0..100 {
            for s in 0..2 {
                v[s] = (0..2)
                    .map(|a| {
                        let (ns, r, done) = Self::step(s, a);
                        r + if done { 0.0 } else { Self::GAMMA * v[ns] }
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let q = |s: usize, a: usize| {
            let (ns, r, done) = Self::step(s, a);
            r + if done { 0.0 } else { Self::GAMMA * v[ns] }
        };
        [0, 1].map(|s| if q(s, 1) > q(s, 0) { 1 } else { 0 })
    }

    /// Random-behaviour rollouts with one learn call per step until
    /// `learn_calls` updates have run; returns the trained agent.
    pub fn train_agent(seed: u64, learn_calls: u64) -> Agent {
        let config = AgentConfig {
            n_step: 3,
            gamma: Self::GAMMA,
            batch_size: 32,
            learn_start: 32,
            target_sync: 50,
            replay_capacity: 4096,
            hidden: vec![32],
            negative_slope: 0.01,
            dropout: 0.0,
            adam: AdamConfig::with_lr(3e-3),
            epsilon: EpsilonSchedule { start: 1.0, end: 1.0, decay_steps: 0 },
        };
        let mut agent = Agent::new(config, 2, 2, 0.5, seed).unwrap();
        let mut episode = 0;
        while agent.learn_steps() < learn_calls {
            let mut s = 0;
            loop {
                let obs = Self::obs(s);
                let a = agent.act(&obs, 1.0).unwrap();
                let (ns, r, done) = Self::step(s, a);
                agent.observe(Transition {
                    state: obs,
                    action: a,
                    reward: r,
                    next_state: Self::obs(ns),
                    done,
                    episode,
                });
                agent.learn().unwrap();
                s = ns;
                if done {
                    break;
                }
            }
            episode += 1;
        }
        agent
    }

    pub fn greedy_policy(agent: &Agent) -> [usize; 2] {
        let mut rng = qarch::rng::seeded(0);
        [0, 1].map(|s| qarch::agent::select_action(agent.policy(), &Self::obs(s), 0.0, &mut rng).unwrap())
    }
}

/// Minimal XML well-formedness check: balanced, properly nested tags,
/// quoted attributes, a single root.
pub fn is_well_formed_xml(text: &str) -> bool {
    let mut stack: Vec<String> = Vec::new();
    let mut roots = 0;
    let mut rest = text.trim();
    while let Some(open) = rest.find('<') {
        if stack.is_empty() && !rest[..open].trim().is_empty() {
            return false;
        }
        let Some(close) = rest[open..].find('>') else { return false };
        let tag = &rest[open + 1..open + close];
        rest = &rest[open + close + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            if stack.pop().as_deref() != Some(name.trim()) {
                return false;
            }
            continue;
        }
        if !tag.matches('"').count().is_multiple_of(2) {
            return false;
        }
        let self_closing = tag.ends_with('/');
        let name = tag.trim_end_matches('/').split_whitespace().next().unwrap_or("").to_string();
        if name.is_empty() {
            return false;
        }
        if stack.is_empty() {
            roots += 1;
        }
        if !self_closing {
            stack.push(name);
        }
    }
    stack.is_empty() && roots == 1 && rest.trim().is_empty()
}

pub fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = seeded(seed);
    Array2::from_shape_simple_fn((rows, cols), || standard_normal(&mut rng))
}

fn perturbed(net: &Mlp, layer: usize, row: usize, col: Option<usize>, delta: f64) -> Mlp {
    let mut layers = net.layers().to_vec();
    match col {
        Some(c) => layers[layer].weight[[row, c]] += delta,
        None => layers[layer].bias[row] += delta,
    }
    Mlp::from_layers(layers, 0.01, net.dropout()).unwrap()
}

/// Max relative error `|a - n| / max(|a|, |n|, 1e-6)` between backprop and
/// central differences (h = 1e-4) over every weight and bias of a 3-layer
/// net with dropout off. Residuals span both Smooth-L1 branches.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = seeded(seed);
    let net = Mlp::new(&[5, 7, 6, 4], 0.01, 0.0, &mut rng).unwrap();
    let inputs = random_batch(8, 5, seed + 100);
    let actions: Vec<usize> = (0..8).map(|i| i % 4).collect();
    let out = net.predict_batch(&inputs).unwrap();
    let mut targets: Vec<f64> = (0..8).map(|i| out[[i, actions[i]]] + 0.3 * standard_normal(&mut rng)).collect();
    targets[0] += 5.0;
    targets[5] -= 5.0;
    let (_, grads) = net.gradients(&inputs, &actions, &targets, &mut rng).unwrap();
    let h = 1e-4;
    let mut loss = |n: &Mlp| n.gradients(&inputs, &actions, &targets, &mut rng).unwrap().0;
    let mut worst = 0.0f64;
    for (l, layer) in net.layers().iter().enumerate() {
        let (rows, cols) = layer.weight.dim();
        for i in 0..rows {
            for j in (0..cols).map(Some).chain([None]) {
                let analytic = match j {
                    Some(j) => grads[l].weight[[i, j]],
                    None => grads[l].bias[i],
                };
                let numeric = (loss(&perturbed(&net, l, i, j, h)) - loss(&perturbed(&net, l, i, j, -h))) / (2.0 * h);
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
    }
    worst
}
