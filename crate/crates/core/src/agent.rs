//! N-step Double DQN: epsilon-greedy acting, uniform experience replay,
//! bootstrapped targets that select with the policy net and evaluate with the
//! target net, periodic target sync, and the adaptive target/epsilon rules.

use std::collections::VecDeque;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{QasError, Result};
use crate::nn::{Mlp, Mode};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{seeded, uniform, SeededRng};

/// Discount that shrinks a reward by a factor 0.005 over a full gate budget.
pub fn gamma_for_budget(max_gates: usize) -> f64 {
    0.005f64.powf(1.0 / max_gates as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    /// Episode tag; N-step slices never span two tags.
    pub episode: u64,
}

/// Fixed-capacity FIFO of transitions in insertion order.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(QasError::Config("replay capacity must be >= 1".into()));
        }
        Ok(ReplayBuffer { capacity, items: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Up to `n` consecutive transitions starting at `start`, cut after a
    /// terminal step or where the episode tag changes.
    pub fn nstep_slice(&self, start: usize, n: usize) -> Vec<&Transition> {
        let mut out = Vec::with_capacity(n);
        let Some(first) = self.items.get(start) else {
            return out;
        };
        for t in self.items.range(start..).take(n) {
            if t.episode != first.episode {
                break;
            }
            out.push(t);
            if t.done {
                break;
            }
        }
        out
    }
}

/// Epsilon-greedy choice; greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(net: &Mlp, observation: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    if uniform(rng) < epsilon {
        return Ok(rng.random_range(0..net.output_dim()));
    }
    Ok(argmax(&net.predict(observation)?))
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// `sum_k gamma^k r_k + gamma^K Q_target(s_K, argmax_a Q_policy(s_K, a))`
/// per slice, with `K = min(n, len)`; no bootstrap after a terminal step.
pub fn compute_nstep_targets(
    slices: &[Vec<&Transition>],
    policy: &Mlp,
    target: &Mlp,
    gamma: f64,
    n: usize,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(QasError::Config("n-step horizon must be >= 1".into()));
    }
    let mut values = Vec::with_capacity(slices.len());
    let mut bootstrap = Vec::new();
    for (i, slice) in slices.iter().enumerate() {
        if slice.is_empty() {
            return Err(QasError::Input(format!("n-step slice {i} is empty")));
        }
        let used = &slice[..slice.len().min(n)];
        let mut discount = 1.0;
        let mut total = 0.0;
        for t in used {
            total += discount * t.reward;
            discount *= gamma;
        }
        let last = used[used.len() - 1];
        if !last.done {
            bootstrap.push((i, discount, &last.next_state));
        }
        values.push(total);
    }
    if !bootstrap.is_empty() {
        let width = policy.input_dim();
        let mut states = Array2::zeros((bootstrap.len(), width));
        for (row, (_, _, s)) in bootstrap.iter().enumerate() {
            if s.len() != width {
                return Err(QasError::Shape(format!("state of length {} for a {width}-input net", s.len())));
            }
            states.row_mut(row).assign(&ndarray::ArrayView1::from(s.as_slice()));
        }
        let q_policy = policy.predict_batch(&states)?;
        let q_target = target.predict_batch(&states)?;
        for (row, &(i, discount, _)) in bootstrap.iter().enumerate() {
            let best = argmax(q_policy.row(row).as_slice().expect("standard layout"));
            values[i] += discount * q_target[[row, best]];
        }
    }
    Ok(values)
}

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { start: 1.0, end: 0.1, decay_steps: 10_000 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64) -> f64 {
        if self.decay_steps == 0 || step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + frac * (self.end - self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Train,
    Test,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub accuracy: f64,
    pub success: bool,
}

pub const TRAIN_WINDOW: usize = 12;
pub const TRAIN_WINDOW_SUCCESSES: usize = 10;
pub const TEST_STREAK: usize = 5;
pub const TARGET_STEP: f64 = 0.01;
pub const TARGET_CAP: f64 = 0.99;
pub const EPSILON_CUT: f64 = 0.95;

/// Adaptive target accuracy and the multiplicative epsilon scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub y_target: f64,
    /// Product of all epsilon cuts so far; multiplies the linear schedule.
    pub epsilon_scale: f64,
    pub train_window: VecDeque<bool>,
    pub test_streak: usize,
}

impl AdaptiveState {
    pub fn new(y_target: f64) -> Self {
        AdaptiveState { y_target, epsilon_scale: 1.0, train_window: VecDeque::new(), test_streak: 0 }
    }

    pub fn epsilon(&self, schedule_value: f64) -> f64 {
        schedule_value * self.epsilon_scale
    }

    fn raise_target(&mut self) {
        // Rounded so repeated increments stay on the 0.01 grid.
        let raised = ((self.y_target + TARGET_STEP) * 1e9).round() / 1e9;
        self.y_target = raised.min(TARGET_CAP).max(self.y_target);
    }

    /// Applies one episode outcome; returns true when `y_target` was raised.
    pub fn update(&mut self, phase: Phase, outcome: EpisodeOutcome) -> bool {
        let before = self.y_target;
        match phase {
            Phase::Train => {
                self.train_window.push_back(outcome.success);
                if self.train_window.len() > TRAIN_WINDOW {
                    self.train_window.pop_front();
                }
                if self.train_window.iter().filter(|&&s| s).count() >= TRAIN_WINDOW_SUCCESSES {
                    self.raise_target();
                    self.train_window.clear();
                }
            }
            Phase::Test => {
                if outcome.accuracy >= self.y_target {
                    self.test_streak += 1;
                } else {
                    self.test_streak = 0;
                }
                if self.test_streak >= TEST_STREAK {
                    self.raise_target();
                    self.epsilon_scale *= EPSILON_CUT;
                    self.test_streak = 0;
                }
            }
        }
        self.y_target > before
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub n_step: usize,
    pub gamma: f64,
    pub batch_size: usize,
    pub learn_start: usize,
    pub target_sync: u64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    pub negative_slope: f64,
    pub dropout: f64,
    pub adam: AdamConfig,
    pub epsilon: EpsilonSchedule,
}

impl AgentConfig {
    pub fn for_budget(max_gates: usize) -> Self {
        AgentConfig {
            n_step: 3,
            gamma: gamma_for_budget(max_gates),
            batch_size: 64,
            learn_start: 1000,
            target_sync: 512,
            replay_capacity: 16384,
            hidden: vec![128, 128],
            negative_slope: 0.01,
            dropout: 0.1,
            adam: AdamConfig::with_lr(1e-4),
            epsilon: EpsilonSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    config: AgentConfig,
    policy: Mlp,
    target: Mlp,
    adam: Adam,
    adaptive: AdaptiveState,
    rng: SeededRng,
    env_steps: u64,
    learn_steps: u64,
}

const CHECKPOINT_VERSION: u32 = 1;

pub struct Agent {
    config: AgentConfig,
    policy: Mlp,
    target: Mlp,
    adam: Adam,
    replay: ReplayBuffer,
    pub adaptive: AdaptiveState,
    rng: SeededRng,
    env_steps: u64,
    learn_steps: u64,
}

impl Agent {
    pub fn new(config: AgentConfig, obs_dim: usize, n_actions: usize, y_target: f64, seed: u64) -> Result<Self> {
        if config.batch_size == 0 || config.n_step == 0 || config.target_sync == 0 {
            return Err(QasError::Config("batch_size, n_step and target_sync must be >= 1".into()));
        }
        if !(config.gamma > 0.0 && config.gamma <= 1.0) {
            return Err(QasError::Config(format!("gamma must be in (0, 1], got {}", config.gamma)));
        }
        let mut rng = seeded(seed);
        let mut sizes = vec![obs_dim];
        sizes.extend(&config.hidden);
        sizes.push(n_actions);
        let mut policy = Mlp::new(&sizes, config.negative_slope, config.dropout, &mut rng)?;
        policy.set_mode(Mode::Training);
        let mut target = policy.clone();
        target.set_mode(Mode::Inference);
        let adam = policy.adam(config.adam);
        Ok(Agent {
            replay: ReplayBuffer::new(config.replay_capacity)?,
            config,
            policy,
            target,
            adam,
            adaptive: AdaptiveState::new(y_target),
            rng,
            env_steps: 0,
            learn_steps: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn policy(&self) -> &Mlp {
        &self.policy
    }

    pub fn policy_mut(&mut self) -> &mut Mlp {
        &mut self.policy
    }

    pub fn target(&self) -> &Mlp {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn learn_steps(&self) -> u64 {
        self.learn_steps
    }

    /// Exploration rate for the next training step.
    pub fn epsilon(&self) -> f64 {
        self.adaptive.epsilon(self.config.epsilon.value(self.env_steps))
    }

    pub fn act(&mut self, observation: &[f64], epsilon: f64) -> Result<usize> {
        select_action(&self.policy, observation, epsilon, &mut self.rng)
    }

    /// Stores a training transition and advances the global step.
    pub fn observe(&mut self, t: Transition) {
        self.replay.push(t);
        self.env_steps += 1;
    }

    /// One gradient step on a uniform minibatch; `None` during warm-up.
    pub fn learn(&mut self) -> Result<Option<f64>> {
        let needed = self.config.batch_size.max(self.config.learn_start);
        if self.replay.len() < needed {
            return Ok(None);
        }
        let batch = self.config.batch_size;
        let starts: Vec<usize> = (0..batch).map(|_| self.rng.random_range(0..self.replay.len())).collect();
        let slices: Vec<Vec<&Transition>> =
            starts.iter().map(|&i| self.replay.nstep_slice(i, self.config.n_step)).collect();
        let targets =
            compute_nstep_targets(&slices, &self.policy, &self.target, self.config.gamma, self.config.n_step)?;
        let width = self.policy.input_dim();
        let mut inputs = Array2::zeros((batch, width));
        let mut actions = Vec::with_capacity(batch);
        for (row, slice) in slices.iter().enumerate() {
            inputs.row_mut(row).assign(&ndarray::ArrayView1::from(slice[0].state.as_slice()));
            actions.push(slice[0].action);
        }
        let loss = self.policy.train_step(&mut self.adam, &inputs, &actions, &targets, &mut self.rng)?;
        self.learn_steps += 1;
        if self.learn_steps.is_multiple_of(self.config.target_sync) {
            self.sync_target()?;
        }
        Ok(Some(loss))
    }

    pub fn sync_target(&mut self) -> Result<()> {
        self.target.copy_params_from(&self.policy)
    }

    /// JSON snapshot of nets, optimizer, adaptive state, RNG and counters.
    /// The replay buffer is not included.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            policy: self.policy.clone(),
            target: self.target.clone(),
            adam: self.adam.clone(),
            adaptive: self.adaptive.clone(),
            rng: self.rng.clone(),
            env_steps: self.env_steps,
            learn_steps: self.learn_steps,
        };
        let text = serde_json::to_string(&ck).map_err(|e| QasError::parse(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| QasError::io(path, e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QasError::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| QasError::parse(path, e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(QasError::parse(path, format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(Agent {
            replay: ReplayBuffer::new(ck.config.replay_capacity)?,
            config: ck.config,
            policy: ck.policy,
            target: ck.target,
            adam: ck.adam,
            adaptive: ck.adaptive,
            rng: ck.rng,
            env_steps: ck.env_steps,
            learn_steps: ck.learn_steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use ndarray::Array1;

    fn tr(reward: f64, done: bool, episode: u64) -> Transition {
        Transition { state: vec![0.0], action: 0, reward, next_state: vec![1.0], done, episode }
    }

    /// One-input net whose output is `bias` regardless of input.
    fn constant_net(bias: Vec<f64>) -> Mlp {
        let n = bias.len();
        let layer = Dense { weight: Array2::zeros((n, 1)), bias: Array1::from(bias) };
        Mlp::from_layers(vec![layer], 0.01, 0.0).unwrap()
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_for_budget(20) - 0.76729).abs() < 1e-4);
        assert!((gamma_for_budget(25) - 0.80902).abs() < 1e-4);
    }

    #[test]
    fn nstep_examples() {
        let net = constant_net(vec![0.0, 0.0]);
        let a = tr(2.0, true, 0);
        assert_eq!(compute_nstep_targets(&[vec![&a]], &net, &net, 0.9, 1).unwrap(), vec![2.0]);

        let (r1, r2, r3) = (tr(1.0, false, 0), tr(1.0, false, 0), tr(1.0, true, 0));
        let t = compute_nstep_targets(&[vec![&r1, &r2, &r3]], &net, &net, 0.5, 3).unwrap();
        assert!((t[0] - 1.75).abs() < 1e-12);

        let policy = constant_net(vec![0.0, 5.0, 1.0]);
        let target = constant_net(vec![9.0, 4.0, 7.0]);
        let (z1, z2) = (tr(0.0, false, 0), tr(0.0, false, 0));
        let t = compute_nstep_targets(&[vec![&z1, &z2]], &policy, &target, 0.5, 2).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-12);
        assert!(compute_nstep_targets(&[vec![]], &policy, &target, 0.5, 2).is_err());
    }

    #[test]
    fn slices_stop_at_episode_and_terminal() {
        let mut buf = ReplayBuffer::new(10).unwrap();
        for (r, d, e) in [(1.0, false, 0), (2.0, true, 0), (3.0, false, 1), (4.0, false, 2)] {
            buf.push(tr(r, d, e));
        }
        assert_eq!(buf.nstep_slice(0, 3).len(), 2);
        assert_eq!(buf.nstep_slice(2, 3).len(), 1);
        assert_eq!(buf.nstep_slice(3, 3).len(), 1);
        assert!(buf.nstep_slice(9, 3).is_empty());
    }

    #[test]
    fn replay_evicts_oldest() {
        let mut buf = ReplayBuffer::new(4).unwrap();
        for i in 0..7 {
            buf.push(tr(i as f64, false, 0));
        }
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn epsilon_schedule_points() {
        let s = EpsilonSchedule::default();
        assert_eq!(s.value(0), 1.0);
        assert!((s.value(5_000) - 0.55).abs() < 1e-12);
        assert_eq!(s.value(10_000), 0.1);
        assert_eq!(s.value(50_000), 0.1);
    }

    #[test]
    fn adaptive_examples() {
        let ok = EpisodeOutcome { accuracy: 0.9, success: true };
        let bad = EpisodeOutcome { accuracy: 0.5, success: false };

        let mut a = AdaptiveState::new(0.80);
        for o in [bad; 2].into_iter().chain([ok; 10]) {
            a.update(Phase::Train, o);
        }
        assert_eq!(a.y_target, 0.81);
        assert!(a.train_window.is_empty());

        let mut a = AdaptiveState::new(0.80);
        for o in [bad; 3].into_iter().chain([ok; 9]) {
            a.update(Phase::Train, o);
        }
        assert_eq!(a.y_target, 0.80);
        assert_eq!(a.train_window.len(), 12);

        let mut a = AdaptiveState::new(0.80);
        for _ in 0..4 {
            assert!(!a.update(Phase::Test, ok));
        }
        assert!(a.update(Phase::Test, ok));
        assert!((a.epsilon(0.40) - 0.38).abs() < 1e-12);
        assert_eq!(a.y_target, 0.81);
        assert_eq!(a.test_streak, 0);
    }

    #[test]
    fn target_is_capped() {
        let mut a = AdaptiveState::new(0.985);
        let ok = EpisodeOutcome { accuracy: 1.0, success: true };
        for _ in 0..20 {
            a.update(Phase::Test, ok);
        }
        assert_eq!(a.y_target, TARGET_CAP);
    }

    #[test]
    fn greedy_ties_take_lowest_index() {
        let net = constant_net(vec![1.0, 3.0, 3.0]);
        let mut rng = seeded(0);
        assert_eq!(select_action(&net, &[0.0], 0.0, &mut rng).unwrap(), 1);
    }
}
