//! Deep Q-learning with experience replay and a periodically synced target.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, AdamState, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub training_episodes: usize,
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub grad_clip: f64,
    pub warmup_episodes: usize,
    pub train_interval_episodes: usize,
    pub target_update_interval_episodes: usize,
    pub discount: f64,
    pub train_steps_per_event: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            training_episodes: 50_000,
            learning_rate: 1e-3,
            adam_epsilon: 1e-3,
            epsilon_min: 0.015,
            epsilon_max: 1.0,
            buffer_capacity: 200_000,
            batch_size: 64,
            grad_clip: 25.0,
            warmup_episodes: 5_000,
            train_interval_episodes: 4,
            target_update_interval_episodes: 200,
            discount: 1.0,
            train_steps_per_event: 1,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.warmup_episodes >= self.training_episodes {
            return fail(format!(
                "dqn warmup ({}) must be shorter than training ({})",
                self.warmup_episodes, self.training_episodes
            ));
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= self.epsilon_max && self.epsilon_max <= 1.0) {
            return fail(format!("dqn epsilon range ({}, {}) is invalid", self.epsilon_min, self.epsilon_max));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return fail("dqn buffer must hold at least one batch".into());
        }
        if self.train_interval_episodes == 0 || self.target_update_interval_episodes == 0 {
            return fail("dqn intervals must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.adam_epsilon > 0.0 && self.grad_clip > 0.0) {
            return fail("dqn learning rate, adam epsilon and clip must be positive".into());
        }
        Ok(())
    }
}

/// Exploration rate at episode `e`, decaying exponentially from
/// `epsilon_max` to `epsilon_min` at the last episode.
pub fn epsilon_at(e: usize, cfg: &DqnConfig) -> f64 {
    let frac = (e.min(cfg.training_episodes)) as f64 / cfg.training_episodes as f64;
    cfg.epsilon_max * (cfg.epsilon_min / cfg.epsilon_max).powf(frac)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    /// Normalized reward.
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer needs positive capacity");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Stored transitions from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform sample of distinct transitions; fewer if the buffer is short.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&Transition> {
        let amount = batch.min(self.items.len());
        sample(rng, self.items.len(), amount).into_iter().map(|i| &self.items[i]).collect()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action from the Q-network.
pub fn dqn_act<R: Rng + ?Sized>(net: &Mlp, obs: &[f64], epsilon: f64, rng: &mut R) -> Result<usize> {
    let q = net.forward_one(obs)?;
    if rng.gen::<f64>() < epsilon {
        Ok(rng.gen_range(0..q.len()))
    } else {
        Ok(argmax(&q))
    }
}

/// One gradient step on the mean squared temporal-difference error.
/// Returns the loss before the step.
pub fn dqn_train_step(
    online: &mut Mlp,
    target: &Mlp,
    adam: &mut AdamState,
    batch: &[&Transition],
    cfg: &DqnConfig,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let b = batch.len();
    let dim = online.input_dim();
    let rows = |f: &dyn Fn(&Transition) -> &[f64]| -> Result<Array2<f64>> {
        let mut flat = Vec::with_capacity(b * dim);
        for t in batch {
            let row = f(t);
            if row.len() != dim {
                return Err(Error::ShapeMismatch(format!("observation of length {}, expected {dim}", row.len())));
            }
            flat.extend_from_slice(row);
        }
        Ok(Array2::from_shape_vec((b, dim), flat).expect("sized above"))
    };
    let obs = rows(&|t| &t.obs)?;
    let next = rows(&|t| &t.next_obs)?;
    let next_q = target.forward(next.view())?;
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                let row = next_q.row(i);
                t.reward + cfg.discount * row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect();
    let (loss, mut grads) = online.gradients(obs.view(), |q| {
        let mut grad = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (i, t) in batch.iter().enumerate() {
            if t.action >= q.ncols() {
                return Err(Error::InvalidAction { action: t.action, grid_len: q.ncols() });
            }
            let err = q[[i, t.action]] - targets[i];
            loss += err * err;
            grad[[i, t.action]] = 2.0 * err / b as f64;
        }
        Ok((loss / b as f64, grad))
    })?;
    clip_global_norm(&mut [&mut grads], cfg.grad_clip);
    adam.adam_step(online, &grads);
    Ok(loss)
}

/// Online and target Q-networks with their optimizer and replay memory.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: Mlp,
    pub target: Mlp,
    pub adam: AdamState,
    pub buffer: ReplayBuffer,
    pub cfg: DqnConfig,
}

impl DqnAgent {
    pub fn new(obs_dim: usize, actions: usize, cfg: DqnConfig, init_seed: u64) -> Self {
        let online = Mlp::init(obs_dim, actions, init_seed);
        let adam = AdamState::new(&online, cfg.learning_rate, cfg.adam_epsilon);
        Self { target: online.clone(), adam, buffer: ReplayBuffer::new(cfg.buffer_capacity), online, cfg }
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Runs the configured number of gradient steps on fresh samples; returns
    /// the mean loss, or `None` if the buffer cannot fill a batch yet.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        if self.buffer.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let mut total = 0.0;
        for _ in 0..self.cfg.train_steps_per_event {
            let batch = self.buffer.sample(self.cfg.batch_size, rng);
            total += dqn_train_step(&mut self.online, &self.target, &mut self.adam, &batch, &self.cfg)?;
        }
        Ok(Some(total / self.cfg.train_steps_per_event.max(1) as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_schedule() {
        let cfg = DqnConfig::default();
        assert_eq!(epsilon_at(0, &cfg), 1.0);
        assert!((epsilon_at(50_000, &cfg) - 0.015).abs() < 1e-15);
        assert!((epsilon_at(25_000, &cfg) - 0.015f64.sqrt()).abs() < 1e-12);
        assert!((epsilon_at(25_000, &cfg) - 0.1225).abs() < 1e-4);
        let mut prev = f64::INFINITY;
        for e in (0..=50_000).step_by(500) {
            let v = epsilon_at(e, &cfg);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn config_checks() {
        assert!(DqnConfig::default().validate().is_ok());
        let bad = DqnConfig { warmup_episodes: 50_000, ..DqnConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = DqnConfig { buffer_capacity: 10, ..DqnConfig::default() };
        assert!(bad.validate().is_err());
    }

    fn transition(tag: f64) -> Transition {
        Transition { obs: vec![tag], action: 0, reward: tag, next_obs: vec![tag], terminal: true }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..7 {
            buf.push(transition(i as f64));
        }
        assert_eq!(buf.len(), 4);
        let kept: Vec<f64> = buf.iter_oldest_first().map(|t| t.reward).collect();
        assert_eq!(kept, vec![3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn sampling_is_without_replacement() {
        let mut buf = ReplayBuffer::new(100);
        for i in 0..100 {
            buf.push(transition(i as f64));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample(64, &mut rng);
        let mut tags: Vec<i64> = batch.iter().map(|t| t.reward as i64).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 64);
    }

    #[test]
    fn acting_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flat = Mlp::init(3, 15, 0).zeros_like();
        assert_eq!(dqn_act(&flat, &[0.1, 0.2, 0.3], 0.0, &mut rng).unwrap(), 0);
        let net = Mlp::init(3, 15, 1);
        let q = net.forward_one(&[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(dqn_act(&net, &[0.1, 0.2, 0.3], 0.0, &mut rng).unwrap(), argmax(&q));
        let mut counts = [0usize; 15];
        for _ in 0..15_000 {
            counts[dqn_act(&net, &[0.1, 0.2, 0.3], 1.0, &mut rng).unwrap()] += 1;
        }
        assert!(counts.iter().all(|c| (800..1200).contains(c)), "{counts:?}");
    }

    #[test]
    fn argmax_shift_invariant() {
        let q = [0.3, 1.2, -0.5, 1.2];
        let shifted: Vec<f64> = q.iter().map(|v| v + 7.5).collect();
        assert_eq!(argmax(&q), 1);
        assert_eq!(argmax(&shifted), 1);
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let cfg = DqnConfig { batch_size: 2, ..DqnConfig::default() };
        // zero network: Q = 0, so loss equals the mean squared reward
        let mut online = Mlp::init(1, 2, 0).zeros_like();
        let target = Mlp::init(1, 2, 9);
        let mut adam = AdamState::new(&online, 1e-3, 1e-3);
        let a = transition(0.5);
        let b = Transition { action: 1, ..transition(0.25) };
        let loss = dqn_train_step(&mut online, &target, &mut adam, &[&a, &b], &cfg).unwrap();
        assert!((loss - (0.25 + 0.0625) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_has_zero_loss() {
        let cfg = DqnConfig { batch_size: 1, ..DqnConfig::default() };
        let mut online = Mlp::init(1, 2, 0).zeros_like();
        let target = online.clone();
        let before = online.clone();
        let mut adam = AdamState::new(&online, 1e-3, 1e-3);
        let t = Transition { obs: vec![1.0], action: 0, reward: 0.0, next_obs: vec![1.0], terminal: false };
        let loss = dqn_train_step(&mut online, &target, &mut adam, &[&t], &cfg).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(online, before);
    }

    #[test]
    fn empty_batch_rejected() {
        let cfg = DqnConfig::default();
        let mut online = Mlp::init(1, 2, 0);
        let target = online.clone();
        let mut adam = AdamState::new(&online, 1e-3, 1e-3);
        assert_eq!(dqn_train_step(&mut online, &target, &mut adam, &[], &cfg), Err(Error::EmptyBatch));
    }

    #[test]
    fn repeated_steps_reduce_loss() {
        let cfg = DqnConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let items: Vec<Transition> = (0..64)
            .map(|_| Transition {
                obs: (0..5).map(|_| rng.gen()).collect(),
                action: rng.gen_range(0..15),
                reward: rng.gen(),
                next_obs: (0..5).map(|_| rng.gen()).collect(),
                terminal: rng.gen_bool(0.3),
            })
            .collect();
        let batch: Vec<&Transition> = items.iter().collect();
        let mut online = Mlp::init(5, 15, 2);
        let target = online.clone();
        let mut adam = AdamState::new(&online, cfg.learning_rate, cfg.adam_epsilon);
        let first = dqn_train_step(&mut online, &target, &mut adam, &batch, &cfg).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = dqn_train_step(&mut online, &target, &mut adam, &batch, &cfg).unwrap();
        }
        assert!(last < 0.5 * first, "{first} -> {last}");
    }
}
