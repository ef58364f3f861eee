//! Proximal policy optimization with separate actor and critic networks.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, AdamState, Mlp};

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub training_updates: usize,
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub num_minibatches: usize,
    pub epochs: usize,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub grad_clip: f64,
    pub clip_coef: f64,
    pub entropy_max: f64,
    pub entropy_min: f64,
    pub entropy_anneal_fraction: f64,
    /// Episodes collected per update.
    pub num_envs: usize,
    pub discount: f64,
    pub normalize_advantages: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            training_updates: 1000,
            learning_rate: 2.5e-4,
            adam_epsilon: 1e-5,
            num_minibatches: 10,
            epochs: 20,
            gae_lambda: 0.95,
            value_coef: 0.5,
            grad_clip: 0.5,
            clip_coef: 0.2,
            entropy_max: 0.03,
            entropy_min: 0.0001,
            entropy_anneal_fraction: 0.75,
            num_envs: 1,
            discount: 1.0,
            normalize_advantages: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.training_updates == 0 || self.epochs == 0 || self.num_minibatches == 0 || self.num_envs == 0 {
            return fail("ppo updates, epochs, minibatches and environments must be positive");
        }
        if !(self.entropy_min > 0.0 && self.entropy_min <= self.entropy_max) {
            return fail("ppo entropy range is invalid");
        }
        if !(self.entropy_anneal_fraction > 0.0 && self.entropy_anneal_fraction <= 1.0) {
            return fail("ppo entropy anneal fraction must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.adam_epsilon > 0.0 && self.grad_clip > 0.0 && self.clip_coef > 0.0) {
            return fail("ppo learning rate, adam epsilon, clip values must be positive");
        }
        Ok(())
    }
}

/// Entropy bonus at update `e`: exponential decay from `entropy_max` to
/// `entropy_min` over the anneal fraction of training, constant afterwards.
pub fn entropy_coef_at(e: usize, cfg: &PpoConfig) -> f64 {
    let span = cfg.entropy_anneal_fraction * cfg.training_updates as f64;
    let frac = e as f64 / span;
    if frac >= 1.0 {
        cfg.entropy_min
    } else {
        cfg.entropy_max * (cfg.entropy_min / cfg.entropy_max).powf(frac)
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoStep {
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

/// Samples an action from the policy and reads the critic's value estimate.
pub fn ppo_act<R: Rng + ?Sized>(actor: &Mlp, critic: &Mlp, obs: &[f64], rng: &mut R) -> Result<PpoStep> {
    let logits = actor.forward_one(obs)?;
    let probs = softmax(&logits);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut action = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            action = i;
            break;
        }
    }
    let value = critic.forward_one(obs)?[0];
    Ok(PpoStep { action, log_prob: log_softmax(&logits)[action], value })
}

/// Greedy action: the largest logit, lowest index on ties.
pub fn ppo_greedy(actor: &Mlp, obs: &[f64]) -> Result<usize> {
    Ok(super::dqn::argmax(&actor.forward_one(obs)?))
}

/// Experience from complete episodes laid out step by step; consecutive
/// episodes follow each other, each ending with a terminal step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    /// Normalized rewards.
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn push(&mut self, obs: Vec<f64>, step: PpoStep, reward: f64, done: bool) {
        self.obs.push(obs);
        self.actions.push(step.action);
        self.log_probs.push(step.log_prob);
        self.values.push(step.value);
        self.rewards.push(reward);
        self.dones.push(done);
    }
}

/// Generalized advantage estimates and returns. The value after a terminal
/// step is zero.
pub fn compute_gae(rollout: &mut RolloutBatch, cfg: &PpoConfig) -> Result<()> {
    let n = rollout.len();
    if n == 0 || !rollout.dones[n - 1] {
        return Err(Error::IncompleteEpisode);
    }
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let cont = if rollout.dones[t] { 0.0 } else { 1.0 };
        let next_value = if rollout.dones[t] { 0.0 } else { rollout.values[t + 1] };
        let delta = rollout.rewards[t] + cfg.discount * next_value * cont - rollout.values[t];
        next_adv = delta + cfg.discount * cfg.gae_lambda * cont * next_adv;
        advantages[t] = next_adv;
    }
    if advantages.iter().any(|a| !a.is_finite()) {
        return Err(Error::ShapeMismatch("non-finite advantage".into()));
    }
    rollout.returns = advantages.iter().zip(&rollout.values).map(|(a, v)| a + v).collect();
    rollout.advantages = advantages;
    Ok(())
}

/// Mean losses over every minibatch of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoLosses {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Loss terms and output gradients for one minibatch.
#[derive(Debug, Clone)]
pub struct MinibatchTerms {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clipped: usize,
    pub logits_grad: Array2<f64>,
    pub value_grad: Array2<f64>,
}

/// Clipped surrogate, clipped value loss and entropy bonus for a minibatch,
/// together with their gradients with respect to the logits and the value
/// output. `advantages` are used as given.
#[allow(clippy::too_many_arguments)]
pub fn minibatch_terms(
    logits: &Array2<f64>,
    values: &Array2<f64>,
    actions: &[usize],
    old_log_probs: &[f64],
    old_values: &[f64],
    advantages: &[f64],
    returns: &[f64],
    entropy_coef: f64,
    cfg: &PpoConfig,
) -> MinibatchTerms {
    let b = actions.len();
    let bf = b as f64;
    let k = logits.ncols();
    let mut logits_grad = Array2::zeros((b, k));
    let mut value_grad = Array2::zeros((b, 1));
    let (mut policy, mut value, mut entropy) = (0.0, 0.0, 0.0);
    let mut clipped = 0;
    let c = cfg.clip_coef;
    for i in 0..b {
        let row: Vec<f64> = logits.row(i).to_vec();
        let logp = log_softmax(&row);
        let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let a = actions[i];
        let ratio = (logp[a] - old_log_probs[i]).exp();
        let adv = advantages[i];
        let unclipped = -adv * ratio;
        let clipped_loss = -adv * ratio.clamp(1.0 - c, 1.0 + c);
        policy += unclipped.max(clipped_loss);
        if (ratio - 1.0).abs() > c {
            clipped += 1;
        }
        // d loss / d log p(a): zero when the clipped branch is active
        let dlogp = if unclipped >= clipped_loss { -adv * ratio / bf } else { 0.0 };
        let h: f64 = -p.iter().zip(&logp).map(|(pi, li)| pi * li).sum::<f64>();
        entropy += h;
        for j in 0..k {
            let onehot = if j == a { 1.0 } else { 0.0 };
            // dH/dz_j = -p_j (log p_j + H)
            let dh = -p[j] * (logp[j] + h);
            logits_grad[[i, j]] = dlogp * (onehot - p[j]) - entropy_coef * dh / bf;
        }

        let v = values[[i, 0]];
        let ret = returns[i];
        let free = (v - ret).powi(2);
        let v_clip = old_values[i] + (v - old_values[i]).clamp(-c, c);
        let bounded = (v_clip - ret).powi(2);
        value += 0.5 * free.max(bounded);
        let dv = if free >= bounded {
            2.0 * (v - ret)
        } else if (v - old_values[i]).abs() < c {
            2.0 * (v_clip - ret)
        } else {
            0.0
        };
        value_grad[[i, 0]] = cfg.value_coef * 0.5 * dv / bf;
    }
    MinibatchTerms { policy: policy / bf, value: value / bf, entropy: entropy / bf, clipped, logits_grad, value_grad }
}

fn normalized(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return values.to_vec();
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    values.iter().map(|v| (v - mean) / (std + 1e-8)).collect()
}

/// Actor, critic and their optimizers.
#[derive(Debug, Clone)]
pub struct PpoAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_adam: AdamState,
    pub critic_adam: AdamState,
    pub cfg: PpoConfig,
}

impl PpoAgent {
    pub fn new(obs_dim: usize, actions: usize, cfg: PpoConfig, init_seed: u64) -> Self {
        let actor = Mlp::init(obs_dim, actions, init_seed);
        let critic = Mlp::init(obs_dim, 1, init_seed ^ 0x9e37_79b9_7f4a_7c15);
        Self {
            actor_adam: AdamState::new(&actor, cfg.learning_rate, cfg.adam_epsilon),
            critic_adam: AdamState::new(&critic, cfg.learning_rate, cfg.adam_epsilon),
            actor,
            critic,
            cfg,
        }
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<PpoStep> {
        ppo_act(&self.actor, &self.critic, obs, rng)
    }
}

/// Epochs of shuffled minibatch updates on a rollout whose advantages are
/// already computed. A remainder that does not fill a minibatch is dropped.
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut PpoAgent,
    rollout: &RolloutBatch,
    update_index: usize,
    rng: &mut R,
) -> Result<PpoLosses> {
    let cfg = agent.cfg.clone();
    let n = rollout.len();
    if n < cfg.num_minibatches {
        return Err(Error::MinibatchTooSmall { rollout: n, minibatches: cfg.num_minibatches });
    }
    if rollout.advantages.len() != n || rollout.returns.len() != n {
        return Err(Error::ShapeMismatch("advantages missing; run compute_gae first".into()));
    }
    let size = n / cfg.num_minibatches;
    let dim = agent.actor.input_dim();
    let entropy_coef = entropy_coef_at(update_index, &cfg);
    let mut order: Vec<usize> = (0..n).collect();
    let mut sums = PpoLosses::default();
    let mut batches = 0usize;
    let mut samples = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for mb in order.chunks_exact(size).take(cfg.num_minibatches) {
            let mut flat = Vec::with_capacity(size * dim);
            for &i in mb {
                flat.extend_from_slice(&rollout.obs[i]);
            }
            let x = ArrayView2::from_shape((size, dim), &flat).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            let pick = |v: &[f64]| mb.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let actions: Vec<usize> = mb.iter().map(|&i| rollout.actions[i]).collect();
            let mut adv = pick(&rollout.advantages);
            if cfg.normalize_advantages {
                adv = normalized(&adv);
            }
            let (logits, actor_cache) = agent.actor.forward_cached(x)?;
            let (values, critic_cache) = agent.critic.forward_cached(x)?;
            let terms = minibatch_terms(
                &logits,
                &values,
                &actions,
                &pick(&rollout.log_probs),
                &pick(&rollout.values),
                &adv,
                &pick(&rollout.returns),
                entropy_coef,
                &cfg,
            );
            let mut ga = agent.actor.backward(&actor_cache, &terms.logits_grad)?;
            let mut gc = agent.critic.backward(&critic_cache, &terms.value_grad)?;
            clip_global_norm(&mut [&mut ga, &mut gc], cfg.grad_clip);
            agent.actor_adam.adam_step(&mut agent.actor, &ga);
            agent.critic_adam.adam_step(&mut agent.critic, &gc);
            sums.policy += terms.policy;
            sums.value += terms.value;
            sums.entropy += terms.entropy;
            sums.clip_fraction += terms.clipped as f64;
            batches += 1;
            samples += size;
        }
    }
    let nb = batches as f64;
    Ok(PpoLosses {
        policy: sums.policy / nb,
        value: sums.value / nb,
        entropy: sums.entropy / nb,
        clip_fraction: sums.clip_fraction / samples as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn entropy_schedule() {
        let cfg = PpoConfig::default();
        assert_eq!(entropy_coef_at(0, &cfg), 0.03);
        assert!((entropy_coef_at(750, &cfg) - 0.0001).abs() < 1e-18);
        assert_eq!(entropy_coef_at(1000, &cfg), 0.0001);
        let mut prev = f64::INFINITY;
        for e in 0..=1000 {
            let v = entropy_coef_at(e, &cfg);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn uniform_logits() {
        let actor = Mlp::init(3, 15, 0).zeros_like();
        let critic = Mlp::init(3, 1, 0).zeros_like();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let step = ppo_act(&actor, &critic, &[0.2, 0.4, 0.6], &mut rng).unwrap();
        assert!((step.log_prob - (1.0f64 / 15.0).ln()).abs() < 1e-12);
        assert_eq!(step.value, 0.0);
        assert_eq!(ppo_greedy(&actor, &[0.2, 0.4, 0.6]).unwrap(), 0);
    }

    #[test]
    fn log_prob_consistency() {
        let actor = Mlp::init(3, 15, 4);
        let critic = Mlp::init(3, 1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let obs = [0.9, 0.1, 0.5];
        let probs = softmax(&actor.forward_one(&obs).unwrap());
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for _ in 0..50 {
            let s = ppo_act(&actor, &critic, &obs, &mut rng).unwrap();
            assert!((s.log_prob.exp() - probs[s.action]).abs() < 1e-9);
        }
        let logits = actor.forward_one(&obs).unwrap();
        assert_eq!(ppo_greedy(&actor, &obs).unwrap(), crate::agents::dqn::argmax(&logits));
    }

    fn episode(rewards: &[f64], values: &[f64]) -> RolloutBatch {
        let mut r = RolloutBatch::default();
        for (t, (rew, v)) in rewards.iter().zip(values).enumerate() {
            let step = PpoStep { action: 0, log_prob: 0.0, value: *v };
            r.push(vec![0.0], step, *rew, t + 1 == rewards.len());
        }
        r
    }

    #[test]
    fn gae_examples() {
        let cfg = PpoConfig::default();
        let mut zero = episode(&[0.0; 5], &[0.0; 5]);
        compute_gae(&mut zero, &cfg).unwrap();
        assert_eq!(zero.advantages, vec![0.0; 5]);

        let td = PpoConfig { gae_lambda: 0.0, ..cfg.clone() };
        let mut r = episode(&[1.0, 2.0, 3.0], &[0.5, 0.25, 1.0]);
        compute_gae(&mut r, &td).unwrap();
        assert_eq!(r.advantages, vec![1.0 + 0.25 - 0.5, 2.0 + 1.0 - 0.25, 3.0 - 1.0]);

        let mc = PpoConfig { gae_lambda: 1.0, ..cfg };
        let mut r = episode(&[0.5; 20], &[0.0; 20]);
        compute_gae(&mut r, &mc).unwrap();
        for (t, a) in r.advantages.iter().enumerate() {
            // periods counted from 1: A_t = (T - t + 1) r
            assert!((a - (20 - t) as f64 * 0.5).abs() < 1e-12);
        }
        assert_eq!(r.returns, r.advantages);
    }

    #[test]
    fn gae_stops_at_episode_boundaries() {
        let cfg = PpoConfig { gae_lambda: 1.0, ..PpoConfig::default() };
        let mut a = episode(&[1.0, 1.0], &[0.0, 0.0]);
        let b = episode(&[5.0, 5.0], &[0.0, 0.0]);
        for i in 0..2 {
            a.push(b.obs[i].clone(), PpoStep { action: 0, log_prob: 0.0, value: 0.0 }, b.rewards[i], b.dones[i]);
        }
        compute_gae(&mut a, &cfg).unwrap();
        assert_eq!(a.advantages, vec![2.0, 1.0, 10.0, 5.0]);
    }

    #[test]
    fn incomplete_episode_rejected() {
        let mut r = episode(&[1.0, 1.0], &[0.0, 0.0]);
        r.dones[1] = false;
        assert_eq!(compute_gae(&mut r, &PpoConfig::default()), Err(Error::IncompleteEpisode));
    }

    #[test]
    fn zero_advantage_leaves_only_entropy() {
        let cfg = PpoConfig::default();
        let logits = array![[0.3, -0.1], [1.0, 0.2]];
        let values = array![[0.4], [0.7]];
        let lp: Vec<f64> = (0..2).map(|i| log_softmax(&logits.row(i).to_vec())[0]).collect();
        let t = minibatch_terms(&logits, &values, &[0, 0], &lp, &[0.4, 0.7], &[0.0, 0.0], &[0.4, 0.7], 0.0, &cfg);
        assert_eq!((t.policy, t.value), (0.0, 0.0));
        assert!(t.logits_grad.iter().all(|g| *g == 0.0));
        assert!(t.value_grad.iter().all(|g| *g == 0.0));
        let t = minibatch_terms(&logits, &values, &[0, 0], &lp, &[0.4, 0.7], &[0.0, 0.0], &[0.4, 0.7], 0.1, &cfg);
        assert!(t.logits_grad.iter().any(|g| *g != 0.0));
    }

    #[test]
    fn unit_ratio_surrogate() {
        let cfg = PpoConfig::default();
        let logits = array![[0.3, -0.1], [1.0, 0.2]];
        let values = array![[0.0], [0.0]];
        let lp: Vec<f64> = (0..2).map(|i| log_softmax(&logits.row(i).to_vec())[1]).collect();
        let adv = [0.5, -1.5];
        let t = minibatch_terms(&logits, &values, &[1, 1], &lp, &[0.0, 0.0], &adv, &[0.0, 0.0], 0.0, &cfg);
        assert!((t.policy - 0.5).abs() < 1e-12);
        assert_eq!(t.clipped, 0);
    }

    #[test]
    fn clipped_samples_have_no_policy_gradient() {
        let cfg = PpoConfig::default();
        // current policy strongly prefers action 0; old policy was uniform
        let logits = array![[3.0, -3.0]];
        let values = array![[0.0]];
        let old = [(0.5f64).ln()];
        let t = minibatch_terms(&logits, &values, &[0], &old, &[0.0], &[1.0], &[0.0], 0.0, &cfg);
        let ratio = log_softmax(&[3.0, -3.0])[0].exp() / 0.5;
        assert!(ratio > 1.2);
        assert_eq!(t.clipped, 1);
        assert!((t.policy + 1.2).abs() < 1e-12);
        assert!(t.logits_grad.iter().all(|g| *g == 0.0));
        // with a negative advantage the unclipped branch is active again
        let t = minibatch_terms(&logits, &values, &[0], &old, &[0.0], &[-1.0], &[0.0], 0.0, &cfg);
        assert!(t.logits_grad.iter().any(|g| *g != 0.0));
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let cfg = PpoConfig::default();
        let logits = array![[0.2, -0.4, 0.9], [0.1, 0.3, -0.2], [-0.5, 0.0, 0.4]];
        let values = array![[0.3], [-0.1], [0.25]];
        let actions = [2, 0, 1];
        let old = [-1.0, -1.2, -0.9];
        let old_v = [0.25, 0.0, 0.5];
        let adv = [0.7, -0.4, 1.1];
        let ret = [0.9, -0.3, 0.1];
        let total = |l: &Array2<f64>, v: &Array2<f64>| {
            let t = minibatch_terms(l, v, &actions, &old, &old_v, &adv, &ret, 0.02, &cfg);
            t.policy + cfg.value_coef * t.value - 0.02 * t.entropy
        };
        let t = minibatch_terms(&logits, &values, &actions, &old, &old_v, &adv, &ret, 0.02, &cfg);
        let h = 1e-6;
        for i in 0..3 {
            for j in 0..3 {
                let mut up = logits.clone();
                up[[i, j]] += h;
                let mut down = logits.clone();
                down[[i, j]] -= h;
                let numeric = (total(&up, &values) - total(&down, &values)) / (2.0 * h);
                assert!((numeric - t.logits_grad[[i, j]]).abs() < 1e-7, "{numeric} vs {}", t.logits_grad[[i, j]]);
            }
            let mut up = values.clone();
            up[[i, 0]] += h;
            let mut down = values.clone();
            down[[i, 0]] -= h;
            let numeric = (total(&logits, &up) - total(&logits, &down)) / (2.0 * h);
            assert!((numeric - t.value_grad[[i, 0]]).abs() < 1e-7);
        }
    }

    #[test]
    fn update_needs_enough_samples() {
        let mut agent = PpoAgent::new(1, 2, PpoConfig::default(), 0);
        let mut r = episode(&[1.0; 5], &[0.0; 5]);
        compute_gae(&mut r, &agent.cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            ppo_update(&mut agent, &r, 0, &mut rng),
            Err(Error::MinibatchTooSmall { rollout: 5, minibatches: 10 })
        );
    }

    #[test]
    fn update_moves_toward_rewarded_action() {
        let cfg = PpoConfig { epochs: 4, num_minibatches: 2, ..PpoConfig::default() };
        let mut agent = PpoAgent::new(1, 2, cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let before = softmax(&agent.actor.forward_one(&[1.0]).unwrap())[1];
        for u in 0..30 {
            let mut r = RolloutBatch::default();
            for t in 0..40 {
                let step = agent.act(&[1.0], &mut rng).unwrap();
                let reward = if step.action == 1 { 1.0 } else { 0.0 };
                r.push(vec![1.0], step, reward, t % 2 == 1);
            }
            compute_gae(&mut r, &agent.cfg.clone()).unwrap();
            ppo_update(&mut agent, &r, u, &mut rng).unwrap();
        }
        let after = softmax(&agent.actor.forward_one(&[1.0]).unwrap())[1];
        assert!(after > before + 0.1, "{before} -> {after}");
    }
}
