//! Self-play training loops for independent learners.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::agents::dqn::{dqn_act, epsilon_at, Transition};
use crate::agents::ppo::{compute_gae, entropy_coef_at, ppo_update, RolloutBatch};
use crate::agents::{AgentCheckpoint, Algorithm, DqnAgent, PpoAgent};
use crate::error::Result;
use crate::market::{observe, reset_with, step, MarketState};
use crate::metrics::{convergence_metric, final_window, ConvergenceReport};

use super::{stream, streams, Benchmarks, ExperimentConfig};

pub const RUN_LOG_HEADER: &str = "episode,agent,mean_action,mean_price,episode_profit,collusion_index,exploration_value";

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    /// Episode index for DQN, update index for PPO.
    pub episode: usize,
    pub agent: usize,
    pub mean_action: f64,
    pub mean_price: f64,
    pub episode_profit: f64,
    pub collusion_index: f64,
    pub exploration_value: f64,
}

/// Per-run record. Series are indexed like [`LogRow::episode`]; for PPO each
/// entry averages the episodes collected in one update.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config_hash: String,
    pub rows: Vec<LogRow>,
    /// Mean action index over agents and periods.
    pub mean_action_series: Vec<f64>,
    pub collusion_series: Vec<f64>,
    pub convergence: ConvergenceReport,
    /// Mean collusion index over the final 10% of training.
    pub collusion_last10: f64,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(RUN_LOG_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.episode, r.agent, r.mean_action, r.mean_price, r.episode_profit, r.collusion_index, r.exploration_value
            );
        }
        out
    }

    /// Mean of [`RunLog::mean_action_series`] over the first 10% of training.
    pub fn early_mean_action(&self) -> f64 {
        let n = (self.mean_action_series.len() / 10).max(1);
        self.mean_action_series[..n].iter().sum::<f64>() / n as f64
    }

    /// Mean of [`RunLog::mean_action_series`] over the final 10% of training.
    pub fn late_mean_action(&self) -> f64 {
        let len = self.mean_action_series.len();
        let n = final_window(len).max(1);
        self.mean_action_series[len - n..].iter().sum::<f64>() / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub log: RunLog,
    pub checkpoints: Vec<AgentCheckpoint>,
}

/// One finished episode: actions, prices and rewards `[t][agent]`.
struct Episode {
    actions: Vec<Vec<usize>>,
    prices: Vec<Vec<f64>>,
    rewards: Vec<Vec<f64>>,
}

impl Episode {
    fn with_capacity(horizon: usize) -> Self {
        Self {
            actions: Vec::with_capacity(horizon),
            prices: Vec::with_capacity(horizon),
            rewards: Vec::with_capacity(horizon),
        }
    }
}

/// Running aggregation of episodes into log rows and run-level metrics.
struct Recorder<'a> {
    bench: &'a Benchmarks,
    n: usize,
    total_episodes: usize,
    window: usize,
    recent_prices: VecDeque<Vec<Vec<f64>>>,
    window_collusion: f64,
    seen: usize,
}

/// Per-agent sums over the episodes of one log step.
struct StepStats {
    action: Vec<f64>,
    price: Vec<f64>,
    profit: Vec<f64>,
    collusion: f64,
    episodes: usize,
}

impl<'a> Recorder<'a> {
    fn new(bench: &'a Benchmarks, n: usize, total_episodes: usize) -> Self {
        let window = final_window(total_episodes);
        Self {
            bench,
            n,
            total_episodes,
            window,
            recent_prices: VecDeque::with_capacity(window + 1),
            window_collusion: 0.0,
            seen: 0,
        }
    }

    fn stats(&self) -> StepStats {
        StepStats {
            action: vec![0.0; self.n],
            price: vec![0.0; self.n],
            profit: vec![0.0; self.n],
            collusion: 0.0,
            episodes: 0,
        }
    }

    fn add(&mut self, ep: Episode, stats: &mut StepStats) -> Result<()> {
        let horizon = ep.actions.len() as f64;
        for i in 0..self.n {
            stats.action[i] += ep.actions.iter().map(|a| a[i] as f64).sum::<f64>() / horizon;
            stats.price[i] += ep.prices.iter().map(|p| p[i]).sum::<f64>() / horizon;
            stats.profit[i] += ep.rewards.iter().map(|r| r[i]).sum::<f64>();
        }
        let index = self.bench.collusion(&ep.rewards)?.index;
        stats.collusion += index;
        stats.episodes += 1;
        if self.seen >= self.total_episodes - self.window {
            self.window_collusion += index;
        }
        self.seen += 1;
        self.recent_prices.push_back(ep.prices);
        if self.recent_prices.len() > self.window {
            self.recent_prices.pop_front();
        }
        Ok(())
    }

    fn finish_step(
        &self,
        stats: StepStats,
        index: usize,
        exploration: f64,
        log_interval: usize,
        log: &mut RunLog,
    ) {
        let k = stats.episodes as f64;
        let collusion = stats.collusion / k;
        log.mean_action_series.push(stats.action.iter().sum::<f64>() / (k * self.n as f64));
        log.collusion_series.push(collusion);
        if index % log_interval == 0 {
            for i in 0..self.n {
                log.rows.push(LogRow {
                    episode: index,
                    agent: i,
                    mean_action: stats.action[i] / k,
                    mean_price: stats.price[i] / k,
                    episode_profit: stats.profit[i] / k,
                    collusion_index: collusion,
                    exploration_value: exploration,
                });
            }
        }
    }

    fn finish(&self, log: &mut RunLog) -> Result<()> {
        let history: Vec<Vec<Vec<f64>>> = self.recent_prices.iter().cloned().collect();
        log.convergence =
            convergence_metric(&history, self.total_episodes, self.bench.nash_price, self.bench.monopoly_price)?;
        log.collusion_last10 = self.window_collusion / self.window as f64;
        Ok(())
    }
}

fn empty_log(cfg: &ExperimentConfig, seed: u64) -> RunLog {
    RunLog {
        algorithm: cfg.algorithm,
        seed,
        config_hash: cfg.hash(),
        rows: Vec::new(),
        mean_action_series: Vec::new(),
        collusion_series: Vec::new(),
        convergence: ConvergenceReport { value: f64::NAN, converged: false },
        collusion_last10: f64::NAN,
    }
}

/// Trains one set of independent agents with the given root seed.
pub fn run_training(cfg: &ExperimentConfig, bench: &Benchmarks, seed: u64) -> Result<TrainingOutcome> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Dqn => train_dqn(cfg, bench, seed),
        Algorithm::Ppo => train_ppo(cfg, bench, seed),
    }
}

fn observations(state: &MarketState, cfg: &ExperimentConfig, bench: &Benchmarks) -> Vec<Vec<f64>> {
    (0..cfg.n).map(|i| observe(state, i, &cfg.obs, &bench.params)).collect()
}

fn train_dqn(cfg: &ExperimentConfig, bench: &Benchmarks, seed: u64) -> Result<TrainingOutcome> {
    let n = cfg.n;
    let k = bench.params.grid.len();
    let dim = cfg.obs.dim(n);
    let dqn = &cfg.dqn;
    let mut env_rng = stream(seed, streams::ENV);
    let mut act_rngs: Vec<_> = (0..n as u64).map(|i| stream(seed, streams::ACT + i)).collect();
    let mut learn_rngs: Vec<_> = (0..n as u64).map(|i| stream(seed, streams::LEARN + i)).collect();
    let mut agents: Vec<DqnAgent> = (0..n as u64)
        .map(|i| {
            use rand::Rng;
            let init_seed = stream(seed, streams::INIT + i).gen();
            DqnAgent::new(dim, k, dqn.clone(), init_seed)
        })
        .collect();

    let episodes = dqn.training_episodes;
    let log_interval = cfg.effective_log_interval();
    let mut log = empty_log(cfg, seed);
    let mut recorder = Recorder::new(bench, n, episodes);
    for e in 0..episodes {
        let epsilon = epsilon_at(e, dqn);
        let mut state = reset_with(&bench.params, &mut env_rng);
        let mut ep = Episode::with_capacity(cfg.horizon);
        let mut obs = observations(&state, cfg, bench);
        for t in 0..cfg.horizon {
            let actions: Vec<usize> = (0..n)
                .map(|i| dqn_act(&agents[i].online, &obs[i], epsilon, &mut act_rngs[i]))
                .collect::<Result<_>>()?;
            let out = step(&state, &actions, &bench.params)?;
            let next_obs = observations(&out.next_state, cfg, bench);
            let terminal = t + 1 == cfg.horizon;
            for i in 0..n {
                agents[i].buffer.push(Transition {
                    obs: std::mem::take(&mut obs[i]),
                    action: actions[i],
                    reward: bench.normalize(out.rewards[i]),
                    next_obs: next_obs[i].clone(),
                    terminal,
                });
            }
            ep.prices.push(actions.iter().map(|a| bench.params.grid.price(*a)).collect());
            ep.actions.push(actions);
            ep.rewards.push(out.rewards);
            state = out.next_state;
            obs = next_obs;
        }
        let mut stats = recorder.stats();
        recorder.add(ep, &mut stats)?;
        recorder.finish_step(stats, e, epsilon, log_interval, &mut log);

        let done = e + 1;
        if done > dqn.warmup_episodes && done % dqn.train_interval_episodes == 0 {
            for (agent, rng) in agents.iter_mut().zip(learn_rngs.iter_mut()) {
                agent.train(rng)?;
            }
        }
        if done % dqn.target_update_interval_episodes == 0 {
            agents.iter_mut().for_each(DqnAgent::sync_target);
        }
    }
    recorder.finish(&mut log)?;
    let checkpoints = agents
        .iter()
        .enumerate()
        .map(|(i, a)| AgentCheckpoint {
            algorithm: Algorithm::Dqn,
            config_hash: log.config_hash.clone(),
            episodes,
            agent: i,
            network: a.online.clone(),
        })
        .collect();
    Ok(TrainingOutcome { log, checkpoints })
}

fn train_ppo(cfg: &ExperimentConfig, bench: &Benchmarks, seed: u64) -> Result<TrainingOutcome> {
    let n = cfg.n;
    let k = bench.params.grid.len();
    let dim = cfg.obs.dim(n);
    let ppo = &cfg.ppo;
    let mut env_rng = stream(seed, streams::ENV);
    let mut act_rngs: Vec<_> = (0..n as u64).map(|i| stream(seed, streams::ACT + i)).collect();
    let mut learn_rngs: Vec<_> = (0..n as u64).map(|i| stream(seed, streams::LEARN + i)).collect();
    let mut agents: Vec<PpoAgent> = (0..n as u64)
        .map(|i| {
            use rand::Rng;
            let init_seed = stream(seed, streams::INIT + i).gen();
            PpoAgent::new(dim, k, ppo.clone(), init_seed)
        })
        .collect();

    let updates = ppo.training_updates;
    let log_interval = cfg.effective_log_interval();
    let mut log = empty_log(cfg, seed);
    let mut recorder = Recorder::new(bench, n, updates * ppo.num_envs);
    for u in 0..updates {
        let mut rollouts = vec![RolloutBatch::default(); n];
        let mut stats = recorder.stats();
        for _ in 0..ppo.num_envs {
            let mut state = reset_with(&bench.params, &mut env_rng);
            let mut ep = Episode::with_capacity(cfg.horizon);
            for t in 0..cfg.horizon {
                let obs = observations(&state, cfg, bench);
                let steps = (0..n).map(|i| agents[i].act(&obs[i], &mut act_rngs[i])).collect::<Result<Vec<_>>>()?;
                let actions: Vec<usize> = steps.iter().map(|s| s.action).collect();
                let out = step(&state, &actions, &bench.params)?;
                let done = t + 1 == cfg.horizon;
                for (i, o) in obs.into_iter().enumerate() {
                    rollouts[i].push(o, steps[i], bench.normalize(out.rewards[i]), done);
                }
                ep.prices.push(actions.iter().map(|a| bench.params.grid.price(*a)).collect());
                ep.actions.push(actions);
                ep.rewards.push(out.rewards);
                state = out.next_state;
            }
            recorder.add(ep, &mut stats)?;
        }
        recorder.finish_step(stats, u, entropy_coef_at(u, ppo), log_interval, &mut log);
        for ((agent, rollout), rng) in agents.iter_mut().zip(rollouts.iter_mut()).zip(learn_rngs.iter_mut()) {
            compute_gae(rollout, ppo)?;
            ppo_update(agent, rollout, u, rng)?;
        }
    }
    recorder.finish(&mut log)?;
    let checkpoints = agents
        .iter()
        .enumerate()
        .map(|(i, a)| AgentCheckpoint {
            algorithm: Algorithm::Ppo,
            config_hash: log.config_hash.clone(),
            episodes: updates,
            agent: i,
            network: a.actor.clone(),
        })
        .collect();
    Ok(TrainingOutcome { log, checkpoints })
}
