//! Greedy evaluation episodes.

use std::fmt::Write as _;

use crate::agents::GreedyPolicy;
use crate::error::{Error, Result};
use crate::market::{observe, reset_with, step};
use crate::metrics::CollusionReport;

use super::{stream, streams, Benchmarks, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// Period, starting at 1.
    pub t: usize,
    pub actions: Vec<usize>,
    pub prices: Vec<f64>,
    pub demands: Vec<f64>,
    pub quantities: Vec<u64>,
    /// Inventories after the period's sales.
    pub inventories: Vec<u64>,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub config_hash: String,
    pub seed: u64,
    /// Previous-period grid indices drawn at reset.
    pub initial_last_prices: Vec<usize>,
    pub steps: Vec<TrajectoryStep>,
    pub collusion: CollusionReport,
}

pub const TRAJECTORY_HEADER: &str = "t,agent,action,price,demand,quantity,inventory,reward";

impl Trajectory {
    /// Rewards `[t][agent]`.
    pub fn rewards(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.rewards.clone()).collect()
    }

    pub fn episode_profit(&self, agent: usize) -> f64 {
        self.steps.iter().map(|s| s.rewards[agent]).sum()
    }

    pub fn total_profit(&self) -> f64 {
        self.steps.iter().map(|s| s.rewards.iter().sum::<f64>()).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_HEADER);
        out.push('\n');
        for s in &self.steps {
            for i in 0..s.actions.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.t, i, s.actions[i], s.prices[i], s.demands[i], s.quantities[i], s.inventories[i], s.rewards[i]
                );
            }
        }
        out
    }
}

/// Plays one episode with every agent greedy. `force` replaces the action of
/// `(agent, period)` (period counted from 1) with the given grid index.
pub fn play_greedy(
    cfg: &ExperimentConfig,
    bench: &Benchmarks,
    policies: &[&dyn GreedyPolicy],
    seed: u64,
    force: Option<(usize, usize, usize)>,
) -> Result<Trajectory> {
    let n = bench.params.n();
    if policies.len() != n {
        return Err(Error::ShapeMismatch(format!("{} policies for {n} agents", policies.len())));
    }
    let mut rng = stream(seed, streams::ENV);
    let mut state = reset_with(&bench.params, &mut rng);
    let initial_last_prices = state.last_prices.clone();
    let mut steps = Vec::with_capacity(cfg.horizon);
    while !state.is_finished(bench.params.horizon()) {
        let mut actions = (0..n)
            .map(|i| policies[i].greedy(&observe(&state, i, &cfg.obs, &bench.params)))
            .collect::<Result<Vec<_>>>()?;
        if let Some((agent, period, action)) = force {
            if period == state.t {
                actions[agent] = action;
            }
        }
        let t = state.t;
        let out = step(&state, &actions, &bench.params)?;
        steps.push(TrajectoryStep {
            t,
            prices: actions.iter().map(|a| bench.params.grid.price(*a)).collect(),
            actions,
            demands: out.demands,
            quantities: out.quantities,
            inventories: out.next_state.inventories.clone(),
            rewards: out.rewards,
        });
        state = out.next_state;
    }
    let rewards: Vec<Vec<f64>> = steps.iter().map(|s| s.rewards.clone()).collect();
    Ok(Trajectory { config_hash: cfg.hash(), seed, initial_last_prices, collusion: bench.collusion(&rewards)?, steps })
}

/// One greedy episode from the seeded initial state.
pub fn evaluate(
    cfg: &ExperimentConfig,
    bench: &Benchmarks,
    policies: &[&dyn GreedyPolicy],
    seed: u64,
) -> Result<Trajectory> {
    play_greedy(cfg, bench, policies, seed, None)
}
