//! Experiment orchestration: configuration, benchmarks, training loops,
//! greedy evaluation and parameter sweeps.

pub mod config;
pub mod eval;
pub mod sweep;
pub mod training;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::equilibria::{episode_rollout, solve_monopoly, solve_nash, EquilibriumSolution};
use crate::error::{Error, Result};
use crate::market::{reward_bounds, MarketParams, PriceGrid};
use crate::metrics::{collusion_report, CollusionReport, ProfitGainInputs, DEFAULT_GAMMA};

pub use config::{ExperimentConfig, GridMode};
pub use eval::{evaluate, play_greedy, Trajectory, TrajectoryStep, TRAJECTORY_HEADER};
pub use sweep::{run_sweep, sweep_csv, SweepRow, SweepSpec, SWEEP_HEADER};
pub use training::{run_training, LogRow, RunLog, TrainingOutcome, RUN_LOG_HEADER};

/// Independent random streams derived from one root seed.
pub mod streams {
    pub const ENV: u64 = 0;
    pub const ACT: u64 = 100;
    pub const LEARN: u64 = 200;
    pub const INIT: u64 = 300;
}

/// Generator for stream `id` of the run seeded with `seed`.
pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Everything a run measures against: the action grid, the benchmark prices
/// and their per-period profits, and the reward normalization range.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmarks {
    pub params: MarketParams,
    pub nash_price: f64,
    pub monopoly_price: f64,
    /// Lower grid anchor: `nash_price`, or the unconstrained Nash price in
    /// unconstrained grid mode.
    pub grid_low_anchor: f64,
    /// Profit `[t][agent]` from playing the benchmark prices all episode.
    pub nash_profit: Vec<Vec<f64>>,
    pub monopoly_profit: Vec<Vec<f64>>,
    pub reward_min: f64,
    pub reward_max: f64,
    /// Solver output for benchmarks that were not pinned in the config.
    pub nash_solution: Option<EquilibriumSolution>,
    pub monopoly_solution: Option<EquilibriumSolution>,
}

impl Benchmarks {
    /// Solves the benchmarks the config leaves open, builds the grid and
    /// rolls the benchmark profiles out in the episodic market.
    pub fn compute(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let econ = cfg.economics();
        let solver = cfg.solver();
        let capacity = cfg.benchmark_capacity();
        let nash_solution = match cfg.nash_anchor {
            Some(_) => None,
            None => Some(solve_nash(&econ, capacity, &solver)?),
        };
        let monopoly_solution = match cfg.monopoly_anchor {
            Some(_) => None,
            None => Some(solve_monopoly(&econ, capacity, &solver)?),
        };
        let nash_price = cfg.nash_anchor.unwrap_or_else(|| nash_solution.as_ref().expect("solved").prices[0]);
        let monopoly_price =
            cfg.monopoly_anchor.unwrap_or_else(|| monopoly_solution.as_ref().expect("solved").prices[0]);
        let grid_low_anchor = match cfg.price_grid_mode {
            GridMode::Constrained => nash_price,
            GridMode::Unconstrained => match cfg.unconstrained_nash_anchor {
                Some(p) => p,
                None => solve_nash(&econ.with_capacity_per_period(cfg.lambda), cfg.lambda, &solver)?.prices[0],
            },
        };
        let grid = PriceGrid::build(grid_low_anchor, monopoly_price, cfg.xi, cfg.grid_size)?;
        let params = MarketParams::new(econ, grid)?;
        let (reward_min, reward_max) = reward_bounds(&params);
        if !(reward_max > reward_min) {
            return Err(Error::DegenerateBounds { min: reward_min, max: reward_max });
        }
        let n = cfg.n;
        let constant = |p: f64| vec![vec![p; cfg.horizon]; n];
        let nash_profit = episode_rollout(&constant(nash_price), &params.econ);
        let monopoly_profit = episode_rollout(&constant(monopoly_price), &params.econ);
        Ok(Self {
            params,
            nash_price,
            monopoly_price,
            grid_low_anchor,
            nash_profit,
            monopoly_profit,
            reward_min,
            reward_max,
            nash_solution,
            monopoly_solution,
        })
    }

    /// Reward mapped to `[0, 1]`. Choice substitution can push a reward past
    /// the full-inventory maximum, so the result is clamped.
    pub fn normalize(&self, reward: f64) -> f64 {
        ((reward - self.reward_min) / (self.reward_max - self.reward_min)).clamp(0.0, 1.0)
    }

    /// Collusion report of one episode's rewards `[t][agent]`.
    pub fn collusion(&self, rewards: &[Vec<f64>]) -> Result<CollusionReport> {
        collusion_report(
            &ProfitGainInputs {
                realized: rewards.to_vec(),
                nash_profit: self.nash_profit.clone(),
                monopoly_profit: self.monopoly_profit.clone(),
            },
            DEFAULT_GAMMA,
        )
    }

    /// `quantity,value` table of the benchmark numbers.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let grid = &self.params.grid;
        let mut rows = vec![
            ("config_hash".to_string(), config_hash.to_string()),
            ("nash_price".into(), self.nash_price.to_string()),
            ("monopoly_price".into(), self.monopoly_price.to_string()),
            ("grid_low_anchor".into(), self.grid_low_anchor.to_string()),
            ("nash_index".into(), grid.nash_index().to_string()),
            ("monopoly_index".into(), grid.monopoly_index().to_string()),
            ("reward_min".into(), self.reward_min.to_string()),
            ("reward_max".into(), self.reward_max.to_string()),
            ("nash_episode_profit".into(), self.nash_profit.iter().map(|r| r[0]).sum::<f64>().to_string()),
            ("monopoly_episode_profit".into(), self.monopoly_profit.iter().map(|r| r[0]).sum::<f64>().to_string()),
        ];
        for (i, p) in grid.prices().iter().enumerate() {
            rows.push((format!("grid_{i}"), p.to_string()));
        }
        let mut out = String::from("quantity,value\n");
        for (k, v) in rows {
            out.push_str(&format!("{k},{v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn pinned() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.nash_anchor = Some(1.693);
        cfg.monopoly_anchor = Some(1.925);
        cfg
    }

    #[test]
    fn pinned_benchmarks_on_reference_grid() {
        let b = Benchmarks::compute(&pinned()).unwrap();
        assert_eq!(b.params.grid.nash_index(), 2);
        assert_eq!(b.params.grid.monopoly_index(), 12);
        assert!(b.nash_solution.is_none());
        // 436 units per period at 1.693, 364 at 1.925
        assert!((b.nash_profit[0][0] - 0.693 * 436.0).abs() < 1e-9);
        assert!((b.monopoly_profit[19][1] - 0.925 * 364.0).abs() < 1e-9);
        assert_eq!(b.collusion(&b.nash_profit).unwrap().index, 0.0);
        assert_eq!(b.collusion(&b.monopoly_profit).unwrap().index, 1.0);
    }

    #[test]
    fn normalization_is_clamped() {
        let b = Benchmarks::compute(&pinned()).unwrap();
        assert_eq!(b.normalize(b.reward_max * 1.5), 1.0);
        assert_eq!(b.normalize(-5.0), 0.0);
        assert!((b.normalize(b.reward_max / 2.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_capacity_has_degenerate_bounds() {
        let mut cfg = pinned();
        cfg.capacity_per_period = 0;
        assert!(matches!(Benchmarks::compute(&cfg), Err(Error::DegenerateBounds { .. })));
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        use rand::Rng;
        let a: u64 = stream(7, streams::ENV).gen();
        let b: u64 = stream(7, streams::ACT).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream(7, streams::ENV).gen::<u64>());
    }
}
