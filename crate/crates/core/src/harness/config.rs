//! Flat `key = value` experiment configuration.
//!
//! Lines hold one dotted key and its value; `#` starts a comment. Unknown
//! keys are rejected. [`ExperimentConfig::dump`] writes every key in a fixed
//! order, and the config hash is taken over that canonical text.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::agents::{Algorithm, DqnConfig, PpoConfig};
use crate::equilibria::SolverConfig;
use crate::error::{Error, Result};
use crate::market::{Economics, ObservationSpec};

/// Which benchmark pair spans the action grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMode {
    /// Inventory-constrained Nash price to monopoly price.
    Constrained,
    /// Unconstrained Nash price to monopoly price.
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub quality: f64,
    pub outside_quality: f64,
    pub mu: f64,
    pub cost: f64,
    pub lambda: u64,
    pub horizon: usize,
    pub capacity_per_period: u64,
    /// When false every agent holds `lambda * horizon` units.
    pub inventory_constrained: bool,
    pub grid_size: usize,
    pub xi: f64,
    pub price_grid_mode: GridMode,
    /// Fixed benchmark prices; `None` means solve for them.
    pub nash_anchor: Option<f64>,
    pub monopoly_anchor: Option<f64>,
    pub unconstrained_nash_anchor: Option<f64>,

    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Episodes (DQN) or updates (PPO) between log rows; 0 picks 50 for DQN
    /// and 1 for PPO.
    pub log_interval: usize,
    pub output_dir: String,

    pub obs: ObservationSpec,

    pub solver_resolution: f64,
    pub solver_max_iters: usize,
    pub solver_tol: f64,
    pub solver_restarts: usize,
    pub solver_seed: u64,
    pub solver_acceptance_tol: f64,
    pub solver_discounted: bool,

    pub dqn: DqnConfig,
    pub ppo: PpoConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        Self {
            n: 2,
            quality: 2.0,
            outside_quality: 0.0,
            mu: 0.25,
            cost: 1.0,
            lambda: 1000,
            horizon: 20,
            capacity_per_period: 440,
            inventory_constrained: true,
            grid_size: 15,
            xi: 0.2,
            price_grid_mode: GridMode::Constrained,
            nash_anchor: None,
            monopoly_anchor: None,
            unconstrained_nash_anchor: None,
            algorithm: Algorithm::Ppo,
            seeds: vec![1],
            log_interval: 0,
            output_dir: "out".into(),
            obs: ObservationSpec::default(),
            solver_resolution: solver.resolution,
            solver_max_iters: solver.max_gauss_seidel_iters,
            solver_tol: solver.convergence_tol,
            solver_restarts: solver.restarts,
            solver_seed: solver.seed,
            solver_acceptance_tol: solver.acceptance_tol,
            solver_discounted: solver.discounted,
            dqn: DqnConfig::default(),
            ppo: PpoConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {value:?} for {key}: expected true or false"))),
    }
}

fn parse_anchor(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

/// Seeds as `a..b` (inclusive), a comma list, or a single number.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("invalid seed list {value:?}"));
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    Ok(seeds)
}

fn format_seeds(seeds: &[u64]) -> String {
    let contiguous = seeds.len() > 2 && seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous {
        format!("{}..{}", seeds[0], seeds[seeds.len() - 1])
    } else {
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    }
}

fn anchor_text(a: Option<f64>) -> String {
    a.map_or_else(|| "auto".to_string(), |v| format!("{v:?}"))
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    /// Applies every assignment in `text` on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", number + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "market.n" => self.n = parse(key, v)?,
            "market.quality" => self.quality = parse(key, v)?,
            "market.outside_quality" => self.outside_quality = parse(key, v)?,
            "market.mu" => self.mu = parse(key, v)?,
            "market.cost" => self.cost = parse(key, v)?,
            "market.lambda" => self.lambda = parse(key, v)?,
            "market.horizon" => self.horizon = parse(key, v)?,
            "market.capacity_per_period" => self.capacity_per_period = parse(key, v)?,
            "market.inventory_constrained" => self.inventory_constrained = parse_bool(key, v)?,
            "market.grid_size" => self.grid_size = parse(key, v)?,
            "market.xi" => self.xi = parse(key, v)?,
            "market.price_grid_mode" => {
                self.price_grid_mode = match v {
                    "constrained" => GridMode::Constrained,
                    "unconstrained" => GridMode::Unconstrained,
                    _ => return Err(Error::Config(format!("invalid value {v:?} for {key}"))),
                }
            }
            "market.nash_anchor" => self.nash_anchor = parse_anchor(key, v)?,
            "market.monopoly_anchor" => self.monopoly_anchor = parse_anchor(key, v)?,
            "market.unconstrained_nash_anchor" => self.unconstrained_nash_anchor = parse_anchor(key, v)?,

            "run.algorithm" => self.algorithm = v.parse()?,
            "run.seeds" => self.seeds = parse_seeds(v)?,
            "run.log_interval" => self.log_interval = parse(key, v)?,
            "run.output_dir" => self.output_dir = v.to_string(),

            "obs.include_opponent_inventory" => self.obs.include_opponent_inventory = parse_bool(key, v)?,
            "obs.include_time" => self.obs.include_time = parse_bool(key, v)?,

            "solver.resolution" => self.solver_resolution = parse(key, v)?,
            "solver.max_iters" => self.solver_max_iters = parse(key, v)?,
            "solver.tol" => self.solver_tol = parse(key, v)?,
            "solver.restarts" => self.solver_restarts = parse(key, v)?,
            "solver.seed" => self.solver_seed = parse(key, v)?,
            "solver.acceptance_tol" => self.solver_acceptance_tol = parse(key, v)?,
            "solver.discounted" => self.solver_discounted = parse_bool(key, v)?,

            "agent.dqn.training_episodes" => self.dqn.training_episodes = parse(key, v)?,
            "agent.dqn.learning_rate" => self.dqn.learning_rate = parse(key, v)?,
            "agent.dqn.adam_epsilon" => self.dqn.adam_epsilon = parse(key, v)?,
            "agent.dqn.epsilon_min" => self.dqn.epsilon_min = parse(key, v)?,
            "agent.dqn.epsilon_max" => self.dqn.epsilon_max = parse(key, v)?,
            "agent.dqn.buffer_capacity" => self.dqn.buffer_capacity = parse(key, v)?,
            "agent.dqn.batch_size" => self.dqn.batch_size = parse(key, v)?,
            "agent.dqn.grad_clip" => self.dqn.grad_clip = parse(key, v)?,
            "agent.dqn.warmup_episodes" => self.dqn.warmup_episodes = parse(key, v)?,
            "agent.dqn.train_interval_episodes" => self.dqn.train_interval_episodes = parse(key, v)?,
            "agent.dqn.target_update_interval_episodes" => self.dqn.target_update_interval_episodes = parse(key, v)?,
            "agent.dqn.discount" => self.dqn.discount = parse(key, v)?,
            "agent.dqn.train_steps_per_event" => self.dqn.train_steps_per_event = parse(key, v)?,

            "agent.ppo.training_updates" => self.ppo.training_updates = parse(key, v)?,
            "agent.ppo.learning_rate" => self.ppo.learning_rate = parse(key, v)?,
            "agent.ppo.adam_epsilon" => self.ppo.adam_epsilon = parse(key, v)?,
            "agent.ppo.num_minibatches" => self.ppo.num_minibatches = parse(key, v)?,
            "agent.ppo.epochs" => self.ppo.epochs = parse(key, v)?,
            "agent.ppo.gae_lambda" => self.ppo.gae_lambda = parse(key, v)?,
            "agent.ppo.value_coef" => self.ppo.value_coef = parse(key, v)?,
            "agent.ppo.grad_clip" => self.ppo.grad_clip = parse(key, v)?,
            "agent.ppo.clip_coef" => self.ppo.clip_coef = parse(key, v)?,
            "agent.ppo.entropy_max" => self.ppo.entropy_max = parse(key, v)?,
            "agent.ppo.entropy_min" => self.ppo.entropy_min = parse(key, v)?,
            "agent.ppo.entropy_anneal_fraction" => self.ppo.entropy_anneal_fraction = parse(key, v)?,
            "agent.ppo.num_envs" => self.ppo.num_envs = parse(key, v)?,
            "agent.ppo.discount" => self.ppo.discount = parse(key, v)?,
            "agent.ppo.normalize_advantages" => self.ppo.normalize_advantages = parse_bool(key, v)?,

            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let f = |v: f64| format!("{v:?}");
        let d = &self.dqn;
        let p = &self.ppo;
        vec![
            ("market.n", self.n.to_string()),
            ("market.quality", f(self.quality)),
            ("market.outside_quality", f(self.outside_quality)),
            ("market.mu", f(self.mu)),
            ("market.cost", f(self.cost)),
            ("market.lambda", self.lambda.to_string()),
            ("market.horizon", self.horizon.to_string()),
            ("market.capacity_per_period", self.capacity_per_period.to_string()),
            ("market.inventory_constrained", self.inventory_constrained.to_string()),
            ("market.grid_size", self.grid_size.to_string()),
            ("market.xi", f(self.xi)),
            (
                "market.price_grid_mode",
                match self.price_grid_mode {
                    GridMode::Constrained => "constrained".into(),
                    GridMode::Unconstrained => "unconstrained".into(),
                },
            ),
            ("market.nash_anchor", anchor_text(self.nash_anchor)),
            ("market.monopoly_anchor", anchor_text(self.monopoly_anchor)),
            ("market.unconstrained_nash_anchor", anchor_text(self.unconstrained_nash_anchor)),
            ("run.algorithm", self.algorithm.to_string()),
            ("run.seeds", format_seeds(&self.seeds)),
            ("run.log_interval", self.log_interval.to_string()),
            ("run.output_dir", self.output_dir.clone()),
            ("obs.include_opponent_inventory", self.obs.include_opponent_inventory.to_string()),
            ("obs.include_time", self.obs.include_time.to_string()),
            ("solver.resolution", f(self.solver_resolution)),
            ("solver.max_iters", self.solver_max_iters.to_string()),
            ("solver.tol", f(self.solver_tol)),
            ("solver.restarts", self.solver_restarts.to_string()),
            ("solver.seed", self.solver_seed.to_string()),
            ("solver.acceptance_tol", f(self.solver_acceptance_tol)),
            ("solver.discounted", self.solver_discounted.to_string()),
            ("agent.dqn.training_episodes", d.training_episodes.to_string()),
            ("agent.dqn.learning_rate", f(d.learning_rate)),
            ("agent.dqn.adam_epsilon", f(d.adam_epsilon)),
            ("agent.dqn.epsilon_min", f(d.epsilon_min)),
            ("agent.dqn.epsilon_max", f(d.epsilon_max)),
            ("agent.dqn.buffer_capacity", d.buffer_capacity.to_string()),
            ("agent.dqn.batch_size", d.batch_size.to_string()),
            ("agent.dqn.grad_clip", f(d.grad_clip)),
            ("agent.dqn.warmup_episodes", d.warmup_episodes.to_string()),
            ("agent.dqn.train_interval_episodes", d.train_interval_episodes.to_string()),
            ("agent.dqn.target_update_interval_episodes", d.target_update_interval_episodes.to_string()),
            ("agent.dqn.discount", f(d.discount)),
            ("agent.dqn.train_steps_per_event", d.train_steps_per_event.to_string()),
            ("agent.ppo.training_updates", p.training_updates.to_string()),
            ("agent.ppo.learning_rate", f(p.learning_rate)),
            ("agent.ppo.adam_epsilon", f(p.adam_epsilon)),
            ("agent.ppo.num_minibatches", p.num_minibatches.to_string()),
            ("agent.ppo.epochs", p.epochs.to_string()),
            ("agent.ppo.gae_lambda", f(p.gae_lambda)),
            ("agent.ppo.value_coef", f(p.value_coef)),
            ("agent.ppo.grad_clip", f(p.grad_clip)),
            ("agent.ppo.clip_coef", f(p.clip_coef)),
            ("agent.ppo.entropy_max", f(p.entropy_max)),
            ("agent.ppo.entropy_min", f(p.entropy_min)),
            ("agent.ppo.entropy_anneal_fraction", f(p.entropy_anneal_fraction)),
            ("agent.ppo.num_envs", p.num_envs.to_string()),
            ("agent.ppo.discount", f(p.discount)),
            ("agent.ppo.normalize_advantages", p.normalize_advantages.to_string()),
        ]
    }

    pub fn is_key(key: &str) -> bool {
        Self::default().entries().iter().any(|(k, _)| *k == key)
    }

    /// Canonical text form; parsing it back yields an equal config.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// First 12 hex digits of the SHA-256 of [`ExperimentConfig::dump`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.dump().as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n < 1 {
            return fail("market.n must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return fail("run.seeds must list at least one seed".into());
        }
        if self.grid_size < 2 {
            return fail(format!("market.grid_size must be at least 2, got {}", self.grid_size));
        }
        if !(0.0..0.5).contains(&self.xi) {
            return fail(format!("market.xi must lie in [0, 0.5), got {}", self.xi));
        }
        self.economics().validate().map_err(|e| Error::Config(e.to_string()))?;
        match self.algorithm {
            Algorithm::Dqn => self.dqn.validate(),
            Algorithm::Ppo => self.ppo.validate(),
        }
    }

    /// Units per agent per episode.
    pub fn episode_capacity(&self) -> u64 {
        if self.inventory_constrained {
            self.capacity_per_period.saturating_mul(self.horizon as u64)
        } else {
            self.lambda.saturating_mul(self.horizon as u64)
        }
    }

    /// Per-period capacity the benchmark solvers work with.
    pub fn benchmark_capacity(&self) -> u64 {
        if self.inventory_constrained {
            self.capacity_per_period
        } else {
            self.lambda
        }
    }

    pub fn economics(&self) -> Economics {
        Economics::symmetric(
            self.n,
            self.quality,
            self.outside_quality,
            self.mu,
            self.cost,
            self.lambda,
            self.horizon,
            self.episode_capacity(),
        )
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            resolution: self.solver_resolution,
            max_gauss_seidel_iters: self.solver_max_iters,
            convergence_tol: self.solver_tol,
            restarts: self.solver_restarts,
            seed: self.solver_seed,
            acceptance_tol: self.solver_acceptance_tol,
            discounted: self.solver_discounted,
            ..SolverConfig::covering(&self.economics())
        }
    }

    /// Episodes (DQN) or updates (PPO) in one run.
    pub fn training_length(&self) -> usize {
        match self.algorithm {
            Algorithm::Dqn => self.dqn.training_episodes,
            Algorithm::Ppo => self.ppo.training_updates,
        }
    }

    pub fn effective_log_interval(&self) -> usize {
        match (self.log_interval, self.algorithm) {
            (0, Algorithm::Dqn) => 50,
            (0, Algorithm::Ppo) => 1,
            (k, _) => k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("market.mu = 0.3\nrun.seeds = 1..40\nmarket.nash_anchor = 1.693 # pinned\n").unwrap();
        assert_eq!(cfg.seeds.len(), 40);
        assert_eq!(cfg.nash_anchor, Some(1.693));
        let back = ExperimentConfig::from_text(&cfg.dump()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 12);
    }

    #[test]
    fn every_dumped_key_is_settable() {
        let cfg = ExperimentConfig::default();
        for (k, v) in cfg.entries() {
            let mut c = cfg.clone();
            c.set(k, &v).unwrap();
            assert_eq!(c, cfg, "{k}");
        }
    }

    #[test]
    fn unknown_keys_and_bad_values() {
        let mut cfg = ExperimentConfig::default();
        assert!(matches!(cfg.set("market.colour", "red"), Err(Error::Config(_))));
        assert!(cfg.set("market.mu", "wide").is_err());
        assert!(cfg.apply_text("no equals sign").is_err());
        assert!(cfg.apply_override("run.algorithm=sarsa").is_err());
        cfg.apply_override("run.algorithm=dqn").unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Dqn);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3").unwrap(), vec![3]);
        assert_eq!(parse_seeds("1, 4,9").unwrap(), vec![1, 4, 9]);
        assert_eq!(parse_seeds("2..4").unwrap(), vec![2, 3, 4]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("5..1").is_err());
        assert_eq!(format_seeds(&[1, 2, 3, 4]), "1..4");
        assert_eq!(format_seeds(&[1, 5]), "1,5");
    }

    #[test]
    fn hash_tracks_changes() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.ppo.num_envs = 128;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn capacities_follow_mode() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(cfg.economics().capacities, vec![8800, 8800]);
        cfg.inventory_constrained = false;
        assert_eq!(cfg.economics().capacities, vec![20_000, 20_000]);
        assert_eq!(cfg.benchmark_capacity(), 1000);
    }

    #[test]
    fn validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let cfg = ExperimentConfig { xi: 0.6, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { mu: 0.0, ..ExperimentConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
