//! Learning agents and the greedy policies extracted from them.

pub mod dqn;
pub mod ppo;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::Mlp;

pub use dqn::{DqnAgent, DqnConfig};
pub use ppo::{PpoAgent, PpoConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Dqn,
    Ppo,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Dqn => "dqn",
            Algorithm::Ppo => "ppo",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(Algorithm::Dqn),
            "ppo" => Ok(Algorithm::Ppo),
            other => Err(Error::Config(format!("unknown algorithm {other:?}, expected dqn or ppo"))),
        }
    }
}

/// Deterministic action choice from an observation.
pub trait GreedyPolicy: Send + Sync {
    fn greedy(&self, obs: &[f64]) -> Result<usize>;
}

/// Always plays the same grid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstantPolicy(pub usize);

impl GreedyPolicy for ConstantPolicy {
    fn greedy(&self, _obs: &[f64]) -> Result<usize> {
        Ok(self.0)
    }
}

/// The network an agent acts with: Q-values for DQN, logits for PPO. Both
/// act greedily by taking the largest output.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPolicy(pub Mlp);

impl GreedyPolicy for NetworkPolicy {
    fn greedy(&self, obs: &[f64]) -> Result<usize> {
        Ok(dqn::argmax(&self.0.forward_one(obs)?))
    }
}

impl DqnAgent {
    pub fn policy(&self) -> NetworkPolicy {
        NetworkPolicy(self.online.clone())
    }
}

impl PpoAgent {
    pub fn policy(&self) -> NetworkPolicy {
        NetworkPolicy(self.actor.clone())
    }
}

/// Saved greedy policy of one agent with the run it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub algorithm: Algorithm,
    pub config_hash: String,
    pub episodes: usize,
    pub agent: usize,
    pub network: Mlp,
}

const CHECKPOINT_HEADER: &str = "pricing-lab agent v1";

impl AgentCheckpoint {
    /// Header line, `key value` metadata lines, a blank line, then the
    /// network text.
    pub fn to_text(&self) -> String {
        format!(
            "{CHECKPOINT_HEADER}\nalgorithm {}\nconfig_hash {}\nepisodes {}\nagent {}\n\n{}",
            self.algorithm,
            self.config_hash,
            self.episodes,
            self.agent,
            self.network.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        let (head, body) = text.split_once("\n\n").ok_or_else(|| bad("missing network section"))?;
        let mut lines = head.lines();
        if lines.next() != Some(CHECKPOINT_HEADER) {
            return Err(bad("unsupported agent checkpoint header"));
        }
        let (mut algorithm, mut config_hash, mut episodes, mut agent) = (None, None, None, None);
        for line in lines {
            let (key, value) = line.split_once(' ').ok_or_else(|| bad("malformed metadata line"))?;
            match key {
                "algorithm" => algorithm = Some(value.parse::<Algorithm>().map_err(|e| bad(&e.to_string()))?),
                "config_hash" => config_hash = Some(value.to_string()),
                "episodes" => episodes = Some(value.parse().map_err(|_| bad("bad episode count"))?),
                "agent" => agent = Some(value.parse().map_err(|_| bad("bad agent index"))?),
                other => return Err(bad(&format!("unknown metadata key {other:?}"))),
            }
        }
        Ok(Self {
            algorithm: algorithm.ok_or_else(|| bad("missing algorithm"))?,
            config_hash: config_hash.ok_or_else(|| bad("missing config hash"))?,
            episodes: episodes.ok_or_else(|| bad("missing episode count"))?,
            agent: agent.ok_or_else(|| bad("missing agent index"))?,
            network: Mlp::from_text(body)?,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn policy(&self) -> NetworkPolicy {
        NetworkPolicy(self.network.clone())
    }
}
