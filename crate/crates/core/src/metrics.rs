//! Collusion and convergence measures.

use crate::error::{Error, Result};

/// Realized and benchmark profits, each indexed `[t][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitGainInputs {
    pub realized: Vec<Vec<f64>>,
    pub nash_profit: Vec<Vec<f64>>,
    pub monopoly_profit: Vec<Vec<f64>>,
}

impl ProfitGainInputs {
    pub fn horizon(&self) -> usize {
        self.realized.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollusionReport {
    pub per_agent_gain: Vec<f64>,
    pub index: f64,
    pub gamma: f64,
}

pub const DEFAULT_GAMMA: f64 = 0.5;

/// Episodic profit gain of one agent: the per-period position of realized
/// profit between the Nash (0) and monopoly (1) benchmarks, averaged over the
/// episode.
pub fn profit_gain(inputs: &ProfitGainInputs, agent: usize) -> Result<f64> {
    let horizon = inputs.horizon();
    if horizon == 0 || inputs.nash_profit.len() != horizon || inputs.monopoly_profit.len() != horizon {
        return Err(Error::ShapeMismatch(format!(
            "profit paths of lengths {}, {}, {}",
            horizon,
            inputs.nash_profit.len(),
            inputs.monopoly_profit.len()
        )));
    }
    let mut total = 0.0;
    for t in 0..horizon {
        let nash = inputs.nash_profit[t][agent];
        let span = inputs.monopoly_profit[t][agent] - nash;
        if span == 0.0 {
            return Err(Error::DegenerateBenchmarks { agent, t });
        }
        total += (inputs.realized[t][agent] - nash) / span;
    }
    Ok(total / horizon as f64)
}

fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}

/// Sign-preserving power mean `sgn(m)|m|^(1/gamma)` with
/// `m = mean(sgn(v)|v|^gamma)`.
pub fn generalized_mean(values: &[f64], gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidGamma(gamma));
    }
    if values.is_empty() {
        return Err(Error::ShapeMismatch("generalized mean of no values".into()));
    }
    let m = values.iter().map(|v| signed_pow(*v, gamma)).sum::<f64>() / values.len() as f64;
    Ok(signed_pow(m, 1.0 / gamma))
}

pub fn collusion_index(per_agent_gains: &[f64], gamma: f64) -> Result<f64> {
    generalized_mean(per_agent_gains, gamma)
}

/// Profit gains of every agent and their collusion index.
pub fn collusion_report(inputs: &ProfitGainInputs, gamma: f64) -> Result<CollusionReport> {
    let n = inputs.realized.first().map_or(0, Vec::len);
    let per_agent_gain = (0..n).map(|i| profit_gain(inputs, i)).collect::<Result<Vec<_>>>()?;
    let index = collusion_index(&per_agent_gain, gamma)?;
    Ok(CollusionReport { per_agent_gain, index, gamma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub value: f64,
    pub converged: bool,
}

pub const CONVERGENCE_THRESHOLD: f64 = 0.2;

/// Number of trailing episodes in the final-10% window of a run with
/// `total_episodes` episodes: indices `ceil(0.9 E)..E`.
pub fn final_window(total_episodes: usize) -> usize {
    total_episodes - (9 * total_episodes).div_ceil(10)
}

/// Mean normalized price gap between agents over the final 10% of training.
///
/// `history` holds the most recent episodes, oldest first, each as prices
/// `[t][agent]`; only its last [`final_window`] entries are used. With more
/// than two agents the gap is averaged over unordered pairs.
pub fn convergence_metric(
    history: &[Vec<Vec<f64>>],
    total_episodes: usize,
    nash_price: f64,
    monopoly_price: f64,
) -> Result<ConvergenceReport> {
    if total_episodes < 10 {
        return Err(Error::InsufficientHistory { needed: 10, got: total_episodes });
    }
    if !(monopoly_price > nash_price) {
        return Err(Error::InvalidParams(format!(
            "monopoly price {monopoly_price} must exceed Nash price {nash_price}"
        )));
    }
    let window = final_window(total_episodes);
    if history.len() < window {
        return Err(Error::InsufficientHistory { needed: window, got: history.len() });
    }
    let span = monopoly_price - nash_price;
    let episodes = &history[history.len() - window..];
    let mut total = 0.0;
    for episode in episodes {
        let mut per_episode = 0.0;
        for prices in episode {
            let n = prices.len();
            let mut gap = 0.0;
            let mut pairs = 0usize;
            for i in 0..n {
                for j in i + 1..n {
                    gap += (prices[i] - prices[j]).abs();
                    pairs += 1;
                }
            }
            per_episode += if pairs == 0 { 0.0 } else { gap / pairs as f64 } / span;
        }
        total += per_episode / episode.len().max(1) as f64;
    }
    let value = total / window as f64;
    Ok(ConvergenceReport { value, converged: value < CONVERGENCE_THRESHOLD })
}
