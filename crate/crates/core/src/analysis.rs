//! Post-training probes: forced deviations, greedy response surfaces and
//! learning-curve aggregation.

use std::fmt::Write as _;

use crate::agents::GreedyPolicy;
use crate::error::{Error, Result};
use crate::harness::{play_greedy, Benchmarks, ExperimentConfig, RunLog, Trajectory};
use crate::market::{observe, settle, MarketState};

/// One forced deviation. `action: None` picks the deviator's best one-step
/// reply to the opponents' previous prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviationSpec {
    pub agent: usize,
    /// Period of the override, counted from 1.
    pub period: usize,
    pub action: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub spec: DeviationSpec,
    /// Action actually forced.
    pub action: usize,
    pub baseline: Trajectory,
    pub deviated: Trajectory,
    /// Episode profit deviated / baseline, per agent.
    pub profit_ratio: Vec<f64>,
    /// Same ratio for the summed profit of all agents.
    pub overall_ratio: f64,
}

pub const DEVIATION_HEADER: &str =
    "t,agent,baseline_action,deviated_action,baseline_price,deviated_price,baseline_profit,deviated_profit";

impl DeviationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(DEVIATION_HEADER);
        out.push('\n');
        for (b, d) in self.baseline.steps.iter().zip(&self.deviated.steps) {
            for i in 0..b.actions.len() {
                let _ = writeln!(
                    out,
                    "{},{i},{},{},{},{},{},{}",
                    b.t, b.actions[i], d.actions[i], b.prices[i], d.prices[i], b.rewards[i], d.rewards[i]
                );
            }
        }
        out
    }

    /// First period at or after `from` where every agent is within `steps`
    /// grid indices of its baseline action, if any.
    pub fn recovery_period(&self, from: usize, steps: usize) -> Option<usize> {
        self.baseline.steps.iter().zip(&self.deviated.steps).find_map(|(b, d)| {
            let close = b.actions.iter().zip(&d.actions).all(|(x, y)| x.abs_diff(*y) <= steps);
            (b.t >= from && close).then_some(b.t)
        })
    }
}

/// Grid action maximizing `agent`'s profit this period when opponents repeat
/// their previous prices. Ties go to the lower index; a^N if nothing earns.
pub fn one_step_best_reply(state: &MarketState, agent: usize, bench: &Benchmarks) -> usize {
    let grid = &bench.params.grid;
    let mut prices: Vec<f64> = state.last_prices.iter().map(|a| grid.price(*a)).collect();
    let mut best: Option<(usize, f64)> = None;
    for a in 0..grid.len() {
        prices[agent] = grid.price(a);
        let r = settle(&bench.params.econ, &state.inventories, &prices).rewards[agent];
        if best.map_or(true, |(_, v)| r > v) {
            best = Some((a, r));
        }
    }
    match best {
        Some((a, r)) if r > 0.0 => a,
        _ => grid.nash_index(),
    }
}

/// Plays a baseline and a deviated greedy episode from the same seed.
pub fn forced_deviation(
    cfg: &ExperimentConfig,
    bench: &Benchmarks,
    policies: &[&dyn GreedyPolicy],
    spec: DeviationSpec,
    seed: u64,
) -> Result<DeviationReport> {
    let n = bench.params.n();
    let horizon = bench.params.horizon();
    if spec.agent >= n {
        return Err(Error::InvalidParams(format!("deviating agent {} of {n}", spec.agent)));
    }
    if spec.period < 1 || spec.period > horizon {
        return Err(Error::InvalidParams(format!("deviation period {} outside 1..={horizon}", spec.period)));
    }
    if let Some(a) = spec.action {
        if a >= bench.params.grid.len() {
            return Err(Error::InvalidAction { action: a, grid_len: bench.params.grid.len() });
        }
    }
    let baseline = play_greedy(cfg, bench, policies, seed, None)?;
    let action = match spec.action {
        Some(a) => a,
        None => {
            let before = spec.period - 1;
            let state = if before == 0 {
                MarketState {
                    last_prices: baseline.initial_last_prices.clone(),
                    inventories: bench.params.econ.capacities.clone(),
                    t: 1,
                }
            } else {
                let s = &baseline.steps[before - 1];
                MarketState { last_prices: s.actions.clone(), inventories: s.inventories.clone(), t: spec.period }
            };
            one_step_best_reply(&state, spec.agent, bench)
        }
    };
    let deviated = play_greedy(cfg, bench, policies, seed, Some((spec.agent, spec.period, action)))?;
    let profit_ratio = (0..n).map(|i| deviated.episode_profit(i) / baseline.episode_profit(i)).collect();
    let overall_ratio = deviated.total_profit() / baseline.total_profit();
    Ok(DeviationReport { spec, action, baseline, deviated, profit_ratio, overall_ratio })
}

/// Which states a response surface probes. `inventories: None` uses
/// `x(t) = I·(1 − t/T)` for every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSpec {
    pub agent: usize,
    pub periods: Vec<usize>,
    pub inventories: Option<Vec<Vec<u64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRow {
    pub t: usize,
    pub inventory_frac: f64,
    pub own_prev: usize,
    /// Previous action shared by every opponent.
    pub opp_prev: usize,
    pub greedy_action: usize,
}

pub const SURFACE_HEADER: &str = "t,inventory_frac,own_prev_idx,opp_prev_idx,greedy_action";

/// Greedy action of `policy` (acting as `spec.agent`) over every pair of own
/// and opponent previous prices at each probed period.
pub fn response_surface(
    cfg: &ExperimentConfig,
    bench: &Benchmarks,
    policy: &dyn GreedyPolicy,
    spec: &SurfaceSpec,
) -> Result<Vec<SurfaceRow>> {
    let n = bench.params.n();
    let horizon = bench.params.horizon();
    let caps = &bench.params.econ.capacities;
    if spec.agent >= n {
        return Err(Error::InvalidParams(format!("probed agent {} of {n}", spec.agent)));
    }
    if let Some(&t) = spec.periods.iter().find(|t| **t < 1 || **t > horizon) {
        return Err(Error::InvalidParams(format!("surface period {t} outside 1..={horizon}")));
    }
    if let Some(inv) = &spec.inventories {
        if inv.len() != spec.periods.len() || inv.iter().any(|x| x.len() != n) {
            return Err(Error::ShapeMismatch("inventory schedule does not match periods and agents".into()));
        }
    }
    let k = bench.params.grid.len();
    let mut rows = Vec::with_capacity(spec.periods.len() * k * k);
    for (pi, &t) in spec.periods.iter().enumerate() {
        let inventories: Vec<u64> = match &spec.inventories {
            Some(inv) => inv[pi].clone(),
            None => {
                let left = 1.0 - t as f64 / horizon as f64;
                caps.iter().map(|c| (*c as f64 * left).floor() as u64).collect()
            }
        };
        let own_cap = caps[spec.agent];
        let inventory_frac =
            if own_cap == 0 { 0.0 } else { inventories[spec.agent] as f64 / own_cap as f64 };
        for own_prev in 0..k {
            for opp_prev in 0..k {
                let mut last_prices = vec![opp_prev; n];
                last_prices[spec.agent] = own_prev;
                let state = MarketState { last_prices, inventories: inventories.clone(), t };
                let greedy_action = policy.greedy(&observe(&state, spec.agent, &cfg.obs, &bench.params))?;
                rows.push(SurfaceRow { t, inventory_frac, own_prev, opp_prev, greedy_action });
            }
        }
    }
    Ok(rows)
}

pub fn surface_csv(rows: &[SurfaceRow]) -> String {
    let mut out = String::from(SURFACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.t, r.inventory_frac, r.own_prev, r.opp_prev, r.greedy_action);
    }
    out
}

pub const CURVES_HEADER: &str =
    "episode,agent,mean_action_mean,mean_action_std,collusion_index_mean,collusion_index_std";

/// Per logged episode and agent: mean and population standard deviation
/// across runs of the mean action and the collusion index.
pub fn export_learning_curves(logs: &[RunLog]) -> Result<String> {
    let first = logs.first().ok_or(Error::MismatchedGrids)?;
    let key = |l: &RunLog| l.rows.iter().map(|r| (r.episode, r.agent)).collect::<Vec<_>>();
    let grid = key(first);
    if logs.iter().any(|l| key(l) != grid) {
        return Err(Error::MismatchedGrids);
    }
    let stats = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        (mean, var.sqrt())
    };
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for (row, (episode, agent)) in grid.iter().enumerate() {
        let (am, asd) = stats(&mut logs.iter().map(|l| l.rows[row].mean_action));
        let (cm, csd) = stats(&mut logs.iter().map(|l| l.rows[row].collusion_index));
        let _ = writeln!(out, "{episode},{agent},{am},{asd},{cm},{csd}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{ConstantPolicy, NetworkPolicy};
    use crate::harness::{LogRow, RunLog};
    use crate::metrics::ConvergenceReport;
    use crate::nn::Mlp;

    fn pinned() -> (ExperimentConfig, Benchmarks) {
        let mut cfg = ExperimentConfig::default();
        cfg.nash_anchor = Some(1.693);
        cfg.monopoly_anchor = Some(1.925);
        let bench = Benchmarks::compute(&cfg).unwrap();
        (cfg, bench)
    }

    /// Prices high, and answers any rival price other than high or low with
    /// one period of low.
    struct Trigger {
        high: usize,
        low: usize,
    }

    impl GreedyPolicy for Trigger {
        fn greedy(&self, obs: &[f64]) -> Result<usize> {
            let seen = (obs[1] * 14.0).round() as usize;
            Ok(if seen == self.high || seen == self.low { self.high } else { self.low })
        }
    }

    #[test]
    fn no_op_override_changes_nothing() {
        let (cfg, bench) = pinned();
        let p = ConstantPolicy(7);
        let spec = DeviationSpec { agent: 0, period: 5, action: Some(7) };
        let r = forced_deviation(&cfg, &bench, &[&p, &p], spec, 3).unwrap();
        assert_eq!(r.baseline, r.deviated);
        assert_eq!(r.overall_ratio, 1.0);
        assert_eq!(r.profit_ratio, vec![1.0, 1.0]);
    }

    #[test]
    fn deviation_agrees_before_tau_and_propagates() {
        let (cfg, bench) = pinned();
        let t = Trigger { high: 12, low: 2 };
        let spec = DeviationSpec { agent: 1, period: 9, action: None };
        let r = forced_deviation(&cfg, &bench, &[&t, &t], spec, 11).unwrap();
        assert_eq!(r.baseline.steps[..8], r.deviated.steps[..8]);
        assert!(r.baseline.steps[2..].iter().all(|s| s.actions == vec![12, 12]));
        // best reply to a monopoly-priced rival undercuts it
        assert!(r.action < 10 && r.action != 2);
        assert_eq!(r.deviated.steps[8].actions, vec![12, r.action]);
        // the rival observes the undercut and punishes for one period
        assert_eq!(r.deviated.steps[9].actions, vec![2, 12]);
        assert_eq!(r.deviated.steps[10].actions, vec![12, 12]);
        assert!(r.overall_ratio < 1.0);
        assert_eq!(r.recovery_period(9, 2), Some(11));
        let again = forced_deviation(&cfg, &bench, &[&t, &t], spec, 11).unwrap();
        assert_eq!(r.to_csv(), again.to_csv());
        assert_eq!(r.to_csv().lines().count(), 1 + 40);
    }

    #[test]
    fn best_reply_matches_scan() {
        let (_, bench) = pinned();
        let state = MarketState { last_prices: vec![12, 12], inventories: vec![8800, 8800], t: 1 };
        let a = one_step_best_reply(&state, 0, &bench);
        let grid = &bench.params.grid;
        let profit = |i: usize| settle(&bench.params.econ, &state.inventories, &[grid.price(i), grid.price(12)]).rewards[0];
        assert!((0..grid.len()).all(|i| profit(i) <= profit(a)));
        let empty = MarketState { last_prices: vec![12, 12], inventories: vec![0, 8800], t: 1 };
        assert_eq!(one_step_best_reply(&empty, 0, &bench), grid.nash_index());
    }

    #[test]
    fn deviation_spec_is_checked() {
        let (cfg, bench) = pinned();
        let p = ConstantPolicy(0);
        for spec in [
            DeviationSpec { agent: 2, period: 1, action: None },
            DeviationSpec { agent: 0, period: 0, action: None },
            DeviationSpec { agent: 0, period: 21, action: None },
            DeviationSpec { agent: 0, period: 1, action: Some(15) },
        ] {
            assert!(forced_deviation(&cfg, &bench, &[&p, &p], spec, 0).is_err());
        }
    }

    #[test]
    fn surface_cardinality_and_determinism() {
        let (cfg, bench) = pinned();
        let mut rng = crate::harness::stream(1, 0);
        let net = Mlp::with_sizes(&[cfg.obs.dim(2), 64, 64, 15], &mut rng);
        let policy = NetworkPolicy(net);
        let spec = SurfaceSpec { agent: 0, periods: vec![1, 5, 10, 20], inventories: None };
        let rows = response_surface(&cfg, &bench, &policy, &spec).unwrap();
        assert_eq!(rows.len(), 4 * 225);
        assert_eq!(rows, response_surface(&cfg, &bench, &policy, &spec).unwrap());
        assert!((rows[0].inventory_frac - 0.95).abs() < 1e-12);
        assert_eq!(rows.last().unwrap().inventory_frac, 0.0);
        let csv = surface_csv(&rows);
        assert!(csv.starts_with(SURFACE_HEADER));
        assert_eq!(csv.lines().count(), 901);
    }

    #[test]
    fn surface_reads_opponent_axis() {
        let (cfg, bench) = pinned();
        let t = Trigger { high: 12, low: 2 };
        let spec = SurfaceSpec { agent: 1, periods: vec![3], inventories: Some(vec![vec![5000, 5000]]) };
        let rows = response_surface(&cfg, &bench, &t, &spec).unwrap();
        for r in rows {
            let expected = if r.opp_prev == 12 || r.opp_prev == 2 { 12 } else { 2 };
            assert_eq!(r.greedy_action, expected);
        }
        let bad = SurfaceSpec { agent: 0, periods: vec![0], inventories: None };
        assert!(response_surface(&cfg, &bench, &t, &bad).is_err());
    }

    fn log(values: &[(f64, f64)]) -> RunLog {
        let rows = values
            .iter()
            .enumerate()
            .map(|(e, (a, c))| LogRow {
                episode: e,
                agent: 0,
                mean_action: *a,
                mean_price: 0.0,
                episode_profit: 0.0,
                collusion_index: *c,
                exploration_value: 0.0,
            })
            .collect();
        RunLog {
            algorithm: crate::agents::Algorithm::Dqn,
            seed: 0,
            config_hash: String::new(),
            rows,
            mean_action_series: vec![],
            collusion_series: vec![],
            convergence: ConvergenceReport { value: 0.0, converged: true },
            collusion_last10: 0.0,
        }
    }

    #[test]
    fn learning_curves() {
        let a = log(&[(1.0, 0.5), (3.0, 0.25)]);
        let single = export_learning_curves(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.lines().nth(1).unwrap(), "0,0,1,0,0.5,0");
        assert_eq!(export_learning_curves(&[a.clone(), a.clone()]).unwrap(), single);
        let b = log(&[(3.0, 0.5), (5.0, 0.75)]);
        let both = export_learning_curves(&[a.clone(), b]).unwrap();
        assert_eq!(both.lines().nth(2).unwrap(), "1,0,4,1,0.5,0.25");
        let short = log(&[(1.0, 0.5)]);
        assert!(matches!(export_learning_curves(&[a, short]), Err(Error::MismatchedGrids)));
        assert!(export_learning_curves(&[]).is_err());
    }
}
