//! Competitive and collusive benchmark prices.
//!
//! Both benchmarks are constant price profiles repeated over the episode.
//! The per-period objective `(p - c) * floor(lambda * d)` is piecewise
//! constant in quantity, so every search here is an exhaustive scan over a
//! fine price lattice. Nash profiles come from Gauss-Seidel best-response
//! cycling and are certified against single-agent deviations over the whole
//! episode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{settle, Economics};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumKind {
    Competitive,
    Collusive,
}

impl std::fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Competitive => "competitive",
            Self::Collusive => "collusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub price_search_lo: f64,
    pub price_search_hi: f64,
    /// Lattice step.
    pub resolution: f64,
    pub max_gauss_seidel_iters: usize,
    pub convergence_tol: f64,
    pub restarts: usize,
    /// Seed for the random restart points.
    pub seed: u64,
    /// Largest certification gap accepted, relative to episode profit.
    pub acceptance_tol: f64,
    /// Discounted episodes are rejected.
    pub discounted: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            price_search_lo: 0.0,
            price_search_hi: 4.0,
            resolution: 1e-4,
            max_gauss_seidel_iters: 200,
            convergence_tol: 1e-5,
            restarts: 8,
            seed: 0,
            acceptance_tol: 5e-3,
            discounted: false,
        }
    }
}

impl SolverConfig {
    /// Default settings with a search window from the lowest marginal cost to
    /// a price at which no agent sells a single unit.
    pub fn covering(econ: &Economics) -> Self {
        let lo = econ.costs.iter().cloned().fold(f64::INFINITY, f64::min);
        let top = econ.qualities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        // beyond this price a lone seller facing only the outside good sells nothing
        let hi = (top - econ.outside_quality + econ.mu * ((econ.lambda as f64).ln() + 1.0)).max(lo + 1.0);
        Self { price_search_lo: lo, price_search_hi: hi, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.discounted {
            return Err(Error::NotImplemented);
        }
        if !(self.price_search_lo < self.price_search_hi) {
            return Err(Error::EmptySearchRange { lo: self.price_search_lo, hi: self.price_search_hi });
        }
        if !(self.resolution > 0.0) {
            return Err(Error::InvalidParams(format!("resolution must be positive, got {}", self.resolution)));
        }
        Ok(())
    }

    fn lattice_len(&self) -> usize {
        ((self.price_search_hi - self.price_search_lo) / self.resolution + 1e-9).floor() as usize + 1
    }

    fn lattice(&self, k: usize) -> f64 {
        self.price_search_lo + k as f64 * self.resolution
    }
}

/// Constant-price benchmark together with its rollout in the episodic market.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumSolution {
    pub kind: EquilibriumKind,
    /// Constant price per agent.
    pub prices: Vec<f64>,
    /// Units sold per agent in the first period of the rollout.
    pub per_period_demand: Vec<u64>,
    /// Profit per agent in the first period of the rollout.
    pub per_period_profit: Vec<f64>,
    /// Profit per period and agent, `[t][agent]`, from the full rollout.
    pub profit_path: Vec<Vec<f64>>,
    pub capacity_per_period: u64,
    /// Largest episode profit gain found for a unilateral deviation.
    pub certification_gap: f64,
}

impl EquilibriumSolution {
    pub fn episode_profit(&self, agent: usize) -> f64 {
        self.profit_path.iter().map(|row| row[agent]).sum()
    }

    /// Certification gap relative to the smallest agent episode profit.
    pub fn relative_gap(&self) -> f64 {
        let base = (0..self.prices.len()).map(|i| self.episode_profit(i).abs()).fold(f64::INFINITY, f64::min);
        if self.certification_gap == 0.0 {
            0.0
        } else if base > 0.0 {
            self.certification_gap / base
        } else {
            f64::INFINITY
        }
    }

    pub fn is_certified(&self, cfg: &SolverConfig) -> bool {
        self.relative_gap() <= cfg.acceptance_tol
    }
}

/// Shared MNL evaluation for one agent without allocation. Arithmetic matches
/// [`crate::market::mnl_demand`] term for term so floors agree exactly.
fn share_of(agent: usize, prices: &[f64], active: &[bool], econ: &Economics) -> f64 {
    crate::market::share_of(agent, prices, active, econ)
}

fn units_of(agent: usize, prices: &[f64], active: &[bool], econ: &Economics) -> u64 {
    econ.units(share_of(agent, prices, active, econ))
}

/// Highest price at which `agent` sells exactly `target` units given the
/// others' prices; `target == 0` yields a price with zero floored demand.
pub fn price_for_units(agent: usize, target: u64, prices: &[f64], active: &[bool], econ: &Economics) -> f64 {
    let mut probe = prices.to_vec();
    let mut on = active.to_vec();
    on[agent] = true;
    // outside mass seen by this agent
    let others: f64 = (0..econ.n())
        .filter(|j| *j != agent && on[*j])
        .map(|j| ((econ.qualities[j] - prices[j]) / econ.mu).exp())
        .sum::<f64>()
        + (econ.outside_quality / econ.mu).exp();
    let lambda = econ.lambda as f64;
    let target = target.min(econ.lambda - 1);
    let share = if target == 0 { 0.5 / lambda } else { (target as f64 / lambda).min(1.0 - 0.5 / lambda) };
    let u = (others * share / (1.0 - share)).ln();
    let mut p = econ.qualities[agent] - econ.mu * u;
    let mut units = |p: f64| {
        probe[agent] = p;
        units_of(agent, &probe, &on, econ)
    };
    let scale = 1e-9 * p.abs().max(1.0);
    if target == 0 {
        let mut step = scale;
        while units(p) > 0 {
            p += step;
            step *= 2.0;
        }
        return p;
    }
    // bracket the boundary: units(lo) >= target > units(hi)
    let (mut lo, mut hi) = (p, p);
    let mut step = scale;
    while units(lo) < target {
        lo -= step;
        step *= 2.0;
    }
    step = scale;
    while units(hi) >= target {
        hi += step;
        step *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if units(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Best constant price for `agent` against fixed opponent prices within one
/// period, subject to selling at most `capacity_per_period` units.
pub fn best_response(
    opponent_prices: &[f64],
    agent: usize,
    capacity_per_period: u64,
    econ: &Economics,
    cfg: &SolverConfig,
) -> Result<f64> {
    cfg.validate()?;
    Ok(best_response_unchecked(opponent_prices, agent, capacity_per_period, econ, cfg))
}

fn best_response_unchecked(
    opponent_prices: &[f64],
    agent: usize,
    capacity: u64,
    econ: &Economics,
    cfg: &SolverConfig,
) -> f64 {
    let mut prices = opponent_prices.to_vec();
    let active = vec![true; econ.n()];
    let cost = econ.costs[agent];
    let mut best: Option<(f64, f64)> = None;
    for k in 0..cfg.lattice_len() {
        let p = cfg.lattice(k);
        prices[agent] = p;
        let units = units_of(agent, &prices, &active, econ);
        if units > capacity {
            continue;
        }
        let profit = (p - cost) * units as f64;
        if best.is_none_or(|(b, _)| profit >= b) {
            best = Some((profit, p));
        }
    }
    match best {
        Some((_, p)) => p,
        // demand exceeds capacity everywhere on the lattice
        None => price_for_units(agent, capacity, opponent_prices, &active, econ),
    }
}

/// Gauss-Seidel best-response iteration from several starting points.
pub fn solve_nash(econ: &Economics, capacity_per_period: u64, cfg: &SolverConfig) -> Result<EquilibriumSolution> {
    cfg.validate()?;
    econ.validate()?;
    let n = econ.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts.max(1))
        .map(|r| {
            if r == 0 {
                vec![0.5 * (cfg.price_search_lo + cfg.price_search_hi); n]
            } else {
                (0..n).map(|_| rng.gen_range(cfg.price_search_lo..=cfg.price_search_hi)).collect()
            }
        })
        .collect();

    let certified = |prices: Vec<f64>| {
        let mut sol = rollout_solution(EquilibriumKind::Competitive, prices, capacity_per_period, econ);
        sol.certification_gap = certify_nash(&sol, econ, cfg);
        sol
    };
    // Among certified candidates the one with the highest joint profit wins;
    // without any, the smallest gap.
    let pick = |candidates: Vec<EquilibriumSolution>| {
        let joint = |s: &EquilibriumSolution| (0..s.prices.len()).map(|i| s.episode_profit(i)).sum::<f64>();
        let better = |a: &EquilibriumSolution, b: &EquilibriumSolution| match (a.is_certified(cfg), b.is_certified(cfg)) {
            (true, true) => joint(a) > joint(b),
            (true, false) => true,
            (false, true) => false,
            (false, false) => a.relative_gap() < b.relative_gap(),
        };
        candidates.into_iter().reduce(|best, sol| if better(&sol, &best) { sol } else { best })
    };

    // Identical agents: iterate the shared best response along the diagonal.
    // On the lattice this can end in a two-cycle; both of its points are kept
    // as candidates.
    let mut residual_floor = f64::INFINITY;
    if econ.is_symmetric() {
        let diagonal: Vec<(bool, f64, Vec<f64>)> = starts
            .par_iter()
            .map(|start| {
                let mut p = start[0];
                let mut previous = p;
                let mut residual = f64::INFINITY;
                for _ in 0..cfg.max_gauss_seidel_iters {
                    let next = best_response_unchecked(&vec![p; n], 0, capacity_per_period, econ, cfg);
                    residual = (next - p).abs();
                    previous = p;
                    p = next;
                    if residual < cfg.convergence_tol {
                        return (true, residual, vec![p]);
                    }
                }
                (false, residual, vec![p, previous])
            })
            .collect();
        let mut points: Vec<f64> = Vec::new();
        for (_, residual, ends) in &diagonal {
            residual_floor = residual_floor.min(*residual);
            for p in ends {
                if !points.iter().any(|q| (q - p).abs() < cfg.convergence_tol) {
                    points.push(*p);
                }
            }
        }
        let candidates: Vec<EquilibriumSolution> = points.into_par_iter().map(|p| certified(vec![p; n])).collect();
        if let Some(best) = pick(candidates) {
            if best.is_certified(cfg) {
                return Ok(best);
            }
        }
    }

    let runs: Vec<(bool, f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|mut prices| {
            let mut residual = f64::INFINITY;
            for _ in 0..cfg.max_gauss_seidel_iters {
                residual = 0.0;
                for i in 0..n {
                    let next = best_response_unchecked(&prices, i, capacity_per_period, econ, cfg);
                    residual = f64::max(residual, (next - prices[i]).abs());
                    prices[i] = next;
                }
                if residual < cfg.convergence_tol {
                    return (true, residual, prices);
                }
            }
            (false, residual, prices)
        })
        .collect();

    let mut converged: Vec<Vec<f64>> = Vec::new();
    for (ok, _, p) in &runs {
        if *ok && !converged.iter().any(|c| c.iter().zip(p).all(|(a, b)| (a - b).abs() < cfg.convergence_tol)) {
            converged.push(p.clone());
        }
    }
    if converged.is_empty() {
        let residual = runs.iter().map(|r| r.1).fold(residual_floor, f64::min);
        return Err(Error::NoConvergence { iterations: cfg.max_gauss_seidel_iters, residual });
    }
    let candidates: Vec<EquilibriumSolution> = converged.into_par_iter().map(certified).collect();
    Ok(pick(candidates).expect("at least one converged restart"))
}

/// Joint profit maximization under per-agent capacity.
pub fn solve_monopoly(econ: &Economics, capacity_per_period: u64, cfg: &SolverConfig) -> Result<EquilibriumSolution> {
    cfg.validate()?;
    econ.validate()?;
    let n = econ.n();
    let active = vec![true; n];
    let joint = |prices: &[f64]| -> Option<f64> {
        let mut total = 0.0;
        for i in 0..n {
            let units = units_of(i, prices, &active, econ);
            if units > capacity_per_period {
                return None;
            }
            total += (prices[i] - econ.costs[i]) * units as f64;
        }
        Some(total)
    };
    let len = cfg.lattice_len();

    // diagonal scan
    let mut best_k = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut prices = vec![0.0; n];
    for k in 0..len {
        prices.fill(cfg.lattice(k));
        if let Some(v) = joint(&prices) {
            if v >= best_val {
                best_val = v;
                best_k = k;
            }
        }
    }
    let mut idx = vec![best_k; n];
    if best_val == f64::NEG_INFINITY {
        // nothing feasible on the lattice: every agent at its capacity price
        let p: Vec<f64> = vec![cfg.price_search_hi; n];
        let fallback: Vec<f64> = (0..n).map(|i| price_for_units(i, capacity_per_period, &p, &active, econ)).collect();
        return Ok(finish_monopoly(fallback, capacity_per_period, econ, cfg));
    }

    if n == 2 {
        // local box around the diagonal optimum
        const HALF_WIDTH: usize = 25;
        let lo0 = best_k.saturating_sub(HALF_WIDTH);
        let hi0 = (best_k + HALF_WIDTH).min(len - 1);
        let mut best = (best_val, best_k, best_k);
        for a in lo0..=hi0 {
            for b in lo0..=hi0 {
                let v = joint(&[cfg.lattice(a), cfg.lattice(b)]);
                if let Some(v) = v {
                    if v > best.0 || (v == best.0 && a + b >= best.1 + best.2) {
                        best = (v, a, b);
                    }
                }
            }
        }
        idx = vec![best.1, best.2];
    } else if !econ.is_symmetric() || n > 2 {
        // coordinate ascent on joint profit
        let mut current = best_val;
        for _ in 0..cfg.max_gauss_seidel_iters {
            let mut improved = false;
            for i in 0..n {
                let mut trial: Vec<f64> = idx.iter().map(|k| cfg.lattice(*k)).collect();
                for k in 0..len {
                    trial[i] = cfg.lattice(k);
                    if let Some(v) = joint(&trial) {
                        if v > current || (v == current && k > idx[i]) {
                            current = v;
                            idx[i] = k;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    let prices: Vec<f64> = idx.iter().map(|k| cfg.lattice(*k)).collect();
    Ok(finish_monopoly(prices, capacity_per_period, econ, cfg))
}

fn finish_monopoly(prices: Vec<f64>, capacity: u64, econ: &Economics, cfg: &SolverConfig) -> EquilibriumSolution {
    let mut sol = rollout_solution(EquilibriumKind::Collusive, prices, capacity, econ);
    sol.certification_gap = certify_nash(&sol, econ, cfg);
    sol
}

fn rollout_solution(kind: EquilibriumKind, prices: Vec<f64>, capacity: u64, econ: &Economics) -> EquilibriumSolution {
    let episode = econ.with_capacity_per_period(capacity);
    let mut inventories = episode.capacities.clone();
    let mut profit_path = Vec::with_capacity(econ.horizon);
    let mut first = None;
    for _ in 0..econ.horizon {
        let s = settle(&episode, &inventories, &prices);
        for (x, q) in inventories.iter_mut().zip(&s.quantities) {
            *x -= q;
        }
        if first.is_none() {
            first = Some((s.quantities.clone(), s.rewards.clone()));
        }
        profit_path.push(s.rewards);
    }
    let (per_period_demand, per_period_profit) = first.expect("horizon >= 1");
    EquilibriumSolution {
        kind,
        prices,
        per_period_demand,
        per_period_profit,
        profit_path,
        capacity_per_period: capacity,
        certification_gap: 0.0,
    }
}

/// Episode profit of `agent` playing `(price, units)` per period against the
/// all-active demand of the equilibrium problem, with the sell-out repair:
/// once demand meets the remaining stock, that stock is sold at the highest
/// price that clears it.
fn gnep_repaired_profit(
    periods: impl Iterator<Item = (f64, u64)>,
    stock: u64,
    cost: f64,
    clear_price: &mut impl FnMut(u64) -> f64,
) -> f64 {
    let mut x = stock;
    let mut profit = 0.0;
    for (p, units) in periods {
        if x == 0 {
            break;
        }
        if units >= x {
            return profit + (clear_price(x) - cost) * x as f64;
        }
        profit += (p - cost) * units as f64;
        x -= units;
    }
    profit
}

/// Largest episode profit gain any single agent obtains by deviating from the
/// constant profile, either to another constant lattice price or to a lattice
/// price in one period only.
///
/// Demand is the per-period demand of the equilibrium problem, in which every
/// seller stays in the choice set; the deviator is bound by its episode
/// inventory and repaired at its sell-out period. See [`substitution_gap`] for
/// the same check in the market with sold-out sellers dropped.
pub fn certify_nash(candidate: &EquilibriumSolution, econ: &Economics, cfg: &SolverConfig) -> f64 {
    let n = econ.n();
    let horizon = econ.horizon;
    let stock = candidate.capacity_per_period * horizon as u64;
    let active = vec![true; n];
    let len = cfg.lattice_len();
    let identical = econ.is_symmetric() && candidate.prices.iter().all(|p| *p == candidate.prices[0]);
    let agents = if identical { 1 } else { n };
    (0..agents)
        .map(|agent| {
            let cost = econ.costs[agent];
            let mut prices = candidate.prices.clone();
            let units_at = |prices: &mut Vec<f64>, p: f64| {
                prices[agent] = p;
                units_of(agent, prices, &active, econ)
            };
            let table: Vec<u64> = (0..len).map(|k| units_at(&mut prices.clone(), cfg.lattice(k))).collect();
            let base_price = candidate.prices[agent];
            let base_units = units_at(&mut prices, base_price);
            let mut memo = std::collections::HashMap::new();
            let mut clear = |x: u64| {
                *memo
                    .entry(x)
                    .or_insert_with(|| price_for_units(agent, x, &candidate.prices, &active, econ))
            };
            let base = gnep_repaired_profit(
                std::iter::repeat((base_price, base_units)).take(horizon),
                stock,
                cost,
                &mut clear,
            );
            let mut best = base;
            for (k, &units) in table.iter().enumerate() {
                let q = cfg.lattice(k);
                let constant =
                    gnep_repaired_profit(std::iter::repeat((q, units)).take(horizon), stock, cost, &mut clear);
                best = best.max(constant);
                for t in 0..horizon {
                    let path = (0..horizon).map(|s| if s == t { (q, units) } else { (base_price, base_units) });
                    best = best.max(gnep_repaired_profit(path, stock, cost, &mut clear));
                }
            }
            (best - base).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Episode profit of `agent` when it plays `own` against fixed opponent paths
/// in the market, after the sell-out repair.
fn market_repaired_profit(paths: &[Vec<f64>], own: &[f64], agent: usize, econ: &Economics) -> f64 {
    let n = econ.n();
    let mut inventories = econ.capacities.clone();
    let mut prices = vec![0.0; n];
    let mut active = vec![false; n];
    let mut profit = 0.0;
    for t in 0..econ.horizon {
        for j in 0..n {
            prices[j] = if j == agent { own[t] } else { paths[j][t] };
            active[j] = inventories[j] > 0;
        }
        let x = inventories[agent];
        if x == 0 {
            return profit;
        }
        let own_units = units_of(agent, &prices, &active, econ);
        if own_units >= x {
            let p_bar = price_for_units(agent, x, &prices, &active, econ);
            return profit + (p_bar - econ.costs[agent]) * x as f64;
        }
        for j in 0..n {
            let q = if j == agent { own_units } else { units_of(j, &prices, &active, econ).min(inventories[j]) };
            inventories[j] -= q;
            if j == agent {
                profit += (prices[j] - econ.costs[j]) * q as f64;
            }
        }
    }
    profit
}

/// The deviation check of [`certify_nash`] played out in the market itself,
/// where a seller that runs out of stock leaves the choice set and its demand
/// moves to the others. A deviator can exploit this by pushing rivals into an
/// early sell-out, so the gap here can exceed the certified one.
pub fn substitution_gap(candidate: &EquilibriumSolution, econ: &Economics, cfg: &SolverConfig) -> f64 {
    let episode = econ.with_capacity_per_period(candidate.capacity_per_period);
    let n = episode.n();
    let horizon = episode.horizon;
    let paths: Vec<Vec<f64>> = candidate.prices.iter().map(|p| vec![*p; horizon]).collect();
    let len = cfg.lattice_len();
    (0..n)
        .map(|agent| {
            let base = market_repaired_profit(&paths, &paths[agent], agent, &episode)
                .max(rollout_profit(&paths, agent, &episode));
            let best = (0..len)
                .into_par_iter()
                .map(|k| {
                    let q = cfg.lattice(k);
                    let mut best = market_repaired_profit(&paths, &vec![q; horizon], agent, &episode);
                    let mut own = paths[agent].clone();
                    for t in 0..horizon {
                        own[t] = q;
                        best = best.max(market_repaired_profit(&paths, &own, agent, &episode));
                        own[t] = paths[agent][t];
                    }
                    best
                })
                .reduce(|| f64::NEG_INFINITY, f64::max);
            (best - base).max(0.0)
        })
        .fold(0.0, f64::max)
}

fn rollout_profit(paths: &[Vec<f64>], agent: usize, econ: &Economics) -> f64 {
    episode_rollout(paths, econ).iter().map(|r| r[agent]).sum()
}

/// Rewards `[t][agent]` from playing the given price paths in the market.
pub fn episode_rollout(paths: &[Vec<f64>], econ: &Economics) -> Vec<Vec<f64>> {
    let mut inventories = econ.capacities.clone();
    (0..econ.horizon)
        .map(|t| {
            let prices: Vec<f64> = paths.iter().map(|p| p[t]).collect();
            let s = settle(econ, &inventories, &prices);
            for (x, q) in inventories.iter_mut().zip(&s.quantities) {
                *x -= q;
            }
            s.rewards
        })
        .collect()
}

/// Units `agent` would sell per period if it were active (opponents active
/// while stocked), along the rollout of the given paths. This is the demand
/// entering the episode inventory constraint.
pub fn constrained_demands(paths: &[Vec<f64>], agent: usize, econ: &Economics) -> Vec<u64> {
    let mut inventories = econ.capacities.clone();
    (0..econ.horizon)
        .map(|t| {
            let prices: Vec<f64> = paths.iter().map(|p| p[t]).collect();
            let mut active: Vec<bool> = inventories.iter().map(|x| *x > 0).collect();
            active[agent] = true;
            let want = units_of(agent, &prices, &active, econ);
            let s = settle(econ, &inventories, &prices);
            for (x, q) in inventories.iter_mut().zip(&s.quantities) {
                *x -= q;
            }
            want
        })
        .collect()
}

/// True when the agent's path never asks for more units than its capacity.
pub fn is_feasible(paths: &[Vec<f64>], agent: usize, econ: &Economics) -> bool {
    constrained_demands(paths, agent, econ).iter().sum::<u64>() <= econ.capacities[agent]
}

/// Repairs an infeasible price path for `agent` without lowering its profit.
///
/// Up to the sell-out period the path is unchanged; at the sell-out period the
/// price becomes the highest one that sells exactly the remaining stock; after
/// it, prices are raised until floored demand is zero.
pub fn feasibilize(price_vector: &[f64], opponent_prices: &[Vec<f64>], agent: usize, econ: &Economics) -> Vec<f64> {
    let n = econ.n();
    let mut paths: Vec<Vec<f64>> = opponent_prices.to_vec();
    paths[agent] = price_vector.to_vec();
    if is_feasible(&paths, agent, econ) {
        return price_vector.to_vec();
    }
    let mut out = price_vector.to_vec();
    let mut inventories = econ.capacities.clone();
    let mut sold_out = false;
    for t in 0..econ.horizon {
        let mut prices: Vec<f64> = (0..n).map(|j| paths[j][t]).collect();
        let mut active: Vec<bool> = inventories.iter().map(|x| *x > 0).collect();
        active[agent] = true;
        let x = inventories[agent];
        if sold_out || x == 0 {
            out[t] = price_for_units(agent, 0, &prices, &active, econ);
        } else if units_of(agent, &prices, &active, econ) >= x {
            out[t] = price_for_units(agent, x, &prices, &active, econ);
            sold_out = true;
        }
        prices[agent] = out[t];
        let s = settle(econ, &inventories, &prices);
        for (x, q) in inventories.iter_mut().zip(&s.quantities) {
            *x -= q;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub capacity: u64,
    pub nash: EquilibriumSolution,
    pub monopoly: EquilibriumSolution,
}

/// One-period benchmarks for every per-period capacity in the list.
pub fn capacity_sweep(econ: &Economics, capacities: &[u64], cfg: &SolverConfig) -> Vec<Result<CapacityRow>> {
    capacities
        .par_iter()
        .map(|&capacity| {
            let nash = solve_nash(econ, capacity, cfg)?;
            let monopoly = solve_monopoly(econ, capacity, cfg)?;
            Ok(CapacityRow { capacity, nash, monopoly })
        })
        .collect()
}

pub const CAPACITY_SWEEP_HEADER: &str =
    "capacity,nash_price,monopoly_price,nash_demand,monopoly_demand,nash_profit,monopoly_profit";

/// CSV rows for agent 0 of each solved capacity; failed rows are skipped.
pub fn capacity_sweep_csv(rows: &[Result<CapacityRow>]) -> String {
    let mut out = String::from(CAPACITY_SWEEP_HEADER);
    out.push('\n');
    for row in rows.iter().flatten() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.capacity,
            row.nash.prices[0],
            row.monopoly.prices[0],
            row.nash.per_period_demand[0],
            row.monopoly.per_period_demand[0],
            row.nash.per_period_profit[0],
            row.monopoly.per_period_profit[0],
        ));
    }
    out
}
