//! The episodic, inventory-constrained pricing game.
//!
//! Agents pick prices from a shared grid every period. Demand follows a
//! multinomial logit over the sellers that still hold inventory plus an
//! outside good; realized sales are the floored, scaled demand capped by the
//! remaining stock. Transitions are deterministic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Demand and supply constants of the market, independent of the action grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Economics {
    /// Product quality per agent.
    pub qualities: Vec<f64>,
    /// Quality of the outside good.
    pub outside_quality: f64,
    /// Horizontal differentiation scale.
    pub mu: f64,
    /// Marginal cost per unit sold, per agent.
    pub costs: Vec<f64>,
    /// Demand scaling factor (market size per period).
    pub lambda: u64,
    /// Periods per episode.
    pub horizon: usize,
    /// Units each agent may sell over one episode.
    pub capacities: Vec<u64>,
}

impl Economics {
    /// Symmetric duopoly used for the main experiments: quality 2, outside
    /// quality 0, mu 0.25, cost 1, lambda 1000, 20 periods, 440 units per period.
    pub fn reference_duopoly() -> Self {
        Self::symmetric(2, 2.0, 0.0, 0.25, 1.0, 1000, 20, 440 * 20)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn symmetric(
        n: usize,
        quality: f64,
        outside_quality: f64,
        mu: f64,
        cost: f64,
        lambda: u64,
        horizon: usize,
        capacity: u64,
    ) -> Self {
        Self {
            qualities: vec![quality; n],
            outside_quality,
            mu,
            costs: vec![cost; n],
            lambda,
            horizon,
            capacities: vec![capacity; n],
        }
    }

    pub fn n(&self) -> usize {
        self.qualities.len()
    }

    /// Same market with every agent holding `per_period * horizon` units.
    pub fn with_capacity_per_period(&self, per_period: u64) -> Self {
        let mut out = self.clone();
        let total = per_period.saturating_mul(self.horizon as u64);
        out.capacities = vec![total; self.n()];
        out
    }

    /// True when every agent has the same quality, cost and capacity.
    pub fn is_symmetric(&self) -> bool {
        let same = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        same(&self.qualities)
            && same(&self.costs)
            && self.capacities.iter().all(|c| *c == self.capacities[0])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::InvalidParams("at least one agent required".into()));
        }
        if self.costs.len() != n || self.capacities.len() != n {
            return Err(Error::InvalidParams(format!(
                "per-agent vectors disagree: {} qualities, {} costs, {} capacities",
                n,
                self.costs.len(),
                self.capacities.len()
            )));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidParams(format!("mu must be positive, got {}", self.mu)));
        }
        if self.lambda < 1 {
            return Err(Error::InvalidParams("lambda must be at least 1".into()));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidParams("horizon must be at least 1".into()));
        }
        if self.costs.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidParams("costs must be non-negative".into()));
        }
        if self.qualities.iter().any(|q| !q.is_finite()) || !self.outside_quality.is_finite() {
            return Err(Error::InvalidParams("qualities must be finite".into()));
        }
        Ok(())
    }

    /// Scaled demand `lambda * d`, before flooring.
    pub fn scaled(&self, share: f64) -> f64 {
        self.lambda as f64 * share
    }

    /// Whole units demanded at market share `share`.
    pub fn units(&self, share: f64) -> u64 {
        self.scaled(share).floor() as u64
    }
}

/// Equally spaced, strictly increasing price grid with the indices closest to
/// the competitive and collusive anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    prices: Vec<f64>,
    nash_index: usize,
    monopoly_index: usize,
}

impl PriceGrid {
    /// `k` equally spaced prices over `[low - xi*d, high + xi*d]` with
    /// `d = high - low`.
    pub fn build(low_anchor: f64, high_anchor: f64, xi: f64, k: usize) -> Result<Self> {
        if !(low_anchor < high_anchor) {
            return Err(Error::InvalidBounds { low: low_anchor, high: high_anchor });
        }
        if k < 2 {
            return Err(Error::InvalidSize(k));
        }
        if !(0.0..0.5).contains(&xi) {
            return Err(Error::InvalidParams(format!("xi must lie in [0, 0.5), got {xi}")));
        }
        let span = high_anchor - low_anchor;
        let lo = low_anchor - xi * span;
        let hi = high_anchor + xi * span;
        let step = (hi - lo) / (k - 1) as f64;
        let prices: Vec<f64> = (0..k).map(|j| lo + step * j as f64).collect();
        let nearest = |target: f64| ((target - lo) / step).round().clamp(0.0, (k - 1) as f64) as usize;
        let nash_index = nearest(low_anchor);
        let mut monopoly_index = nearest(high_anchor);
        if monopoly_index == nash_index {
            monopoly_index = (nash_index + 1).min(k - 1);
        }
        Self::from_parts(prices, nash_index, monopoly_index)
    }

    pub fn from_parts(prices: Vec<f64>, nash_index: usize, monopoly_index: usize) -> Result<Self> {
        let k = prices.len();
        if k < 2 {
            return Err(Error::InvalidSize(k));
        }
        if prices.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParams("grid prices must be strictly increasing".into()));
        }
        let step = prices[1] - prices[0];
        if prices
            .windows(2)
            .any(|w| ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(prices[k - 1].abs()))
        {
            return Err(Error::InvalidParams("grid prices must be equally spaced".into()));
        }
        if !(nash_index < monopoly_index && monopoly_index < k) {
            return Err(Error::InvalidParams(format!(
                "need 0 <= nash index ({nash_index}) < monopoly index ({monopoly_index}) < {k}"
            )));
        }
        Ok(Self { prices, nash_index, monopoly_index })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn price(&self, index: usize) -> f64 {
        self.prices[index]
    }

    pub fn nash_index(&self) -> usize {
        self.nash_index
    }

    pub fn monopoly_index(&self) -> usize {
        self.monopoly_index
    }

    pub fn spacing(&self) -> f64 {
        self.prices[1] - self.prices[0]
    }

    /// Position of grid index `index` on `[0, 1]`.
    pub fn normalized(&self, index: usize) -> f64 {
        index as f64 / (self.len() - 1) as f64
    }
}

/// Everything that defines one market instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub econ: Economics,
    pub grid: PriceGrid,
}

impl MarketParams {
    pub fn new(econ: Economics, grid: PriceGrid) -> Result<Self> {
        econ.validate()?;
        Ok(Self { econ, grid })
    }

    pub fn n(&self) -> usize {
        self.econ.n()
    }

    pub fn horizon(&self) -> usize {
        self.econ.horizon
    }
}

/// Markov game state: previous prices, remaining stock and the current period.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarketState {
    /// Grid index each agent charged in the previous period.
    pub last_prices: Vec<usize>,
    /// Remaining units per agent.
    pub inventories: Vec<u64>,
    /// Current period, starting at 1.
    pub t: usize,
}

impl MarketState {
    pub fn is_finished(&self, horizon: usize) -> bool {
        self.t > horizon
    }
}

/// Result of a single period given continuous prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub demands: Vec<f64>,
    pub quantities: Vec<u64>,
    pub rewards: Vec<f64>,
}

/// Result of [`step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub demands: Vec<f64>,
    pub quantities: Vec<u64>,
    pub rewards: Vec<f64>,
    pub next_state: MarketState,
}

/// Which parts of the state an agent may see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationSpec {
    pub include_opponent_inventory: bool,
    pub include_time: bool,
}

impl Default for ObservationSpec {
    fn default() -> Self {
        Self { include_opponent_inventory: true, include_time: true }
    }
}

impl ObservationSpec {
    pub fn dim(&self, n: usize) -> usize {
        let inventories = if self.include_opponent_inventory { n } else { 1 };
        n + inventories + usize::from(self.include_time)
    }
}

fn logit_terms(prices: &[f64], active: &[bool], econ: &Economics) -> (f64, f64) {
    let outside = econ.outside_quality / econ.mu;
    let utility = |j: usize| (econ.qualities[j] - prices[j]) / econ.mu;
    let shift = (0..prices.len()).filter(|j| active[*j]).fold(outside, |m, j| m.max(utility(j)));
    let denom = (0..prices.len())
        .filter(|j| active[*j])
        .map(|j| (utility(j) - shift).exp())
        .sum::<f64>()
        + (outside - shift).exp();
    (shift, denom)
}

/// Market share of a single agent; identical arithmetic to [`mnl_demand`].
pub fn share_of(agent: usize, prices: &[f64], active: &[bool], econ: &Economics) -> f64 {
    if !active[agent] {
        return 0.0;
    }
    let (shift, denom) = logit_terms(prices, active, econ);
    ((econ.qualities[agent] - prices[agent]) / econ.mu - shift).exp() / denom
}

/// Market shares under the multinomial logit. Inactive agents are removed from
/// both numerator and denominator and receive exactly zero.
pub fn mnl_demand(prices: &[f64], active: &[bool], econ: &Economics) -> Vec<f64> {
    let (shift, denom) = logit_terms(prices, active, econ);
    (0..prices.len())
        .map(|j| {
            if active[j] {
                ((econ.qualities[j] - prices[j]) / econ.mu - shift).exp() / denom
            } else {
                0.0
            }
        })
        .collect()
}

/// Share left to the outside good for the same inputs as [`mnl_demand`].
pub fn outside_share(prices: &[f64], active: &[bool], econ: &Economics) -> f64 {
    let (shift, denom) = logit_terms(prices, active, econ);
    (econ.outside_quality / econ.mu - shift).exp() / denom
}

/// One period with continuous prices and explicit inventories.
pub fn settle(econ: &Economics, inventories: &[u64], prices: &[f64]) -> Settlement {
    let active: Vec<bool> = inventories.iter().map(|x| *x > 0).collect();
    let demands = mnl_demand(prices, &active, econ);
    let quantities: Vec<u64> = demands
        .iter()
        .zip(inventories)
        .map(|(d, x)| econ.units(*d).min(*x))
        .collect();
    let rewards = quantities
        .iter()
        .zip(prices)
        .zip(&econ.costs)
        .map(|((q, p), c)| (p - c) * *q as f64)
        .collect();
    Settlement { demands, quantities, rewards }
}

/// Advances the game one period.
pub fn step(state: &MarketState, actions: &[usize], params: &MarketParams) -> Result<StepOutcome> {
    let horizon = params.horizon();
    if state.is_finished(horizon) {
        return Err(Error::EpisodeFinished { t: state.t, horizon });
    }
    if actions.len() != params.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} actions for {} agents",
            actions.len(),
            params.n()
        )));
    }
    let grid_len = params.grid.len();
    if let Some(&action) = actions.iter().find(|a| **a >= grid_len) {
        return Err(Error::InvalidAction { action, grid_len });
    }
    let prices: Vec<f64> = actions.iter().map(|a| params.grid.price(*a)).collect();
    let Settlement { demands, quantities, rewards } = settle(&params.econ, &state.inventories, &prices);
    let inventories = state.inventories.iter().zip(&quantities).map(|(x, q)| x - q).collect();
    Ok(StepOutcome {
        demands,
        quantities,
        rewards,
        next_state: MarketState { last_prices: actions.to_vec(), inventories, t: state.t + 1 },
    })
}

/// Fresh episode with full inventories and uniformly drawn previous prices.
pub fn reset(params: &MarketParams, rng_seed: u64) -> MarketState {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    reset_with(params, &mut rng)
}

pub fn reset_with<R: Rng + ?Sized>(params: &MarketParams, rng: &mut R) -> MarketState {
    let k = params.grid.len();
    MarketState {
        last_prices: (0..params.n()).map(|_| rng.gen_range(0..k)).collect(),
        inventories: params.econ.capacities.clone(),
        t: 1,
    }
}

/// Agent-centric observation: previous prices (own first) on `[0, 1]`,
/// inventory fractions (own first, opponents unless masked), then `t / T`.
pub fn observe(state: &MarketState, agent: usize, spec: &ObservationSpec, params: &MarketParams) -> Vec<f64> {
    let n = params.n();
    let mut obs = Vec::with_capacity(spec.dim(n));
    let order = std::iter::once(agent).chain((0..n).filter(move |j| *j != agent));
    for j in order.clone() {
        obs.push(params.grid.normalized(state.last_prices[j]));
    }
    let fraction = |j: usize| {
        let cap = params.econ.capacities[j];
        if cap == 0 {
            0.0
        } else {
            state.inventories[j] as f64 / cap as f64
        }
    };
    if spec.include_opponent_inventory {
        obs.extend(order.map(fraction));
    } else {
        obs.push(fraction(agent));
    }
    if spec.include_time {
        obs.push(state.t as f64 / params.horizon() as f64);
    }
    obs
}

/// Reward range used for normalization: zero (or the most negative profit on
/// the grid, if a grid price lies below cost) up to the best single-period
/// profit any agent can earn from a full-inventory state.
pub fn reward_bounds(params: &MarketParams) -> (f64, f64) {
    let n = params.n();
    let k = params.grid.len();
    let mut actions = vec![0usize; n];
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    let prices_of = |a: &[usize]| a.iter().map(|i| params.grid.price(*i)).collect::<Vec<_>>();
    loop {
        let s = settle(&params.econ, &params.econ.capacities, &prices_of(&actions));
        for r in s.rewards {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        // odometer increment over the joint grid
        let mut pos = 0;
        loop {
            if pos == n {
                return (lo, hi);
            }
            actions[pos] += 1;
            if actions[pos] < k {
                break;
            }
            actions[pos] = 0;
            pos += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference_grid() -> PriceGrid {
        PriceGrid::build(1.693, 1.925, 0.2, 15).unwrap()
    }

    fn reference_params() -> MarketParams {
        MarketParams::new(Economics::reference_duopoly(), reference_grid()).unwrap()
    }

    #[test]
    fn grid_anchors_land_on_indices() {
        let g = reference_grid();
        assert_eq!(g.len(), 15);
        assert_eq!((g.nash_index(), g.monopoly_index()), (2, 12));
        assert!((g.price(2) - 1.693).abs() < 1e-12);
        assert!((g.price(12) - 1.925).abs() < 1e-12);
        assert!((g.spacing() - 0.0232).abs() < 1e-12);
    }

    #[test]
    fn grid_endpoints() {
        let g = PriceGrid::build(1.0, 2.0, 0.0, 2).unwrap();
        assert_eq!(g.prices(), &[1.0, 2.0]);
        assert_eq!((g.nash_index(), g.monopoly_index()), (0, 1));
        let wide = PriceGrid::build(1.471, 1.925, 0.2, 15).unwrap();
        assert!((wide.price(0) - 1.3802).abs() < 1e-12);
        assert!((wide.price(14) - 2.0158).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert_eq!(PriceGrid::build(2.0, 1.0, 0.2, 15), Err(Error::InvalidBounds { low: 2.0, high: 1.0 }));
        assert_eq!(PriceGrid::build(1.0, 2.0, 0.2, 1), Err(Error::InvalidSize(1)));
        assert!(PriceGrid::from_parts(vec![1.0, 1.5, 1.7], 0, 2).is_err());
    }

    #[test]
    fn demand_values() {
        let econ = Economics::reference_duopoly();
        let d = mnl_demand(&[1.925, 1.925], &[true, true], &econ);
        assert!((d[0] - 0.364_854_550_533_187_9).abs() < 1e-12);
        assert_eq!(d[0], d[1]);
        let d = mnl_demand(&[2.0, 1.0], &[true, false], &econ);
        assert_eq!(d, vec![0.5, 0.0]);
        let d = mnl_demand(&[1.6466, 1.9714], &[true, true], &econ);
        assert!((d[0] - 0.659_623_709_011_570_5).abs() < 1e-12);
        assert!((d[1] - 0.179_912_304_431_626_4).abs() < 1e-12);
    }

    #[test]
    fn step_examples() {
        let params = reference_params();
        let grid = PriceGrid::from_parts(vec![1.925, 2.0], 0, 1).unwrap();
        let params = MarketParams { grid, ..params };
        let state = MarketState { last_prices: vec![0, 0], inventories: vec![1000, 1000], t: 1 };
        let out = step(&state, &[0, 0], &params).unwrap();
        assert_eq!(out.quantities, vec![364, 364]);
        assert!((out.rewards[0] - 0.925 * 364.0).abs() < 1e-9);
        assert_eq!(out.next_state.inventories, vec![636, 636]);
        assert_eq!(out.next_state.t, 2);
        assert_eq!(out.next_state.last_prices, vec![0, 0]);

        let sold_out = MarketState { inventories: vec![0, 500], ..state.clone() };
        let out = step(&sold_out, &[0, 0], &params).unwrap();
        assert_eq!((out.demands[0], out.quantities[0], out.rewards[0]), (0.0, 0, 0.0));
        let alone = mnl_demand(&[1.925, 1.925], &[false, true], &params.econ);
        assert_eq!(out.demands[1], alone[1]);

        let capped = MarketState { inventories: vec![100, 1000], ..state };
        let out = step(&capped, &[0, 0], &params).unwrap();
        assert_eq!(out.quantities[0], 100);
        assert_eq!(out.next_state.inventories[0], 0);
    }

    #[test]
    fn step_errors() {
        let params = reference_params();
        let done = MarketState { last_prices: vec![0, 0], inventories: vec![1, 1], t: 21 };
        assert_eq!(step(&done, &[0, 0], &params).unwrap_err(), Error::EpisodeFinished { t: 21, horizon: 20 });
        let state = reset(&params, 1);
        assert_eq!(step(&state, &[0, 15], &params).unwrap_err(), Error::InvalidAction { action: 15, grid_len: 15 });
    }

    #[test]
    fn reset_is_seeded() {
        let params = reference_params();
        let a = reset(&params, 9);
        assert_eq!(a, reset(&params, 9));
        assert_eq!(a.inventories, vec![8800, 8800]);
        assert_eq!(a.t, 1);
        assert!(a.last_prices.iter().all(|p| *p < 15));
    }

    #[test]
    fn observation_layout() {
        let params = reference_params();
        let state = MarketState { last_prices: vec![0, 14], inventories: vec![8800, 8800], t: 1 };
        let full = observe(&state, 0, &ObservationSpec::default(), &params);
        assert_eq!(full, vec![0.0, 1.0, 1.0, 1.0, 1.0 / 20.0]);
        let masked = ObservationSpec { include_opponent_inventory: false, include_time: false };
        assert_eq!(observe(&state, 1, &masked, &params), vec![1.0, 0.0, 1.0]);
        assert_eq!(masked.dim(2), 3);
    }

    #[test]
    fn reward_bound_on_reference_grid() {
        let (lo, hi) = reward_bounds(&reference_params());
        assert_eq!(lo, 0.0);
        // own second-lowest price (sells 638) against the highest opponent price
        let expected = (1.693 - 2.0 * 0.0232 + 0.0232 - 1.0) * 638.0;
        assert!((hi - expected).abs() < 1e-9, "{hi} vs {expected}");
        assert!((hi - 427.3324).abs() < 1e-9);
    }

    #[test]
    fn reward_bound_single_price() {
        let econ = Economics::symmetric(1, 2.0, 0.0, 0.25, 1.0, 1000, 1, u64::MAX);
        let grid = PriceGrid::from_parts(vec![1.5, 1.6], 0, 1).unwrap();
        let params = MarketParams::new(econ.clone(), grid).unwrap();
        let best = [1.5f64, 1.6]
            .iter()
            .map(|p| {
                let e = ((2.0 - p) / 0.25).exp();
                (p - 1.0) * (1000.0 * e / (e + 1.0)).floor()
            })
            .fold(0.0, f64::max);
        assert_eq!(reward_bounds(&params).1, best);
        let empty = MarketParams::new(Economics { capacities: vec![0], ..econ }, params.grid.clone()).unwrap();
        assert_eq!(reward_bounds(&empty), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn shares_sum_to_one(p in prop::collection::vec(0.5f64..3.5, 3), mask in prop::collection::vec(any::<bool>(), 3)) {
            let econ = Economics::symmetric(3, 2.0, 0.0, 0.25, 1.0, 1000, 20, 100);
            let d = mnl_demand(&p, &mask, &econ);
            let total: f64 = d.iter().sum::<f64>() + outside_share(&p, &mask, &econ);
            prop_assert!((total - 1.0).abs() < 1e-12);
            for j in 0..3 {
                prop_assert!(mask[j] || d[j] == 0.0);
            }
        }

        #[test]
        fn raising_price_shifts_demand(p in prop::collection::vec(1.0f64..3.0, 3), bump in 1e-3f64..0.5) {
            let econ = Economics::symmetric(3, 2.0, 0.0, 0.25, 1.0, 1000, 20, 100);
            let on = [true; 3];
            let before = mnl_demand(&p, &on, &econ);
            let mut q = p.clone();
            q[0] += bump;
            let after = mnl_demand(&q, &on, &econ);
            prop_assert!(after[0] < before[0]);
            prop_assert!(after[1] > before[1] && after[2] > before[2]);
        }

        #[test]
        fn sold_out_price_is_irrelevant(a in 1.0f64..3.0, b in 1.0f64..3.0, other in 1.0f64..3.0) {
            let econ = Economics::reference_duopoly();
            let s1 = settle(&econ, &[0, 500], &[a, other]);
            let s2 = settle(&econ, &[0, 500], &[b, other]);
            prop_assert_eq!(s1.rewards[0], 0.0);
            prop_assert_eq!(s1, s2);
        }

        #[test]
        fn inventory_is_conserved(seed in any::<u64>(), actions in prop::collection::vec((0usize..15, 0usize..15), 20)) {
            let params = MarketParams::new(Economics::reference_duopoly().with_capacity_per_period(300), reference_grid()).unwrap();
            let mut state = reset(&params, seed);
            let mut sold = [0u64; 2];
            for (a, b) in actions {
                let out = step(&state, &[a, b], &params).unwrap();
                prop_assert_eq!(out.clone(), step(&state, &[a, b], &params).unwrap());
                sold[0] += out.quantities[0];
                sold[1] += out.quantities[1];
                state = out.next_state;
            }
            for i in 0..2 {
                prop_assert_eq!(state.inventories[i] + sold[i], params.econ.capacities[i]);
            }
        }
    }
}
