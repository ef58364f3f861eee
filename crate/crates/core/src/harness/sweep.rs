//! One-parameter sweeps over many seeds.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{run_training, Benchmarks, ExperimentConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub parameter: String,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// Sweep with the default 40 seeds, `1..=40`.
    pub fn new(base: ExperimentConfig, parameter: &str, values: Vec<String>) -> Self {
        Self { base, parameter: parameter.to_string(), values, seeds: (1..=40).collect() }
    }

    /// Config for one value. Changing a market parameter invalidates pinned
    /// benchmark prices, so those are solved afresh.
    pub fn config_for(&self, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = self.base.clone();
        cfg.set(&self.parameter, value)?;
        let anchor = self.parameter.ends_with("_anchor");
        if self.parameter.starts_with("market.") && !anchor {
            cfg.nash_anchor = None;
            cfg.monopoly_anchor = None;
            cfg.unconstrained_nash_anchor = None;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameter: String,
    pub value: String,
    pub seed: u64,
    /// `(convergence metric, last-10% collusion index)`, or the failure.
    pub result: std::result::Result<(f64, f64), Error>,
}

pub const SWEEP_HEADER: &str = "parameter,value,seed,convergence_metric,collusion_index_last10pct";

/// Trains every `(value, seed)` cell on at most `parallel` threads. Failed
/// cells keep their error and do not stop the others. Rows come back in
/// value-major, seed-minor order.
pub fn run_sweep(spec: &SweepSpec, parallel: usize) -> Result<Vec<SweepRow>> {
    if !ExperimentConfig::is_key(&spec.parameter) {
        return Err(Error::Config(format!("unknown sweep parameter {:?}", spec.parameter)));
    }
    if spec.values.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("a sweep needs at least one value and one seed".into()));
    }
    let configs: Vec<(String, Result<(ExperimentConfig, Benchmarks)>)> = spec
        .values
        .iter()
        .map(|v| {
            let prepared = spec.config_for(v).and_then(|cfg| Benchmarks::compute(&cfg).map(|b| (cfg, b)));
            (v.clone(), prepared)
        })
        .collect();
    let cells: Vec<(usize, u64)> =
        (0..configs.len()).flat_map(|vi| spec.seeds.iter().map(move |s| (vi, *s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(vi, seed)| {
                let (value, prepared) = &configs[vi];
                let result = match prepared {
                    Ok((cfg, bench)) => run_training(cfg, bench, seed)
                        .map(|out| (out.log.convergence.value, out.log.collusion_last10)),
                    Err(e) => Err(e.clone()),
                };
                SweepRow { parameter: spec.parameter.clone(), value: value.clone(), seed, result }
            })
            .collect()
    });
    Ok(rows)
}

/// CSV of the sweep; failed cells have empty metric fields.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let (c, k) = match &r.result {
            Ok((c, k)) => (c.to_string(), k.to_string()),
            Err(_) => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{},{},{},{c},{k}", r.parameter, r.value, r.seed);
    }
    out
}
