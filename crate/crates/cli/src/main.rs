//! `pricing-lab` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use pricing_lab::agents::{AgentCheckpoint, GreedyPolicy, NetworkPolicy};
use pricing_lab::analysis::{forced_deviation, response_surface, surface_csv, DeviationSpec, SurfaceSpec};
use pricing_lab::equilibria::{
    capacity_sweep, capacity_sweep_csv, solve_monopoly, solve_nash, substitution_gap, EquilibriumSolution,
};
use pricing_lab::harness::{evaluate, run_sweep, run_training, sweep_csv, Benchmarks, ExperimentConfig, SweepSpec};
use pricing_lab::Error;

#[derive(Parser)]
#[command(name = "pricing-lab", version, about = "Collusion experiments for learning pricing agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the competitive and collusive benchmark prices.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also sweep these per-period capacities, comma separated.
        #[arg(long, value_delimiter = ',')]
        capacities: Vec<u64>,
    },
    /// Train one agent pair.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Play one greedy episode with trained agents.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        agents: Checkpoints,
    },
    /// Force one agent to deviate and compare against the undisturbed episode.
    Deviate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        agents: Checkpoints,
        /// Deviating agent.
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Period of the deviation, from 1.
        #[arg(long)]
        period: usize,
        /// Forced grid action; defaults to the one-step best reply.
        #[arg(long)]
        action: Option<usize>,
    },
    /// Tabulate an agent's greedy action over previous-price pairs.
    Surface {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        agents: Checkpoints,
        /// Probed agent.
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Periods to probe, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 5, 10, 15, 20])]
        periods: Vec<usize>,
    },
    /// Train over a grid of one parameter and many seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config key to vary.
        #[arg(long)]
        param: String,
        /// Values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Seeds as `a..b` or a comma list; default 1..40.
        #[arg(long)]
        seeds: Option<String>,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Print the grid, benchmark profits and reward normalization bounds.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override `key=value`, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run seed; defaults to the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `run.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Checkpoints {
    /// Agent checkpoints in agent order. Defaults to the files `train`
    /// writes for this config and seed under the output directory.
    #[arg(long = "checkpoint", value_name = "PATH")]
    paths: Vec<PathBuf>,
}

/// Resolved config, seed and output directory of one command.
struct Run {
    cfg: ExperimentConfig,
    hash: String,
    seed: u64,
    out: PathBuf,
}

impl Run {
    fn new(common: &Common) -> anyhow::Result<Self> {
        let mut cfg = match &common.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        for o in &common.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        let seed = common.seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0);
        let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
        std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        let hash = cfg.hash();
        let run = Self { cfg, hash, seed, out };
        run.write(&format!("effective_{}.cfg", run.hash), &run.cfg.dump())?;
        Ok(run)
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn checkpoint_path(&self, agent: usize) -> PathBuf {
        self.out.join(format!("agent{agent}_{}_seed{}_{}.ckpt", self.cfg.algorithm, self.seed, self.hash))
    }

    fn load_agents(&self, given: &Checkpoints) -> anyhow::Result<Vec<NetworkPolicy>> {
        let paths: Vec<PathBuf> = if given.paths.is_empty() {
            (0..self.cfg.n).map(|i| self.checkpoint_path(i)).collect()
        } else {
            given.paths.clone()
        };
        if paths.len() != self.cfg.n {
            bail!(Error::Config(format!("{} checkpoints for {} agents", paths.len(), self.cfg.n)));
        }
        paths
            .iter()
            .map(|p| {
                let ckpt = AgentCheckpoint::load(p).with_context(|| format!("loading {}", p.display()))?;
                if ckpt.config_hash != self.hash {
                    eprintln!("warning: {} was trained under config {}", p.display(), ckpt.config_hash);
                }
                Ok(ckpt.policy())
            })
            .collect()
    }
}

fn policy_refs(policies: &[NetworkPolicy]) -> Vec<&dyn GreedyPolicy> {
    policies.iter().map(|p| p as &dyn GreedyPolicy).collect()
}

fn equilibrium_rows(s: &EquilibriumSolution, out: &mut String) {
    for i in 0..s.prices.len() {
        out.push_str(&format!(
            "{},{i},{},{},{},{},{}\n",
            s.kind, s.prices[i], s.per_period_demand[i], s.per_period_profit[i], s.capacity_per_period, s.certification_gap
        ));
    }
}

fn solve(common: &Common, capacities: &[u64]) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let econ = run.cfg.economics();
    let solver = run.cfg.solver();
    let capacity = run.cfg.benchmark_capacity();
    let nash = solve_nash(&econ, capacity, &solver)?;
    let monopoly = solve_monopoly(&econ, capacity, &solver)?;
    let mut csv = String::from("kind,agent,price,per_period_demand,per_period_profit,capacity_per_period,certification_gap\n");
    equilibrium_rows(&nash, &mut csv);
    equilibrium_rows(&monopoly, &mut csv);
    run.write(&format!("equilibrium_{}.csv", run.hash), &csv)?;
    if !capacities.is_empty() {
        let rows = capacity_sweep(&econ, capacities, &solver);
        run.write(&format!("capacity_sweep_{}.csv", run.hash), &capacity_sweep_csv(&rows))?;
    }
    let fmt = |p: &[f64]| p.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    println!(
        "nash_price={} monopoly_price={} certification_gap={:.4} substitution_gap={:.4} config={}",
        fmt(&nash.prices),
        fmt(&monopoly.prices),
        nash.certification_gap,
        substitution_gap(&nash, &econ, &solver),
        run.hash
    );
    Ok(())
}

fn train(common: &Common) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let bench = Benchmarks::compute(&run.cfg)?;
    let outcome = run_training(&run.cfg, &bench, run.seed)?;
    let name = format!("runlog_{}_seed{}_{}.csv", run.cfg.algorithm, run.seed, run.hash);
    run.write(&name, &outcome.log.to_csv())?;
    for ckpt in &outcome.checkpoints {
        ckpt.save(&run.checkpoint_path(ckpt.agent))?;
    }
    println!(
        "algorithm={} seed={} collusion_last10={:.4} convergence={:.4} converged={} config={}",
        run.cfg.algorithm,
        run.seed,
        outcome.log.collusion_last10,
        outcome.log.convergence.value,
        outcome.log.convergence.converged,
        run.hash
    );
    Ok(())
}

fn eval(common: &Common, agents: &Checkpoints) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let bench = Benchmarks::compute(&run.cfg)?;
    let policies = run.load_agents(agents)?;
    let t = evaluate(&run.cfg, &bench, &policy_refs(&policies), run.seed)?;
    run.write(&format!("trajectory_seed{}_{}.csv", run.seed, run.hash), &t.to_csv())?;
    let profits: Vec<String> = (0..run.cfg.n).map(|i| format!("{:.2}", t.episode_profit(i))).collect();
    println!(
        "seed={} collusion_index={:.4} episode_profit={} config={}",
        run.seed,
        t.collusion.index,
        profits.join("/"),
        run.hash
    );
    Ok(())
}

fn deviate(common: &Common, agents: &Checkpoints, spec: DeviationSpec) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let bench = Benchmarks::compute(&run.cfg)?;
    let policies = run.load_agents(agents)?;
    let r = forced_deviation(&run.cfg, &bench, &policy_refs(&policies), spec, run.seed)?;
    let name = format!("deviation_a{}_t{}_seed{}_{}.csv", spec.agent, spec.period, run.seed, run.hash);
    run.write(&name, &r.to_csv())?;
    let ratios: Vec<String> = r.profit_ratio.iter().map(|x| format!("{x:.4}")).collect();
    println!(
        "action={} overall_ratio={:.4} agent_ratios={} config={}",
        r.action,
        r.overall_ratio,
        ratios.join("/"),
        run.hash
    );
    Ok(())
}

fn surface(common: &Common, agents: &Checkpoints, agent: usize, periods: Vec<usize>) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let bench = Benchmarks::compute(&run.cfg)?;
    let policies = run.load_agents(agents)?;
    let policy = policies.get(agent).ok_or_else(|| Error::Config(format!("no agent {agent}")))?;
    let rows = response_surface(&run.cfg, &bench, policy, &SurfaceSpec { agent, periods, inventories: None })?;
    run.write(&format!("surface_a{agent}_seed{}_{}.csv", run.seed, run.hash), &surface_csv(&rows))?;
    println!("agent={agent} rows={} config={}", rows.len(), run.hash);
    Ok(())
}

fn sweep(common: &Common, param: &str, values: Vec<String>, seeds: Option<&str>, parallel: usize) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let mut spec = SweepSpec::new(run.cfg.clone(), param, values);
    if let Some(s) = seeds {
        spec.seeds = pricing_lab::harness::config::parse_seeds(s)?;
    }
    let rows = run_sweep(&spec, parallel)?;
    let name = format!("sweep_{}_{}.csv", param.replace('.', "_"), run.hash);
    run.write(&name, &sweep_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    for r in rows.iter().filter_map(|r| r.result.as_ref().err().map(|e| (r, e))) {
        eprintln!("{}={} seed {}: {}", r.0.parameter, r.0.value, r.0.seed, r.1);
    }
    println!("cells={} failed={failed} config={}", rows.len(), run.hash);
    Ok(())
}

fn bounds(common: &Common) -> anyhow::Result<()> {
    let run = Run::new(common)?;
    let bench = Benchmarks::compute(&run.cfg)?;
    run.write(&format!("bounds_{}.csv", run.hash), &bench.to_csv(&run.hash))?;
    println!(
        "reward_min={} reward_max={} nash_price={} monopoly_price={} config={}",
        bench.reward_min, bench.reward_max, bench.nash_price, bench.monopoly_price, run.hash
    );
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve { common, capacities } => solve(&common, &capacities),
        Command::Train { common } => train(&common),
        Command::Eval { common, agents } => eval(&common, &agents),
        Command::Deviate { common, agents, agent, period, action } => {
            deviate(&common, &agents, DeviationSpec { agent, period, action })
        }
        Command::Surface { common, agents, agent, periods } => surface(&common, &agents, agent, periods),
        Command::Sweep { common, param, values, seeds, parallel } => {
            sweep(&common, &param, values, seeds.as_deref(), parallel)
        }
        Command::Bounds { common } => bounds(&common),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NoConvergence { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
