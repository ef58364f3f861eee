use std::path::Path;

use pricing_lab::agents::{AgentCheckpoint, ConstantPolicy, GreedyPolicy, NetworkPolicy};
use pricing_lab::analysis::{export_learning_curves, forced_deviation, response_surface, DeviationSpec, SurfaceSpec};
use pricing_lab::harness::{evaluate, run_training, Benchmarks, ExperimentConfig};

fn short_dqn() -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_dqn.cfg");
    let mut cfg = ExperimentConfig::from_file(&path).unwrap();
    cfg.dqn.training_episodes = 200;
    cfg.dqn.warmup_episodes = 50;
    cfg
}

#[test]
fn constant_nash_play_scores_zero_collusion() {
    let cfg = short_dqn();
    let bench = Benchmarks::compute(&cfg).unwrap();
    let a = ConstantPolicy(bench.params.grid.nash_index());
    let t = evaluate(&cfg, &bench, &[&a, &a], 1).unwrap();
    assert_eq!(t.steps.len(), cfg.horizon);
    assert!(t.collusion.index.abs() < 0.05, "{}", t.collusion.index);
}

#[test]
fn train_checkpoint_and_probe() {
    let cfg = short_dqn();
    let bench = Benchmarks::compute(&cfg).unwrap();
    let out = run_training(&cfg, &bench, 3).unwrap();
    assert_eq!(out.checkpoints.len(), cfg.n);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a0.ckpt");
    out.checkpoints[0].save(&path).unwrap();
    let loaded = AgentCheckpoint::load(&path).unwrap();
    assert_eq!(loaded.to_text(), out.checkpoints[0].to_text());

    let p: Vec<NetworkPolicy> = out.checkpoints.iter().map(|c| c.policy()).collect();
    let refs: Vec<&dyn GreedyPolicy> = p.iter().map(|x| x as &dyn GreedyPolicy).collect();
    let t = evaluate(&cfg, &bench, &refs, 3).unwrap();
    for step in &t.steps {
        for (i, r) in step.rewards.iter().enumerate() {
            assert!(((step.prices[i] - cfg.cost) * step.quantities[i] as f64 - r).abs() < 1e-9);
        }
    }

    let spec = DeviationSpec { agent: 1, period: 5, action: None };
    let dev = forced_deviation(&cfg, &bench, &refs, spec, 3).unwrap();
    let actions = |t: &pricing_lab::harness::Trajectory| t.steps[..4].iter().map(|s| s.actions.clone()).collect::<Vec<_>>();
    assert_eq!(actions(&dev.baseline), actions(&dev.deviated));
    assert_eq!(dev.deviated.steps[4].actions[1], dev.action);

    let rows = response_surface(&cfg, &bench, &p[0], &SurfaceSpec { agent: 0, periods: vec![1, 20], inventories: None }).unwrap();
    let k = bench.params.grid.len();
    assert_eq!(rows.len(), 2 * k * k);
    assert!(rows.iter().all(|r| r.greedy_action < k));

    let again = run_training(&cfg, &bench, 4).unwrap();
    let curves = export_learning_curves(&[out.log, again.log]).unwrap();
    assert!(curves.lines().count() > 1);
}
