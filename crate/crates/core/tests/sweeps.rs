//! Direction of the capacity and horizon sweeps on short DQN runs.
//!
//! ```text
//! cargo test --release --test sweeps -- --ignored --nocapture
//! ```

use std::path::Path;

use pricing_lab::harness::{run_sweep, ExperimentConfig, SweepSpec};

fn sweep_means(parameter: &str, values: &[&str]) -> Vec<f64> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_dqn.cfg");
    let base = ExperimentConfig::from_file(&path).unwrap();
    let mut spec = SweepSpec::new(base, parameter, values.iter().map(|v| v.to_string()).collect());
    spec.seeds = vec![1, 2, 3];
    let rows = run_sweep(&spec, 1).unwrap();
    values
        .iter()
        .map(|v| {
            let c: Vec<f64> = rows.iter().filter(|r| r.value == *v).map(|r| r.result.as_ref().unwrap().1).collect();
            c.iter().sum::<f64>() / c.len() as f64
        })
        .collect()
}

#[test]
#[ignore = "trains 18 agent pairs"]
fn less_inventory_less_collusion() {
    let m = sweep_means("market.capacity_per_period", &["400", "440", "480"]);
    println!("capacity 400/440/480: collusion {m:.3?}");
    assert!(m[0] < m[2]);
}

#[test]
#[ignore = "trains 18 agent pairs"]
fn longer_horizon_more_collusion() {
    let m = sweep_means("market.horizon", &["10", "20", "30"]);
    println!("horizon 10/20/30: collusion {m:.3?}");
    assert!(m[0] < m[2]);
}
