//! Runs a small experiment and writes per-trial and summary CSV files.

use std::path::PathBuf;

use safe_cmaes::harness::{run_experiment, write_experiment, ExperimentConfig};
use safe_cmaes::problems::{Benchmark, SafetyKind};

fn main() -> safe_cmaes::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("safe-cmaes-logs"));
    let cfg = ExperimentConfig {
        problem: Benchmark::Sphere,
        dim: 5,
        safety: SafetyKind::FirstCoordinate,
        budget: 2000,
        trials: 5,
        ..ExperimentConfig::default()
    };
    let result = run_experiment(&cfg)?;
    let dir = out.join(cfg.label());
    write_experiment(&dir, &result)?;
    for log in &result.logs {
        println!(
            "trial {}: h = {:?}, {} iterations, final best safe f {:.3e}, {:?}",
            log.trial,
            log.thresholds,
            log.rows.len() - 1,
            log.final_best_safe_f(),
            log.termination
        );
    }
    println!("logs written to {}", dir.display());
    Ok(())
}
