//! Safe CMA-ES against naive CMA-ES and the violation-avoidance baseline on
//! the same problem instances.

use safe_cmaes::harness::{quartiles, run_experiment, Algorithm, ExperimentConfig};
use safe_cmaes::problems::{Benchmark, SafetyKind};

fn main() -> safe_cmaes::Result<()> {
    for algorithm in [Algorithm::SafeCmaes, Algorithm::Cmaes, Algorithm::Avoidance] {
        let cfg = ExperimentConfig {
            problem: Benchmark::Ellipsoid,
            dim: 5,
            safety: SafetyKind::ObjectiveMedian,
            algorithm,
            budget: 1000,
            trials: 20,
            seed: 1,
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&cfg)?;
        let best = quartiles(&r.final_best());
        let unsafe_q = quartiles(&r.unsafe_counts());
        println!(
            "{algorithm:>10}: best safe f median {:.3e}  unsafe evaluations Q1/median/Q3 {}/{}/{}",
            best[1], unsafe_q[0], unsafe_q[1], unsafe_q[2]
        );
    }
    Ok(())
}
