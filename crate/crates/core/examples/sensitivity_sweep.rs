//! Effect of the data-window length T_data on safety and progress.

use safe_cmaes::harness::{quartiles, sweep, ExperimentConfig, SweepParam};
use safe_cmaes::problems::Benchmark;

fn main() -> safe_cmaes::Result<()> {
    let base = ExperimentConfig {
        problem: Benchmark::Ellipsoid,
        dim: 5,
        budget: 1000,
        trials: 20,
        ..ExperimentConfig::default()
    };
    let param = SweepParam::TData;
    for (value, r) in sweep(&base, param, param.default_values())? {
        println!(
            "{}={value:>5}: median best safe f {:.3e}, mean unsafe evaluations {:.2}",
            param.name(),
            quartiles(&r.final_best())[1],
            r.unsafe_counts().iter().sum::<f64>() / r.logs.len() as f64
        );
    }
    Ok(())
}
