//! Plain CMA-ES on the 10-d sphere from (3, …, 3).

use safe_cmaes::cmaes::{minimize, DistributionState, StrategyParams};
use safe_cmaes::mathkit::{RngStream, SymMatrix};
use safe_cmaes::problems::Benchmark;

fn main() -> safe_cmaes::Result<()> {
    let d = 10;
    let params = StrategyParams::new(d)?;
    let init = DistributionState::new(vec![3.0; d], 2.0, SymMatrix::identity(d))?;
    let mut rng = RngStream::new(1);
    let out = minimize(|x| Benchmark::Sphere.eval(x), init, &params, &mut rng, 6000)?;
    println!(
        "lambda={} evaluations={} best f={:.3e} termination={:?}",
        params.lambda, out.evaluations, out.best_f, out.termination
    );
    Ok(())
}
