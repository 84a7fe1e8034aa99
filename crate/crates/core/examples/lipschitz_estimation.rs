//! Lipschitz constant of s(x) = 3x₁ estimated from 40 random points.

use safe_cmaes::cmaes::{DistributionState, StrategyParams};
use safe_cmaes::mathkit::{RngStream, SymMatrix};
use safe_cmaes::safe::{init_lipschitz, EvaluatedSolution, SafeParams};

fn main() -> safe_cmaes::Result<()> {
    let d = 2;
    let mut rng = RngStream::new(3);
    let points: Vec<EvaluatedSolution> = (0..40)
        .map(|_| {
            let x = vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
            let s = 3.0 * x[0];
            EvaluatedSolution::from_values(x, 0.0, vec![s], &[100.0])
        })
        .collect();
    let state = DistributionState::new(vec![0.0; d], 1.0, SymMatrix::identity(d))?;
    let lambda = StrategyParams::new(d)?.lambda;
    let lip = init_lipschitz(&points, &state, &SafeParams::default(), lambda, &mut rng)?;
    println!("raw estimate {:.6} (true value 3)", lip.raw[0]);
    println!("tau {:.4}, initial constant {:.4} (floored at l_min)", lip.tau, lip.estimates[0]);
    Ok(())
}
