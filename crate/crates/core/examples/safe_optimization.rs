//! Ask/tell loop of safe CMA-ES on a custom problem: minimize the sphere
//! while keeping x₁ + x₂ ≤ 0.5.

use safe_cmaes::cmaes::{DistributionState, StrategyParams};
use safe_cmaes::mathkit::{RngStream, SymMatrix};
use safe_cmaes::safe::{EvaluatedSolution, SafeCmaes, SafeParams, SafetyConstraint};

fn main() -> safe_cmaes::Result<()> {
    let d = 4;
    let objective = |x: &[f64]| x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>();
    let constraints = vec![SafetyConstraint::new(|x: &[f64]| x[0] + x[1], 0.5)];
    let mut rng = RngStream::new(3);

    let seeds: Vec<EvaluatedSolution> = [[-1.0, -1.0, 0.0, 0.0], [-2.0, 0.5, 1.0, -1.0], [0.0, -0.5, 2.0, 2.0]]
        .iter()
        .map(|x| EvaluatedSolution::evaluate(x.to_vec(), objective, &constraints))
        .collect();

    let init = DistributionState::new(vec![0.0; d], 2.0, SymMatrix::identity(d))?;
    let mut opt = SafeCmaes::new(seeds, init, StrategyParams::new(d)?, SafeParams::default(), &mut rng)?;
    println!("initial sigma {:.3e}, L {:.3e}", opt.state().sigma(), opt.lipschitz().estimates[0]);

    let mut best = f64::INFINITY;
    let mut violations = 0;
    for iter in 1..=150 {
        let proposals = opt.ask(&mut rng)?;
        let evaluated: Vec<EvaluatedSolution> = proposals
            .iter()
            .map(|p| EvaluatedSolution::evaluate(p.x.clone(), objective, &constraints))
            .collect();
        for e in &evaluated {
            if e.safe {
                best = best.min(e.f);
            } else {
                violations += 1;
            }
        }
        opt.tell(&proposals, &evaluated, &mut rng)?;
        if iter % 25 == 0 {
            println!(
                "iter {iter:3} best safe f {best:.6} sigma {:.2e} L {:.3e} rho {:.2} violations {violations}",
                opt.state().sigma(),
                opt.lipschitz().estimates[0],
                opt.lipschitz().rho[0]
            );
        }
    }
    // constrained optimum is (0.25, 0.25, 1, 1) with f = 1.125
    println!("mean {:?}", opt.state().mean());
    Ok(())
}
