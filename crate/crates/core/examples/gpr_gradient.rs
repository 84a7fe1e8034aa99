//! GPR posterior mean, its gradient, and the box-constrained maximum of the
//! gradient norm.

use safe_cmaes::box_qn::BoxBounds;
use safe_cmaes::gpr::GprModel;
use safe_cmaes::mathkit::{norm, RngStream};
use safe_cmaes::safe::max_gradient_norm;

fn main() -> safe_cmaes::Result<()> {
    let mut rng = RngStream::new(2);
    let inputs: Vec<Vec<f64>> = (0..30)
        .map(|_| vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)])
        .collect();
    let targets: Vec<f64> = inputs.iter().map(|z| z[0].sin() + 0.5 * z[1]).collect();
    let model = GprModel::fit(inputs, targets, 1.5)?;
    println!("jitter used: {:e}", model.jitter());

    let z = [0.3, -0.4];
    let g = model.posterior_mean_grad(&z);
    println!("mu{z:?} = {:.5}, grad = [{:.5}, {:.5}] (true [{:.5}, 0.5])", model.posterior_mean(&z), g[0], g[1], z[0].cos());

    let starts: Vec<Vec<f64>> = (0..20)
        .map(|_| vec![rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)])
        .collect();
    let best = max_gradient_norm(&model, &starts, &BoxBounds::symmetric(2, 3.0), 200)?;
    let start_best = starts.iter().map(|s| norm(&model.posterior_mean_grad(s))).fold(0.0, f64::max);
    println!("max |grad| over [-3,3]^2: {best:.5} (best start {start_best:.5})");
    Ok(())
}
