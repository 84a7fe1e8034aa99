//! Lipschitz-constant estimation for the safety functions composed with the
//! inverse standardization, s_j ∘ φ⁻¹.
//!
//! The raw estimate is σ_j · max ‖∇μ(z)‖ over the box [−r, r]^d, where μ is
//! the posterior mean of a GP fitted to the standardized window data and σ_j
//! is the spread of the observed safety values. Two coefficients inflate it:
//! τ while the window is still filling and ρ_j after observed violations.

use crate::box_qn::{self, BoxBounds};
use crate::cmaes::DistributionState;
use crate::error::{Error, Result};
use crate::gpr::GprModel;
use crate::mathkit::NormalSource;

use super::{clipped_normals, phi, EvalWindow, EvaluatedSolution, SafeParams};

/// Spread below which safety values are treated as constant.
const FLAT_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzState {
    /// Corrected estimates L_j used for the safe region.
    pub estimates: Vec<f64>,
    /// Uncorrected surrogate estimates L̂_j.
    pub raw: Vec<f64>,
    /// Violation coefficients ρ_j ≥ 1.
    pub rho: Vec<f64>,
    /// Data-scarcity coefficient τ ≥ 1.
    pub tau: f64,
}

impl LipschitzState {
    pub fn constant(value: f64, constraints: usize) -> Self {
        Self {
            estimates: vec![value; constraints],
            raw: vec![value; constraints],
            rho: vec![1.0; constraints],
            tau: 1.0,
        }
    }
}

/// τ = ζ^{1/N} while N < λ·T_data, otherwise 1.
pub fn update_tau(n_data: usize, lambda: usize, t_data: usize, zeta_init: f64) -> f64 {
    if n_data < lambda * t_data {
        zeta_init.powf(1.0 / n_data as f64)
    } else {
        1.0
    }
}

/// ρ·α^ν after violations, otherwise max(1, ρ / α^{1/d}).
pub fn update_rho(rho: f64, violation_ratio: f64, alpha: f64, dim: usize) -> f64 {
    if violation_ratio > 0.0 {
        rho * alpha.powf(violation_ratio)
    } else {
        (rho / alpha.powf(1.0 / dim as f64)).max(1.0)
    }
}

/// Maximum of ‖∇μ‖ over the box: best of the first-stage candidates, then
/// refined by the projected quasi-Newton maximizer.
pub fn max_gradient_norm(
    model: &GprModel,
    candidates: &[Vec<f64>],
    bounds: &BoxBounds,
    refine_iters: usize,
) -> Result<f64> {
    let mut start = None;
    let mut best = f64::NEG_INFINITY;
    for c in candidates {
        let g = model.posterior_mean_grad(c);
        let n = crate::mathkit::norm(&g);
        if n > best {
            best = n;
            start = Some(c);
        }
    }
    let Some(start) = start else {
        return Ok(0.0);
    };
    let out = box_qn::maximize(
        |z| model.grad_norm_and_gradient(z),
        start,
        bounds,
        refine_iters,
    )?;
    // the refinement may have run on the squared norm near zero gradient
    let refined = crate::mathkit::norm(&model.posterior_mean_grad(&out.x));
    Ok(refined.max(best))
}

/// Raw estimate for one constraint, or `None` when the data carry no usable
/// gradient information.
fn raw_estimate(
    inputs: &[Vec<f64>],
    values: &[f64],
    candidates: &[Vec<f64>],
    params: &SafeParams,
) -> Result<Option<f64>> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let spread = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(spread >= FLAT_SPREAD) || !spread.is_finite() {
        return Ok(None);
    }
    let targets: Vec<f64> = values.iter().map(|v| (v - mean) / spread).collect();
    let dim = inputs[0].len();
    let model = match GprModel::fit(
        inputs.to_vec(),
        targets,
        params.length_scale_per_dim * dim as f64,
    ) {
        Ok(m) => m,
        Err(_) => return Ok(None),
    };
    let bounds = BoxBounds::symmetric(dim, params.search_radius);
    Ok(Some(
        spread * max_gradient_norm(&model, candidates, &bounds, params.refine_iters)?,
    ))
}

fn raw_estimates(
    solutions: &[&EvaluatedSolution],
    state: &DistributionState,
    previous_raw: &[f64],
    params: &SafeParams,
    lambda: usize,
    normals: &mut impl NormalSource,
) -> Result<Vec<f64>> {
    let dim = state.dim();
    let inputs: Vec<Vec<f64>> = solutions.iter().map(|s| phi(&s.x, state)).collect();
    let candidates = clipped_normals(
        normals,
        params.first_stage_per_lambda * lambda,
        dim,
        params.search_radius,
    );
    let mut out = Vec::with_capacity(previous_raw.len());
    for (j, prev) in previous_raw.iter().enumerate() {
        let values: Vec<f64> = solutions.iter().map(|s| s.s[j]).collect();
        let est = if solutions.len() >= 2 {
            raw_estimate(&inputs, &values, &candidates, params)?
        } else {
            None
        };
        out.push(est.unwrap_or(*prev));
    }
    Ok(out)
}

/// Initial estimate from the safe seeds under the initial distribution.
/// A single seed gives `l_min` for every constraint.
pub fn init_lipschitz(
    seeds: &[EvaluatedSolution],
    state: &DistributionState,
    params: &SafeParams,
    lambda: usize,
    normals: &mut impl NormalSource,
) -> Result<LipschitzState> {
    let first = seeds.first().ok_or(Error::MissingSeeds)?;
    if let Some(i) = seeds.iter().position(|s| !s.safe) {
        return Err(Error::UnsafeSeed(i));
    }
    let p = first.s.len();
    if seeds.len() == 1 {
        return Ok(LipschitzState::constant(params.l_min, p));
    }
    let tau = params.zeta_init.powf(1.0 / seeds.len() as f64);
    let refs: Vec<&EvaluatedSolution> = seeds.iter().collect();
    let fallback = vec![params.l_min / tau; p];
    let raw = raw_estimates(&refs, state, &fallback, params, lambda, normals)?;
    Ok(LipschitzState {
        estimates: raw.iter().map(|r| (r * tau).max(params.l_min)).collect(),
        raw,
        rho: vec![1.0; p],
        tau,
    })
}

/// Re-estimates the constants from the window under the freshly updated
/// distribution. `violation_ratio[j]` is the fraction of the current
/// population violating constraint j.
pub fn estimate_lipschitz(
    window: &EvalWindow,
    state_next: &DistributionState,
    previous: &LipschitzState,
    violation_ratio: &[f64],
    params: &SafeParams,
    lambda: usize,
    normals: &mut impl NormalSource,
) -> Result<LipschitzState> {
    let solutions: Vec<&EvaluatedSolution> = window.iter().collect();
    let raw = raw_estimates(
        &solutions,
        state_next,
        &previous.raw,
        params,
        lambda,
        normals,
    )?;
    let tau = update_tau(window.len(), lambda, params.t_data, params.zeta_init);
    let rho: Vec<f64> = previous
        .rho
        .iter()
        .zip(violation_ratio)
        .map(|(r, nu)| update_rho(*r, *nu, params.alpha, state_next.dim()))
        .collect();
    let estimates = raw.iter().zip(&rho).map(|(l, r)| l * tau * r).collect();
    Ok(LipschitzState {
        estimates,
        raw,
        rho,
        tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::{RngStream, SymMatrix};

    #[test]
    fn tau_rule() {
        assert_eq!(update_tau(40, 8, 5, 10.0), 1.0);
        assert_eq!(update_tau(41, 8, 5, 10.0), 1.0);
        assert!((update_tau(10, 8, 5, 10.0) - 10f64.powf(0.1)).abs() < 1e-15);
        assert!((update_tau(10, 8, 5, 10.0) - 1.258_925_411_794_167_2).abs() < 1e-12);
    }

    #[test]
    fn rho_rule() {
        assert_eq!(update_rho(1.0, 1.0, 10.0, 5), 10.0);
        assert!((update_rho(2.0, 0.25, 16.0, 5) - 4.0).abs() < 1e-14);
        let d = 4;
        let mut rho = 10.0;
        for k in 1..=8 {
            rho = update_rho(rho, 0.0, 10.0, d);
            let expected = 10f64.powf(1.0 - k as f64 / d as f64).max(1.0);
            assert!((rho - expected).abs() < 1e-12, "k={k}");
        }
        assert_eq!(rho, 1.0);
    }

    fn seeds_with(values: &[(Vec<f64>, f64)], h: f64) -> Vec<EvaluatedSolution> {
        values
            .iter()
            .map(|(x, s)| EvaluatedSolution::from_values(x.clone(), 0.0, vec![*s], &[h]))
            .collect()
    }

    #[test]
    fn single_seed_uses_floor() {
        let seeds = seeds_with(&[(vec![0.0, 0.0], -1.0)], 0.0);
        let st = DistributionState::new(vec![0.0; 2], 2.0, SymMatrix::identity(2)).unwrap();
        let lip = init_lipschitz(&seeds, &st, &SafeParams::default(), 6, &mut RngStream::new(0)).unwrap();
        assert_eq!(lip.estimates, vec![100.0]);
    }

    #[test]
    fn flat_seeds_hit_floor() {
        let mut rng = RngStream::new(4);
        let pts: Vec<(Vec<f64>, f64)> = (0..10)
            .map(|_| (vec![rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)], -2.0))
            .collect();
        let seeds = seeds_with(&pts, 0.0);
        let st = DistributionState::new(vec![0.0; 2], 2.0, SymMatrix::identity(2)).unwrap();
        let lip = init_lipschitz(&seeds, &st, &SafeParams::default(), 6, &mut rng).unwrap();
        assert!((lip.estimates[0] - 100.0).abs() < 1e-12);
        assert!((lip.raw[0] * lip.tau - 100.0).abs() < 1e-12);
        assert!((lip.tau - 10f64.powf(0.1)).abs() < 1e-15);
    }

    #[test]
    fn missing_or_unsafe_seeds() {
        let st = DistributionState::new(vec![0.0; 2], 1.0, SymMatrix::identity(2)).unwrap();
        let p = SafeParams::default();
        assert!(matches!(
            init_lipschitz(&[], &st, &p, 6, &mut RngStream::new(0)),
            Err(Error::MissingSeeds)
        ));
        let seeds = seeds_with(&[(vec![0.0, 0.0], -1.0), (vec![1.0, 0.0], 1.0)], 0.0);
        assert!(matches!(
            init_lipschitz(&seeds, &st, &p, 6, &mut RngStream::new(0)),
            Err(Error::UnsafeSeed(1))
        ));
    }

    #[test]
    fn flat_window_carries_raw_forward() {
        let st = DistributionState::new(vec![0.0; 2], 1.0, SymMatrix::identity(2)).unwrap();
        let pts: Vec<(Vec<f64>, f64)> = (0..12).map(|i| (vec![i as f64 * 0.1, 0.0], 3.0)).collect();
        let seeds = seeds_with(&pts, 5.0);
        let window = EvalWindow::new(6, 5, &seeds);
        let prev = LipschitzState {
            estimates: vec![7.0],
            raw: vec![2.5],
            rho: vec![1.0],
            tau: 1.0,
        };
        let p = SafeParams::default();
        let next = estimate_lipschitz(&window, &st, &prev, &[0.5], &p, 6, &mut RngStream::new(1)).unwrap();
        assert_eq!(next.raw, vec![2.5]);
        let tau = 10f64.powf(1.0 / 12.0);
        let rho = 10f64.powf(0.5);
        assert!((next.estimates[0] - 2.5 * tau * rho).abs() < 1e-12);
    }

    #[test]
    fn linear_safety_estimate_near_slope() {
        let mut rng = RngStream::new(10);
        let pts: Vec<(Vec<f64>, f64)> = (0..40)
            .map(|_| {
                let x = vec![rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
                let s = 3.0 * x[0];
                (x, s)
            })
            .collect();
        let seeds = seeds_with(&pts, 100.0);
        let window = EvalWindow::new(8, 5, &seeds);
        let st = DistributionState::new(vec![0.0; 2], 1.0, SymMatrix::identity(2)).unwrap();
        let prev = LipschitzState::constant(100.0, 1);
        let next = estimate_lipschitz(&window, &st, &prev, &[0.0], &SafeParams::default(), 8, &mut rng).unwrap();
        assert!((next.raw[0] - 3.0).abs() < 0.6, "{}", next.raw[0]);
    }
}
