use crate::cmaes::{self, DistributionState, Member, StrategyParams};
use crate::error::{Error, Result};
use crate::mathkit::{chi2_ppf, NormalSource};

use super::{
    delta, estimate_lipschitz, init_lipschitz, project, EvalWindow, EvaluatedSolution,
    LipschitzState, SafeParams, SafeRegion,
};

/// One sample ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Raw standard-normal draw.
    pub z_raw: Vec<f64>,
    /// Projected draw; the CMA-ES update uses this one.
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub xi: f64,
}

/// Seed with the smallest objective; the first one on ties.
pub fn init_mean(seeds: &[EvaluatedSolution]) -> Result<&EvaluatedSolution> {
    let mut best: Option<&EvaluatedSolution> = None;
    for s in seeds {
        if best.is_none_or(|b| s.f < b.f) {
            best = Some(s);
        }
    }
    best.ok_or(Error::MissingSeeds)
}

/// Shrinks σ so that the γ-quantile ball of the initial distribution fits
/// in the safe ball of the initial mean. Never enlarges σ.
pub fn init_stepsize(
    sigma0: f64,
    mean_seed: &EvaluatedSolution,
    lipschitz: &[f64],
    dim: usize,
    gamma: f64,
) -> Result<f64> {
    let radius = delta(mean_seed, lipschitz)?;
    let quantile_radius = chi2_ppf(gamma, dim as u32)?.sqrt();
    Ok(sigma0 * (radius / quantile_radius).min(1.0))
}

/// Draws λ samples and projects each into the safe region built from the
/// window's safe solutions (or the seeds when the window has none).
pub fn ask_safe(
    state: &DistributionState,
    params: &StrategyParams,
    lipschitz: &LipschitzState,
    window: &EvalWindow,
    seeds: &[EvaluatedSolution],
    normals: &mut impl NormalSource,
) -> Result<Vec<Proposal>> {
    let mut region = SafeRegion::build(window.iter(), state, &lipschitz.estimates)?;
    if region.is_empty() {
        region = SafeRegion::build(seeds, state, &lipschitz.estimates)?;
    }
    cmaes::sample_raw(params, normals)
        .into_iter()
        .map(|z_raw| {
            let p = project(&z_raw, &region)?;
            let (y, x) = state.decode(&p.z);
            Ok(Proposal {
                z_raw,
                z: p.z,
                y,
                x,
                xi: p.xi,
            })
        })
        .collect()
}

/// The safe CMA-ES loop state: distribution, Lipschitz estimates and the
/// evaluation window.
#[derive(Debug, Clone)]
pub struct SafeCmaes {
    strategy: StrategyParams,
    params: SafeParams,
    state: DistributionState,
    lipschitz: LipschitzState,
    window: EvalWindow,
    seeds: Vec<EvaluatedSolution>,
}

impl SafeCmaes {
    /// Estimates the initial Lipschitz constants under `initial`, then moves
    /// the mean to the best seed and shrinks the step-size.
    pub fn new(
        seeds: Vec<EvaluatedSolution>,
        initial: DistributionState,
        strategy: StrategyParams,
        params: SafeParams,
        normals: &mut impl NormalSource,
    ) -> Result<Self> {
        params.validate()?;
        if initial.dim() != strategy.dim {
            return Err(Error::Shape {
                expected: strategy.dim,
                got: initial.dim(),
            });
        }
        let lipschitz = init_lipschitz(&seeds, &initial, &params, strategy.lambda, normals)?;
        let best = init_mean(&seeds)?;
        let sigma = init_stepsize(
            initial.sigma(),
            best,
            &lipschitz.estimates,
            strategy.dim,
            params.gamma,
        )?;
        let state = initial.with_mean(best.x.clone())?.with_sigma(sigma)?;
        let window = EvalWindow::new(strategy.lambda, params.t_data, &seeds);
        Ok(Self {
            strategy,
            params,
            state,
            lipschitz,
            window,
            seeds,
        })
    }

    pub fn state(&self) -> &DistributionState {
        &self.state
    }

    pub fn lipschitz(&self) -> &LipschitzState {
        &self.lipschitz
    }

    pub fn window(&self) -> &EvalWindow {
        &self.window
    }

    pub fn strategy(&self) -> &StrategyParams {
        &self.strategy
    }

    pub fn params(&self) -> &SafeParams {
        &self.params
    }

    pub fn ask(&self, normals: &mut impl NormalSource) -> Result<Vec<Proposal>> {
        ask_safe(
            &self.state,
            &self.strategy,
            &self.lipschitz,
            &self.window,
            &self.seeds,
            normals,
        )
    }

    /// Updates the distribution with the projected samples, appends the
    /// evaluations to the window and re-estimates the Lipschitz constants.
    pub fn tell(
        &mut self,
        proposals: &[Proposal],
        evaluated: &[EvaluatedSolution],
        normals: &mut impl NormalSource,
    ) -> Result<()> {
        if proposals.len() != evaluated.len() {
            return Err(Error::PopulationSize {
                expected: proposals.len(),
                got: evaluated.len(),
            });
        }
        let members: Vec<Member> = proposals
            .iter()
            .zip(evaluated)
            .map(|(p, e)| Member {
                z: p.z.clone(),
                y: p.y.clone(),
                x: p.x.clone(),
                f: e.f,
            })
            .collect();
        let next = cmaes::tell(&self.state, &self.strategy, &members)?;

        let p = self.lipschitz.estimates.len();
        let lambda = evaluated.len() as f64;
        let violation_ratio: Vec<f64> = (0..p)
            .map(|j| evaluated.iter().filter(|e| e.slack[j] < 0.0).count() as f64 / lambda)
            .collect();

        self.window.push_batch(evaluated.iter().cloned());
        self.lipschitz = estimate_lipschitz(
            &self.window,
            &next,
            &self.lipschitz,
            &violation_ratio,
            &self.params,
            self.strategy.lambda,
            normals,
        )?;
        self.state = next;
        Ok(())
    }
}
