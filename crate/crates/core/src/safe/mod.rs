//! Safe-region machinery layered on top of CMA-ES.
//!
//! Distances and Lipschitz constants all live in the standardized space of
//! the current search distribution, z = (√C)⁻¹(x − m)/σ. A safe solution x
//! covers the ball of radius δ(x) = min_j (h_j − s_j(x)) / L_j around φ(x),
//! and raw samples are pulled toward the most promising ball before they
//! are evaluated.

mod lipschitz;
mod optimizer;

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

pub use lipschitz::{
    estimate_lipschitz, init_lipschitz, max_gradient_norm, update_rho, update_tau,
    LipschitzState,
};
pub use optimizer::{ask_safe, init_mean, init_stepsize, Proposal, SafeCmaes};

use crate::cmaes::DistributionState;
use crate::error::{Error, Result};
use crate::mathkit::{dist, NormalSource};

/// Smallest Lipschitz constant used as a divisor.
pub const MIN_LIPSCHITZ: f64 = 1e-12;

/// Hyperparameters of the safe layer. Defaults are the recommended values.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeParams {
    /// Number of recent iterations whose evaluations form the data window.
    pub t_data: usize,
    /// Inflation of the Lipschitz estimate while the window is filling.
    pub zeta_init: f64,
    /// Growth/decay base of the violation coefficient ρ.
    pub alpha: f64,
    /// Floor of the initial Lipschitz estimate.
    pub l_min: f64,
    /// Target fraction of initial samples left untouched by the projection.
    pub gamma: f64,
    /// Kernel length scale is `length_scale_per_dim · d`.
    pub length_scale_per_dim: f64,
    /// Half-width of the box over which the gradient norm is maximized.
    pub search_radius: f64,
    /// First-stage candidate count is `first_stage_per_lambda · λ`.
    pub first_stage_per_lambda: usize,
    /// Iterations of the box-constrained quasi-Newton refinement.
    pub refine_iters: usize,
}

impl Default for SafeParams {
    fn default() -> Self {
        Self {
            t_data: 5,
            zeta_init: 10.0,
            alpha: 10.0,
            l_min: 100.0,
            gamma: 0.9,
            length_scale_per_dim: 8.0,
            search_radius: 3.0,
            first_stage_per_lambda: 5,
            refine_iters: 200,
        }
    }
}

impl SafeParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_data == 0 {
            return Err(Error::Config("t_data must be at least 1".into()));
        }
        if !(self.zeta_init >= 1.0) {
            return Err(Error::Config("zeta_init must be at least 1".into()));
        }
        if !(self.alpha >= 1.0) {
            return Err(Error::Config("alpha must be at least 1".into()));
        }
        if !(self.l_min > 0.0) {
            return Err(Error::Config("l_min must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

type SafetyFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// A black-box safety function with its threshold: safe iff s(x) ≤ h.
#[derive(Clone)]
pub struct SafetyConstraint {
    func: Arc<SafetyFn>,
    threshold: f64,
}

impl SafetyConstraint {
    pub fn new(func: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, threshold: f64) -> Self {
        Self {
            func: Arc::new(func),
            threshold,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.func)(x)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }
}

impl fmt::Debug for SafetyConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SafetyConstraint")
            .field("threshold", &self.threshold)
            .finish_non_exhaustive()
    }
}

/// A solution with its objective and safety values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSolution {
    pub x: Vec<f64>,
    pub f: f64,
    /// s_j(x) for every constraint.
    pub s: Vec<f64>,
    /// h_j − s_j(x); nonnegative everywhere iff the solution is safe.
    pub slack: Vec<f64>,
    pub safe: bool,
}

impl EvaluatedSolution {
    pub fn from_values(x: Vec<f64>, f: f64, s: Vec<f64>, thresholds: &[f64]) -> Self {
        let slack: Vec<f64> = thresholds.iter().zip(&s).map(|(h, v)| h - v).collect();
        let safe = s.iter().zip(thresholds).all(|(v, h)| v <= h);
        Self {
            x,
            f,
            s,
            slack,
            safe,
        }
    }

    pub fn evaluate(
        x: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64,
        constraints: &[SafetyConstraint],
    ) -> Self {
        let f = objective(&x);
        let s: Vec<f64> = constraints.iter().map(|c| c.eval(&x)).collect();
        let h: Vec<f64> = constraints.iter().map(SafetyConstraint::threshold).collect();
        Self::from_values(x, f, s, &h)
    }
}

/// φ(x) = (√C)⁻¹ (x − m) / σ.
pub fn phi(x: &[f64], state: &DistributionState) -> Vec<f64> {
    let centered: Vec<f64> = x
        .iter()
        .zip(state.mean())
        .map(|(xi, mi)| (xi - mi) / state.sigma())
        .collect();
    state.inv_sqrt_cov().mul_vec(&centered)
}

/// Radius of the safe ball around a safe solution.
pub fn delta(sol: &EvaluatedSolution, lipschitz: &[f64]) -> Result<f64> {
    if !sol.safe {
        return Err(Error::UnsafeAnchor);
    }
    Ok(sol
        .slack
        .iter()
        .zip(lipschitz)
        .map(|(slack, l)| slack / l.max(MIN_LIPSCHITZ))
        .fold(f64::INFINITY, f64::min)
        .max(0.0))
}

/// Sliding window of the most recent evaluations, seeds first.
#[derive(Debug, Clone)]
pub struct EvalWindow {
    capacity: usize,
    items: VecDeque<EvaluatedSolution>,
}

impl EvalWindow {
    /// Window holding at most `λ · t_data` solutions.
    pub fn new(lambda: usize, t_data: usize, seeds: &[EvaluatedSolution]) -> Self {
        let mut w = Self {
            capacity: lambda * t_data,
            items: VecDeque::with_capacity(lambda * t_data),
        };
        w.push_batch(seeds.iter().cloned());
        w
    }

    pub fn push_batch(&mut self, batch: impl IntoIterator<Item = EvaluatedSolution>) {
        for sol in batch {
            if self.items.len() == self.capacity {
                self.items.pop_front();
            }
            self.items.push_back(sol);
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &EvaluatedSolution> {
        self.items.iter()
    }
}

/// Ball in standardized space centred at a safe solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SafeRegion {
    pub anchors: Vec<Anchor>,
}

impl SafeRegion {
    /// Balls around the safe members of `solutions` under the distribution
    /// `state` and Lipschitz constants `lipschitz`.
    pub fn build<'a>(
        solutions: impl IntoIterator<Item = &'a EvaluatedSolution>,
        state: &DistributionState,
        lipschitz: &[f64],
    ) -> Result<Self> {
        let mut anchors = Vec::new();
        for sol in solutions.into_iter().filter(|s| s.safe) {
            anchors.push(Anchor {
                center: phi(&sol.x, state),
                radius: delta(sol, lipschitz)?,
            });
        }
        Ok(Self { anchors })
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.anchors.iter().any(|a| dist(z, &a.center) <= a.radius)
    }
}

/// Outcome of projecting one raw sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Projected {
    pub z: Vec<f64>,
    pub xi: f64,
    pub anchor: usize,
}

/// Pulls `z_raw` toward the anchor maximizing δ − ‖z_raw − center‖, just far
/// enough to land inside that anchor's ball.
pub fn project(z_raw: &[f64], region: &SafeRegion) -> Result<Projected> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, a) in region.anchors.iter().enumerate() {
        let d = dist(z_raw, &a.center);
        let score = a.radius - d;
        if best.is_none_or(|(_, s, _)| score > s) {
            best = Some((i, score, d));
        }
    }
    let (anchor, _, distance) = best.ok_or(Error::EmptySafeRegion)?;
    let a = &region.anchors[anchor];
    let xi = if distance == 0.0 {
        1.0
    } else {
        (a.radius / distance).min(1.0)
    };
    let z = if xi == 1.0 {
        z_raw.to_vec()
    } else {
        z_raw
            .iter()
            .zip(&a.center)
            .map(|(zr, c)| xi * zr + (1.0 - xi) * c)
            .collect()
    };
    Ok(Projected { z, xi, anchor })
}

/// Standard normal draws clipped into [−r, r]^d.
pub(crate) fn clipped_normals(
    normals: &mut impl NormalSource,
    count: usize,
    dim: usize,
    r: f64,
) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            let mut z = normals.standard_normal(dim);
            for v in z.iter_mut() {
                *v = v.clamp(-r, r);
            }
            z
        })
        .collect()
}
