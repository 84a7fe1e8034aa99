//! Plain CMA-ES with positive recombination weights, split into ask/tell
//! pieces so the safe layer can substitute projected samples before the
//! update.

use crate::error::{Error, Result};
use crate::mathkit::{eig_sym, Matrix, NormalSource, SymMatrix};

/// Target value used by [`should_terminate`].
pub const TARGET_F: f64 = 1e-8;
/// Lower bound on the smallest eigenvalue of σ²C.
pub const MIN_EIGENVALUE: f64 = 1e-30;

/// Learning rates and recombination weights for a given dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub c_m: f64,
    /// Approximation of E‖N(0, I)‖.
    pub chi_d: f64,
}

impl StrategyParams {
    /// Defaults with λ = 4 + ⌊3 ln d⌋.
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        let lambda = 4 + (3.0 * (dim as f64).ln()).floor() as usize;
        Self::with_lambda(dim, lambda)
    }

    pub fn with_lambda(dim: usize, lambda: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        if lambda < 2 {
            return Err(Error::Config(format!("population size {lambda} < 2")));
        }
        let d = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (d + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (d + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / d) / (d + 4.0 + 2.0 * mu_eff / d);
        let c_1 = 2.0 / ((d + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1)
            .min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((d + 2.0).powi(2) + mu_eff));
        let chi_d = d.sqrt() * (1.0 - 1.0 / (4.0 * d) + 1.0 / (21.0 * d * d));

        Ok(Self {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            c_m: 1.0,
            chi_d,
        })
    }

    /// Multiplicative step-size change for a given ‖p_σ‖.
    pub fn stepsize_factor(&self, p_sigma_norm: f64) -> f64 {
        ((self.c_sigma / self.d_sigma) * (p_sigma_norm / self.chi_d - 1.0)).exp()
    }
}

/// Mean, covariance, step-size and evolution paths of the search
/// distribution. The square root of C, its inverse and the extreme
/// eigenvalues are computed once per state.
#[derive(Debug, Clone)]
pub struct DistributionState {
    mean: Vec<f64>,
    cov: SymMatrix,
    sigma: f64,
    p_sigma: Vec<f64>,
    p_c: Vec<f64>,
    iteration: usize,
    sqrt_cov: Matrix,
    inv_sqrt_cov: Matrix,
    eig_min: f64,
    eig_max: f64,
}

impl DistributionState {
    pub fn new(mean: Vec<f64>, sigma: f64, cov: SymMatrix) -> Result<Self> {
        let dim = mean.len();
        Self::from_parts(mean, sigma, cov, vec![0.0; dim], vec![0.0; dim], 0)
    }

    pub fn from_parts(
        mean: Vec<f64>,
        sigma: f64,
        cov: SymMatrix,
        p_sigma: Vec<f64>,
        p_c: Vec<f64>,
        iteration: usize,
    ) -> Result<Self> {
        let dim = mean.len();
        for len in [cov.dim(), p_sigma.len(), p_c.len()] {
            if len != dim {
                return Err(Error::Shape {
                    expected: dim,
                    got: len,
                });
            }
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("step-size {sigma} must be positive")));
        }
        let eig = eig_sym(&cov)?;
        if !(eig.min_value() > 0.0) {
            return Err(crate::mathkit::MathError::SingularCovariance(eig.min_value()).into());
        }
        let sqrt_cov = eig.spectral_map(f64::sqrt);
        let inv_sqrt_cov = eig.spectral_map(|l| 1.0 / l.sqrt());
        Ok(Self {
            eig_min: eig.min_value(),
            eig_max: eig.max_value(),
            mean,
            cov,
            sigma,
            p_sigma,
            p_c,
            iteration,
            sqrt_cov,
            inv_sqrt_cov,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn p_sigma(&self) -> &[f64] {
        &self.p_sigma
    }
    pub fn p_c(&self) -> &[f64] {
        &self.p_c
    }
    pub fn iteration(&self) -> usize {
        self.iteration
    }
    pub fn sqrt_cov(&self) -> &Matrix {
        &self.sqrt_cov
    }
    pub fn inv_sqrt_cov(&self) -> &Matrix {
        &self.inv_sqrt_cov
    }
    /// Smallest eigenvalue of C (not scaled by σ²).
    pub fn eig_min(&self) -> f64 {
        self.eig_min
    }
    pub fn eig_max(&self) -> f64 {
        self.eig_max
    }

    /// Same state with a different step-size.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("step-size {sigma} must be positive")));
        }
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }

    /// Same state with a different mean.
    pub fn with_mean(&self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: mean.len(),
            });
        }
        Ok(Self {
            mean,
            ..self.clone()
        })
    }

    /// y = √C z and x = m + σ y.
    pub fn decode(&self, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let y = self.sqrt_cov.mul_vec(z);
        let x = self
            .mean
            .iter()
            .zip(&y)
            .map(|(m, yi)| m + self.sigma * yi)
            .collect();
        (y, x)
    }
}

/// One evaluated member of a population.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub f: f64,
}

impl Member {
    pub fn new(state: &DistributionState, z: Vec<f64>, f: f64) -> Self {
        let (y, x) = state.decode(&z);
        Self { z, y, x, f }
    }
}

/// λ raw standard-normal samples.
pub fn sample_raw(params: &StrategyParams, normals: &mut impl NormalSource) -> Vec<Vec<f64>> {
    (0..params.lambda)
        .map(|_| normals.standard_normal(params.dim))
        .collect()
}

/// Indices of `members` ordered by objective, ties kept in sample order.
pub fn ranking(members: &[Member]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..members.len()).collect();
    order.sort_by(|&a, &b| members[a].f.total_cmp(&members[b].f));
    order
}

/// Updates the distribution from an evaluated population. The members must
/// carry the z/y vectors that were actually evaluated.
pub fn tell(
    state: &DistributionState,
    params: &StrategyParams,
    members: &[Member],
) -> Result<DistributionState> {
    if members.len() != params.lambda {
        return Err(Error::PopulationSize {
            expected: params.lambda,
            got: members.len(),
        });
    }
    if let Some(m) = members.iter().find(|m| !m.f.is_finite()) {
        return Err(Error::InvalidObjective(m.f));
    }
    let d = params.dim;
    let order = ranking(members);

    let mut delta_z = vec![0.0; d];
    let mut delta_y = vec![0.0; d];
    for (w, &idx) in params.weights.iter().zip(&order) {
        for k in 0..d {
            delta_z[k] += w * members[idx].z[k];
            delta_y[k] += w * members[idx].y[k];
        }
    }

    let cs = params.c_sigma;
    let cc = params.c_c;
    let ps_coef = (cs * (2.0 - cs) * params.mu_eff).sqrt();
    let p_sigma: Vec<f64> = state
        .p_sigma
        .iter()
        .zip(&delta_z)
        .map(|(p, dz)| (1.0 - cs) * p + ps_coef * dz)
        .collect();
    let ps_norm = crate::mathkit::norm(&p_sigma);
    let t_next = (state.iteration + 1) as f64;
    let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * t_next)).sqrt()
        < (1.4 + 2.0 / (d as f64 + 1.0)) * params.chi_d;
    let h = if h_sigma { 1.0 } else { 0.0 };

    let pc_coef = h * (cc * (2.0 - cc) * params.mu_eff).sqrt();
    let p_c: Vec<f64> = state
        .p_c
        .iter()
        .zip(&delta_y)
        .map(|(p, dy)| (1.0 - cc) * p + pc_coef * dy)
        .collect();

    let mean: Vec<f64> = state
        .mean
        .iter()
        .zip(&delta_y)
        .map(|(m, dy)| m + params.c_m * state.sigma * dy)
        .collect();

    let sigma = state.sigma * params.stepsize_factor(ps_norm);

    let c1 = params.c_1;
    let cmu = params.c_mu;
    let keep = 1.0 + (1.0 - h) * c1 * cc * (2.0 - cc) - c1 - cmu * params.weights.iter().sum::<f64>();
    let mut cov = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut v = keep * state.cov.get(i, j) + c1 * p_c[i] * p_c[j];
            for (w, &idx) in params.weights.iter().zip(&order) {
                let y = &members[idx].y;
                v += cmu * w * y[i] * y[j];
            }
            cov.set(i, j, v);
        }
    }
    let cov = SymMatrix::symmetrize(&cov);

    DistributionState::from_parts(mean, sigma, cov, p_sigma, p_c, state.iteration + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TargetReached,
    Collapsed,
}

pub fn should_terminate(state: &DistributionState, best_f: f64) -> Option<Termination> {
    if best_f <= TARGET_F {
        Some(Termination::TargetReached)
    } else if state.sigma * state.sigma * state.eig_min < MIN_EIGENVALUE {
        Some(Termination::Collapsed)
    } else {
        None
    }
}

/// Result of [`minimize`].
#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    pub termination: Option<Termination>,
    pub state: DistributionState,
}

/// Runs unconstrained CMA-ES until a termination condition or the budget.
pub fn minimize(
    f: impl Fn(&[f64]) -> f64,
    initial: DistributionState,
    params: &StrategyParams,
    normals: &mut impl NormalSource,
    max_evals: usize,
) -> Result<MinimizeOutcome> {
    let mut state = initial;
    let mut best_x = state.mean().to_vec();
    let mut best_f = f64::INFINITY;
    let mut evaluations = 0;
    let mut termination = None;
    while evaluations + params.lambda <= max_evals {
        let members: Vec<Member> = sample_raw(params, normals)
            .into_iter()
            .map(|z| {
                let (y, x) = state.decode(&z);
                let fx = f(&x);
                Member { z, y, x, f: fx }
            })
            .collect();
        evaluations += members.len();
        for m in &members {
            if m.f < best_f {
                best_f = m.f;
                best_x = m.x.clone();
            }
        }
        state = match tell(&state, params, &members) {
            Ok(s) => s,
            Err(Error::Math(_)) => {
                termination = Some(Termination::Collapsed);
                break;
            }
            Err(e) => return Err(e),
        };
        termination = should_terminate(&state, best_f);
        if termination.is_some() {
            break;
        }
    }
    Ok(MinimizeOutcome {
        best_x,
        best_f,
        evaluations,
        termination,
        state,
    })
}
