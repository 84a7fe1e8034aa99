//! CMA-ES with violation avoidance: candidates whose (weighted) nearest
//! evaluated neighbour is unsafe are discarded before evaluation.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::cmaes::{DistributionState, StrategyParams};
use crate::error::{Error, Result};
use crate::mathkit::{dist, NormalSource, RngStream};
use crate::safe::{EvaluatedSolution, Proposal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceConfig {
    pub w_safe: f64,
    pub w_unsafe: f64,
    /// Candidates drawn per iteration, as a multiple of λ.
    pub oversample: usize,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        Self {
            w_safe: 1.0,
            w_unsafe: 1.0,
            oversample: 10,
        }
    }
}

impl AvoidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_safe > 0.0 && self.w_unsafe > 0.0) {
            return Err(Error::Config("avoidance weights must be positive".into()));
        }
        if self.oversample == 0 {
            return Err(Error::Config("oversample factor must be positive".into()));
        }
        Ok(())
    }
}

/// Index of the history point minimizing ‖x − x_old‖ / w(x_old).
pub fn weighted_nearest(
    x: &[f64],
    history: &[EvaluatedSolution],
    config: &AvoidanceConfig,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, old) in history.iter().enumerate() {
        let w = if old.safe {
            config.w_safe
        } else {
            config.w_unsafe
        };
        let d = dist(x, &old.x) / w;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Draws `oversample·λ` candidates, keeps those whose weighted nearest
/// neighbour in `history` is safe and returns λ of them chosen uniformly.
pub fn avoidance_ask(
    state: &DistributionState,
    params: &StrategyParams,
    history: &[EvaluatedSolution],
    config: &AvoidanceConfig,
    rng: &mut RngStream,
) -> Result<Vec<Proposal>> {
    let drawn = config.oversample * params.lambda;
    let mut kept = Vec::with_capacity(drawn);
    for _ in 0..drawn {
        let z = rng.standard_normal(params.dim);
        let (y, x) = state.decode(&z);
        let ok = weighted_nearest(&x, history, config).is_some_and(|i| history[i].safe);
        if ok {
            kept.push(Proposal {
                z_raw: z.clone(),
                z,
                y,
                x,
                xi: 1.0,
            });
        }
    }
    if kept.len() < params.lambda {
        return Err(Error::AvoidanceExhausted {
            kept: kept.len(),
            drawn,
            needed: params.lambda,
        });
    }
    let picks = index::sample(rng.rng_mut(), kept.len(), params.lambda);
    Ok(picks.iter().map(|i| kept[i].clone()).collect())
}
