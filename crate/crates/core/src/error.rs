use thiserror::Error;

use crate::box_qn::QnError;
use crate::gpr::GprError;
use crate::mathkit::MathError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Gpr(#[from] GprError),
    #[error(transparent)]
    Qn(#[from] QnError),
    #[error("dimension {0} is not supported (need at least 2)")]
    Dimension(usize),
    #[error("vector of length {got} does not match dimension {expected}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite objective value {0}")]
    InvalidObjective(f64),
    #[error("population has {got} members, expected {expected}")]
    PopulationSize { expected: usize, got: usize },
    #[error("no safe solution is available to anchor the safe region")]
    EmptySafeRegion,
    #[error("at least one safe seed is required")]
    MissingSeeds,
    #[error("seed {0} violates a safety constraint")]
    UnsafeSeed(usize),
    #[error("safe radius requested for an unsafe solution")]
    UnsafeAnchor,
    #[error("could not find {wanted} safe seeds after {tries} uniform draws")]
    SeedSamplingExhausted { wanted: usize, tries: usize },
    #[error("violation avoidance kept {kept} of {drawn} candidates, {needed} needed")]
    AvoidanceExhausted {
        kept: usize,
        drawn: usize,
        needed: usize,
    },
    #[error("unknown benchmark `{0}`")]
    UnknownProblem(String),
    #[error("unknown safety kind `{0}`")]
    UnknownSafety(String),
    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
