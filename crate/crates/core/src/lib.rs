//! Safe CMA-ES: covariance matrix adaptation that keeps its samples inside
//! a region certified safe by Lipschitz bounds on black-box constraints.
//!
//! The Lipschitz constants are estimated from a Gaussian-process surrogate
//! of each constraint, fitted on recent evaluations in the coordinates of
//! the current search distribution.
//!
//! Start with [`safe::SafeCmaes`] for the optimizer, [`problems`] for the
//! benchmark suite and [`harness`] for seeded multi-trial experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod box_qn;
pub mod cmaes;
pub mod error;
pub mod gpr;
pub mod harness;
pub mod mathkit;
pub mod problems;
pub mod safe;

pub use error::{Error, Result};
