//! Benchmark functions, safety-constraint families and safe-seed sampling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathkit::RngStream;
use crate::safe::{EvaluatedSolution, SafetyConstraint};

/// Half-width of the search space [−5, 5]^d used for seeds and thresholds.
pub const SEARCH_RADIUS: f64 = 5.0;
pub const DEFAULT_SEEDS: usize = 10;
pub const DEFAULT_QUANTILE_SAMPLES: usize = 10_000;
/// Uniform draws tried before seed sampling gives up.
pub const MAX_SEED_DRAWS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Benchmark {
    Sphere,
    Ellipsoid,
    ReversedEllipsoid,
    Rosenbrock,
}

impl Benchmark {
    pub const ALL: [Benchmark; 4] = [
        Benchmark::Sphere,
        Benchmark::Ellipsoid,
        Benchmark::ReversedEllipsoid,
        Benchmark::Rosenbrock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Sphere => "sphere",
            Benchmark::Ellipsoid => "ellipsoid",
            Benchmark::ReversedEllipsoid => "reversed-ellipsoid",
            Benchmark::Rosenbrock => "rosenbrock",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        let d = x.len();
        let scale = |exp_num: usize| 1000f64.powf(exp_num as f64 / (d - 1) as f64);
        match self {
            Benchmark::Sphere => x.iter().map(|v| v * v).sum(),
            Benchmark::Ellipsoid => x
                .iter()
                .enumerate()
                .map(|(i, v)| (scale(i) * v).powi(2))
                .sum(),
            Benchmark::ReversedEllipsoid => x
                .iter()
                .rev()
                .enumerate()
                .map(|(k, v)| (scale(k) * v).powi(2))
                .sum(),
            // shifted so that the optimum sits at the origin
            Benchmark::Rosenbrock => x
                .windows(2)
                .map(|w| {
                    let a = w[1] + 1.0;
                    let b = w[0] + 1.0;
                    100.0 * (a - b * b).powi(2) + w[0] * w[0]
                })
                .sum(),
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// Evaluates a benchmark by name.
pub fn eval_benchmark(name: &str, x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::Dimension(x.len()));
    }
    Ok(name.parse::<Benchmark>()?.eval(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafetyKind {
    /// s = f with h the median of f over the search space.
    ObjectiveMedian,
    /// s(x) = x₁ with h = 0.
    FirstCoordinate,
}

impl SafetyKind {
    pub fn name(self) -> &'static str {
        match self {
            SafetyKind::ObjectiveMedian => "objective-median",
            SafetyKind::FirstCoordinate => "first-coordinate",
        }
    }
}

impl fmt::Display for SafetyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SafetyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "objective-median" => Ok(SafetyKind::ObjectiveMedian),
            "first-coordinate" => Ok(SafetyKind::FirstCoordinate),
            _ => Err(Error::UnknownSafety(s.to_string())),
        }
    }
}

/// Empirical `q`-quantile of `f` under uniform sampling of [−r, r]^dim,
/// taken as the order statistic at index ⌈q·n⌉ − 1.
pub fn quantile_threshold(
    f: impl Fn(&[f64]) -> f64,
    dim: usize,
    radius: f64,
    q: f64,
    rng: &mut RngStream,
    n_samples: usize,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Config("quantile needs at least one sample".into()));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("quantile level {q} outside (0, 1]")));
    }
    let mut values: Vec<f64> = (0..n_samples)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-radius, radius)).collect();
            f(&x)
        })
        .collect();
    values.sort_by(f64::total_cmp);
    let idx = ((q * n_samples as f64).ceil() as usize).max(1) - 1;
    Ok(values[idx])
}

/// Safety constraints for a benchmark. The objective-median threshold is
/// drawn from `rng`.
pub fn make_safety(
    kind: SafetyKind,
    benchmark: Benchmark,
    dim: usize,
    rng: &mut RngStream,
) -> Result<Vec<SafetyConstraint>> {
    match kind {
        SafetyKind::ObjectiveMedian => {
            let h = quantile_threshold(
                |x| benchmark.eval(x),
                dim,
                SEARCH_RADIUS,
                0.5,
                rng,
                DEFAULT_QUANTILE_SAMPLES,
            )?;
            Ok(vec![SafetyConstraint::new(move |x| benchmark.eval(x), h)])
        }
        SafetyKind::FirstCoordinate => Ok(vec![SafetyConstraint::new(|x| x[0], 0.0)]),
    }
}

/// Rejection-samples `count` safe points uniformly from [−r, r]^dim.
pub fn sample_safe_seeds(
    objective: impl Fn(&[f64]) -> f64,
    constraints: &[SafetyConstraint],
    dim: usize,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<EvaluatedSolution>> {
    let mut seeds = Vec::with_capacity(count);
    let mut tries = 0;
    while seeds.len() < count {
        if tries == MAX_SEED_DRAWS {
            return Err(Error::SeedSamplingExhausted {
                wanted: count,
                tries,
            });
        }
        tries += 1;
        let x: Vec<f64> = (0..dim)
            .map(|_| rng.uniform(-SEARCH_RADIUS, SEARCH_RADIUS))
            .collect();
        let sol = EvaluatedSolution::evaluate(x, &objective, constraints);
        if sol.safe {
            seeds.push(sol);
        }
    }
    Ok(seeds)
}

/// A benchmark with concrete constraints and seeds.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub benchmark: Benchmark,
    pub dim: usize,
    pub safety: SafetyKind,
    pub constraints: Vec<SafetyConstraint>,
    pub seeds: Vec<EvaluatedSolution>,
}

impl ProblemInstance {
    pub fn generate(
        benchmark: Benchmark,
        dim: usize,
        safety: SafetyKind,
        n_seeds: usize,
        rng: &mut RngStream,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(dim));
        }
        let constraints = make_safety(safety, benchmark, dim, rng)?;
        let seeds = sample_safe_seeds(|x| benchmark.eval(x), &constraints, dim, n_seeds, rng)?;
        Ok(Self {
            benchmark,
            dim,
            safety,
            constraints,
            seeds,
        })
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.threshold()).collect()
    }

    pub fn evaluate(&self, x: Vec<f64>) -> EvaluatedSolution {
        EvaluatedSolution::evaluate(x, |x| self.benchmark.eval(x), &self.constraints)
    }
}
