//! Projected limited-memory BFGS for maximizing a smooth function over a
//! box. The objective is negated internally and every trial point is
//! projected onto the box, so returned points are always feasible.

use std::collections::VecDeque;

use thiserror::Error;

use crate::mathkit::dot;

const MEMORY: usize = 10;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 50;
/// Stop once the projected gradient is this small (infinity norm).
pub const PG_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QnError {
    #[error("objective is not finite at the starting point")]
    InvalidStart,
    #[error("bounds are invalid: lower must be strictly below upper")]
    InvalidBounds,
    #[error("start point has dimension {got}, bounds have {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, QnError> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(QnError::InvalidBounds);
        }
        Ok(Self { lower, upper })
    }

    /// [−r, r]^dim.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Self {
            lower: vec![-r; dim],
            upper: vec![r; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Mask of coordinates pinned at a bound with the descent direction −g
    /// pointing outside.
    fn active(&self, x: &[f64], g: &[f64]) -> Vec<bool> {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((xi, gi), (l, u))| (*xi <= *l && *gi > 0.0) || (*xi >= *u && *gi < 0.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Maximizes `objective` (returning value and gradient) inside `bounds`,
/// starting from `x0`, for at most `max_iters` iterations.
pub fn maximize<F>(
    objective: F,
    x0: &[f64],
    bounds: &BoxBounds,
    max_iters: usize,
) -> Result<QnOutcome, QnError>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    if x0.len() != bounds.dim() {
        return Err(QnError::Dimension {
            expected: bounds.dim(),
            got: x0.len(),
        });
    }
    // minimize the negation
    let eval = |x: &[f64]| {
        let (v, g) = objective(x);
        (-v, g.into_iter().map(|gi| -gi).collect::<Vec<f64>>())
    };

    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut gx) = eval(&x);
    if !fx.is_finite() || gx.iter().any(|v| !v.is_finite()) {
        return Err(QnError::InvalidStart);
    }

    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(MEMORY);
    let mut active = bounds.active(&x, &gx);
    let mut iterations = 0;

    while iterations < max_iters {
        let pg_inf = gx
            .iter()
            .zip(&active)
            .map(|(g, a)| if *a { 0.0 } else { g.abs() })
            .fold(0.0, f64::max);
        if pg_inf < PG_TOL {
            break;
        }
        iterations += 1;

        let mut dir = two_loop(&gx, &pairs, &active);
        if !(dot(&gx, &dir) < 0.0) {
            pairs.clear();
            dir = gx
                .iter()
                .zip(&active)
                .map(|(g, a)| if *a { 0.0 } else { -g })
                .collect();
        }
        let first_step = if pairs.is_empty() {
            (1.0 / dir.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
        } else {
            1.0
        };

        let Some((x_new, f_new, g_new)) = line_search(&eval, bounds, &x, fx, &gx, &dir, first_step)
        else {
            if pairs.is_empty() {
                break;
            }
            pairs.clear();
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let new_active = bounds.active(&x_new, &g_new);
        if new_active != active {
            pairs.clear();
        } else if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if pairs.len() == MEMORY {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let progress = fx - f_new;
        x = x_new;
        fx = f_new;
        gx = g_new;
        active = new_active;
        if progress <= 1e-15 * fx.abs().max(1e-300) && pairs.is_empty() {
            break;
        }
    }

    Ok(QnOutcome {
        x,
        value: -fx,
        iterations,
    })
}

/// −H·g restricted to free coordinates.
fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, active: &[bool]) -> Vec<f64> {
    let mask = |v: &mut Vec<f64>| {
        for (vi, a) in v.iter_mut().zip(active) {
            if *a {
                *vi = 0.0;
            }
        }
    };
    let mut q = g.to_vec();
    mask(&mut q);
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    mask(&mut q);
    q.iter().map(|v| -v).collect()
}

/// Backtracking Armijo search along the projected path P(x + t·dir).
fn line_search<E>(
    eval: &E,
    bounds: &BoxBounds,
    x: &[f64],
    fx: f64,
    gx: &[f64],
    dir: &[f64],
    first_step: f64,
) -> Option<(Vec<f64>, f64, Vec<f64>)>
where
    E: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut t = first_step;
    for _ in 0..MAX_HALVINGS {
        let mut trial: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + t * di).collect();
        bounds.project(&mut trial);
        let step: Vec<f64> = trial.iter().zip(x).map(|(a, b)| a - b).collect();
        let decrease = dot(gx, &step);
        if decrease < 0.0 {
            let (f_new, g_new) = eval(&trial);
            if f_new.is_finite() && f_new <= fx + ARMIJO_C * decrease {
                return Some((trial, f_new, g_new));
            }
        } else if step.iter().all(|v| *v == 0.0) {
            return None;
        }
        t *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::RngStream;

    #[test]
    fn concave_quadratic_peak() {
        let mut rng = RngStream::new(2);
        let bounds = BoxBounds::symmetric(4, 3.0);
        for _ in 0..10 {
            let x0: Vec<f64> = (0..4).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let out = maximize(
                |x| (-dot(x, x), x.iter().map(|v| -2.0 * v).collect()),
                &x0,
                &bounds,
                200,
            )
            .unwrap();
            assert!(out.x.iter().all(|v| v.abs() < 1e-6), "{:?}", out.x);
        }
    }

    #[test]
    fn linear_goes_to_corner() {
        let bounds = BoxBounds::symmetric(3, 3.0);
        let out = maximize(
            |x| (x.iter().sum(), vec![1.0; 3]),
            &[0.1, -2.0, 1.0],
            &bounds,
            200,
        )
        .unwrap();
        assert_eq!(out.x, vec![3.0; 3]);
        assert_eq!(out.value, 9.0);
    }

    #[test]
    fn anisotropic_with_active_bound() {
        // peak at (5, 0.5) lies outside the box in the first coordinate
        let bounds = BoxBounds::symmetric(2, 3.0);
        let f = |x: &[f64]| {
            let a = x[0] - 5.0;
            let b = x[1] - 0.5;
            (
                -(a * a + 30.0 * b * b + 2.0 * a * b),
                vec![-(2.0 * a + 2.0 * b), -(60.0 * b + 2.0 * a)],
            )
        };
        let out = maximize(f, &[0.0, 0.0], &bounds, 200).unwrap();
        assert_eq!(out.x[0], 3.0);
        // with x₀ pinned at 3: ∂/∂x₁ = 0 → 60b − 4 = 0
        assert!((out.x[1] - (0.5 + 4.0 / 60.0)).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn never_worse_than_start() {
        let bounds = BoxBounds::symmetric(2, 1.0);
        let f = |x: &[f64]| ((3.0 * x[0]).sin() * x[1].cos(), vec![3.0 * (3.0 * x[0]).cos() * x[1].cos(), -(3.0 * x[0]).sin() * x[1].sin()]);
        let x0 = [0.2, 0.4];
        let start = f(&x0).0;
        let out = maximize(f, &x0, &bounds, 50).unwrap();
        assert!(out.value >= start);
        assert!(bounds.contains(&out.x));
    }

    #[test]
    fn rejects_bad_start() {
        let bounds = BoxBounds::symmetric(1, 1.0);
        assert_eq!(
            maximize(|_| (f64::NAN, vec![0.0]), &[0.0], &bounds, 10).unwrap_err(),
            QnError::InvalidStart
        );
        assert!(BoxBounds::new(vec![1.0], vec![1.0]).is_err());
    }
}
