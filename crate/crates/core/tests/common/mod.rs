//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use safe_cmaes::gpr::GprModel;
use safe_cmaes::mathkit::{dist, norm, Matrix, NormalSource, RngStream};
use safe_cmaes::safe::SafeRegion;

// ---------------------------------------------------------------- chi-square

/// Γ(k/2) from the factorial identities for integer and half-integer
/// arguments.
pub fn gamma_half(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        (1..k / 2).map(f64::from).product()
    } else {
        // Γ(n + 1/2) = (2n)! √π / (4ⁿ n!)
        let n = (k - 1) / 2;
        let mut g = std::f64::consts::PI.sqrt();
        for i in 0..n {
            g *= f64::from(i) + 0.5;
        }
        g
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// χ²(k) CDF by quadrature of the density after substituting t = u², which
/// removes the k = 1 singularity at the origin.
pub fn chi2_cdf_quadrature(x: f64, k: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let kf = f64::from(k);
    let norm_c = 2f64.powf(kf / 2.0) * gamma_half(k);
    let integrand = move |u: f64| 2.0 * u.powf(kf - 1.0) * (-u * u / 2.0).exp() / norm_c;
    adaptive_simpson(&integrand, 0.0, x.sqrt(), 1e-15)
}

/// Inverse of [`chi2_cdf_quadrature`] by bisection.
pub fn chi2_ppf_quadrature(p: f64, k: u32) -> f64 {
    let mut lo = 0.0;
    let mut hi = 1.0;
    while chi2_cdf_quadrature(hi, k) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_quadrature(mid, k) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn percentile_grid() -> Vec<f64> {
    (1..=99).map(|i| f64::from(i) / 100.0).collect()
}

// ---------------------------------------------------------------- projection

/// Anchor index maximizing radius − distance, first index on ties.
pub fn brute_force_anchor(z: &[f64], region: &SafeRegion) -> Option<usize> {
    let scores: Vec<f64> = region
        .anchors
        .iter()
        .map(|a| a.radius - dist(z, &a.center))
        .collect();
    let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|&s| s == best)
}

// ---------------------------------------------------------------- gpr

/// Central finite-difference gradient of the posterior mean.
pub fn fd_gradient(model: &GprModel, z: &[f64], step: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let mut a = z.to_vec();
            let mut b = z.to_vec();
            a[i] += step;
            b[i] -= step;
            (model.posterior_mean(&a) - model.posterior_mean(&b)) / (2.0 * step)
        })
        .collect()
}

/// Central difference quotient (μ(z + h·e_j) − μ(z − h·e_j)) / 2h of an RBF
/// posterior mean, with each kernel difference rewritten as
/// −2·k(z, z_i)·exp(−h²/2H²)·sinh(h·(z − z_i)_j / H²) so the subtraction
/// never cancels.
pub fn fd_gradient_rbf(model: &GprModel, z: &[f64], step: f64) -> Vec<f64> {
    let h2 = model.length_scale().powi(2);
    let shrink = (-step * step / (2.0 * h2)).exp();
    (0..z.len())
        .map(|j| {
            model
                .inputs()
                .iter()
                .zip(model.alpha())
                .map(|(zi, a)| {
                    let r2: f64 = z.iter().zip(zi).map(|(p, q)| (p - q).powi(2)).sum();
                    let k0 = (-r2 / (2.0 * h2)).exp();
                    let u = step * (z[j] - zi[j]) / h2;
                    -2.0 * a * k0 * shrink * u.sinh()
                })
                .sum::<f64>()
                / (2.0 * step)
        })
        .collect()
}

/// A GPR fitted to a random smooth function at `n` Gaussian inputs.
pub fn random_model(rng: &mut RngStream, dim: usize, n: usize, length_scale: f64) -> GprModel {
    let w = rng.standard_normal(dim);
    let c = rng.standard_normal(dim);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| rng.standard_normal(dim)).collect();
    let targets: Vec<f64> = inputs
        .iter()
        .map(|z| {
            let lin: f64 = z.iter().zip(&w).map(|(a, b)| a * b).sum();
            lin.sin() + 0.3 * dist(z, &c).powi(2) / dim as f64
        })
        .collect();
    GprModel::fit(inputs, targets, length_scale).expect("random model fits")
}

/// Largest ‖∇μ‖ over a uniform grid of [−r, r]² with `per_axis` points per axis.
pub fn grid_max_grad_norm_2d(model: &GprModel, r: f64, per_axis: usize) -> f64 {
    let step = 2.0 * r / (per_axis - 1) as f64;
    let mut best: f64 = 0.0;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let z = [-r + i as f64 * step, -r + j as f64 * step];
            best = best.max(norm(&model.posterior_mean_grad(&z)));
        }
    }
    best
}

// ---------------------------------------------------------------- rotations

/// Haar-random orthogonal matrix from Gram–Schmidt on Gaussian columns.
pub fn random_orthogonal(rng: &mut RngStream, dim: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v = rng.standard_normal(dim);
        for c in &cols {
            let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= p * ci;
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            cols.push(v.iter().map(|x| x / n).collect());
        }
    }
    let mut m = Matrix::zeros(dim);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            m.set(i, j, *v);
        }
    }
    m
}

/// Emits R·z for every standard normal z drawn from the wrapped stream.
pub struct RotatedNormals {
    pub inner: RngStream,
    pub rotation: Matrix,
}

impl NormalSource for RotatedNormals {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        let z = self.inner.standard_normal(out.len());
        out.copy_from_slice(&self.rotation.mul_vec(&z));
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
