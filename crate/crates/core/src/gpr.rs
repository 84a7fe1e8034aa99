//! Noiseless Gaussian process regression with an RBF kernel. Only the
//! posterior mean and its derivatives are provided; they are what the
//! Lipschitz estimator needs.

use thiserror::Error;

use crate::mathkit::dot;

/// First jitter added to the Gram diagonal.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up.
pub const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GprError {
    #[error("need at least 2 training points, got {0}")]
    NotEnoughData(usize),
    #[error("training data has non-finite entries")]
    NonFinite,
    #[error("inputs and targets differ in length ({inputs} vs {targets})")]
    LengthMismatch { inputs: usize, targets: usize },
    #[error("length scale must be positive, got {0}")]
    LengthScale(f64),
    #[error("Gram matrix not positive definite even with jitter {0:e}")]
    DegenerateGram(f64),
}

/// exp(−‖a − b‖² / (2H²)).
#[inline]
pub fn rbf_kernel(a: &[f64], b: &[f64], length_scale: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sq / (2.0 * length_scale * length_scale)).exp()
}

#[derive(Debug, Clone)]
pub struct GprModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    length_scale: f64,
    alpha: Vec<f64>,
    jitter: f64,
}

/// In-place Cholesky of a row-major n×n matrix; returns false on a
/// non-positive pivot.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * n + j] = ljj;
        for i in (j + 1)..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / ljj;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

impl GprModel {
    /// Solves (K + jitter·I) α = targets, escalating the jitter tenfold from
    /// [`JITTER_START`] to [`JITTER_MAX`] until the factorization succeeds.
    pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, length_scale: f64) -> Result<Self, GprError> {
        let n = inputs.len();
        if n != targets.len() {
            return Err(GprError::LengthMismatch {
                inputs: n,
                targets: targets.len(),
            });
        }
        if n < 2 {
            return Err(GprError::NotEnoughData(n));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(GprError::LengthScale(length_scale));
        }
        if inputs.iter().flatten().chain(&targets).any(|v| !v.is_finite()) {
            return Err(GprError::NonFinite);
        }

        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            gram[i * n + i] = 1.0;
            for j in 0..i {
                let k = rbf_kernel(&inputs[i], &inputs[j], length_scale);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }

        let mut jitter = JITTER_START;
        loop {
            let mut l = gram.clone();
            for i in 0..n {
                l[i * n + i] += jitter;
            }
            if cholesky(&mut l, n) {
                let alpha = cholesky_solve(&l, n, &targets);
                if alpha.iter().all(|a| a.is_finite()) {
                    return Ok(Self {
                        inputs,
                        targets,
                        length_scale,
                        alpha,
                        jitter,
                    });
                }
            }
            if jitter >= JITTER_MAX {
                return Err(GprError::DegenerateGram(jitter));
            }
            jitter *= 10.0;
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    /// μ(z) = Σ αᵢ k(zᵢ, z).
    pub fn posterior_mean(&self, z: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(&self.alpha)
            .map(|(zi, a)| a * rbf_kernel(zi, z, self.length_scale))
            .sum()
    }

    /// ∇μ(z) = Σ αᵢ k(zᵢ, z) (zᵢ − z) / H².
    pub fn posterior_mean_grad(&self, z: &[f64]) -> Vec<f64> {
        let inv_h2 = 1.0 / (self.length_scale * self.length_scale);
        let mut g = vec![0.0; z.len()];
        for (zi, a) in self.inputs.iter().zip(&self.alpha) {
            let coef = a * rbf_kernel(zi, z, self.length_scale) * inv_h2;
            for ((gk, zik), zk) in g.iter_mut().zip(zi).zip(z) {
                *gk += coef * (zik - zk);
            }
        }
        g
    }

    /// ‖∇μ(z)‖ and its gradient with respect to z.
    ///
    /// Below a gradient norm of 1e-12 the squared norm and its gradient are
    /// returned instead, which removes the kink at ∇μ = 0 without moving
    /// the maximizer.
    pub fn grad_norm_and_gradient(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let d = z.len();
        let h2 = self.length_scale * self.length_scale;
        let mut g = vec![0.0; d];
        // keep per-point kernel weights and offsets for the Hessian pass
        let mut terms = Vec::with_capacity(self.inputs.len());
        for (zi, a) in self.inputs.iter().zip(&self.alpha) {
            let diff: Vec<f64> = zi.iter().zip(z).map(|(p, q)| p - q).collect();
            let w = a * (-dot(&diff, &diff) / (2.0 * h2)).exp();
            for k in 0..d {
                g[k] += w * diff[k] / h2;
            }
            terms.push((w, diff));
        }
        // Hessian of μ is Σ wᵢ (dᵢdᵢᵀ/H⁴ − I/H²); multiply by g directly
        let mut hg = vec![0.0; d];
        let sum_w: f64 = terms.iter().map(|(w, _)| w).sum();
        for (w, diff) in &terms {
            let proj = dot(diff, &g) * w / (h2 * h2);
            for k in 0..d {
                hg[k] += proj * diff[k];
            }
        }
        for k in 0..d {
            hg[k] -= sum_w * g[k] / h2;
        }
        let norm = dot(&g, &g).sqrt();
        if norm < 1e-12 {
            let sq = norm * norm;
            let grad = hg.iter().map(|v| 2.0 * v).collect();
            (sq, grad)
        } else {
            (norm, hg.iter().map(|v| v / norm).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 3.0), 1.0);
        let h: f64 = 1.7;
        let r = h * 2f64.sqrt();
        let k = rbf_kernel(&[0.0, 0.0], &[r, 0.0], h);
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        let near = rbf_kernel(&[0.0], &[0.5], 1.0);
        let far = rbf_kernel(&[0.0], &[1.5], 1.0);
        assert!(near > far);
    }

    #[test]
    fn duplicated_inputs_fit_with_jitter() {
        let m = GprModel::fit(vec![vec![0.3, 0.3], vec![0.3, 0.3]], vec![1.0, 1.0], 2.0).unwrap();
        assert!((m.posterior_mean(&[0.3, 0.3]) - 1.0).abs() < 1e-6);
        assert!(m.jitter() >= JITTER_START);
    }

    #[test]
    fn interpolates_linear_targets() {
        let inputs = vec![vec![0.0, 0.0], vec![1.0, 0.5], vec![-0.7, 1.2]];
        let targets: Vec<f64> = inputs.iter().map(|z| 2.0 * z[0] - z[1]).collect();
        let m = GprModel::fit(inputs.clone(), targets.clone(), 1.0).unwrap();
        for (z, t) in inputs.iter().zip(&targets) {
            assert!((m.posterior_mean(z) - t).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let m = GprModel::fit(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.0; 3], 1.0).unwrap();
        assert!(m.alpha().iter().all(|&a| a == 0.0));
        assert_eq!(m.posterior_mean(&[0.5]), 0.0);
        assert_eq!(m.posterior_mean_grad(&[0.5]), vec![0.0]);
    }

    #[test]
    fn decays_far_from_data() {
        let m = GprModel::fit(vec![vec![0.0], vec![1.0]], vec![1.0, -2.0], 0.5).unwrap();
        assert!(m.posterior_mean(&[40.0]).abs() < 1e-12);
    }

    #[test]
    fn symmetric_data_gives_symmetric_mean() {
        let m = GprModel::fit(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![2.0, 2.0], 1.0).unwrap();
        let a = m.posterior_mean(&[0.4, 0.3]);
        let b = m.posterior_mean(&[-0.4, 0.3]);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn antisymmetric_data_gradient_on_axis() {
        let m = GprModel::fit(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![-1.0, 1.0], 1.0).unwrap();
        let g = m.posterior_mean_grad(&[0.0, 0.0]);
        assert!(g[0] > 0.0);
        assert!(g[1].abs() < 1e-15);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            GprModel::fit(vec![vec![0.0]], vec![1.0], 1.0).unwrap_err(),
            GprError::NotEnoughData(1)
        );
        assert!(matches!(
            GprModel::fit(vec![vec![0.0], vec![f64::NAN]], vec![1.0, 1.0], 1.0),
            Err(GprError::NonFinite)
        ));
        assert!(matches!(
            GprModel::fit(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0], 0.0),
            Err(GprError::LengthScale(_))
        ));
    }

    #[test]
    fn permutation_invariance() {
        let inputs = vec![vec![0.0, 1.0], vec![1.0, -0.5], vec![0.3, 0.2], vec![-1.0, -1.0]];
        let targets = vec![0.5, -1.0, 2.0, 0.1];
        let a = GprModel::fit(inputs.clone(), targets.clone(), 1.3).unwrap();
        let perm = [2, 0, 3, 1];
        let b = GprModel::fit(
            perm.iter().map(|&i| inputs[i].clone()).collect(),
            perm.iter().map(|&i| targets[i]).collect(),
            1.3,
        )
        .unwrap();
        let probe = [0.25, -0.3];
        assert!((a.posterior_mean(&probe) - b.posterior_mean(&probe)).abs() < 1e-10);
    }

    #[test]
    fn norm_gradient_matches_finite_differences() {
        let inputs = vec![vec![0.0, 1.0], vec![1.0, -0.5], vec![0.3, 0.2], vec![-1.0, -1.0]];
        let targets = vec![0.5, -1.0, 2.0, 0.1];
        let m = GprModel::fit(inputs, targets, 1.1).unwrap();
        let z = [0.2, -0.1];
        let (_, g) = m.grad_norm_and_gradient(&z);
        for k in 0..2 {
            let h = 1e-6;
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let fd = (m.grad_norm_and_gradient(&zp).0 - m.grad_norm_and_gradient(&zm).0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6 * fd.abs().max(1.0), "{fd} vs {}", g[k]);
        }
    }
}
