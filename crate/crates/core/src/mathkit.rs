//! Small dense linear algebra, the chi-squared quantile function and the
//! seedable random stream used by every optimizer in the crate.
//!
//! Dimensions handled here are small (the benchmarks use 5 and 20), so all
//! matrices are plain row-major `Vec<f64>` buffers and the eigensolver is a
//! cyclic Jacobi sweep.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// Identifies the generator behind [`RngStream`] in experiment metadata.
pub const RNG_VERSION: &str = "chacha20-rand_chacha-0.9/splitmix64-derive-v1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MathError {
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not square: {rows} rows for dimension {dim}")]
    NotSquare { rows: usize, dim: usize },
    #[error("covariance is not positive definite (smallest eigenvalue {0:e})")]
    SingularCovariance(f64),
    #[error("probability {0} outside (0, 1)")]
    ProbabilityDomain(f64),
    #[error("degrees of freedom must be at least 1")]
    DegreesOfFreedom,
    #[error("dimension must be at least 1")]
    ZeroDimension,
}

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MathError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(MathError::NotSquare {
                    rows: row.len(),
                    dim,
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.dim);
        self.data
            .chunks_exact(self.dim)
            .map(|row| dot(row, v))
            .collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks_exact(self.dim.max(1))
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Symmetric matrix. Construction checks symmetry to a relative 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn new(m: Matrix) -> Result<Self, MathError> {
        let scale = m.norm_inf().max(f64::MIN_POSITIVE);
        let asym = m.asymmetry();
        if asym > 1e-12 * scale {
            return Err(MathError::NotSymmetric(asym));
        }
        Ok(Self(m))
    }

    /// Averages `m` with its transpose.
    pub fn symmetrize(m: &Matrix) -> Self {
        let n = m.dim();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, 0.5 * (m.get(i, j) + m.get(j, i)));
            }
        }
        Self(out)
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim))
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self(Matrix::from_diag(diag))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.0.mul_vec(v)
    }
}

/// Eigen-decomposition `A = V diag(values) Vᵀ`, values ascending, the columns
/// of `vectors` orthonormal.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Eigen {
    /// `V diag(g(λ)) Vᵀ` for a spectral function `g`.
    pub fn spectral_map(&self, g: impl Fn(f64) -> f64) -> Matrix {
        let n = self.values.len();
        let mapped: Vec<f64> = self.values.iter().map(|&l| g(l)).collect();
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += self.vectors.get(i, k) * mapped[k] * self.vectors.get(j, k);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn eig_sym(a: &SymMatrix) -> Result<Eigen, MathError> {
    let scale = a.0.norm_inf().max(f64::MIN_POSITIVE);
    let asym = a.0.asymmetry();
    if asym > 1e-12 * scale {
        return Err(MathError::NotSymmetric(asym));
    }
    let n = a.dim();
    let mut m = a.0.clone();
    let mut v = Matrix::identity(n);
    let frob = m.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;

    for _sweep in 0..100 {
        let off = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * m.get(i, j).powi(2))
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                m.set(p, q, 0.0);
                m.set(q, p, 0.0);
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).total_cmp(&m.get(j, j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_col, v.get(r, old_col));
        }
    }
    Ok(Eigen { values, vectors })
}

/// The unique symmetric positive-definite square root.
pub fn sqrt_spd(a: &SymMatrix) -> Result<SymMatrix, MathError> {
    let eig = eig_sym(a)?;
    if eig.min_value() <= 0.0 {
        return Err(MathError::SingularCovariance(eig.min_value()));
    }
    Ok(SymMatrix(eig.spectral_map(f64::sqrt)))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

// ---------------------------------------------------------------------------
// chi-squared distribution

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum * log_prefactor.exp()).min(1.0)
    } else {
        // modified Lentz continued fraction for Q(a, x)
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = log_prefactor.exp() * h;
        (1.0 - q).max(0.0)
    }
}

pub fn chi2_cdf(x: f64, k: u32) -> f64 {
    gamma_p(0.5 * k as f64, 0.5 * x)
}

fn chi2_pdf(x: f64, k: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = 0.5 * k as f64;
    ((a - 1.0) * x.ln() - 0.5 * x - a * std::f64::consts::LN_2 - ln_gamma(a)).exp()
}

/// Percent-point function (inverse CDF) of the chi-squared distribution with
/// `k` degrees of freedom.
pub fn chi2_ppf(p: f64, k: u32) -> Result<f64, MathError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MathError::ProbabilityDomain(p));
    }
    if k == 0 {
        return Err(MathError::DegreesOfFreedom);
    }
    let mut lo = 0.0;
    let mut hi = k as f64 + 10.0;
    while chi2_cdf(hi, k) < p {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, k) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    // Newton polish, kept inside the bracket
    let mut x = 0.5 * (lo + hi);
    for _ in 0..20 {
        let f = chi2_cdf(x, k) - p;
        let dens = chi2_pdf(x, k);
        if f == 0.0 || dens <= 0.0 {
            break;
        }
        let next = x - f / dens;
        let next = if next <= lo || next >= hi {
            0.5 * (lo + hi)
        } else {
            next
        };
        if f < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        if (next - x).abs() <= 1e-15 * x.max(1.0) {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// random numbers

/// Source of standard normal vectors. Every Gaussian draw made by the
/// optimizers goes through this trait so that tests can feed transformed
/// streams (for instance rotated draws) through an unchanged algorithm.
pub trait NormalSource {
    fn fill_standard_normal(&mut self, out: &mut [f64]);

    fn standard_normal(&mut self, dim: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        self.fill_standard_normal(&mut v);
        v
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seedable, single-owner random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Child stream for `(master, index, purpose)`; independent of how many
    /// other streams were derived before it.
    pub fn derive(master: u64, index: u64, purpose: u64) -> Self {
        let s = splitmix64(master ^ splitmix64(index ^ splitmix64(purpose)));
        Self::new(s)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn std_normal(&mut self, dim: usize) -> Result<Vec<f64>, MathError> {
        if dim == 0 {
            return Err(MathError::ZeroDimension);
        }
        Ok(self.standard_normal(dim))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    pub fn rng_mut(&mut self) -> &mut impl RngCore {
        &mut self.rng
    }
}

impl NormalSource for RngStream {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.rng.sample(StandardNormal);
        }
    }
}
