//! The averaging operator `T(f)(x) = A^{-1} ∫_S f(v) K(v, x) dσ(v)` with
//! `K(v, x) = Π_i <v_i, x_i>^{2k_i}`.
//!
//! `T` is diagonal on the harmonic decomposition with eigenvalue
//! `a_α = Π_i k_i! Γ((n_i+2k_i)/2) / ((k_i−α_i/2)! Γ((n_i+2k_i+α_i)/2))`,
//! which is rational: the Gamma ratio telescopes over half-integer steps.
//! [`apply_t_direct`] integrates the kernel term by term instead and is the
//! independent check on the spectral form.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::harmonics::{decomposer, dim_h_alpha, lift, AlphaIndex};
use crate::linalg::{self, RatMatrix};
use crate::measures::{constant_a, constant_c, diff_ip, product_moment, usual_ip};
use crate::poly::{factorial, rational_to_f64, Polynomial};
use crate::shape::{monomial_basis, MultiIndex, Shape};
use crate::Rational;

/// Eigenvalue contribution of one block: `Π_{t<j} (k−t)/((n+2k)/2 + t)`
/// with `j = α/2`.
pub fn block_eigenvalue(n: usize, degree: u32, alpha: u32) -> Rational {
    let k = (degree / 2) as i64;
    let j = (alpha / 2) as i64;
    let mut acc = Rational::one();
    for t in 0..j {
        // (n + 2k)/2 + t = (n + 2k + 2t) / 2
        acc *= Rational::new(BigInt::from(2 * (k - t)), BigInt::from(n as i64 + 2 * k + 2 * t));
    }
    acc
}

/// Eigenvalues of `T` with multiplicities `dim H_{N,α}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub shape: Shape,
    pub eigen: BTreeMap<AlphaIndex, (Rational, usize)>,
}

impl Spectrum {
    pub fn eigenvalue(&self, alpha: &[u32]) -> Option<&Rational> {
        self.eigen.get(&AlphaIndex(alpha.to_vec())).map(|(a, _)| a)
    }

    /// `A_{N,K}`, the largest eigenvalue.
    pub fn max(&self) -> Rational {
        self.eigen.values().map(|(a, _)| a.clone()).max().unwrap_or_else(Rational::zero)
    }

    /// `B_{N,K}`, the smallest eigenvalue over components that exist.
    pub fn min(&self) -> Rational {
        self.eigen.values().filter(|(_, m)| *m > 0).map(|(a, _)| a.clone()).min().unwrap_or_else(Rational::zero)
    }

    pub fn total_multiplicity(&self) -> usize {
        self.eigen.values().map(|(_, m)| m).sum()
    }

    /// `Π a_α^{dim H_{N,α}}`.
    pub fn determinant(&self) -> Rational {
        self.eigen.values().fold(Rational::one(), |acc, (a, m)| acc * num_traits::pow(a.clone(), *m))
    }

    /// `|det T|^{1/dim P}`, evaluated in log space.
    pub fn det_root(&self) -> f64 {
        let dim = self.total_multiplicity() as f64;
        let log: f64 =
            self.eigen.values().filter(|(_, m)| *m > 0).map(|(a, m)| *m as f64 * rational_to_f64(a).ln()).sum();
        (log / dim).exp()
    }
}

pub fn spectrum(shape: &Shape) -> Result<Spectrum> {
    shape.require_even()?;
    let mut eigen = BTreeMap::new();
    for alpha in shape.alpha_indices()? {
        let a = shape
            .blocks()
            .iter()
            .zip(&alpha)
            .fold(Rational::one(), |acc, (b, &ai)| acc * block_eigenvalue(b.n, b.degree, ai));
        let mult = dim_h_alpha(shape, &alpha);
        eigen.insert(AlphaIndex(alpha), (a, mult));
    }
    Ok(Spectrum { shape: shape.clone(), eigen })
}

/// `T(f) = Σ_α a_α r^{K−α} f_α` through the harmonic decomposition.
pub fn apply_t_spectral(f: &Polynomial) -> Result<Polynomial> {
    let shape = f.shape();
    let dec = decomposer(shape)?;
    let spec = spectrum(shape)?;
    let coords = dec.coordinates(f);
    let mut acc = Polynomial::zero(shape);
    for ((owner, _, column), c) in dec.columns.iter().zip(&coords) {
        if c.is_zero() {
            continue;
        }
        let (a, _) = &spec.eigen[&dec.alphas[*owner]];
        acc = acc.checked_add(&column.scale(&(c * a)))?;
    }
    Ok(acc)
}

/// Per-block multinomial coefficient of `β` (the coefficient of `v^β x^β`
/// in `K(v, x)`).
pub(crate) fn kernel_coefficient(shape: &Shape, beta: &MultiIndex) -> BigInt {
    let mut acc = BigInt::one();
    for (i, b) in shape.blocks().iter().enumerate() {
        let denom: BigInt = beta.0[shape.block_range(i)].iter().map(|&e| factorial(e)).product();
        acc *= factorial(b.degree) / denom;
    }
    acc
}

/// `T(f)` by expanding `K(v, x)` and integrating each `v`-monomial with the
/// closed-form sphere moments.
pub fn apply_t_direct(f: &Polynomial) -> Result<Polynomial> {
    let shape = f.shape();
    shape.require_even()?;
    shape.require_exact_size()?;
    let a_inv = Rational::one() / constant_a(shape);
    let terms = monomial_basis(shape).into_iter().filter_map(|beta| {
        let integral = f
            .terms()
            .iter()
            .map(|(m, c)| c * product_moment(shape, &m.add(&beta)))
            .fold(Rational::zero(), |a, b| a + b);
        if integral.is_zero() {
            return None;
        }
        let coef = Rational::from_integer(kernel_coefficient(shape, &beta)) * integral * &a_inv;
        Some((beta, coef))
    });
    Polynomial::from_terms(shape, terms.collect::<Vec<_>>())
}

/// Matrix of `T` in the monomial basis (columns are images of monomials),
/// from the direct route.
pub fn t_matrix_direct(shape: &Shape) -> Result<RatMatrix> {
    let basis = monomial_basis(shape);
    let n = basis.len();
    let mut m = vec![vec![Rational::zero(); n]; n];
    for (j, b) in basis.iter().enumerate() {
        let image = apply_t_direct(&Polynomial::monomial(shape, b.clone())?)?;
        for (i, row) in m.iter_mut().enumerate() {
            row[j] = image.coeff(&basis[i]);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetT {
    pub closed_form: Rational,
    /// Determinant of the direct monomial-basis matrix, when `dim P ≤ 64`.
    pub direct: Option<Rational>,
    pub root: f64,
}

pub const DIRECT_DET_MAX_DIM: usize = 64;

/// `det T` from the spectrum, cross-checked against the direct matrix for
/// small shapes.
pub fn det_t(shape: &Shape) -> Result<DetT> {
    let spec = spectrum(shape)?;
    let closed_form = spec.determinant();
    let direct = if shape.dim() <= DIRECT_DET_MAX_DIM {
        let d = linalg::determinant(&t_matrix_direct(shape)?);
        if d != closed_form {
            return Err(Error::InconsistentSystem(format!("direct det {d} differs from spectral det {closed_form}")));
        }
        Some(d)
    } else {
        None
    };
    Ok(DetT { closed_form, direct, root: spec.det_root() })
}

/// `(<T f, g>_D, C_{N,K} <f, g>)`; the two entries agree.
pub fn lemma_t_check(f: &Polynomial, g: &Polynomial) -> Result<(Rational, Rational)> {
    let left = diff_ip(&apply_t_spectral(f)?, g)?;
    let right = constant_c(f.shape()) * usual_ip(f, g)?;
    Ok((left, right))
}

/// Float evaluation of the determinant and ball-ratio brackets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRatioBounds {
    /// `A_{N,K}`, the largest eigenvalue (always 1).
    pub a_nk: f64,
    /// `B_{N,K} = a_K` from the Gamma form.
    pub b_nk: f64,
    /// `Π binom(n_i/2 + 2k_i, k_i)^{-1}`, the alternative binomial expression.
    pub b_nk_paper_printed: f64,
    pub c_nk: f64,
    pub det_root: f64,
    /// `Π (1/(2k_i + n_i/2))^{k_i/2}`.
    pub det_lower: f64,
    /// `Π (1/(1 + n_i/(2k_i)))^{k_i/2}`.
    pub det_upper: f64,
    pub det_inside: bool,
    /// `√C (|B_D|/|B|)^{1/dim} = |det T|^{-1/(2 dim)}`.
    pub scaled_ball_ratio: f64,
    pub ball_lower: f64,
    /// `e^{k/2} Π (1 + 1/(n_i/(2k_i) + 1))^{k_i/2}`.
    pub ball_upper: f64,
    pub ball_inside: bool,
}

pub fn ball_ratio_bounds(shape: &Shape) -> Result<BallRatioBounds> {
    let spec = spectrum(shape)?;
    let det_root = spec.det_root();
    let mut log_lower = 0.0;
    let mut log_upper = 0.0;
    let mut log_ball_upper = 0.0;
    let mut log_printed = 0.0;
    for b in shape.blocks() {
        let k = (b.degree / 2) as f64;
        let n = b.n as f64;
        if k == 0.0 {
            continue;
        }
        log_lower += -(k / 2.0) * (2.0 * k + n / 2.0).ln();
        log_upper += -(k / 2.0) * (1.0 + n / (2.0 * k)).ln();
        log_ball_upper += 0.5 * k + (k / 2.0) * (1.0 + 1.0 / (n / (2.0 * k) + 1.0)).ln();
        // binom(x, k) = Γ(x+1) / (Γ(k+1) Γ(x−k+1)), x = n/2 + 2k
        let x = n / 2.0 + 2.0 * k;
        log_printed -= ln_gamma(x + 1.0) - ln_gamma(k + 1.0) - ln_gamma(x - k + 1.0);
    }
    let det_lower = log_lower.exp();
    let det_upper = log_upper.exp();
    let scaled_ball_ratio = det_root.powf(-0.5);
    let ball_upper = log_ball_upper.exp();
    Ok(BallRatioBounds {
        a_nk: rational_to_f64(&spec.max()),
        b_nk: rational_to_f64(&spec.min()),
        b_nk_paper_printed: log_printed.exp(),
        c_nk: rational_to_f64(&constant_c(shape)),
        det_root,
        det_lower,
        det_upper,
        det_inside: det_lower <= det_root && det_root <= det_upper,
        scaled_ball_ratio,
        ball_lower: det_lower,
        ball_upper,
        ball_inside: det_lower <= scaled_ball_ratio && scaled_ball_ratio <= ball_upper,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; points];
    let mut weights = vec![0.0; points];
    let n = points as f64;
    for i in 0..points.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=points {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let p = if points == 0 { 1.0 } else { p1 };
            dp = n * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[points - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[points - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature of `∫_0^π g(cos θ) sin^{n−2} θ dθ`.
fn angular_integral(n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(96);
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let theta = 0.5 * PI * (xi + 1.0);
            wi * g(theta.cos()) * theta.sin().powi(n as i32 - 2)
        })
        .sum::<f64>()
        * 0.5
        * PI
}

/// Coefficients (ascending powers of `t`) of the degree-`d` polynomial
/// orthogonal to lower degrees under the weight `(1 − t²)^{(n−3)/2}`.
pub fn gegenbauer_coefficients(n: usize, degree: usize) -> Vec<f64> {
    let eval = |c: &[f64], t: f64| c.iter().rev().fold(0.0, |acc, a| acc * t + a);
    let ip = |a: &[f64], b: &[f64]| angular_integral(n, |t| eval(a, t) * eval(b, t));
    let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    for d in 0..=degree {
        let mut v = vec![0.0; d + 1];
        v[d] = 1.0;
        for u in &ortho {
            let c = ip(&v, u) / ip(u, u);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
        ortho.push(v);
    }
    ortho.pop().unwrap_or_default()
}

/// Eigenvalue of `T` on the top harmonic space `H_{N,K}` from the
/// Funk–Hecke formula, by quadrature of the Gegenbauer-weighted integrals.
pub fn funk_hecke_eigenvalue(shape: &Shape) -> Result<f64> {
    shape.require_even()?;
    let mut product = 1.0;
    for b in shape.blocks() {
        let d = b.degree as usize;
        if d == 0 {
            continue;
        }
        if b.n == 1 {
            return Err(Error::Degenerate("no top-degree harmonics on a one-variable block".into()));
        }
        let p = gegenbauer_coefficients(b.n, d);
        let eval = |t: f64| p.iter().rev().fold(0.0, |acc, a| acc * t + a);
        let num = angular_integral(b.n, |t| t.powi(d as i32) * eval(t));
        let den = eval(1.0) * angular_integral(b.n, |_| 1.0);
        product *= num / den;
    }
    Ok(product / rational_to_f64(&constant_a(shape)))
}

/// Checks that `r^{K−α} h` is an eigenvector for every cached harmonic `h`.
pub fn eigenvectors_consistent(shape: &Shape) -> Result<bool> {
    let spec = spectrum(shape)?;
    let dec = decomposer(shape)?;
    for (owner, h, _) in &dec.columns {
        let alpha = &dec.alphas[*owner];
        let lifted = lift(shape, &alpha.0, h)?;
        let (a, _) = &spec.eigen[alpha];
        if apply_t_direct(&lifted)? != lifted.scale(a) {
            return Ok(false);
        }
    }
    Ok(true)
}
