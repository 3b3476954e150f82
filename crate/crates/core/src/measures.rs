//! The two inner products on `P_{N,K}`.
//!
//! `usual_ip` integrates against the product of uniform probability
//! measures on the unit spheres of each block (a block with one variable
//! gets the two-point measure on `{±1}`). `diff_ip` is the differential
//! pairing `D[f](g)`, computed here from its closed form.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::poly::{factorial, Polynomial};
use crate::shape::{MultiIndex, Shape};
use crate::Rational;

/// `∫ v^alpha dσ` over the unit sphere in `R^n`, σ the probability measure.
///
/// Zero if any exponent is odd, otherwise `Π (α_j − 1)!! / (n (n+2) ⋯ (n + |α| − 2))`.
pub fn sphere_moment(n: usize, alpha: &[u32]) -> Rational {
    if alpha.iter().any(|a| a % 2 == 1) {
        return Rational::zero();
    }
    let mut num = BigInt::one();
    for &a in alpha {
        let mut t = a as i64 - 1;
        while t > 1 {
            num *= t;
            t -= 2;
        }
    }
    let total: u32 = alpha.iter().sum();
    let mut den = BigInt::one();
    for j in 0..total / 2 {
        den *= BigInt::from(n as u64 + 2 * j as u64);
    }
    Rational::new(num, den)
}

/// Product-of-spheres moment of one exponent vector.
pub fn product_moment(shape: &Shape, m: &MultiIndex) -> Rational {
    let mut acc = Rational::one();
    for (i, b) in shape.blocks().iter().enumerate() {
        let part = sphere_moment(b.n, &m.0[shape.block_range(i)]);
        if part.is_zero() {
            return part;
        }
        acc *= part;
    }
    acc
}

/// `∫_S p dσ`.
pub fn integrate(p: &Polynomial) -> Rational {
    p.terms().iter().map(|(m, c)| c * product_moment(p.shape(), m)).fold(Rational::zero(), |a, b| a + b)
}

fn require_same(f: &Polynomial, g: &Polynomial) -> Result<()> {
    if f.shape() != g.shape() {
        return Err(Error::ShapeMismatch { left: f.shape().to_string(), right: g.shape().to_string() });
    }
    Ok(())
}

/// The usual inner product `∫_S f g dσ`.
pub fn usual_ip(f: &Polynomial, g: &Polynomial) -> Result<Rational> {
    require_same(f, g)?;
    let shape = f.shape();
    let mut acc = Rational::zero();
    for (ma, ca) in f.terms() {
        for (mb, cb) in g.terms() {
            let mom = product_moment(shape, &ma.add(mb));
            if !mom.is_zero() {
                acc += ca * cb * mom;
            }
        }
    }
    Ok(acc)
}

/// The differential inner product, evaluated blockwise as
/// `Π_i d_i! · Σ_α c_α b_α / Π_i multinomial(d_i; α|block i)`.
pub fn diff_ip(f: &Polynomial, g: &Polynomial) -> Result<Rational> {
    require_same(f, g)?;
    let shape = f.shape();
    let scale: BigInt = shape.degrees().into_iter().map(factorial).product();
    let mut acc = Rational::zero();
    for (m, c) in f.terms() {
        let Some(b) = g.terms().get(m) else { continue };
        let mut multinomials = BigInt::one();
        for (i, blk) in shape.blocks().iter().enumerate() {
            let denom: BigInt = m.0[shape.block_range(i)].iter().map(|&e| factorial(e)).product();
            multinomials *= factorial(blk.degree) / denom;
        }
        acc += c * b / Rational::from_integer(multinomials);
    }
    Ok(acc * Rational::from_integer(scale))
}

/// `A = ∫_S x_{n_1}^{2k_1} ⋯ x_n^{2k_m} dσ`.
pub fn constant_a(shape: &Shape) -> Rational {
    shape
        .blocks()
        .iter()
        .map(|b| {
            let mut alpha = vec![0; b.n];
            alpha[b.n - 1] = b.degree;
            sphere_moment(b.n, &alpha)
        })
        .fold(Rational::one(), |a, b| a * b)
}

/// `C_{N,K} = A^{-1} Π (2k_i)!`.
pub fn constant_c(shape: &Shape) -> Rational {
    let prod: BigInt = shape.degrees().into_iter().map(factorial).product();
    Rational::from_integer(prod) / constant_a(shape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerProduct {
    Usual,
    Differential,
}

impl InnerProduct {
    pub fn eval(self, f: &Polynomial, g: &Polynomial) -> Result<Rational> {
        match self {
            InnerProduct::Usual => usual_ip(f, g),
            InnerProduct::Differential => diff_ip(f, g),
        }
    }
}

/// Exact Gram matrix of a list of polynomials sharing one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub shape: Shape,
    pub basis: Vec<Polynomial>,
    pub entries: RatMatrix,
    pub which: InnerProduct,
}

pub fn gram(basis: &[Polynomial], which: InnerProduct) -> Result<GramMatrix> {
    let shape =
        basis.first().map(|p| p.shape().clone()).ok_or_else(|| Error::InvalidParameter("empty basis".into()))?;
    let k = basis.len();
    let mut entries = vec![vec![Rational::zero(); k]; k];
    for i in 0..k {
        for j in i..k {
            let v = which.eval(&basis[i], &basis[j])?;
            entries[j][i] = v.clone();
            entries[i][j] = v;
        }
    }
    Ok(GramMatrix { shape, basis: basis.to_vec(), entries, which })
}
