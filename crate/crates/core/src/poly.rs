//! Sparse exact-rational multihomogeneous polynomials.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::float::FloatPoly;
use crate::shape::{monomial_basis, MultiIndex, Shape};
use crate::Rational;

/// A form of type `(N, K)` with exact rational coefficients.
///
/// Every stored exponent vector has the shape's blockwise degrees and no
/// stored coefficient is zero, so equal polynomials have equal term maps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Polynomial {
    shape: Shape,
    terms: BTreeMap<MultiIndex, Rational>,
}

impl Polynomial {
    pub fn zero(shape: &Shape) -> Self {
        Polynomial { shape: shape.clone(), terms: BTreeMap::new() }
    }

    /// Constant polynomial; the shape must have all degrees zero.
    pub fn constant(shape: &Shape, c: Rational) -> Result<Self> {
        if shape.degrees().iter().any(|&d| d != 0) {
            return Err(Error::InvalidShape(format!("constant in nonzero-degree shape {shape}")));
        }
        Polynomial::from_terms(shape, [(MultiIndex::zero(shape.n_vars()), c)])
    }

    pub fn monomial(shape: &Shape, exponents: MultiIndex) -> Result<Self> {
        Polynomial::from_terms(shape, [(exponents, Rational::one())])
    }

    /// Collects terms, summing duplicates and dropping zeros.
    pub fn from_terms<I>(shape: &Shape, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Rational)>,
    {
        let mut map: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (m, c) in terms {
            if !m.fits(shape) {
                return Err(Error::ShapeMismatch { left: format!("monomial {:?}", m.0), right: shape.to_string() });
            }
            *map.entry(m).or_insert_with(Rational::zero) += c;
        }
        map.retain(|_, c| !c.is_zero());
        Ok(Polynomial { shape: shape.clone(), terms: map })
    }

    /// Polynomial with coefficient vector `coeffs` over `basis`.
    pub fn from_vector(shape: &Shape, basis: &[MultiIndex], coeffs: &[Rational]) -> Self {
        let terms =
            basis.iter().zip(coeffs).filter(|(_, c)| !c.is_zero()).map(|(m, c)| (m.clone(), c.clone())).collect();
        Polynomial { shape: shape.clone(), terms }
    }

    pub fn to_vector(&self, basis: &[MultiIndex]) -> Vec<Rational> {
        basis.iter().map(|m| self.coeff(m)).collect()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, Rational> {
        &self.terms
    }

    pub fn coeff(&self, m: &MultiIndex) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value of a degree-zero polynomial.
    pub fn constant_value(&self) -> Option<Rational> {
        if self.shape.degrees().iter().all(|&d| d == 0) {
            Some(self.coeff(&MultiIndex::zero(self.shape.n_vars())))
        } else {
            None
        }
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(&self.shape);
        }
        Polynomial { shape: self.shape.clone(), terms: self.terms.iter().map(|(m, a)| (m.clone(), a * c)).collect() }
    }

    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.require_same_shape(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_insert_with(Rational::zero) += c;
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { shape: self.shape.clone(), terms })
    }

    pub fn checked_sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.checked_add(&other.scale(&-Rational::one()))
    }

    fn require_same_shape(&self, other: &Polynomial) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { left: self.shape.to_string(), right: other.shape.to_string() });
        }
        Ok(())
    }

    /// Product; block sizes must agree and degrees add blockwise.
    pub fn multiply(&self, other: &Polynomial) -> Result<Polynomial> {
        if self.shape.block_count() != other.shape.block_count() {
            return Err(Error::BlockCount(self.shape.block_count(), other.shape.block_count()));
        }
        if !self.shape.same_sizes(&other.shape) {
            return Err(Error::ShapeMismatch { left: self.shape.to_string(), right: other.shape.to_string() });
        }
        let degrees: Vec<u32> = self.shape.degrees().iter().zip(other.shape.degrees()).map(|(a, b)| a + b).collect();
        let shape = self.shape.with_degrees(&degrees)?;
        let mut terms: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *terms.entry(ma.add(mb)).or_insert_with(Rational::zero) += ca * cb;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { shape, terms })
    }

    pub fn evaluate(&self, point: &[Rational]) -> Result<Rational> {
        let n = self.shape.n_vars();
        if point.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: point.len() });
        }
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (x, &e) in point.iter().zip(m.iter()) {
                if e > 0 {
                    t *= num_traits::pow(x.clone(), e as usize);
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Block Laplacian `Δ_i`. Returns zero in the reduced shape when the
    /// block degree is below two.
    pub fn block_laplacian(&self, i: usize) -> Result<Polynomial> {
        let blocks = self.shape.block_count();
        if i >= blocks {
            return Err(Error::InvalidBlock { index: i, blocks });
        }
        let mut degrees = self.shape.degrees();
        degrees[i] = degrees[i].saturating_sub(2);
        let shape = self.shape.with_degrees(&degrees)?;
        let mut terms: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        if self.shape.blocks()[i].degree >= 2 {
            for (m, c) in &self.terms {
                for j in self.shape.block_range(i) {
                    let e = m.0[j];
                    if e >= 2 {
                        let mut d = m.clone();
                        d.0[j] -= 2;
                        let factor = Rational::from_integer(BigInt::from(e * (e - 1)));
                        *terms.entry(d).or_insert_with(Rational::zero) += c * factor;
                    }
                }
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { shape, terms })
    }

    /// `D[self](g)`: `self` acting as a constant-coefficient differential
    /// operator on `g`. The result has blockwise degree `deg g - deg self`
    /// (zero where that would be negative).
    pub fn apply_d(&self, g: &Polynomial) -> Result<Polynomial> {
        if !self.shape.same_sizes(&g.shape) {
            return Err(Error::ShapeMismatch { left: self.shape.to_string(), right: g.shape.to_string() });
        }
        let fd = self.shape.degrees();
        let gd = g.shape.degrees();
        let vanishes = fd.iter().zip(&gd).any(|(a, b)| a > b);
        let degrees: Vec<u32> = fd.iter().zip(&gd).map(|(a, b)| b.saturating_sub(*a)).collect();
        let shape = g.shape.with_degrees(&degrees)?;
        let mut terms: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        if !vanishes {
            for (ma, ca) in &self.terms {
                for (mb, cb) in &g.terms {
                    if ma.iter().zip(mb.iter()).any(|(a, b)| a > b) {
                        continue;
                    }
                    let mut factor = BigInt::one();
                    for (&a, &b) in ma.iter().zip(mb.iter()) {
                        factor *= falling_factorial(b, a);
                    }
                    let rest = MultiIndex(ma.iter().zip(mb.iter()).map(|(a, b)| b - a).collect());
                    *terms.entry(rest).or_insert_with(Rational::zero) += ca * cb * Rational::from_integer(factor);
                }
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { shape, terms })
    }

    /// `r^E = Π_i (Σ_{j in block i} x_j²)^{E_i/2}` for even `E`.
    pub fn r_power(sizes: &Shape, exponents: &[u32]) -> Result<Polynomial> {
        let target = sizes.with_degrees(exponents)?;
        target.require_even()?;
        let zero_shape = sizes.with_degrees(&vec![0; sizes.block_count()])?;
        let mut acc = Polynomial::constant(&zero_shape, Rational::one())?;
        for i in 0..sizes.block_count() {
            let mut deg = vec![0; sizes.block_count()];
            deg[i] = 2;
            let sq_shape = sizes.with_degrees(&deg)?;
            let r2 = Polynomial::from_terms(
                &sq_shape,
                sizes.block_range(i).map(|j| {
                    let mut m = MultiIndex::zero(sizes.n_vars());
                    m.0[j] = 2;
                    (m, Rational::one())
                }),
            )?;
            for _ in 0..exponents[i] / 2 {
                acc = acc.multiply(&r2)?;
            }
        }
        Ok(acc)
    }

    /// `r^K`, the polynomial identically one on the product of spheres.
    pub fn r_top(shape: &Shape) -> Result<Polynomial> {
        Polynomial::r_power(shape, &shape.degrees())
    }

    pub fn to_float(&self) -> FloatPoly {
        let basis = monomial_basis(&self.shape);
        let coeffs = basis.iter().map(|m| rational_to_f64(&self.coeff(m))).collect();
        FloatPoly::new(self.shape.clone(), basis, coeffs)
    }
}

fn falling_factorial(b: u32, a: u32) -> BigInt {
    (0..a).fold(BigInt::one(), |acc, t| acc * BigInt::from(b - t))
}

pub(crate) fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, t| acc * BigInt::from(t))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            match (idx, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let a = c.abs();
            let is_const = m.iter().all(|&e| e == 0);
            let mut first = true;
            if !a.is_one() || is_const {
                write!(f, "{a}")?;
                first = false;
            }
            for (j, &e) in m.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                if e == 1 {
                    write!(f, "x{}", j + 1)?;
                } else {
                    write!(f, "x{}^{}", j + 1, e)?;
                }
            }
        }
        Ok(())
    }
}
