//! Π-harmonic subspaces, the decomposition `P_{N,K} = ⊕ r^{K−α} H_{N,α}`,
//! and the zonal / reproducing kernels.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, RatMatrix};
use crate::measures::{product_moment, usual_ip};
use crate::poly::{rational_to_f64, Polynomial};
use crate::shape::{binomial, monomial_basis, MultiIndex, Shape};
use crate::Rational;

/// Even degree vector `α ≤ K` labelling one harmonic component.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlphaIndex(pub Vec<u32>);

/// `dim H_{n,j}`: harmonic forms of degree `j` in `n` variables.
pub fn dim_h(n: usize, j: u32) -> usize {
    let j = j as usize;
    if j == 0 {
        return 1;
    }
    if n == 1 {
        return usize::from(j == 1);
    }
    let all = binomial(n + j - 1, j);
    if j < 2 {
        all
    } else {
        all - binomial(n + j - 3, j - 2)
    }
}

/// `dim H_{N,α} = Π_i dim H_{n_i, α_i}`.
pub fn dim_h_alpha(shape: &Shape, alpha: &[u32]) -> usize {
    shape.blocks().iter().zip(alpha).map(|(b, &a)| dim_h(b.n, a)).product()
}

pub(crate) type Cache<V> = OnceLock<Mutex<HashMap<Shape, Arc<V>>>>;

pub(crate) fn cached<V, F>(cache: &'static Cache<V>, key: &Shape, build: F) -> Result<Arc<V>>
where
    F: FnOnce() -> Result<V>,
{
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = map.lock().expect("cache poisoned").get(key) {
        return Ok(Arc::clone(v));
    }
    let value = Arc::new(build()?);
    map.lock().expect("cache poisoned").entry(key.clone()).or_insert_with(|| Arc::clone(&value));
    Ok(value)
}

/// Exact basis of the joint kernel of all block Laplacians on `P_{N,α}`,
/// where `alpha_shape` carries the degrees `α`.
pub fn harmonic_basis(alpha_shape: &Shape) -> Result<Arc<Vec<Polynomial>>> {
    static CACHE: Cache<Vec<Polynomial>> = OnceLock::new();
    alpha_shape.require_exact_size()?;
    cached(&CACHE, alpha_shape, || {
        let basis = monomial_basis(alpha_shape);
        let mut rows: RatMatrix = Vec::new();
        for i in 0..alpha_shape.block_count() {
            if alpha_shape.blocks()[i].degree < 2 {
                continue;
            }
            let images: Vec<Polynomial> = basis
                .iter()
                .map(|m| Polynomial::monomial(alpha_shape, m.clone())?.block_laplacian(i))
                .collect::<Result<_>>()?;
            let target = monomial_basis(images[0].shape());
            for t in &target {
                rows.push(images.iter().map(|img| img.coeff(t)).collect());
            }
        }
        let vectors = if rows.is_empty() {
            (0..basis.len())
                .map(|j| {
                    let mut v = vec![Rational::zero(); basis.len()];
                    v[j] = Rational::one();
                    v
                })
                .collect()
        } else {
            linalg::nullspace(&rows, basis.len())
        };
        let polys: Vec<Polynomial> = vectors.iter().map(|v| Polynomial::from_vector(alpha_shape, &basis, v)).collect();
        let expected = dim_h_alpha(alpha_shape, &alpha_shape.degrees());
        if polys.len() != expected {
            return Err(Error::InconsistentSystem(format!(
                "harmonic space of {alpha_shape} has dimension {} but {expected} was expected",
                polys.len()
            )));
        }
        Ok(polys)
    })
}

/// Usual-orthogonal (not normalized) harmonic basis with squared norms.
pub fn orthogonal_harmonic_basis(alpha_shape: &Shape) -> Result<Arc<Vec<(Polynomial, Rational)>>> {
    static CACHE: Cache<Vec<(Polynomial, Rational)>> = OnceLock::new();
    cached(&CACHE, alpha_shape, || {
        let basis = harmonic_basis(alpha_shape)?;
        gram_schmidt(&basis)
    })
}

/// Gram-Schmidt in the usual inner product, without square roots.
pub(crate) fn gram_schmidt(vectors: &[Polynomial]) -> Result<Vec<(Polynomial, Rational)>> {
    let mut out: Vec<(Polynomial, Rational)> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for (u, norm2) in &out {
            let coef = usual_ip(v, u)? / norm2;
            if !coef.is_zero() {
                w = w.checked_sub(&u.scale(&coef))?;
            }
        }
        let norm2 = usual_ip(&w, &w)?;
        if norm2.is_zero() {
            return Err(Error::InconsistentSystem("linearly dependent vectors".into()));
        }
        out.push((w, norm2));
    }
    Ok(out)
}

/// The components `f_α` of `p = Σ_α r^{K−α} f_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSplit {
    pub shape: Shape,
    pub components: BTreeMap<AlphaIndex, Polynomial>,
}

impl HarmonicSplit {
    /// `Σ_α r^{K−α} f_α`, expanded.
    pub fn reconstruct(&self) -> Result<Polynomial> {
        let mut acc = Polynomial::zero(&self.shape);
        for (alpha, f) in &self.components {
            acc = acc.checked_add(&lift(&self.shape, &alpha.0, f)?)?;
        }
        Ok(acc)
    }
}

/// `r^{K−α} f` for `f` of blockwise degree `α`.
pub fn lift(shape: &Shape, alpha: &[u32], f: &Polynomial) -> Result<Polynomial> {
    let rest: Vec<u32> = shape.degrees().iter().zip(alpha).map(|(k, a)| k - a).collect();
    Polynomial::r_power(shape, &rest)?.multiply(f)
}

/// The expanded decomposition basis of one shape and the inverse of its
/// coefficient matrix.
pub(crate) struct Decomposer {
    pub(crate) alphas: Vec<AlphaIndex>,
    /// `(alpha position, harmonic h, r^{K−α} h)`, in column order.
    pub(crate) columns: Vec<(usize, Polynomial, Polynomial)>,
    basis: Vec<MultiIndex>,
    inverse: RatMatrix,
}

pub(crate) fn decomposer(shape: &Shape) -> Result<Arc<Decomposer>> {
    static CACHE: Cache<Decomposer> = OnceLock::new();
    shape.require_even()?;
    shape.require_exact_size()?;
    cached(&CACHE, shape, || {
        let alphas: Vec<AlphaIndex> = shape.alpha_indices()?.into_iter().map(AlphaIndex).collect();
        let mut columns = Vec::with_capacity(shape.dim());
        for (ai, alpha) in alphas.iter().enumerate() {
            let hs = harmonic_basis(&shape.with_degrees(&alpha.0)?)?;
            for h in hs.iter() {
                columns.push((ai, h.clone(), lift(shape, &alpha.0, h)?));
            }
        }
        let basis = monomial_basis(shape);
        let n = basis.len();
        if columns.len() != n {
            return Err(Error::InconsistentSystem(format!("{} harmonic columns for dim P = {n}", columns.len())));
        }
        // [B | I] -> [I | B^{-1}]
        let mut aug: RatMatrix = (0..n)
            .map(|row| {
                let mut r: Vec<Rational> = columns.iter().map(|(_, _, c)| c.coeff(&basis[row])).collect();
                r.extend((0..n).map(|j| if j == row { Rational::one() } else { Rational::zero() }));
                r
            })
            .collect();
        let pivots = linalg::rref(&mut aug);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::InconsistentSystem("decomposition basis is singular".into()));
        }
        let inverse = aug.into_iter().map(|r| r[n..].to_vec()).collect();
        Ok(Decomposer { alphas, columns, basis, inverse })
    })
}

impl Decomposer {
    /// Coordinates of `p` in the expanded basis.
    pub(crate) fn coordinates(&self, p: &Polynomial) -> Vec<Rational> {
        let v = p.to_vector(&self.basis);
        self.inverse
            .iter()
            .map(|row| {
                row.iter().zip(&v).filter(|(_, b)| !b.is_zero()).fold(Rational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }
}

/// Splits `p` into its Π-harmonic components.
pub fn pi_decompose(p: &Polynomial) -> Result<HarmonicSplit> {
    let shape = p.shape();
    let dec = decomposer(shape)?;
    let coords = dec.coordinates(p);
    let mut components = BTreeMap::new();
    for (ai, alpha) in dec.alphas.iter().enumerate() {
        let alpha_shape = shape.with_degrees(&alpha.0)?;
        let mut f = Polynomial::zero(&alpha_shape);
        for ((owner, h, _), c) in dec.columns.iter().zip(&coords) {
            if *owner == ai && !c.is_zero() {
                f = f.checked_add(&h.scale(c))?;
            }
        }
        components.insert(alpha.clone(), f);
    }
    let split = HarmonicSplit { shape: shape.clone(), components };
    if split.reconstruct()? != *p {
        return Err(Error::InconsistentSystem("decomposition does not reconstruct input".into()));
    }
    Ok(split)
}

/// Checks `Σ_{j∈block i} v_j² = 1` exactly for every block.
pub fn require_on_sphere(shape: &Shape, v: &[Rational]) -> Result<()> {
    if v.len() != shape.n_vars() {
        return Err(Error::LengthMismatch { expected: shape.n_vars(), got: v.len() });
    }
    for i in 0..shape.block_count() {
        let norm2 = v[shape.block_range(i)].iter().fold(Rational::zero(), |acc, x| acc + x * x);
        if !norm2.is_one() {
            return Err(Error::NotOnSphere(i));
        }
    }
    Ok(())
}

/// Zonal harmonic `q_{v,α}` of `H_{N,α}`: `<f, q_{v,α}> = f(v)` for every
/// `f` in that space. `sizes` supplies the block sizes.
pub fn zonal(v: &[Rational], sizes: &Shape, alpha: &[u32]) -> Result<Polynomial> {
    let alpha_shape = sizes.with_degrees(alpha)?;
    require_on_sphere(&alpha_shape, v)?;
    let ortho = orthogonal_harmonic_basis(&alpha_shape)?;
    let mut q = Polynomial::zero(&alpha_shape);
    for (h, norm2) in ortho.iter() {
        let c = h.evaluate(v)? / norm2;
        if !c.is_zero() {
            q = q.checked_add(&h.scale(&c))?;
        }
    }
    Ok(q)
}

/// Reproducing kernel `p_v = Σ_α r^{K−α} q_{v,α}` of `P_{N,K}`.
pub fn kernel_poly(v: &[Rational], shape: &Shape) -> Result<Polynomial> {
    shape.require_even()?;
    shape.require_exact_size()?;
    require_on_sphere(shape, v)?;
    let mut acc = Polynomial::zero(shape);
    for alpha in shape.alpha_indices()? {
        let q = zonal(v, shape, &alpha)?;
        acc = acc.checked_add(&lift(shape, &alpha, &q)?)?;
    }
    Ok(acc)
}

/// Floating-point reproducing kernel through the inverse monomial Gram
/// matrix: the coefficients of `p_v` are `G^{-1} m(v)`.
#[derive(Debug, Clone)]
pub struct FloatKernel {
    shape: Shape,
    basis: Vec<MultiIndex>,
    gram_inv: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl FloatKernel {
    pub fn new(shape: &Shape) -> Result<Self> {
        shape.require_exact_size()?;
        let basis = monomial_basis(shape);
        let n = basis.len();
        let exact: RatMatrix =
            basis.iter().map(|a| basis.iter().map(|b| product_moment(shape, &a.add(b))).collect()).collect();
        let mut aug: RatMatrix = exact
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
                r
            })
            .collect();
        let pivots = linalg::rref(&mut aug);
        if pivots.len() < n || pivots[n - 1] != n - 1 {
            return Err(Error::InconsistentSystem("monomial Gram matrix is singular".into()));
        }
        let gram_inv = DMatrix::from_fn(n, n, |i, j| rational_to_f64(&aug[i][n + j]));
        let gram = DMatrix::from_fn(n, n, |i, j| rational_to_f64(&exact[i][j]));
        Ok(FloatKernel { shape: shape.clone(), basis, gram_inv, gram })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Usual-inner-product Gram matrix of the monomial basis.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn monomials_at(&self, v: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|m| m.iter().zip(v).map(|(&e, x)| x.powi(e as i32)).product()).collect()
    }

    /// Coefficients of `p_v` over the graded-lex monomial basis.
    pub fn kernel_coeffs(&self, v: &[f64]) -> Vec<f64> {
        let m = nalgebra::DVector::from_vec(self.monomials_at(v));
        (&self.gram_inv * m).iter().copied().collect()
    }

    /// `p_v(w)`.
    pub fn eval(&self, v: &[f64], w: &[f64]) -> f64 {
        let mv = nalgebra::DVector::from_vec(self.monomials_at(v));
        let mw = nalgebra::DVector::from_vec(self.monomials_at(w));
        mv.dot(&(&self.gram_inv * mw))
    }
}

/// `p_v(w)` as a function of the blockwise inner products `t_i = <v_i, w_i>`.
///
/// The stabilizer of `v` acts blockwise, so for more than one block the
/// profile is a function of all `m` inner products, not of a single scalar.
pub fn kernel_profile(shape: &Shape, t: &[f64]) -> Result<f64> {
    if t.len() != shape.block_count() {
        return Err(Error::LengthMismatch { expected: shape.block_count(), got: t.len() });
    }
    let mut v = vec![Rational::zero(); shape.n_vars()];
    let mut w = vec![0.0; shape.n_vars()];
    for (i, &ti) in t.iter().enumerate() {
        if !(-1.0..=1.0).contains(&ti) {
            return Err(Error::InvalidParameter(format!("inner product {ti} outside [-1, 1]")));
        }
        let r = shape.block_range(i);
        v[r.start] = Rational::one();
        w[r.start] = ti;
        if shape.blocks()[i].n > 1 {
            w[r.start + 1] = (1.0 - ti * ti).max(0.0).sqrt();
        } else if ti.abs() != 1.0 {
            return Err(Error::InvalidParameter("one-variable block needs t = ±1".into()));
        }
    }
    let pv = kernel_poly(&v, shape)?;
    Ok(pv.to_float().eval(&w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::usual_ip;
    use crate::parse::parse_polynomial;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn p(shape: &str, text: &str) -> Polynomial {
        parse_polynomial(&shape.parse().unwrap(), text).unwrap()
    }

    #[test]
    fn harmonic_dimensions() {
        assert_eq!(dim_h(2, 2), 2);
        assert_eq!(dim_h(3, 2), 5);
        assert_eq!(dim_h(7, 0), 1);
        assert_eq!(dim_h(1, 2), 0);
        assert_eq!(dim_h(1, 0), 1);
        assert_eq!(dim_h(4, 4), 35 - 10);
    }

    #[test]
    fn harmonic_basis_examples() {
        let b = harmonic_basis(&"N=2 K=2".parse().unwrap()).unwrap();
        assert_eq!(b.len(), 2);
        for h in b.iter() {
            assert!(h.block_laplacian(0).unwrap().is_zero());
        }
        assert_eq!(harmonic_basis(&"N=2,2 K=2,0".parse().unwrap()).unwrap().len(), 2);
        let zero = harmonic_basis(&"N=3,2 K=0,0".parse().unwrap()).unwrap();
        assert_eq!(zero.len(), 1);
        assert!(harmonic_basis(&"N=1,2 K=2,2".parse().unwrap()).unwrap().is_empty());
    }

    #[test]
    fn decompose_examples() {
        let s = "N=2 K=2";
        let split = pi_decompose(&p(s, "x1^2")).unwrap();
        assert_eq!(split.components[&AlphaIndex(vec![0])], p("N=2 K=0", "1/2"));
        assert_eq!(split.components[&AlphaIndex(vec![2])], p(s, "1/2 x1^2 - 1/2 x2^2"));
        let split = pi_decompose(&p(s, "x1 x2")).unwrap();
        assert!(split.components[&AlphaIndex(vec![0])].is_zero());
        assert_eq!(split.components[&AlphaIndex(vec![2])], p(s, "x1 x2"));
        let r = Polynomial::r_top(&"N=2,3 K=2,2".parse().unwrap()).unwrap();
        let split = pi_decompose(&r).unwrap();
        for (alpha, f) in &split.components {
            if alpha.0.iter().all(|&a| a == 0) {
                assert_eq!(f.constant_value(), Some(q(1, 1)));
            } else {
                assert!(f.is_zero());
            }
        }
    }

    #[test]
    fn zonal_examples() {
        let sizes: Shape = "N=2 K=2".parse().unwrap();
        let v = [q(1, 1), q(0, 1)];
        let z = zonal(&v, &sizes, &[2]).unwrap();
        assert_eq!(z, p("N=2 K=2", "2 x1^2 - 2 x2^2"));
        assert_eq!(z.evaluate(&v).unwrap(), q(2, 1));
        assert_eq!(zonal(&v, &sizes, &[0]).unwrap(), p("N=2 K=0", "1"));
        assert_eq!(zonal(&[q(1, 1), q(1, 1)], &sizes, &[2]), Err(Error::NotOnSphere(0)));
    }

    #[test]
    fn kernel_examples() {
        let shape: Shape = "N=2 K=2".parse().unwrap();
        let pv = kernel_poly(&[q(1, 1), q(0, 1)], &shape).unwrap();
        assert_eq!(pv, p("N=2 K=2", "3 x1^2 - x2^2"));
        assert_eq!(usual_ip(&p("N=2 K=2", "x1^2"), &pv).unwrap(), q(1, 1));
        assert_eq!(usual_ip(&pv, &pv).unwrap(), q(3, 1));
    }

    #[test]
    fn float_kernel_matches_exact() {
        let shape: Shape = "N=2,2 K=2,2".parse().unwrap();
        let v = [q(3, 5), q(4, 5), q(-5, 13), q(12, 13)];
        let exact = kernel_poly(&v, &shape).unwrap().to_float();
        let fk = FloatKernel::new(&shape).unwrap();
        let vf: Vec<f64> = v.iter().map(rational_to_f64).collect();
        for (a, b) in exact.coeffs().iter().zip(fk.kernel_coeffs(&vf)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn single_block_profile_matches_axis_kernel() {
        let shape: Shape = "N=3 K=2".parse().unwrap();
        // p_e(w) = 1 + 5 * (3 t^2 - 1) / 2 for the unit-sphere in R^3
        for t in [-1.0, -0.3, 0.0, 0.5, 1.0] {
            let got = kernel_profile(&shape, &[t]).unwrap();
            let expected = 1.0 + 5.0 * (3.0 * t * t - 1.0) / 2.0;
            assert!((got - expected).abs() < 1e-12, "{t}: {got} vs {expected}");
        }
    }
}
