//! Membership tests for the cones of nonnegative forms, sums of squares,
//! and products of even powers of linear forms.

mod search;
mod sos;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

pub use search::{maximize, minimize, random_point, retract, riemannian_gradient, SearchConfig, SphereMin};
pub use sos::{
    sos_feasibility, verify_certificate, verify_witness, GramWitness, MomentCertificate, SosConfig, SosStatus, Verdict,
};

use crate::error::{Error, Result};
use crate::harmonics::{kernel_poly, require_on_sphere};
use crate::measures::{constant_a, usual_ip};
use crate::poly::Polynomial;
use crate::shape::{monomial_basis, Shape};
use crate::transform::{apply_t_spectral, kernel_coefficient};
use crate::Rational;

/// `min_{x∈S} p(x)` with a minimizer.
pub fn pos_min(p: &Polynomial, cfg: &SearchConfig) -> Result<SphereMin> {
    minimize(&p.to_float(), cfg)
}

/// `K_v(x) = Π_i ⟨v_i, x_i⟩^{2k_i}`, expanded.
pub fn linpow_kernel(v: &[Rational], shape: &Shape) -> Result<Polynomial> {
    require_on_sphere(shape, v)?;
    let terms = monomial_basis(shape).into_iter().filter_map(|m| {
        let mut c = Rational::from_integer(kernel_coefficient(shape, &m));
        for (vi, &e) in v.iter().zip(m.iter()) {
            if e > 0 {
                c *= num_traits::pow(vi.clone(), e as usize);
            }
        }
        (!c.is_zero()).then_some((m, c))
    });
    Polynomial::from_terms(shape, terms)
}

/// `Π_i ⟨v_i, x_i⟩^{2k_i}` for a float direction, as float coefficients over
/// the graded-lex basis.
pub fn linpow_kernel_f64(v: &[f64], shape: &Shape) -> Vec<f64> {
    monomial_basis(shape)
        .iter()
        .map(|m| {
            let c = kernel_coefficient(shape, m);
            let c: f64 = num_traits::ToPrimitive::to_f64(&c).unwrap_or(f64::NAN);
            c * m.iter().zip(v).map(|(&e, &x)| x.powi(e as i32)).product::<f64>()
        })
        .collect()
}

/// Checks `T(p_v) = A⁻¹ K_v` and `⟨A⁻¹ K_v, r^K⟩ = 1` exactly; returns the
/// max-abs coefficient deviation, which is zero on success.
pub fn l_extreme_check(v: &[Rational], shape: &Shape) -> Result<Rational> {
    let a = constant_a(shape);
    let image = apply_t_spectral(&kernel_poly(v, shape)?)?;
    let expected = linpow_kernel(v, shape)?.scale(&(Rational::one() / &a));
    let diff = image.checked_sub(&expected)?;
    let deviation = diff.terms().values().map(|c| c.abs()).max().unwrap_or_else(Rational::zero);
    if !deviation.is_zero() {
        return Err(Error::LIdentity(format!("T(p_v) differs from A⁻¹K_v by {deviation}")));
    }
    let norm = usual_ip(&expected, &Polynomial::r_top(shape)?)?;
    if !norm.is_one() {
        return Err(Error::LIdentity(format!("<A⁻¹K_v, r> = {norm}, expected 1")));
    }
    Ok(deviation)
}

/// Rational point of the unit sphere `S^{n−1}` from `t ∈ ℚ^{n−1}` by inverse
/// stereographic projection.
pub fn rational_sphere_point(t: &[Rational]) -> Vec<Rational> {
    let s: Rational = t.iter().fold(Rational::zero(), |acc, x| acc + x * x);
    let denom = &s + Rational::one();
    let two = Rational::from_integer(BigInt::from(2));
    let mut v: Vec<Rational> = t.iter().map(|x| &two * x / &denom).collect();
    v.push((Rational::one() - s) / denom);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_polynomial;

    fn shape(s: &str) -> Shape {
        s.parse().unwrap()
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn pos_min_examples() {
        let s = shape("N=2,2 K=2,2");
        let r = Polynomial::r_top(&s).unwrap();
        let m = pos_min(&r, &SearchConfig::default()).unwrap();
        assert!((m.value - 1.0).abs() < 1e-12);

        let s = shape("N=2 K=2");
        let p = parse_polynomial(&s, "x1^2 - x2^2").unwrap();
        let m = pos_min(&p, &SearchConfig::default()).unwrap();
        assert!((m.value + 1.0).abs() < 1e-12);
        assert!(m.argmin[0].abs() < 1e-6 && (m.argmin[1].abs() - 1.0).abs() < 1e-9);

        let s = shape("N=3 K=6");
        let motzkin = parse_polynomial(&s, "x3^6 + x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 x3^2").unwrap();
        let m = pos_min(&motzkin, &SearchConfig::default()).unwrap();
        assert!(m.value.abs() < 1e-10, "{}", m.value);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let s = shape("N=2 K=2");
        let r = Polynomial::r_top(&s).unwrap();
        assert!(pos_min(&r, &SearchConfig::with_starts(0, 0)).is_err());
    }

    #[test]
    fn linpow_examples() {
        let s = shape("N=2 K=2");
        let k = linpow_kernel(&[q(1, 1), q(0, 1)], &s).unwrap();
        assert_eq!(k, parse_polynomial(&s, "x1^2").unwrap());
        let k = linpow_kernel(&[q(3, 5), q(4, 5)], &s).unwrap();
        assert_eq!(k, parse_polynomial(&s, "9/25 x1^2 + 24/25 x1 x2 + 16/25 x2^2").unwrap());
        assert!(linpow_kernel(&[q(1, 1), q(1, 1)], &s).is_err());
        let f = linpow_kernel_f64(&[0.6, 0.8], &s);
        assert!((f[1] - 0.96).abs() < 1e-15);
    }

    #[test]
    fn l_extreme_examples() {
        let s = shape("N=2 K=2");
        assert!(l_extreme_check(&[q(1, 1), q(0, 1)], &s).unwrap().is_zero());
        assert!(l_extreme_check(&[q(3, 5), q(4, 5)], &s).unwrap().is_zero());
        let s = shape("N=2,2 K=2,2");
        assert!(l_extreme_check(&[q(3, 5), q(4, 5), q(5, 13), q(-12, 13)], &s).unwrap().is_zero());
    }

    #[test]
    fn stereographic_points_are_on_sphere() {
        let v = rational_sphere_point(&[q(1, 2), q(-2, 3)]);
        let s: Rational = v.iter().fold(Rational::zero(), |a, x| a + x * x);
        assert!(s.is_one());
    }

    #[test]
    fn sos_of_explicit_squares() {
        let s = shape("N=2 K=4");
        let p = parse_polynomial(&s, "x1^4 + 2 x1^2 x2^2 + x2^4").unwrap();
        let st = sos_feasibility(&p, &SosConfig::default()).unwrap();
        assert_eq!(st.verdict, Verdict::Feasible);
        let w = st.witness.unwrap();
        let (err, lam) = verify_witness(&p, &w);
        assert!(err <= 1e-7 && lam >= -1e-9);
    }

    #[test]
    fn motzkin_is_not_sos() {
        let s = shape("N=3 K=6");
        let motzkin = parse_polynomial(&s, "x3^6 + x1^4 x2^2 + x1^2 x2^4 - 3 x1^2 x2^2 x3^2").unwrap();
        let st = sos_feasibility(&motzkin, &SosConfig::default()).unwrap();
        assert_eq!(st.verdict, Verdict::Infeasible, "{st:?}");
        let (lam, pairing) = verify_certificate(&motzkin, st.certificate.as_ref().unwrap()).unwrap();
        assert!(lam >= -1e-9 && pairing <= -1e-6);
    }
}
