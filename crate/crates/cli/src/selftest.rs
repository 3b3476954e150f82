//! Exact-identity suite behind `multisos selftest`.

use multisos::harmonics::{kernel_poly, pi_decompose};
use multisos::measures::{constant_a, usual_ip};
use multisos::transform::{apply_t_direct, apply_t_spectral, det_t, lemma_t_check};
use multisos::{cones, monomial_basis, Polynomial, Rational, Result, Shape};
use num_traits::Zero;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub shape: String,
    pub pass: bool,
    pub detail: String,
}

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn basis_polys(shape: &Shape) -> Result<Vec<Polynomial>> {
    monomial_basis(shape).into_iter().map(|m| Polynomial::monomial(shape, m)).collect()
}

fn t_equivalence(shape: &Shape) -> Result<(bool, String)> {
    let mut bad = 0;
    for f in basis_polys(shape)? {
        if apply_t_spectral(&f)? != apply_t_direct(&f)? {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{bad} mismatched basis images")))
}

fn det_agreement(shape: &Shape) -> Result<(bool, String)> {
    let d = det_t(shape)?;
    Ok((d.direct.as_ref() == Some(&d.closed_form), format!("det = {}", d.closed_form)))
}

fn lemma_t(shape: &Shape) -> Result<(bool, String)> {
    let basis = basis_polys(shape)?;
    let mut bad = 0;
    for f in &basis {
        for g in &basis {
            let (l, r) = lemma_t_check(f, g)?;
            if l != r {
                bad += 1;
            }
        }
    }
    Ok((bad == 0, format!("{bad} mismatched pairs")))
}

fn decomposition(shape: &Shape) -> Result<(bool, String)> {
    let basis = monomial_basis(shape);
    let coeffs: Vec<Rational> = (0..basis.len()).map(|i| q(i as i64 * 3 - 7, i as i64 + 2)).collect();
    let p = Polynomial::from_vector(shape, &basis, &coeffs);
    let split = pi_decompose(&p)?;
    Ok((split.reconstruct()? == p, format!("{} components", split.components.len())))
}

fn reproducing(shape: &Shape, v: &[Rational]) -> Result<(bool, String)> {
    let pv = kernel_poly(v, shape)?;
    let mut bad = 0;
    for f in basis_polys(shape)? {
        if usual_ip(&f, &pv)? != f.evaluate(v)? {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{bad} basis elements fail <f, p_v> = f(v)")))
}

fn l_identity(shape: &Shape, v: &[Rational]) -> Result<(bool, String)> {
    let dev = cones::l_extreme_check(v, shape)?;
    let kv = cones::linpow_kernel(v, shape)?;
    let a_ok = usual_ip(&kv, &Polynomial::r_top(shape)?)? == constant_a(shape);
    Ok((dev.is_zero() && a_ok, format!("deviation {dev}")))
}

pub fn run() -> Result<Vec<Check>> {
    let s22: Shape = "N=2 K=2".parse()?;
    let s24: Shape = "N=2 K=4".parse()?;
    let s32: Shape = "N=3 K=2".parse()?;
    let s2222: Shape = "N=2,2 K=2,2".parse()?;
    let v2 = vec![q(3, 5), q(4, 5)];
    let v22 = vec![q(3, 5), q(4, 5), q(5, 13), q(-12, 13)];
    let v3 = cones::rational_sphere_point(&[q(1, 2), q(-1, 3)]);

    type Job<'a> = (&'a str, &'a Shape, Box<dyn Fn() -> Result<(bool, String)> + 'a>);
    let jobs: Vec<Job> = vec![
        ("t_spectral_equals_direct", &s22, Box::new(|| t_equivalence(&s22))),
        ("t_spectral_equals_direct", &s24, Box::new(|| t_equivalence(&s24))),
        ("t_spectral_equals_direct", &s32, Box::new(|| t_equivalence(&s32))),
        ("t_spectral_equals_direct", &s2222, Box::new(|| t_equivalence(&s2222))),
        ("det_closed_equals_direct", &s22, Box::new(|| det_agreement(&s22))),
        ("det_closed_equals_direct", &s32, Box::new(|| det_agreement(&s32))),
        ("det_closed_equals_direct", &s2222, Box::new(|| det_agreement(&s2222))),
        ("t_pairing_identity", &s24, Box::new(|| lemma_t(&s24))),
        ("harmonic_round_trip", &s24, Box::new(|| decomposition(&s24))),
        ("harmonic_round_trip", &s2222, Box::new(|| decomposition(&s2222))),
        ("reproducing_kernel", &s24, Box::new(|| reproducing(&s24, &v2))),
        ("reproducing_kernel", &s32, Box::new(|| reproducing(&s32, &v3))),
        ("l_extreme_identity", &s22, Box::new(|| l_identity(&s22, &v2))),
        ("l_extreme_identity", &s2222, Box::new(|| l_identity(&s2222, &v22))),
    ];
    let mut out = Vec::with_capacity(jobs.len());
    for (name, shape, job) in jobs {
        let (pass, detail) = match job() {
            Ok(r) => r,
            Err(e) => (false, e.to_string()),
        };
        out.push(Check { name: name.into(), shape: shape.to_string(), pass, detail });
    }
    Ok(out)
}
