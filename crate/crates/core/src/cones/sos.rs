//! Sum-of-squares feasibility by alternating projections between the affine
//! slice of Gram matrices and the PSD cone, with a moment-matrix certificate
//! when the slice misses the cone.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measures::product_moment;
use crate::poly::{rational_to_f64, Polynomial};
use crate::shape::{monomial_basis, MultiIndex, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
    Undecided,
}

/// PSD Gram matrix `G` with `p = b(x)ᵀ G b(x)` over the half-degree monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramWitness {
    pub basis: Vec<MultiIndex>,
    pub gram: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    /// Max-norm coefficient error of the reconstruction.
    pub residual: f64,
}

/// Linear functional on `P_{N,K}` given by its values on monomials, with a
/// PSD moment matrix and negative value on the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCertificate {
    pub basis: Vec<MultiIndex>,
    pub moments: Vec<f64>,
    pub min_eigenvalue: f64,
    pub pairing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosStatus {
    pub verdict: Verdict,
    pub witness: Option<GramWitness>,
    pub certificate: Option<MomentCertificate>,
    pub iterations: usize,
    /// Shift `ε` of the last primal run on `p + ε r^K`.
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SosConfig {
    pub max_iters: usize,
    pub affine_tol: f64,
    pub eig_tol: f64,
    pub pairing_tol: f64,
    pub dual_iters: usize,
}

impl Default for SosConfig {
    fn default() -> Self {
        SosConfig { max_iters: 50_000, affine_tol: 1e-9, eig_tol: 1e-9, pairing_tol: 1e-6, dual_iters: 20_000 }
    }
}

const EPSILONS: [f64; 2] = [0.0, 1e-6];
const RELAX: f64 = 1.4;
const CHECK_EVERY: usize = 10;
const STALL_WINDOW: usize = 500;
const STALL_GAP: f64 = 1e-6;
const RECONSTRUCT_TOL: f64 = 1e-7;

/// Gram-matrix coordinates: half basis, full basis, and for every
/// full-basis monomial `γ` the entries `(a, b)` with `b_a b_b = x^γ`.
struct Frame {
    half: Vec<MultiIndex>,
    full: Vec<MultiIndex>,
    owner: Vec<Vec<usize>>,
    sizes: Vec<f64>,
}

impl Frame {
    fn new(shape: &Shape) -> Result<Self> {
        let half = monomial_basis(&shape.half()?);
        let full = monomial_basis(shape);
        let index: HashMap<&MultiIndex, usize> = full.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let d = half.len();
        let mut owner = vec![vec![0; d]; d];
        let mut sizes = vec![0.0; full.len()];
        for a in 0..d {
            for b in 0..d {
                let g = index[&half[a].add(&half[b])];
                owner[a][b] = g;
                sizes[g] += 1.0;
            }
        }
        Ok(Frame { half, full, owner, sizes })
    }

    fn d(&self) -> usize {
        self.half.len()
    }

    /// Coefficient vector of `b(x)ᵀ G b(x)`.
    fn coefficients(&self, g: &DMatrix<f64>) -> Vec<f64> {
        let mut c = vec![0.0; self.full.len()];
        for a in 0..self.d() {
            for b in 0..self.d() {
                c[self.owner[a][b]] += g[(a, b)];
            }
        }
        c
    }

    /// Orthogonal projection onto `{G : coefficients(G) = target}`.
    fn project_affine(&self, g: &mut DMatrix<f64>, target: &[f64]) {
        let c = self.coefficients(g);
        let shift: Vec<f64> = (0..c.len()).map(|k| (target[k] - c[k]) / self.sizes[k]).collect();
        for a in 0..self.d() {
            for b in 0..self.d() {
                g[(a, b)] += shift[self.owner[a][b]];
            }
        }
    }

    /// Moment matrix `M(y)_{ab} = y_{a+b}`.
    fn moment_matrix(&self, y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.d(), self.d(), |a, b| y[self.owner[a][b]])
    }

    /// Moment vector closest to `z` in the structured subspace.
    fn average(&self, z: &DMatrix<f64>) -> Vec<f64> {
        let c = self.coefficients(z);
        c.iter().zip(&self.sizes).map(|(v, s)| v / s).collect()
    }
}

fn eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new((m + m.transpose()) * 0.5)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigen(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut e = eigen(m);
    e.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
    e.recompose()
}

/// Projection onto `{Z ⪰ 0, tr Z = 1}`.
fn project_spectraplex(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut e = eigen(m);
    let mut sorted: Vec<f64> = e.eigenvalues.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &l) in sorted.iter().enumerate() {
        cumulative += l;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if l - t > 0.0 {
            theta = t;
        }
    }
    e.eigenvalues.iter_mut().for_each(|l| *l = (*l - theta).max(0.0));
    e.recompose()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Primal {
    witness: Option<DMatrix<f64>>,
    last: DMatrix<f64>,
    gap: DMatrix<f64>,
    iterations: usize,
}

/// Relaxed alternating projections `G ← G + λ(P_A P_+ G − G)`.
fn alternating(frame: &Frame, target: &[f64], start: DMatrix<f64>, cfg: &SosConfig) -> Primal {
    let mut g = start;
    frame.project_affine(&mut g, target);
    let mut gap = DMatrix::zeros(frame.d(), frame.d());
    let mut reference = f64::INFINITY;
    for it in 1..=cfg.max_iters {
        let x = project_psd(&g);
        let mut next = x.clone();
        frame.project_affine(&mut next, target);
        gap = &next - &x;
        if it % CHECK_EVERY == 0 || it == cfg.max_iters {
            if max_abs_diff(&frame.coefficients(&x), target) <= cfg.affine_tol {
                return Primal { witness: Some(x), last: next, gap, iterations: it };
            }
            if min_eigenvalue(&next) >= 0.0 {
                return Primal { witness: Some(next.clone()), last: next, gap, iterations: it };
            }
        }
        if it % STALL_WINDOW == 0 {
            let size = gap.norm();
            if size > STALL_GAP && (reference - size).abs() <= 1e-6 * size {
                return Primal { witness: None, last: g, gap, iterations: it };
            }
            reference = size;
        }
        g = &g + (&next - &g) * RELAX;
    }
    Primal { witness: None, last: g, gap, iterations: cfg.max_iters }
}

/// Gram matrix of `r^K` over the half basis: diagonal multinomials.
fn r_gram(frame: &Frame, shape: &Shape) -> Result<DMatrix<f64>> {
    let r = Polynomial::r_top(shape)?;
    let target: Vec<f64> = frame.full.iter().map(|m| rational_to_f64(&r.coeff(m))).collect();
    let mut g = DMatrix::zeros(frame.d(), frame.d());
    for a in 0..frame.d() {
        let sq = frame.owner[a][a];
        g[(a, a)] = target[sq];
    }
    Ok(g)
}

/// Minimizes `⟨c, y⟩` over unit-trace PSD moment matrices by splitting
/// `M(y) = Z` with `Z` on the spectraplex, from a starting `Z`.
fn dual_search<F>(frame: &Frame, c: &[f64], start: DMatrix<f64>, iters: usize, mut done: F) -> Vec<f64>
where
    F: FnMut(&[f64]) -> bool,
{
    let scale = c.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    let c: Vec<f64> = c.iter().map(|v| v / scale).collect();
    let rho = 1.0;
    let mut z = project_spectraplex(&start);
    let mut u = DMatrix::zeros(frame.d(), frame.d());
    for it in 1..=iters {
        let w = &z - &u;
        let s = frame.coefficients(&w);
        let y: Vec<f64> = (0..s.len()).map(|k| (s[k] - c[k] / rho) / frame.sizes[k]).collect();
        let my = frame.moment_matrix(&y);
        z = project_spectraplex(&(&my + &u));
        u += &my - &z;
        if it % 100 == 0 && done(&frame.average(&z)) {
            break;
        }
    }
    frame.average(&z)
}

/// Mixes `y` with the sphere moments until its moment matrix is PSD, then
/// normalizes to unit trace.
fn repair(frame: &Frame, shape: &Shape, y: &[f64]) -> Vec<f64> {
    let y0: Vec<f64> = frame.full.iter().map(|m| rational_to_f64(&product_moment(shape, m))).collect();
    let trace = |v: &[f64]| frame.moment_matrix(v).trace();
    let t0 = trace(&y0);
    let y0: Vec<f64> = y0.iter().map(|v| v / t0).collect();
    let ty = trace(y);
    let y: Vec<f64> = if ty.abs() > 0.0 { y.iter().map(|v| v / ty).collect() } else { y.to_vec() };
    let mu0 = min_eigenvalue(&frame.moment_matrix(&y0));
    let lam = min_eigenvalue(&frame.moment_matrix(&y));
    let margin = 1e-12;
    let t = if lam >= margin { 0.0 } else { ((margin - lam) / (mu0 - lam)).min(1.0) };
    y.iter().zip(&y0).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

/// Checks a Gram witness against `p` by expanding `b(x)ᵀ G b(x)` from scratch.
pub fn verify_witness(p: &Polynomial, w: &GramWitness) -> (f64, f64) {
    let mut acc: HashMap<MultiIndex, f64> = HashMap::new();
    for (a, ma) in w.basis.iter().enumerate() {
        for (b, mb) in w.basis.iter().enumerate() {
            *acc.entry(ma.add(mb)).or_insert(0.0) += w.gram[a][b];
        }
    }
    let mut err: f64 = 0.0;
    for (m, c) in p.terms() {
        err = err.max((acc.get(m).copied().unwrap_or(0.0) - rational_to_f64(c)).abs());
    }
    for (m, v) in &acc {
        if !p.terms().contains_key(m) {
            err = err.max(v.abs());
        }
    }
    let d = w.basis.len();
    let g = DMatrix::from_fn(d, d, |a, b| w.gram[a][b]);
    (err, min_eigenvalue(&g))
}

/// Checks a moment certificate against `p`: returns (min eigenvalue of the
/// moment matrix, pairing with `p`).
pub fn verify_certificate(p: &Polynomial, cert: &MomentCertificate) -> Result<(f64, f64)> {
    let value: HashMap<&MultiIndex, f64> = cert.basis.iter().zip(&cert.moments).map(|(m, &v)| (m, v)).collect();
    let half = monomial_basis(&p.shape().half()?);
    let d = half.len();
    let m = DMatrix::from_fn(d, d, |a, b| value.get(&half[a].add(&half[b])).copied().unwrap_or(f64::NAN));
    let pairing =
        p.terms().iter().map(|(mono, c)| rational_to_f64(c) * value.get(mono).copied().unwrap_or(f64::NAN)).sum();
    Ok((min_eigenvalue(&m), pairing))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|a| (0..m.ncols()).map(|b| m[(a, b)]).collect()).collect()
}

fn witness(frame: &Frame, p: &Polynomial, g: &DMatrix<f64>) -> GramWitness {
    let sym = (g + g.transpose()) * 0.5;
    let mut w = GramWitness { basis: frame.half.clone(), gram: to_rows(&sym), min_eigenvalue: 0.0, residual: 0.0 };
    let (err, lam) = verify_witness(p, &w);
    w.residual = err;
    w.min_eigenvalue = lam;
    w
}

fn accept_witness(w: &GramWitness, cfg: &SosConfig) -> bool {
    w.residual <= RECONSTRUCT_TOL && w.min_eigenvalue >= -cfg.eig_tol
}

/// Decides whether `p` is a sum of squares of forms of half degree.
pub fn sos_feasibility(p: &Polynomial, cfg: &SosConfig) -> Result<SosStatus> {
    let shape = p.shape();
    shape.require_even()?;
    let frame = Frame::new(shape)?;
    let target: Vec<f64> = frame.full.iter().map(|m| rational_to_f64(&p.coeff(m))).collect();
    let rg = r_gram(&frame, shape)?;
    let r_coeffs = frame.coefficients(&rg);
    let d = frame.d();
    let mut iterations = 0;
    let mut gap = DMatrix::zeros(d, d);
    let mut undecided_eps = 0.0;

    let first = alternating(&frame, &target, DMatrix::zeros(d, d), cfg);
    iterations += first.iterations;
    if let Some(g) = &first.witness {
        let w = witness(&frame, p, g);
        if accept_witness(&w, cfg) {
            return Ok(SosStatus {
                verdict: Verdict::Feasible,
                witness: Some(w),
                certificate: None,
                iterations,
                epsilon: 0.0,
            });
        }
    } else {
        gap = first.gap.clone();
    }

    let start = if gap.norm() > 0.0 { -&gap } else { DMatrix::identity(d, d) };
    let certify = |y: &[f64]| -> Result<MomentCertificate> {
        let moments = repair(&frame, shape, y);
        let cert = MomentCertificate { basis: frame.full.clone(), moments, min_eigenvalue: 0.0, pairing: 0.0 };
        let (lam, pairing) = verify_certificate(p, &cert)?;
        Ok(MomentCertificate { min_eigenvalue: lam, pairing, ..cert })
    };
    let valid = |c: &MomentCertificate| c.min_eigenvalue >= -cfg.eig_tol && c.pairing <= -cfg.pairing_tol;
    let y = dual_search(&frame, &target, start, cfg.dual_iters, |y| {
        certify(y).map(|c| valid(&c) && c.pairing <= -10.0 * cfg.pairing_tol).unwrap_or(false)
    });
    let cert = certify(&y)?;
    if valid(&cert) {
        return Ok(SosStatus {
            verdict: Verdict::Infeasible,
            witness: None,
            certificate: Some(cert),
            iterations,
            epsilon: 0.0,
        });
    }

    // Boundary stall: solve the shifted problem, then remove the shift and
    // restart from there.
    for &eps in EPSILONS.iter().filter(|&&e| e > 0.0) {
        undecided_eps = eps;
        let shifted: Vec<f64> = target.iter().zip(&r_coeffs).map(|(a, b)| a + eps * b).collect();
        let run = alternating(&frame, &shifted, first.last.clone() + &rg * eps, cfg);
        iterations += run.iterations;
        let Some(g) = run.witness else { continue };
        let warm = alternating(&frame, &target, g - &rg * eps, cfg);
        iterations += warm.iterations;
        let candidate = warm.witness.unwrap_or(warm.last);
        let w = witness(&frame, p, &project_psd(&candidate));
        if accept_witness(&w, cfg) {
            return Ok(SosStatus {
                verdict: Verdict::Feasible,
                witness: Some(w),
                certificate: None,
                iterations,
                epsilon: eps,
            });
        }
    }
    Ok(SosStatus { verdict: Verdict::Undecided, witness: None, certificate: None, iterations, epsilon: undecided_eps })
}
