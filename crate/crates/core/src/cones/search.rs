//! Multistart minimization over a product of spheres.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float::FloatPoly;
use crate::harmonics::{cached, Cache};
use crate::shape::{monomial_basis, MultiIndex, Shape};

/// Work limits for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub starts: usize,
    pub max_iters: usize,
    pub polish_steps: usize,
    /// Use the product-grid pass when every block has `n_i ≤ 4`.
    pub grid: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { starts: 64, max_iters: 400, polish_steps: 20, grid: true, seed: 0 }
    }
}

impl SearchConfig {
    pub fn with_starts(starts: usize, seed: u64) -> Self {
        SearchConfig { starts, seed, ..SearchConfig::default() }
    }
}

/// Best value found and the point attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereMin {
    pub value: f64,
    pub argmin: Vec<f64>,
}

const GRID_TARGET: usize = 4096;
const GRID_MAX_N: usize = 4;

/// Precomputed product grid with monomial values at every grid point.
struct Grid {
    points: Vec<Vec<f64>>,
    features: DMatrix<f64>,
}

static GRIDS: Cache<Option<Grid>> = Cache::new();

fn block_grid(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let rad = (1.0 - z * z).sqrt();
                    let t = golden * j as f64;
                    vec![rad * t.cos(), rad * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let a = ((count as f64 / 4.0).cbrt().round() as usize).max(2);
            let mut pts = Vec::with_capacity(4 * a * a * a);
            for e in 0..a {
                let eta = PI / 2.0 * (e as f64 + 0.5) / a as f64;
                for s1 in 0..2 * a {
                    let xi1 = PI * s1 as f64 / a as f64;
                    for s2 in 0..2 * a {
                        let xi2 = PI * (s2 as f64 + 0.5 * (e % 2) as f64) / a as f64;
                        pts.push(vec![
                            xi1.cos() * eta.sin(),
                            xi1.sin() * eta.sin(),
                            xi2.cos() * eta.cos(),
                            xi2.sin() * eta.cos(),
                        ]);
                    }
                }
            }
            pts
        }
    }
}

fn build_grid(shape: &Shape) -> Option<Grid> {
    if shape.blocks().iter().any(|b| b.n > GRID_MAX_N) {
        return None;
    }
    let per_block = (GRID_TARGET as f64).powf(1.0 / shape.block_count() as f64).floor() as usize;
    let per_block = per_block.max(4);
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for b in shape.blocks() {
        let pts = block_grid(b.n, per_block);
        points = points
            .iter()
            .flat_map(|head| {
                pts.iter().map(move |p| {
                    let mut v = head.clone();
                    v.extend_from_slice(p);
                    v
                })
            })
            .collect();
    }
    let basis = monomial_basis(shape);
    let features = DMatrix::from_fn(points.len(), basis.len(), |r, c| monomial_value(&basis[c], &points[r]));
    Some(Grid { points, features })
}

fn monomial_value(m: &MultiIndex, x: &[f64]) -> f64 {
    m.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product()
}

fn grid_for(shape: &Shape) -> Arc<Option<Grid>> {
    cached(&GRIDS, shape, || Ok(build_grid(shape))).expect("grid construction is infallible")
}

/// Blockwise normalization onto the product of spheres.
/// Normalizes every block of `x` to unit length.
pub fn retract(shape: &Shape, x: &mut [f64]) {
    for i in 0..shape.block_count() {
        let r = shape.block_range(i);
        let norm = x[r.clone()].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            x[r].iter_mut().for_each(|v| *v /= norm);
        } else {
            let first = r.start;
            x[r].iter_mut().for_each(|v| *v = 0.0);
            x[first] = 1.0;
        }
    }
}

/// Uniform point on the product of spheres.
pub fn random_point<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> Vec<f64> {
    let mut x: Vec<f64> = (0..shape.n_vars()).map(|_| rng.sample(StandardNormal)).collect();
    retract(shape, &mut x);
    x
}

/// Removes the normal component of `g` block by block; returns `⟨x_i, g_i⟩`.
fn project_tangent(shape: &Shape, x: &[f64], g: &mut [f64]) -> Vec<f64> {
    (0..shape.block_count())
        .map(|i| {
            let r = shape.block_range(i);
            let lambda: f64 = x[r.clone()].iter().zip(&g[r.clone()]).map(|(a, b)| a * b).sum();
            for j in r {
                g[j] -= lambda * x[j];
            }
            lambda
        })
        .collect()
}

/// Value and Riemannian gradient of `f` at `x` on the product of spheres.
pub fn riemannian_gradient(f: &FloatPoly, x: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; x.len()];
    let value = f.eval_grad(x, &mut grad);
    project_tangent(f.shape(), x, &mut grad);
    (value, grad)
}

fn descend(f: &FloatPoly, x: &mut Vec<f64>, cfg: &SearchConfig) -> f64 {
    let shape = f.shape();
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut value = f.eval_grad(x, &mut grad);
    let mut step = 0.1;
    let mut trial = vec![0.0; n];
    for _ in 0..cfg.max_iters {
        project_tangent(shape, x, &mut grad);
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2.sqrt() <= 1e-12 * value.abs().max(1.0) {
            break;
        }
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..60 {
            for j in 0..n {
                trial[j] = x[j] - step * grad[j];
            }
            retract(shape, &mut trial);
            let v = f.eval(&trial);
            if v <= value - 1e-4 * step * g2 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(x, &mut trial);
        let previous = value;
        value = f.eval_grad(x, &mut grad);
        if previous - value <= 1e-15 * value.abs().max(1.0) {
            break;
        }
    }
    value
}

/// Newton steps with the Riemannian Hessian `P(H − Λ)P`, eigenvalues
/// replaced by their absolute values; a step is kept only if it decreases `f`.
fn polish(f: &FloatPoly, x: &mut Vec<f64>, mut value: f64, steps: usize) -> f64 {
    let shape = f.shape();
    let n = x.len();
    let mut grad = vec![0.0; n];
    for _ in 0..steps {
        f.eval_grad(x, &mut grad);
        let lambdas = project_tangent(shape, x, &mut grad);
        if grad.iter().all(|g| g.abs() < 1e-300) {
            break;
        }
        let mut h = f.hessian(x);
        let mut proj = DMatrix::<f64>::identity(n, n);
        for i in 0..shape.block_count() {
            let r = shape.block_range(i);
            for a in r.clone() {
                h[(a, a)] -= lambdas[i];
                for b in r.clone() {
                    proj[(a, b)] -= x[a] * x[b];
                }
            }
        }
        let reduced = &proj * h * &proj + (DMatrix::identity(n, n) - &proj);
        let eig = SymmetricEigen::new(reduced);
        let g = DVector::from_column_slice(&grad);
        let mut dir = DVector::zeros(n);
        for (k, &mu) in eig.eigenvalues.iter().enumerate() {
            let u = eig.eigenvectors.column(k);
            let coef = u.dot(&g) / mu.abs().max(1e-12);
            dir -= u * coef;
        }
        let mut improved = false;
        let mut t = 1.0;
        for _ in 0..12 {
            let mut trial: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
            retract(shape, &mut trial);
            let v = f.eval(&trial);
            if v < value {
                *x = trial;
                value = v;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    value
}

fn start_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Minimum of `f` over the product of unit spheres of its shape.
pub fn minimize(f: &FloatPoly, cfg: &SearchConfig) -> Result<SphereMin> {
    if cfg.starts == 0 {
        return Err(Error::InvalidParameter("search budget must be positive".into()));
    }
    let shape = f.shape();
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    let mut best_grid: Option<SphereMin> = None;
    if cfg.grid {
        if let Some(grid) = grid_for(shape).as_ref() {
            let values = aligned_values(f, grid);
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let take = (cfg.starts / 2).clamp(1, 8);
            seeds.extend(order.iter().take(take).map(|&i| grid.points[i].clone()));
            best_grid = order.first().map(|&i| SphereMin { value: values[i], argmin: grid.points[i].clone() });
        }
    }
    let grid_seeds = seeds.len();
    let results: Vec<SphereMin> = (0..cfg.starts.max(grid_seeds))
        .into_par_iter()
        .map(|idx| {
            let mut x =
                if idx < grid_seeds { seeds[idx].clone() } else { random_point(shape, &mut start_rng(cfg.seed, idx)) };
            let v = descend(f, &mut x, cfg);
            let v = polish(f, &mut x, v, cfg.polish_steps);
            SphereMin { value: v, argmin: x }
        })
        .collect();
    let best = results
        .into_iter()
        .chain(best_grid)
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("at least one start");
    Ok(best)
}

/// Values of `f` at every grid point, matching `f`'s monomial list to the
/// graded-lex basis of the grid.
fn aligned_values(f: &FloatPoly, grid: &Grid) -> Vec<f64> {
    let basis = monomial_basis(f.shape());
    let coeffs: Vec<f64> = if f.basis() == basis.as_slice() {
        f.coeffs().to_vec()
    } else {
        let index: std::collections::HashMap<&MultiIndex, usize> =
            basis.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut c = vec![0.0; basis.len()];
        for (m, &v) in f.basis().iter().zip(f.coeffs()) {
            if let Some(&pos) = index.get(m) {
                c[pos] += v;
            }
        }
        c
    };
    (&grid.features * DVector::from_vec(coeffs)).iter().copied().collect()
}

/// Maximum of `f` over the product of spheres.
pub fn maximize(f: &FloatPoly, cfg: &SearchConfig) -> Result<SphereMin> {
    let m = minimize(&f.neg(), cfg)?;
    Ok(SphereMin { value: -m.value, argmin: m.argmin })
}
