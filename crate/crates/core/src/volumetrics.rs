//! Monte Carlo estimates on the section `U = {f : ⟨f, r^K⟩ = 0}`: the gauge
//! integral of the nonnegative section, the mean width of the SOS section,
//! sup norms, and the isotropy of the kernel map `Φ`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cones::{maximize, minimize, random_point, SearchConfig};
use crate::error::{Error, Result};
use crate::float::FloatPoly;
use crate::harmonics::{cached, Cache, FloatKernel};
use crate::measures::product_moment;
use crate::poly::{rational_to_f64, Polynomial};
use crate::shape::{monomial_basis, MultiIndex, Shape};
use crate::Rational;

/// Usual-orthonormal basis of `U`, as float coefficient rows over the
/// graded-lex monomial basis.
#[derive(Debug, Clone)]
pub struct SectionFrame {
    shape: Shape,
    basis: Vec<MultiIndex>,
    orthobasis: DMatrix<f64>,
    gram: DMatrix<f64>,
    r: Vec<f64>,
}

static FRAMES: Cache<SectionFrame> = Cache::new();

fn exact_ip(gram: &[Vec<Rational>], a: &[Rational], b: &[Rational]) -> Rational {
    let mut acc = Rational::zero();
    for (ai, row) in a.iter().zip(gram) {
        if ai.is_zero() {
            continue;
        }
        for (bj, g) in b.iter().zip(row) {
            if !bj.is_zero() && !g.is_zero() {
                acc += ai * bj * g;
            }
        }
    }
    acc
}

impl SectionFrame {
    /// Exact Gram–Schmidt of `r^K` followed by the monomials (one dropped),
    /// normalized in floating point.
    pub fn new(shape: &Shape) -> Result<Arc<Self>> {
        cached(&FRAMES, shape, || SectionFrame::build(shape))
    }

    fn build(shape: &Shape) -> Result<Self> {
        shape.require_exact_size()?;
        let basis = monomial_basis(shape);
        let d = basis.len();
        if d < 2 {
            return Err(Error::Degenerate(format!("section of {shape} is a single point")));
        }
        let gram: Vec<Vec<Rational>> =
            basis.iter().map(|a| basis.iter().map(|b| product_moment(shape, &a.add(b))).collect()).collect();
        let r = Polynomial::r_top(shape)?.to_vector(&basis);
        let pivot = r.iter().position(|c| !c.is_zero()).expect("r is nonzero");
        let zero = Rational::zero();
        let one = Rational::one();
        let mut vectors = vec![r.clone()];
        for j in (0..d).filter(|&j| j != pivot) {
            let mut e = vec![zero.clone(); d];
            e[j] = one.clone();
            vectors.push(e);
        }
        let mut ortho: Vec<(Vec<Rational>, Rational)> = Vec::with_capacity(d);
        for v in vectors {
            let mut u = v.clone();
            for (w, norm2) in &ortho {
                let c = exact_ip(&gram, &v, w) / norm2;
                if !c.is_zero() {
                    for (ui, wi) in u.iter_mut().zip(w) {
                        *ui -= &c * wi;
                    }
                }
            }
            let norm2 = exact_ip(&gram, &u, &u);
            ortho.push((u, norm2));
        }
        let m = d - 1;
        let orthobasis = DMatrix::from_fn(m, d, |s, j| {
            let (u, norm2) = &ortho[s + 1];
            rational_to_f64(&u[j]) / rational_to_f64(norm2).sqrt()
        });
        let gram = DMatrix::from_fn(d, d, |i, j| rational_to_f64(&gram[i][j]));
        let frame =
            SectionFrame { shape: shape.clone(), basis, orthobasis, gram, r: r.iter().map(rational_to_f64).collect() };
        let (ortho_err, r_err) = frame.self_check();
        if ortho_err > 1e-10 || r_err > 1e-12 {
            return Err(Error::InconsistentSystem(format!(
                "section frame check failed: gram error {ortho_err:e}, r pairing {r_err:e}"
            )));
        }
        Ok(frame)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    /// Rows form a usual-orthonormal basis of `U`.
    pub fn orthobasis(&self) -> &DMatrix<f64> {
        &self.orthobasis
    }

    /// Usual Gram matrix of the monomial basis.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `M = dim P − 1`.
    pub fn dimension(&self) -> usize {
        self.orthobasis.nrows()
    }

    /// Max deviation of the row Gram from the identity, and max |⟨row, r^K⟩|.
    pub fn self_check(&self) -> (f64, f64) {
        let g = &self.orthobasis * &self.gram * self.orthobasis.transpose();
        let ortho = (g - DMatrix::identity(self.dimension(), self.dimension())).amax();
        let r = DVector::from_column_slice(&self.r);
        let pair = (&self.orthobasis * &self.gram * r).amax();
        (ortho, pair)
    }

    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let f = DVector::from_column_slice(f);
        let g = DVector::from_column_slice(g);
        f.dot(&(&self.gram * g))
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Pairing with `r^K`.
    pub fn r_pairing(&self, f: &[f64]) -> f64 {
        self.inner(f, &self.r)
    }

    /// Frame coordinates `⟨e_s, f⟩`.
    pub fn coordinates(&self, f: &[f64]) -> Vec<f64> {
        let f = DVector::from_column_slice(f);
        (&self.orthobasis * (&self.gram * f)).iter().copied().collect()
    }

    /// Monomial coefficients of `Σ a_s e_s`.
    pub fn from_coordinates(&self, a: &[f64]) -> Vec<f64> {
        let a = DVector::from_column_slice(a);
        (self.orthobasis.transpose() * a).iter().copied().collect()
    }

    pub fn float_poly(&self, coeffs: Vec<f64>) -> FloatPoly {
        FloatPoly::new(self.shape.clone(), self.basis.clone(), coeffs)
    }
}

/// Uniform frame coordinates on `S^{M−1}`.
pub fn sample_coordinates<R: Rng + ?Sized>(frame: &SectionFrame, rng: &mut R) -> Vec<f64> {
    loop {
        let a: Vec<f64> = (0..frame.dimension()).map(|_| rng.sample(StandardNormal)).collect();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return a.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform unit-norm form orthogonal to `r^K`.
pub fn sample_direction<R: Rng + ?Sized>(frame: &SectionFrame, rng: &mut R) -> FloatPoly {
    let a = sample_coordinates(frame, rng);
    frame.float_poly(frame.from_coordinates(&a))
}

/// `max_S |f|`.
pub fn sup_norm(f: &FloatPoly, cfg: &SearchConfig) -> Result<f64> {
    let lo = minimize(f, cfg)?.value;
    let hi = maximize(f, cfg)?.value;
    Ok(lo.abs().max(hi.abs()))
}

/// Monte Carlo result with batch-means standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub quantity: String,
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    /// Companion values keyed by name.
    pub extras: BTreeMap<String, f64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Report plus the per-sample table behind it.
#[derive(Debug, Clone)]
pub struct EstimateRun {
    pub report: EstimateReport,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeConfig {
    pub samples: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    pub batches: usize,
    pub search: SearchConfig,
}

impl VolumeConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        VolumeConfig {
            samples,
            seed,
            workers: 0,
            batches: 20,
            search: SearchConfig { starts: 8, ..SearchConfig::default() },
        }
    }
}

const GAUGE_FLOOR: f64 = 1e-9;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `f(i)` for every sample index, in a pool of `workers` threads,
/// returning results in index order.
fn run_samples<T, F>(cfg: &VolumeConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let work = || (0..cfg.samples).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    if cfg.workers == 0 {
        return work();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(work)
}

/// Mean and batch-means standard error.
pub fn batch_mean(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.clamp(2, n.max(2));
    if n < b {
        return (mean, f64::NAN);
    }
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|k| {
            let chunk = &values[k * size..if k + 1 == b { n } else { (k + 1) * size }];
            chunk.iter().sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let mm = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|x| (x - mm).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

fn require_samples(cfg: &VolumeConfig) -> Result<()> {
    if cfg.samples == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    Ok(())
}

fn report(quantity: &str, cfg: &VolumeConfig, estimate: f64, std_error: f64, start: Instant) -> EstimateReport {
    EstimateReport {
        quantity: quantity.into(),
        estimate,
        std_error,
        samples: cfg.samples,
        seed: cfg.seed,
        workers: cfg.workers,
        extras: BTreeMap::new(),
        wall_time: start.elapsed(),
    }
}

/// `(mean g^{-M})^{1/M}` and its delta-method standard error.
fn root_estimate(values: &[f64], batches: usize, m: usize) -> (f64, f64) {
    let (mean, se) = batch_mean(values, batches);
    let est = mean.powf(1.0 / m as f64);
    (est, est / (m as f64 * mean) * se)
}

/// Estimate of `(vol(Pos section) / vol(B_M))^{1/M}` through the gauge
/// integral `(∫ |min_S f|^{−M} df)^{1/M}` over unit `f ∈ U`.
pub fn estimate_mu_pos(shape: &Shape, cfg: &VolumeConfig) -> Result<EstimateRun> {
    require_samples(cfg)?;
    let start = Instant::now();
    let frame = SectionFrame::new(shape)?;
    let m = frame.dimension();
    let rows = run_samples(cfg, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        let f = sample_direction(&frame, &mut rng);
        let search = SearchConfig { seed: splitmix(cfg.seed ^ splitmix(i as u64)), ..cfg.search };
        let lo = minimize(&f, &search)?.value;
        let hi = maximize(&f, &search)?.value;
        let gauge = (-lo).max(0.0);
        Ok(vec![gauge, lo.abs().max(hi.abs())])
    })?;
    let clipped: Vec<f64> = rows.iter().map(|r| r[0].max(GAUGE_FLOOR).powi(-(m as i32))).collect();
    let raw: Vec<f64> = rows.iter().map(|r| r[0].powi(-(m as i32))).collect();
    let sup: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let (est, se) = root_estimate(&clipped, cfg.batches, m);
    let (raw_est, raw_se) = root_estimate(&raw, cfg.batches, m);
    let (mean_sup, sup_se) = batch_mean(&sup, cfg.batches);
    let (mean_clipped, _) = batch_mean(&clipped, cfg.batches);
    let d = m + 1;
    let mut rep = report("mu_pos", cfg, est, se, start);
    rep.extras.insert("dimension_m".into(), m as f64);
    rep.extras.insert("unclipped".into(), raw_est);
    rep.extras.insert("unclipped_std_error".into(), raw_se);
    rep.extras.insert("clipped_count".into(), rows.iter().filter(|r| r[0] < GAUGE_FLOOR).count() as f64);
    rep.extras.insert("jensen_lower".into(), 1.0 / mean_sup);
    rep.extras.insert("mean_sup_norm".into(), mean_sup);
    rep.extras.insert("mean_sup_norm_std_error".into(), sup_se);
    rep.extras.insert("estimate_dim_exponent".into(), mean_clipped.powf(1.0 / d as f64));
    Ok(EstimateRun { report: rep, columns: vec!["gauge".into(), "sup_norm".into()], rows })
}

/// Usual-orthonormal basis of `P_{N,K/2}` with the tensor
/// `W[i][j] = (⟨x^γ, b_i b_j⟩)_γ`.
struct HalfFrame {
    tensor: Vec<Vec<DVector<f64>>>,
    size: usize,
}

fn half_frame(shape: &Shape) -> Result<HalfFrame> {
    let half_shape = shape.half()?;
    let half = monomial_basis(&half_shape);
    let full = monomial_basis(shape);
    let h = half.len();
    let g = DMatrix::from_fn(h, h, |a, b| rational_to_f64(&product_moment(&half_shape, &half[a].add(&half[b]))));
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::InconsistentSystem("half-degree Gram matrix is not positive definite".into()))?;
    // Rows of L^{-1} give an orthonormal basis.
    let linv = chol.l().try_inverse().ok_or_else(|| Error::InconsistentSystem("singular Cholesky factor".into()))?;
    let mut tensor = vec![vec![DVector::zeros(full.len()); h]; h];
    for (i, row) in tensor.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            for (k, gamma) in full.iter().enumerate() {
                let mut s = 0.0;
                for a in 0..h {
                    let la = linv[(i, a)];
                    if la == 0.0 {
                        continue;
                    }
                    for b in 0..h {
                        let lb = linv[(j, b)];
                        if lb != 0.0 {
                            s += la * lb * rational_to_f64(&product_moment(shape, &gamma.add(&half[a].add(&half[b]))));
                        }
                    }
                }
                w[k] = s;
            }
        }
    }
    Ok(HalfFrame { tensor, size: h })
}

/// Largest eigenvalue of `(⟨f, b_i b_j⟩)`.
fn support_sq(hf: &HalfFrame, f: &[f64]) -> (f64, f64) {
    let f = DVector::from_column_slice(f);
    let q = DMatrix::from_fn(hf.size, hf.size, |i, j| hf.tensor[i][j].dot(&f));
    let first = q[(0, 0)];
    let top = SymmetricEigen::new(q).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (top, first)
}

/// Half the mean width of the SOS section, `∫ h(f) df` with
/// `h(f) = λ_max(⟨f, b_i b_j⟩)`.
pub fn mean_width_sq(shape: &Shape, cfg: &VolumeConfig) -> Result<EstimateRun> {
    require_samples(cfg)?;
    let start = Instant::now();
    let frame = SectionFrame::new(shape)?;
    let hf = half_frame(shape)?;
    let rows = run_samples(cfg, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        let f = sample_direction(&frame, &mut rng);
        let (top, first) = support_sq(&hf, f.coeffs());
        Ok(vec![top, first])
    })?;
    let tops: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let (mean, se) = batch_mean(&tops, cfg.batches);
    let mut rep = report("half_mean_width_sq", cfg, mean, se, start);
    rep.extras.insert("dimension_m".into(), frame.dimension() as f64);
    rep.extras.insert(
        "rayleigh_violations".into(),
        rows.iter().filter(|r| r[0] < r[1] - 1e-12 * r[1].abs().max(1.0)).count() as f64,
    );
    Ok(EstimateRun { report: rep, columns: vec!["lambda_max".into(), "rayleigh_b1".into()], rows })
}

/// `λ_max(⟨f, b_i b_j⟩)` for one form.
pub fn sq_support(shape: &Shape, coeffs: &[f64]) -> Result<f64> {
    Ok(support_sq(&half_frame(shape)?, coeffs).0)
}

/// `Φ(v) = (p_v − r^K)/√(dim P − 1)` as monomial coefficients.
pub fn phi(kernel: &FloatKernel, frame: &SectionFrame, v: &[f64]) -> Vec<f64> {
    let scale = (frame.dimension() as f64).sqrt();
    kernel.kernel_coeffs(v).iter().zip(&frame.r).map(|(p, r)| (p - r) / scale).collect()
}

const ISOTROPY_PROBES: usize = 20;

/// Checks `E_v[M ⟨q, Φ(v)⟩²] = ‖q‖²` for random unit `q ∈ U` and that the
/// centroid `E_v Φ(v)` vanishes. The estimate is the largest relative
/// deviation over the probes.
pub fn isotropy_check(shape: &Shape, cfg: &VolumeConfig) -> Result<EstimateRun> {
    require_samples(cfg)?;
    let start = Instant::now();
    let frame = SectionFrame::new(shape)?;
    let kernel = FloatKernel::new(shape)?;
    let m = frame.dimension();
    let mut probe_rng = sample_rng(splitmix(cfg.seed), usize::MAX);
    let probes: Vec<Vec<f64>> =
        (0..ISOTROPY_PROBES).map(|_| frame.from_coordinates(&sample_coordinates(&frame, &mut probe_rng))).collect();
    let rows = run_samples(cfg, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        let v = random_point(shape, &mut rng);
        let p = phi(&kernel, &frame, &v);
        let mut row: Vec<f64> = probes.iter().map(|q| m as f64 * frame.inner(q, &p).powi(2)).collect();
        row.extend(frame.coordinates(&p));
        row.push(frame.norm(&p));
        Ok(row)
    })?;
    let mut worst: f64 = 0.0;
    let mut worst_se = 0.0;
    for (k, q) in probes.iter().enumerate() {
        let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        let (mean, se) = batch_mean(&col, cfg.batches);
        let q2 = frame.inner(q, q);
        let dev = (mean / q2 - 1.0).abs();
        if dev > worst {
            worst = dev;
            worst_se = se / q2;
        }
    }
    let n = rows.len() as f64;
    let mut centroid2 = 0.0;
    let mut var_sum = 0.0;
    for s in 0..m {
        let col: Vec<f64> = rows.iter().map(|r| r[ISOTROPY_PROBES + s]).collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        centroid2 += mean * mean;
        var_sum += var;
    }
    let phi_norm_err = rows.iter().map(|r| (r[ISOTROPY_PROBES + m] - 1.0).abs()).fold(0.0, f64::max);
    let mut rep = report("isotropy_max_relative_deviation", cfg, worst, worst_se, start);
    rep.extras.insert("dimension_m".into(), m as f64);
    rep.extras.insert("centroid_norm".into(), centroid2.sqrt());
    rep.extras.insert("centroid_std_error".into(), (var_sum / n).sqrt());
    rep.extras.insert("phi_norm_max_error".into(), phi_norm_err);
    let mut columns: Vec<String> = (0..ISOTROPY_PROBES).map(|k| format!("probe_{k}")).collect();
    columns.extend((0..m).map(|s| format!("phi_{s}")));
    columns.push("phi_norm".into());
    Ok(EstimateRun { report: rep, columns, rows })
}

/// Gauge integral restricted to the plane spanned by two frame directions:
/// `(∫_{S^1} |min f_θ|^{−2} dθ/2π)^{1/2}` by Monte Carlo over `θ`.
pub fn estimate_mu_pos_slice(shape: &Shape, plane: (usize, usize), cfg: &VolumeConfig) -> Result<EstimateRun> {
    require_samples(cfg)?;
    let start = Instant::now();
    let frame = SectionFrame::new(shape)?;
    let m = frame.dimension();
    if plane.0 >= m || plane.1 >= m || plane.0 == plane.1 {
        return Err(Error::InvalidParameter(format!("plane {plane:?} not inside a {m}-dimensional frame")));
    }
    let rows = run_samples(cfg, |i| {
        let mut rng = sample_rng(cfg.seed, i);
        let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let mut a = vec![0.0; m];
        a[plane.0] = theta.cos();
        a[plane.1] = theta.sin();
        let f = frame.float_poly(frame.from_coordinates(&a));
        let search = SearchConfig { seed: splitmix(cfg.seed ^ splitmix(i as u64)), ..cfg.search };
        Ok(vec![(-minimize(&f, &search)?.value).max(0.0)])
    })?;
    let vals: Vec<f64> = rows.iter().map(|r| r[0].max(GAUGE_FLOOR).powi(-2)).collect();
    let (est, se) = root_estimate(&vals, cfg.batches, 2);
    let rep = report("mu_pos_slice", cfg, est, se, start);
    Ok(EstimateRun { report: rep, columns: vec!["gauge".into()], rows })
}
