//! Closed-form volume bounds for the sections of the nonnegative, SOS and
//! linear-power cones, evaluated in binary64 through logarithms.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::shape::Shape;
use crate::transform::ball_ratio_bounds;

/// Absolute constants of the bounds. `c1`, `c2`, `c3` and the lower-bound
/// `c0` have no published value; they default to 1 and are reported as
/// unresolved unless set explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Upper constant of the nonnegative section, at most 5.
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `2^{10} e`.
    pub c: f64,
    /// Names set by the caller.
    pub overridden: Vec<String>,
}

impl Default for Constants {
    fn default() -> Self {
        Constants { c0: 5.0, c1: 1.0, c2: 1.0, c3: 1.0, c: 1024.0 * E, overridden: Vec::new() }
    }
}

impl Constants {
    fn is_set(&self, name: &str) -> bool {
        self.overridden.iter().any(|n| n == name)
    }

    fn unresolved(&self, names: &[&str]) -> Vec<String> {
        names.iter().filter(|n| !self.is_set(n)).map(|n| n.to_string()).collect()
    }
}

impl FromStr for Constants {
    type Err = Error;

    /// `c1=0.5,c2=2`; `c0` is capped at 5.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Constants::default();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (key, value) =
                item.split_once('=').ok_or_else(|| Error::Parse(format!("constant `{item}` is not key=value")))?;
            let key = key.trim();
            let value: f64 =
                value.trim().parse().map_err(|_| Error::Parse(format!("constant `{key}` has a non-numeric value")))?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!("constant `{key}` must be positive and finite")));
            }
            match key {
                "c0" => out.c0 = value.min(5.0),
                "c1" => out.c1 = value,
                "c2" => out.c2 = value,
                "c3" => out.c3 = value,
                "c" => out.c = value,
                _ => return Err(Error::Parse(format!("unknown constant `{key}`"))),
            }
            if !out.overridden.iter().any(|n| n == key) {
                out.overridden.push(key.to_string());
            }
        }
        Ok(out)
    }
}

/// One evaluated bound pair. Either side may be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeBound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub formula: String,
    /// Constants left at their placeholder value.
    pub unresolved: Vec<String>,
    /// Display that is stated for two blocks only, evaluated here with the
    /// products taken over all blocks.
    pub two_block_display: bool,
}

impl ConeBound {
    fn new(lower: Option<f64>, upper: Option<f64>, formula: &str, unresolved: Vec<String>) -> Self {
        ConeBound { lower, upper, formula: formula.into(), unresolved, two_block_display: false }
    }

    /// `lower ≤ upper` whenever both are present and free of placeholders.
    pub fn consistent(&self) -> bool {
        match (self.lower, self.upper) {
            (Some(l), Some(u)) if self.unresolved.is_empty() => l <= u,
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub title: String,
    pub shape: Option<String>,
    pub constants: Constants,
    pub records: BTreeMap<String, ConeBound>,
    /// Single-block comparison with the classical homogeneous bounds.
    pub comparison: Option<Box<BoundReport>>,
}

impl BoundReport {
    fn new(title: &str, shape: Option<&Shape>, constants: &Constants) -> Self {
        BoundReport {
            title: title.into(),
            shape: shape.map(|s| s.to_string()),
            constants: constants.clone(),
            records: BTreeMap::new(),
            comparison: None,
        }
    }

    pub fn get(&self, name: &str) -> Option<&ConeBound> {
        self.records.get(name)
    }

    fn put(&mut self, name: &str, bound: ConeBound) {
        self.records.insert(name.into(), bound);
    }

    /// Every present value is finite and positive.
    pub fn all_finite_positive(&self) -> bool {
        self.records.values().flat_map(|b| [b.lower, b.upper]).flatten().all(|v| v.is_finite() && v > 0.0)
    }
}

struct Blocks {
    n: Vec<f64>,
    k: Vec<f64>,
    max_n: f64,
}

fn blocks(shape: &Shape) -> Result<Blocks> {
    shape.require_even()?;
    let n: Vec<f64> = shape.sizes().into_iter().map(|v| v as f64).collect();
    let k: Vec<f64> = shape.half_degrees().into_iter().map(|v| v as f64).collect();
    let max_n = n.iter().copied().fold(0.0, f64::max);
    Ok(Blocks { n, k, max_n })
}

impl Blocks {
    /// `Σ_i f(n_i, k_i)` over blocks with `k_i > 0`.
    fn sum<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.n.iter().zip(&self.k).filter(|(_, &k)| k > 0.0).map(|(&n, &k)| f(n, k)).sum()
    }

    /// `ln Π (2k_i + 1)`.
    fn log_odd(&self) -> f64 {
        self.k.iter().map(|k| (2.0 * k + 1.0).ln()).sum()
    }

    /// `ln Π (2k_i + n_i/2)^{-k_i/2}`.
    fn log_det_lower(&self) -> f64 {
        self.sum(|n, k| -(k / 2.0) * (2.0 * k + n / 2.0).ln())
    }
}

/// `ln |B_M|`, the volume of the unit `M`-ball.
fn log_ball_volume(m: usize) -> f64 {
    let m = m as f64;
    (m / 2.0) * PI.ln() - ln_gamma(m / 2.0 + 1.0)
}

/// The three bound pairs on `μ` for the nonnegative, SOS and linear-power
/// cones.
pub fn thm_main_bounds(shape: &Shape, constants: &Constants) -> Result<BoundReport> {
    let b = blocks(shape)?;
    let m = shape.block_count() as f64;
    let mut rep = BoundReport::new("main", Some(shape), constants);

    let pos_lower = (-(m * 4f64.ln()) - 0.5 * b.max_n.ln() - 0.5 * b.log_odd()).exp();
    rep.put(
        "pos",
        ConeBound::new(Some(pos_lower), Some(constants.c0), "4^-m max(n)^-1/2 prod(2k+1)^-1/2 <= mu <= c0", vec![]),
    );

    let sq_lower = constants.c1 * b.log_det_lower().exp();
    let sq_upper = constants.c2 * b.sum(|n, k| (k / 2.0) * (constants.c * k / (n + k)).ln()).exp();
    rep.put(
        "sq",
        ConeBound::new(
            Some(sq_lower),
            Some(sq_upper),
            "c1 prod(2k+n/2)^(-k/2) <= mu <= c2 prod(c k/(n+k))^(k/2)",
            constants.unresolved(&["c1", "c2"]),
        ),
    );

    let lin_lower = constants.c3 * b.log_det_lower().exp();
    let lin_upper =
        (0.5 * b.max_n.ln() + m * 4f64.ln() + 0.5 * b.log_odd() + b.sum(|n, k| -(k / 2.0) * (n / (2.0 * k)).ln()))
            .exp();
    rep.put(
        "lin",
        ConeBound::new(
            Some(lin_lower),
            Some(lin_upper),
            "c3 prod(2k+n/2)^(-k/2) <= mu <= max(n)^1/2 prod 4(2k+1)^1/2 prod(n/2k)^(-k/2)",
            constants.unresolved(&["c3"]),
        ),
    );

    if shape.block_count() == 1 {
        let n = shape.sizes()[0];
        let k = shape.half_degrees()[0] as usize;
        if n >= 3 && k >= 2 {
            rep.comparison = Some(Box::new(blekherman_bounds(n, k, constants)?));
        }
    }
    Ok(rep)
}

/// Ratio bounds `μ(Sq)/μ(Pos)` for `N=(2,n−2), K=(2k−2,2)` (variant 1) and
/// for `k` equal blocks of size `n/k` with `K=(2,…,2)` (variant 2).
pub fn corollary_bounds(n: usize, k: usize, variant: u8, constants: &Constants) -> Result<BoundReport> {
    let (nf, kf) = (n as f64, k as f64);
    match variant {
        1 => {
            if n < 3 || k < 2 {
                return Err(Error::InvalidParameter("variant 1 needs n ≥ 3 and k ≥ 2".into()));
            }
            let shape = Shape::from_lists(&[2, n - 2], &[2 * k as u32 - 2, 2])?;
            let mut rep = BoundReport::new("corollary-1", Some(&shape), constants);
            let lower = constants.c1 * (((1.0 - kf) / 2.0) * (2.0 * kf - 1.0).ln() - 0.5 * (nf + 2.0).ln()).exp();
            rep.put(
                "ratio",
                ConeBound::new(
                    Some(lower),
                    Some(1.0),
                    "c1 (2k-1)^((1-k)/2) (n+2)^(-1/2) <= ratio <= 1",
                    constants.unresolved(&["c1"]),
                ),
            );
            Ok(rep)
        }
        2 => {
            if k == 0 || n == 0 || !n.is_multiple_of(k) {
                return Err(Error::InvalidParameter("variant 2 needs k ≥ 1 dividing n".into()));
            }
            let shape = Shape::from_lists(&vec![n / k; k], &vec![2; k])?;
            let mut rep = BoundReport::new("corollary-2", Some(&shape), constants);
            let c = if constants.is_set("c") { constants.c } else { 1024.0 * E / 48.0 };
            let lower = constants.c1 * (-(kf / 2.0) * (2.0 + nf / (2.0 * kf)).ln()).exp();
            let exponent = (1.0 - kf) / 2.0;
            let upper = constants.c2 * (exponent * (nf / (c * kf)).ln()).exp();
            let mut bound = ConeBound::new(
                Some(lower),
                Some(upper),
                "c1 (2+n/2k)^(-k/2) <= ratio <= c2 (n/(c k))^((1-k)/2), c = 2^10 e/48",
                constants.unresolved(&["c1", "c2"]),
            );
            bound.formula.push_str(&format!("; upper exponent {exponent}"));
            rep.put("ratio", bound);
            Ok(rep)
        }
        _ => Err(Error::InvalidParameter(format!("unknown corollary variant {variant}"))),
    }
}

/// Upper exponent of `n/(ck)` in the second corollary variant.
pub fn corollary_upper_exponent(k: usize) -> f64 {
    (1.0 - k as f64) / 2.0
}

/// The classical homogeneous ratio bounds for `n` variables, degree `2k`.
pub fn blekherman_bounds(n: usize, k: usize, constants: &Constants) -> Result<BoundReport> {
    if n < 3 || k < 2 {
        return Err(Error::InvalidParameter("comparison bounds need n ≥ 3 and k ≥ 2".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let lf = |x: f64| ln_gamma(x + 1.0);
    let log_lower = ((kf + 1.0) / 2.0) * nf.ln() - kf * (nf / 2.0 + 2.0 * kf).ln() + lf(kf) + lf(kf - 1.0)
        - 2.0 * kf * 4f64.ln()
        - lf(2.0 * kf);
    let log_upper = 2.0 * kf * 4f64.ln() + lf(2.0 * kf) + 0.5 * kf.ln() - lf(kf) + ((1.0 - kf) / 2.0) * nf.ln();
    let mut rep = BoundReport::new("homogeneous", None, constants);
    rep.put(
        "ratio",
        ConeBound::new(
            Some(constants.c1 * log_lower.exp()),
            Some(constants.c2 * log_upper.exp()),
            "n^((k+1)/2)/(n/2+2k)^k c1 k!(k-1)!/(4^2k (2k)!) <= ratio <= c2 4^2k (2k)! k^1/2/k! n^((1-k)/2)",
            constants.unresolved(&["c1", "c2"]),
        ),
    );
    Ok(rep)
}

/// Exponent of `n` in the homogeneous upper bound.
pub fn blekherman_upper_exponent(k: usize) -> f64 {
    (1.0 - k as f64) / 2.0
}

/// Section-level bounds with exponent `1/M`: the nonnegative section's
/// constant and gauge bound, the SOS section's Urysohn and Santaló bounds,
/// the linear-power section, and the bracket for the kernel hull.
pub fn section_bounds(shape: &Shape, constants: &Constants) -> Result<BoundReport> {
    let b = blocks(shape)?;
    let m_blocks = shape.block_count();
    let two_blocks = m_blocks == 2;
    let big_m = shape.dim() - 1;
    let mut rep = BoundReport::new("section", Some(shape), constants);

    let mut nice = ConeBound::new(None, Some(5.0), "absolute constant <= 5", vec![]);
    nice.two_block_display = !two_blocks;
    rep.put("pos_upper_constant", nice);
    if big_m > 0 {
        let mf = big_m as f64;
        let value = (1.0 - 0.5 * mf.ln() - log_ball_volume(big_m) / mf).exp();
        rep.put("pos_upper_ball", ConeBound::new(None, Some(value), "e/(sqrt(M) |B_M|^(1/M))", vec![]));
    }

    let loose = (-0.5 * (16f64.ln() + b.max_n.ln() + b.log_odd())).exp();
    let mut lower = ConeBound::new(Some(loose), None, "1/sqrt(16 max(n) prod(2k+1))", vec![]);
    lower.two_block_display = !two_blocks;
    rep.put("pos_lower_gauge", lower);
    let main_pos = (-(m_blocks as f64 * 4f64.ln()) - 0.5 * b.max_n.ln() - 0.5 * b.log_odd()).exp();
    rep.put("pos_lower_main", ConeBound::new(Some(main_pos), None, "4^-m max(n)^-1/2 prod(2k+1)^-1/2", vec![]));

    let ksum: f64 = b.k.iter().sum();
    let urysohn = (4.5f64.ln() + (ksum / 2.0) * (1024.0 * E).ln() + b.sum(|n, k| (k / 2.0) * (k / (n + k)).ln())).exp();
    let mut sq_upper = ConeBound::new(None, Some(urysohn), "9/2 (2^10 e)^(sum k/2) prod(k/(n+k))^(k/2)", vec![]);
    sq_upper.two_block_display = !two_blocks;
    rep.put("sq_upper_urysohn", sq_upper);

    let balls = ball_ratio_bounds(shape)?;
    let c_set = constants.is_set("c");
    let c_santalo = if c_set { constants.c } else { 1.0 };
    let unresolved_c = if c_set { vec![] } else { vec!["c".to_string()] };
    rep.put(
        "sq_lower_santalo",
        ConeBound::new(
            Some(c_santalo.sqrt() * balls.scaled_ball_ratio),
            None,
            "sqrt(c C) (|B_D|/|B|)^(1/dim)",
            unresolved_c.clone(),
        ),
    );
    rep.put(
        "sq_lower_bracket",
        ConeBound::new(Some(c_santalo * b.log_det_lower().exp()), None, "c prod(1/(2k+n/2))^(k/2)", unresolved_c),
    );

    let lin_lower = (b.sum(|n, k| (k / 2.0) * ((1.0 / k) / (2.0 + n / (2.0 * k))).ln())).exp();
    let lin_upper =
        (4f64.ln() + 0.5 * (b.max_n.ln() + b.log_odd()) + b.sum(|n, k| -(k / 2.0) * (1.0 + n / (2.0 * k)).ln())).exp();
    let c0_unresolved = if constants.is_set("c0") { vec![] } else { vec!["c0".to_string()] };
    let c0_low = if constants.is_set("c0") { constants.c0 } else { 1.0 };
    let mut lin = ConeBound::new(
        Some(c0_low * lin_lower),
        Some(lin_upper),
        "c0 prod((1/k)/(2+n/2k))^(k/2) <= mu <= 4 sqrt(max(n) prod(2k+1)) prod(1/(1+n/2k))^(k/2)",
        c0_unresolved.clone(),
    );
    lin.two_block_display = !two_blocks;
    rep.put("lin_section", lin);

    let hull_upper = 4.0 * (0.5 * (b.max_n.ln() + b.log_odd())).exp();
    let mut hull = ConeBound::new(
        Some(c0_low),
        Some(hull_upper),
        "c0 <= (|A|/|B|)^(1/M) <= 4 sqrt(max(n) prod(2k+1))",
        c0_unresolved,
    );
    hull.two_block_display = !two_blocks;
    rep.put("kernel_hull", hull);

    rep.put(
        "det_t_root",
        ConeBound::new(
            Some(balls.det_lower),
            Some(balls.det_upper),
            &format!("prod(1/(2k+n/2))^(k/2) <= |det T|^(1/dim) = {} <= prod(1/(1+n/2k))^(k/2)", balls.det_root),
            vec![],
        ),
    );
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(s: &str) -> Shape {
        s.parse().unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn main_bounds_at_two_by_two() {
        let rep = thm_main_bounds(&shape("N=2,2 K=2,2"), &Constants::default()).unwrap();
        let pos = rep.get("pos").unwrap();
        assert!(close(pos.lower.unwrap(), 1.0 / (48.0 * 2f64.sqrt())));
        assert_eq!(pos.upper, Some(5.0));
        let sq = rep.get("sq").unwrap();
        assert!(close(sq.upper.unwrap(), 1024.0 * E / 3.0));
        assert_eq!(sq.unresolved, vec!["c1".to_string(), "c2".to_string()]);
        assert!(rep.all_finite_positive());
        assert!(rep.records.values().all(ConeBound::consistent));
    }

    #[test]
    fn corollary_examples() {
        let c = Constants::default();
        let v2 = corollary_bounds(16, 4, 2, &c).unwrap();
        let ratio = v2.get("ratio").unwrap();
        assert!(close(ratio.lower.unwrap(), 1.0 / 16.0));
        assert_eq!(corollary_upper_exponent(4), -1.5);
        let v1 = corollary_bounds(6, 3, 1, &c).unwrap();
        assert_eq!(v1.get("ratio").unwrap().upper, Some(1.0));
        assert!(corollary_bounds(10, 4, 2, &c).is_err());
        assert!(corollary_bounds(10, 2, 3, &c).is_err());
    }

    #[test]
    fn homogeneous_comparison() {
        let c = Constants::default();
        let rep = blekherman_bounds(16, 4, &c).unwrap();
        let lower = rep.get("ratio").unwrap().lower.unwrap();
        let expected = 16f64.powf(2.5) / 16f64.powi(4) * (24.0 * 6.0) / (4f64.powi(8) * 40320.0);
        assert!(close(lower, expected));
        assert_eq!(blekherman_upper_exponent(4), -1.5);
        let small = blekherman_bounds(1 << 20, 2, &c).unwrap();
        let big = blekherman_bounds(1 << 10, 2, &c).unwrap();
        let (s, b) = (small.get("ratio").unwrap(), big.get("ratio").unwrap());
        assert!(s.lower.unwrap() < b.lower.unwrap() && s.upper.unwrap() < b.upper.unwrap());
        assert!(blekherman_bounds(2, 2, &c).is_err());
    }

    #[test]
    fn section_examples() {
        let rep = section_bounds(&shape("N=2,2 K=2,2"), &Constants::default()).unwrap();
        assert!(close(rep.get("pos_lower_gauge").unwrap().lower.unwrap(), 1.0 / (12.0 * 2f64.sqrt())));
        assert_eq!(rep.get("pos_upper_constant").unwrap().upper, Some(5.0));
        assert!(close(rep.get("sq_upper_urysohn").unwrap().upper.unwrap(), 1.5 * 1024.0 * E));
        let gauge = rep.get("pos_lower_gauge").unwrap().lower.unwrap();
        let main = rep.get("pos_lower_main").unwrap().lower.unwrap();
        assert!(close(gauge / main, 4.0));
        assert!(rep.get("pos_upper_ball").unwrap().upper.unwrap() <= 5.0);
        assert!(rep.all_finite_positive());
    }

    #[test]
    fn constants_parse() {
        let c: Constants = "c1=0.5, c0=7".parse().unwrap();
        assert_eq!(c.c1, 0.5);
        assert_eq!(c.c0, 5.0);
        assert_eq!(c.overridden, vec!["c1".to_string(), "c0".to_string()]);
        assert!("c9=1".parse::<Constants>().is_err());
        assert!("c1".parse::<Constants>().is_err());
        assert!("c1=-1".parse::<Constants>().is_err());
        let rep = thm_main_bounds(&shape("N=3 K=4"), &"c1=1,c2=1".parse().unwrap()).unwrap();
        assert!(rep.get("sq").unwrap().unresolved.is_empty());
        assert!(rep.comparison.is_some());
    }
}
