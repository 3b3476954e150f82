//! Floating-point view of a form for evaluation and optimization.

use nalgebra::DMatrix;

use crate::shape::{monomial_basis, MultiIndex, Shape};

/// A form with `f64` coefficients over a fixed monomial list.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatPoly {
    shape: Shape,
    basis: Vec<MultiIndex>,
    coeffs: Vec<f64>,
    max_exp: u32,
}

impl FloatPoly {
    pub fn new(shape: Shape, basis: Vec<MultiIndex>, coeffs: Vec<f64>) -> Self {
        assert_eq!(basis.len(), coeffs.len(), "basis and coefficient lengths differ");
        let max_exp = basis.iter().flat_map(|m| m.iter().copied()).max().unwrap_or(0);
        FloatPoly { shape, basis, coeffs, max_exp }
    }

    /// Coefficients over the graded-lex monomial basis of `shape`.
    pub fn from_coeffs(shape: &Shape, coeffs: Vec<f64>) -> Self {
        FloatPoly::new(shape.clone(), monomial_basis(shape), coeffs)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn basis(&self) -> &[MultiIndex] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn neg(&self) -> FloatPoly {
        FloatPoly { coeffs: self.coeffs.iter().map(|c| -c).collect(), ..self.clone() }
    }

    pub fn scale(&self, s: f64) -> FloatPoly {
        FloatPoly { coeffs: self.coeffs.iter().map(|c| c * s).collect(), ..self.clone() }
    }

    /// Flat table `pw[j * stride + e] = x_j^e`.
    fn powers(&self, x: &[f64]) -> (Vec<f64>, usize) {
        let stride = self.max_exp as usize + 1;
        let mut pw = Vec::with_capacity(x.len() * stride);
        for &xi in x {
            let mut acc = 1.0;
            for _ in 0..stride {
                pw.push(acc);
                acc *= xi;
            }
        }
        (pw, stride)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let (pw, stride) = self.powers(x);
        self.basis
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| c * m.iter().enumerate().map(|(j, &e)| pw[j * stride + e as usize]).product::<f64>())
            .sum()
    }

    /// Value and Euclidean gradient at `x`.
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let (pw, stride) = self.powers(x);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (m, &c) in self.basis.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            value += c * m.iter().enumerate().map(|(j, &e)| pw[j * stride + e as usize]).product::<f64>();
            for (j, &ej) in m.iter().enumerate() {
                if ej == 0 {
                    continue;
                }
                let mut t = c * ej as f64 * pw[j * stride + ej as usize - 1];
                for (l, &el) in m.iter().enumerate() {
                    if l != j {
                        t *= pw[l * stride + el as usize];
                    }
                }
                grad[j] += t;
            }
        }
        value
    }

    /// Euclidean Hessian at `x`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        let (pw, stride) = self.powers(x);
        let mut h = DMatrix::zeros(n, n);
        for (m, &c) in self.basis.iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            for j in 0..n {
                for l in j..n {
                    let mut e = m.0.clone();
                    let mut t = c;
                    if j == l {
                        if e[j] < 2 {
                            continue;
                        }
                        t *= (e[j] * (e[j] - 1)) as f64;
                        e[j] -= 2;
                    } else {
                        if e[j] == 0 || e[l] == 0 {
                            continue;
                        }
                        t *= (e[j] * e[l]) as f64;
                        e[j] -= 1;
                        e[l] -= 1;
                    }
                    for (k, &ek) in e.iter().enumerate() {
                        t *= pw[k * stride + ek as usize];
                    }
                    h[(j, l)] += t;
                    if j != l {
                        h[(l, j)] += t;
                    }
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_polynomial;

    #[test]
    fn gradient_and_hessian_match_differences() {
        let s: Shape = "N=2,2 K=2,2".parse().unwrap();
        let p = parse_polynomial(&s, "3 x1^2 x3^2 - x1 x2 x3 x4 + 1/2 x2^2 x4^2 + x1^2 x3 x4").unwrap().to_float();
        let x = [0.3, -0.7, 0.4, 0.9];
        let mut g = [0.0; 4];
        p.eval_grad(&x, &mut g);
        let h = p.hessian(&x);
        let step = 1e-6;
        for j in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += step;
            xm[j] -= step;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * step);
            assert!((fd - g[j]).abs() < 1e-8);
            let mut gp = [0.0; 4];
            let mut gm = [0.0; 4];
            p.eval_grad(&xp, &mut gp);
            p.eval_grad(&xm, &mut gm);
            for l in 0..4 {
                assert!(((gp[l] - gm[l]) / (2.0 * step) - h[(l, j)]).abs() < 1e-6);
            }
        }
    }
}
