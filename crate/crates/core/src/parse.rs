//! Text grammar for polynomials: `3/2 x1^2 x2 - x3^3 + 4`.
//!
//! Terms are joined by `+`/`-`. A term is an optional rational (`p/q` or an
//! integer) followed by factors `x<i>` or `x<i>^<e>`, optionally separated
//! by `*`. Variables are numbered from 1.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::shape::{MultiIndex, Shape};
use crate::Rational;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(BigInt),
    Var(usize),
    Plus,
    Minus,
    Slash,
    Caret,
    Star,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                out.push(Token::Int(s.parse().expect("digits")));
            }
            'x' | 'X' => {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if start == i {
                    return Err(Error::Parse(format!("variable without index at offset {start}")));
                }
                let s: String = chars[start..i].iter().collect();
                let idx: usize = s.parse().map_err(|_| Error::Parse(format!("bad variable index `{s}`")))?;
                out.push(Token::Var(idx));
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

/// Parses `text` as an element of `P_{N,K}` for `shape`.
pub fn parse_polynomial(shape: &Shape, text: &str) -> Result<Polynomial> {
    let tokens = tokenize(text)?;
    if tokens.is_empty() {
        return Err(Error::Parse("empty polynomial".into()));
    }
    let n = shape.n_vars();
    let mut pos = 0;
    let mut terms = Vec::new();
    let mut first = true;
    while pos < tokens.len() {
        let mut sign = Rational::one();
        match tokens[pos] {
            Token::Plus => pos += 1,
            Token::Minus => {
                sign = -sign;
                pos += 1;
            }
            _ if first => {}
            ref t => return Err(Error::Parse(format!("expected `+` or `-`, found {t:?}"))),
        }
        first = false;

        let mut coeff = Rational::one();
        let mut saw_any = false;
        if let Some(Token::Int(num)) = tokens.get(pos) {
            let num = num.clone();
            pos += 1;
            saw_any = true;
            if tokens.get(pos) == Some(&Token::Slash) {
                pos += 1;
                match tokens.get(pos) {
                    Some(Token::Int(den)) if !den.is_zero() => {
                        coeff = Rational::new(num, den.clone());
                        pos += 1;
                    }
                    _ => return Err(Error::Parse("expected nonzero denominator after `/`".into())),
                }
            } else {
                coeff = Rational::from_integer(num);
            }
        }

        let mut exps = vec![0u32; n];
        loop {
            if tokens.get(pos) == Some(&Token::Star) {
                pos += 1;
            }
            match tokens.get(pos) {
                Some(Token::Var(idx)) => {
                    let idx = *idx;
                    if idx == 0 || idx > n {
                        return Err(Error::Parse(format!("variable x{idx} outside x1..x{n}")));
                    }
                    pos += 1;
                    let mut e = 1u32;
                    if tokens.get(pos) == Some(&Token::Caret) {
                        pos += 1;
                        match tokens.get(pos) {
                            Some(Token::Int(v)) => {
                                e = u32::try_from(v.clone())
                                    .map_err(|_| Error::Parse(format!("exponent {v} too large")))?;
                                pos += 1;
                            }
                            _ => return Err(Error::Parse("expected exponent after `^`".into())),
                        }
                    }
                    exps[idx - 1] += e;
                    saw_any = true;
                }
                _ => break,
            }
        }
        if !saw_any {
            return Err(Error::Parse("empty term".into()));
        }
        let m = MultiIndex(exps);
        if !m.fits(shape) {
            let degs: Vec<u32> = (0..shape.block_count()).map(|i| m.block_degree(shape, i)).collect();
            return Err(Error::Parse(format!("term with block degrees {degs:?} does not fit shape {shape}")));
        }
        terms.push((m, sign * coeff));
    }
    Polynomial::from_terms(shape, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rationals_and_powers() {
        let s: Shape = "N=2 K=2".parse().unwrap();
        let p = parse_polynomial(&s, "3/4*x1^2 - x1*x2 + 2 x2 x2").unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.coeff(&MultiIndex(vec![0, 2])), Rational::from_integer(2.into()));
        assert_eq!(p.coeff(&MultiIndex(vec![2, 0])), Rational::new(3.into(), 4.into()));
    }

    #[test]
    fn constants_and_zero() {
        let s: Shape = "N=2 K=0".parse().unwrap();
        assert_eq!(parse_polynomial(&s, "5").unwrap().constant_value(), Some(Rational::from_integer(5.into())));
        assert!(parse_polynomial(&s, "0").unwrap().is_zero());
    }

    #[test]
    fn rejects_bad_input() {
        let s: Shape = "N=2 K=2".parse().unwrap();
        for bad in ["", "x1", "x3^2", "x1^2 x2", "1/0 x1^2", "x1^2 x2^2 +", "y1^2", "x1^2 x2^0 x2 x1 -"] {
            assert!(parse_polynomial(&s, bad).is_err(), "{bad}");
        }
    }
}
