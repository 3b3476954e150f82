//! Block structure of a multihomogeneous space and its monomial basis.

use std::fmt;
use std::ops::{Deref, Range};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static EXACT_DIM_CAP: AtomicUsize = AtomicUsize::new(2000);

/// Largest `dim P` accepted by the exact (rational) solvers.
pub fn exact_dim_cap() -> usize {
    EXACT_DIM_CAP.load(Ordering::Relaxed)
}

pub fn set_exact_dim_cap(cap: usize) {
    EXACT_DIM_CAP.store(cap, Ordering::Relaxed);
}

/// One variable block: `n` variables, total degree `degree` in them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Block {
    pub n: usize,
    pub degree: u32,
}

/// The pair `(N, K)`: block sizes and blockwise degrees.
///
/// Degrees are stored as the actual blockwise degree (`2k_i` for the even
/// spaces the cone machinery works with). Odd degrees are representable so
/// that products, derivatives and half-degree Gram bases stay inside the type;
/// operations that need even degrees check via [`Shape::require_even`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shape {
    blocks: Vec<Block>,
}

impl Shape {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidShape("no blocks".into()));
        }
        if let Some(i) = blocks.iter().position(|b| b.n == 0) {
            return Err(Error::InvalidShape(format!("block {} has no variables", i + 1)));
        }
        Ok(Shape { blocks })
    }

    /// Builds a shape from parallel lists of block sizes and degrees.
    pub fn from_lists(ns: &[usize], degrees: &[u32]) -> Result<Self> {
        if ns.len() != degrees.len() {
            return Err(Error::InvalidShape(format!("{} block sizes but {} degrees", ns.len(), degrees.len())));
        }
        Shape::new(ns.iter().zip(degrees).map(|(&n, &degree)| Block { n, degree }).collect())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_vars(&self) -> usize {
        self.blocks.iter().map(|b| b.n).sum()
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.degree).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.n).collect()
    }

    /// Half-degrees `k_i`; only meaningful for even shapes.
    pub fn half_degrees(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.degree / 2).collect()
    }

    /// Variable index range of block `i`.
    pub fn block_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.blocks[..i].iter().map(|b| b.n).sum();
        start..start + self.blocks[i].n
    }

    /// Same block sizes, new degrees.
    pub fn with_degrees(&self, degrees: &[u32]) -> Result<Shape> {
        Shape::from_lists(&self.sizes(), degrees)
    }

    /// `dim P_{N,K}` as the product of per-block monomial counts.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| binomial(b.n + b.degree as usize - 1, b.degree as usize)).product()
    }

    /// Dimension of the section `{p : <p, r> = 1}`.
    pub fn section_dim(&self) -> usize {
        self.dim() - 1
    }

    pub fn require_even(&self) -> Result<()> {
        match self.blocks.iter().position(|b| b.degree % 2 == 1) {
            Some(i) => Err(Error::OddDegree { block: i, degree: self.blocks[i].degree }),
            None => Ok(()),
        }
    }

    /// Shape of `P_{N,K/2}`, the degrees of the square roots in an SOS.
    pub fn half(&self) -> Result<Shape> {
        self.require_even()?;
        self.with_degrees(&self.half_degrees())
    }

    pub fn require_exact_size(&self) -> Result<()> {
        let dim = self.dim();
        let cap = exact_dim_cap();
        if dim > cap {
            return Err(Error::TooLarge { dim, cap });
        }
        Ok(())
    }

    /// The index set of even degree vectors `alpha <= K`, lexicographic.
    pub fn alpha_indices(&self) -> Result<Vec<Vec<u32>>> {
        self.require_even()?;
        Ok(self.harmonic_indices())
    }

    /// Degree vectors `alpha <= K` with `alpha_i ≡ k_i (mod 2)`, lexicographic.
    pub fn harmonic_indices(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for b in &self.blocks {
            let mut next = Vec::with_capacity(out.len() * (b.degree as usize / 2 + 1));
            for prefix in &out {
                for a in (b.degree % 2..=b.degree).step_by(2) {
                    let mut v = prefix.clone();
                    v.push(a);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    pub(crate) fn same_sizes(&self, other: &Shape) -> bool {
        self.block_count() == other.block_count() && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.n == b.n)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ns: Vec<String> = self.blocks.iter().map(|b| b.n.to_string()).collect();
        let ks: Vec<String> = self.blocks.iter().map(|b| b.degree.to_string()).collect();
        write!(f, "N={} K={}", ns.join(","), ks.join(","))
    }
}

impl FromStr for Shape {
    type Err = Error;

    /// Parses literals of the form `N=3,2 K=2,3`.
    fn from_str(s: &str) -> Result<Self> {
        let mut ns = None;
        let mut ks = None;
        for part in s.split_whitespace() {
            let (key, value) =
                part.split_once('=').ok_or_else(|| Error::Parse(format!("expected KEY=values, got `{part}`")))?;
            match key {
                "N" | "n" => ns = Some(parse_list::<usize>(value)?),
                "K" | "k" => ks = Some(parse_list::<u32>(value)?),
                _ => return Err(Error::Parse(format!("unknown shape key `{key}`"))),
            }
        }
        match (ns, ks) {
            (Some(ns), Some(ks)) => Shape::from_lists(&ns, &ks),
            _ => Err(Error::Parse(format!("shape literal `{s}` needs both N= and K="))),
        }
    }
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| Error::Parse(format!("bad number `{t}` in shape literal"))))
        .collect()
}

/// Exponent vector over all `n` variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn block_degree(&self, shape: &Shape, i: usize) -> u32 {
        self.0[shape.block_range(i)].iter().sum()
    }

    /// Whether this is a monomial of `P_{N,K}` for `shape`.
    pub fn fits(&self, shape: &Shape) -> bool {
        self.0.len() == shape.n_vars()
            && (0..shape.block_count()).all(|i| self.block_degree(shape, i) == shape.blocks[i].degree)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }
}

impl Deref for MultiIndex {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

/// Monomials of `P_{N,K}` in graded-lex order: blocks are compared
/// left to right, and inside a block exponents descend lexicographically.
pub fn monomial_basis(shape: &Shape) -> Vec<MultiIndex> {
    let per_block: Vec<Vec<Vec<u32>>> = shape.blocks().iter().map(|b| compositions(b.degree, b.n)).collect();
    let mut out: Vec<Vec<u32>> = vec![Vec::with_capacity(shape.n_vars())];
    for block in &per_block {
        let mut next = Vec::with_capacity(out.len() * block.len());
        for prefix in &out {
            for c in block {
                let mut v = prefix.clone();
                v.extend_from_slice(c);
                next.push(v);
            }
        }
        out = next;
    }
    out.into_iter().map(MultiIndex).collect()
}

/// All length-`parts` vectors of nonnegative integers summing to `total`,
/// lexicographically descending.
pub(crate) fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}
