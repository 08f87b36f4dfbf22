//! Multiindices and the graded lexicographic order.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Exponent vector `α = (α^1, …, α^n)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// All entries equal to `order`.
    pub fn uniform(dim: usize, order: u32) -> Self {
        MultiIndex(vec![order; dim])
    }

    /// Unit vector `e_axis`.
    pub fn unit(dim: usize, axis: usize) -> Self {
        let mut e = vec![0; dim];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `γ!` = Π γ^i!
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&g| factorial(g)).product()
    }

    /// Componentwise `self ≤ other`.
    pub fn le_componentwise(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if !other.le_componentwise(self) {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Graded lexicographic comparison. Errors on a length mismatch.
    pub fn cmp_grlex(&self, other: &MultiIndex) -> Result<Ordering, Error> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(grlex(&self.0, &other.0))
    }

    /// Every `γ ≤ self` componentwise, sorted ascending in grlex.
    pub fn lattice_below(&self) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; self.dim()];
        loop {
            out.push(MultiIndex(cur.clone()));
            // odometer increment
            let mut axis = 0;
            loop {
                if axis == cur.len() {
                    out.sort_by(|a, b| grlex(&a.0, &b.0));
                    return out;
                }
                if cur[axis] < self.0[axis] {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = 0;
                axis += 1;
            }
        }
    }

    /// Every `γ` with `|γ| ≤ order`, sorted ascending in grlex.
    pub fn total_degree_set(dim: usize, order: u32) -> Vec<MultiIndex> {
        MultiIndex::uniform(dim, order)
            .lattice_below()
            .into_iter()
            .filter(|g| g.total() <= order)
            .collect()
    }
}

fn grlex(a: &[u32], b: &[u32]) -> Ordering {
    let sa: u32 = a.iter().sum();
    let sb: u32 = b.iter().sum();
    match sa.cmp(&sb) {
        Ordering::Equal => {}
        ord => return ord,
    }
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            ord => return ord,
        }
    }
    Ordering::Equal
}

/// Free-function form of [`MultiIndex::cmp_grlex`].
pub fn compare_grlex(a: &MultiIndex, b: &MultiIndex) -> Result<Ordering, Error> {
    a.cmp_grlex(b)
}

impl Ord for MultiIndex {
    /// Grlex; indices of different length order by length first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.dim()
            .cmp(&other.dim())
            .then_with(|| grlex(&self.0, &other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ";")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

impl std::ops::Index<usize> for MultiIndex {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * f64::from(n - i) / f64::from(i + 1);
    }
    r.round()
}
