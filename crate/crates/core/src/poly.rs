//! Polynomials kept in node-anchored product form.
//!
//! A term is `c · Π (x^var − anchor)^exp`. Polynomials are sums of such terms in
//! construction order and are never expanded implicitly; [`to_monomial`] exists
//! for oracles and export only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::index::{binomial, MultiIndex};
use crate::jet::{JetValue, Scalar, Taylor};

/// Arithmetic used when evaluating product-form polynomials.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double (about 32 significant digits).
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            _ => Err(Error::InvalidInput(format!(
                "precision must be `double` or `extended`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factor {
    pub var: usize,
    pub anchor: f64,
    pub exp: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductTerm {
    #[serde(rename = "coeff")]
    pub coefficient: f64,
    pub factors: Vec<Factor>,
}

impl ProductTerm {
    pub fn constant(c: f64) -> Self {
        ProductTerm {
            coefficient: c,
            factors: Vec::new(),
        }
    }

    /// Multiply by `(x^var − anchor)^exp`, merging with an existing factor on
    /// the same anchor. Exponent-0 factors are dropped.
    pub fn with_factor(mut self, var: usize, anchor: f64, exp: u32) -> Self {
        self.push_factor(var, anchor, exp);
        self
    }

    pub fn push_factor(&mut self, var: usize, anchor: f64, exp: u32) {
        if exp == 0 {
            return;
        }
        if let Some(f) = self
            .factors
            .iter_mut()
            .find(|f| f.var == var && f.anchor == anchor)
        {
            f.exp += exp;
        } else {
            self.factors.push(Factor { var, anchor, exp });
        }
    }

    /// Product of two terms.
    pub fn times(&self, other: &ProductTerm) -> ProductTerm {
        let mut out = self.clone();
        out.coefficient *= other.coefficient;
        for f in &other.factors {
            out.push_factor(f.var, f.anchor, f.exp);
        }
        out
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.coefficient *= s;
        self
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|f| f.exp).sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.factors.iter().fold(self.coefficient, |acc, f| {
            acc * (x[f.var] - f.anchor).powi(f.exp as i32)
        })
    }

    /// Taylor series of the term around `x`, truncated to `bound`.
    pub fn taylor<T: Scalar>(&self, x: &[f64], bound: &MultiIndex) -> Taylor<T> {
        let mut t = Taylor::constant(bound, T::from_f(self.coefficient));
        for f in &self.factors {
            let series = factor_series::<T>(x[f.var], f.anchor, f.exp, bound[f.var]);
            t = t.mul_axis_series(f.var, &series);
        }
        t
    }
}

/// Coefficients of `(c + h)^e` in powers of `h`, up to `h^order`, where
/// `c = x − anchor`. Exact at `c = 0`.
fn factor_series<T: Scalar>(x: f64, anchor: f64, exp: u32, order: u32) -> Vec<T> {
    let c = T::from_f(x) - T::from_f(anchor);
    // powers by repeated multiplication; double-double `powi` is not exact at 0
    let mut pows = vec![T::one(); exp as usize + 1];
    for i in 1..pows.len() {
        pows[i] = pows[i - 1] * c;
    }
    (0..=order.min(exp))
        .map(|j| T::from_f(binomial(exp, j)) * pows[(exp - j) as usize])
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonPolynomial {
    pub dimension: usize,
    pub terms: Vec<ProductTerm>,
}

impl NewtonPolynomial {
    pub fn new(dimension: usize) -> Self {
        NewtonPolynomial {
            dimension,
            terms: Vec::new(),
        }
    }

    pub fn push(&mut self, term: ProductTerm) {
        self.terms.push(term);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(ProductTerm::degree).max().unwrap_or(0)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coefficient).collect()
    }

    fn check(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: point.len(),
            });
        }
        Ok(())
    }

    /// Plain double evaluation, summing term values.
    pub fn eval(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.eval(point)).sum()
    }

    pub fn taylor<T: Scalar>(&self, point: &[f64], bound: &MultiIndex) -> Taylor<T> {
        let mut acc = Taylor::zero(bound);
        for t in &self.terms {
            acc.add_assign(&t.taylor::<T>(point, bound));
        }
        acc
    }

    /// Derivatives `∂^γ p(point)` for every `γ ≤ bound`.
    pub fn eval_jet(&self, point: &[f64], bound: &MultiIndex, precision: Precision) -> Result<JetValue> {
        self.check(point)?;
        if bound.dim() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                found: bound.dim(),
            });
        }
        Ok(match precision {
            Precision::Double => self.taylor::<f64>(point, bound).to_jet(point),
            Precision::Extended => self.taylor::<TwoFloat>(point, bound).to_jet(point),
        })
    }

    /// Univariate shorthand: `(p, p', …, p^{(order)})` at `x`.
    pub fn eval_jet_1d(&self, x: f64, order: u32, precision: Precision) -> Result<Vec<f64>> {
        Ok(self
            .eval_jet(&[x], &MultiIndex::new(vec![order]), precision)?
            .derivatives()
            .to_vec())
    }

    /// Value at `point` in the requested precision.
    pub fn value(&self, point: &[f64], precision: Precision) -> Result<f64> {
        Ok(self
            .eval_jet(point, &MultiIndex::zero(self.dimension), precision)?
            .value())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("polynomial serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("polynomial JSON: {e}")))
    }

    /// `index,coefficient` rows in term order.
    pub fn coefficient_csv(&self) -> String {
        let mut out = String::from("index,coefficient\n");
        for (i, t) in self.terms.iter().enumerate() {
            out.push_str(&format!("{i},{:e}\n", t.coefficient));
        }
        out
    }
}

/// Expanded monomial form.
#[derive(Clone, Debug, PartialEq)]
pub enum Monomial {
    /// `c[i]` multiplies `x^i`.
    Dense(Vec<f64>),
    Sparse(BTreeMap<MultiIndex, f64>),
}

impl Monomial {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Monomial::Dense(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x[0] + a),
            Monomial::Sparse(m) => m
                .iter()
                .map(|(a, c)| {
                    c * a
                        .as_slice()
                        .iter()
                        .zip(x)
                        .map(|(&e, &xi)| xi.powi(e as i32))
                        .product::<f64>()
                })
                .sum(),
        }
    }
}

/// Expand to the monomial basis: dense vector when univariate, sparse map otherwise.
pub fn to_monomial(p: &NewtonPolynomial) -> Monomial {
    if p.dimension == 1 {
        let mut total = vec![0.0; p.degree() as usize + 1];
        for term in &p.terms {
            let mut acc = vec![term.coefficient];
            for f in &term.factors {
                for _ in 0..f.exp {
                    // multiply by (x - anchor)
                    let mut next = vec![0.0; acc.len() + 1];
                    for (i, &a) in acc.iter().enumerate() {
                        next[i + 1] += a;
                        next[i] -= a * f.anchor;
                    }
                    acc = next;
                }
            }
            for (i, a) in acc.into_iter().enumerate() {
                total[i] += a;
            }
        }
        if p.terms.is_empty() {
            total = vec![0.0];
        }
        return Monomial::Dense(total);
    }
    let n = p.dimension;
    let mut total: BTreeMap<MultiIndex, f64> = BTreeMap::new();
    for term in &p.terms {
        let mut acc: BTreeMap<MultiIndex, f64> = BTreeMap::new();
        acc.insert(MultiIndex::zero(n), term.coefficient);
        for f in &term.factors {
            for _ in 0..f.exp {
                let mut next = BTreeMap::new();
                let unit = MultiIndex::unit(n, f.var);
                for (a, c) in &acc {
                    *next.entry(a.add(&unit)).or_insert(0.0) += c;
                    *next.entry(a.clone()).or_insert(0.0) -= c * f.anchor;
                }
                acc = next;
            }
        }
        for (a, c) in acc {
            *total.entry(a).or_insert(0.0) += c;
        }
    }
    Monomial::Sparse(total)
}

/// Free-function form of [`NewtonPolynomial::eval_jet`].
pub fn poly_eval_jet(
    p: &NewtonPolynomial,
    point: &[f64],
    bound: &MultiIndex,
    precision: Precision,
) -> Result<JetValue> {
    p.eval_jet(point, bound, precision)
}
