//! Linear differential operators `L = Σ a_α(x) ∂^α` with closed-form coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::index::MultiIndex;
use crate::jet::{JetValue, Taylor};
use crate::poly::{NewtonPolynomial, Precision, ProductTerm};

#[derive(Clone, Debug)]
pub struct OperatorTerm {
    pub coeff: Expr,
    pub alpha: MultiIndex,
}

/// Ellipticity bounds `λ ≤ a(x)ξ·ξ/|ξ|² ≤ Λ`. Recorded only; never enforced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipticity {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

#[derive(Clone, Debug)]
pub struct DifferentialOperator {
    dim: usize,
    terms: Vec<OperatorTerm>,
    pub ellipticity: Option<Ellipticity>,
}

/// Serialized operator: `{"terms": [{"coeff": "x1", "alpha": [1]}], ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub terms: Vec<OperatorTermSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ellipticity: Option<Ellipticity>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorTermSpec {
    pub coeff: String,
    pub alpha: Vec<u32>,
}

impl DifferentialOperator {
    pub fn new(dim: usize, terms: Vec<OperatorTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidInput("operator has no terms".into()));
        }
        for t in &terms {
            if t.alpha.dim() != dim || t.coeff.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: if t.alpha.dim() != dim {
                        t.alpha.dim()
                    } else {
                        t.coeff.dim()
                    },
                });
            }
        }
        Ok(DifferentialOperator {
            dim,
            terms,
            ellipticity: None,
        })
    }

    pub fn from_spec(spec: &OperatorSpec, vars: &[&str]) -> Result<Self> {
        let terms = spec
            .terms
            .iter()
            .map(|t| {
                Ok(OperatorTerm {
                    coeff: parse(&t.coeff, vars)?,
                    alpha: MultiIndex::new(t.alpha.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut op = Self::new(vars.len(), terms)?;
        op.ellipticity = spec.ellipticity;
        Ok(op)
    }

    /// Convenience: parse `(coefficient, alpha)` pairs.
    pub fn from_pairs(vars: &[&str], pairs: &[(&str, &[u32])]) -> Result<Self> {
        let spec = OperatorSpec {
            terms: pairs
                .iter()
                .map(|(c, a)| OperatorTermSpec {
                    coeff: c.to_string(),
                    alpha: a.to_vec(),
                })
                .collect(),
            ellipticity: None,
        };
        Self::from_spec(&spec, vars)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[OperatorTerm] {
        &self.terms
    }

    /// Highest `|α|` among the terms.
    pub fn order(&self) -> u32 {
        self.terms.iter().map(|t| t.alpha.total()).max().unwrap_or(0)
    }

    /// Box of derivatives the operator reads.
    pub fn derivative_bound(&self) -> MultiIndex {
        let mut b = vec![0u32; self.dim];
        for t in &self.terms {
            for (bi, &a) in b.iter_mut().zip(t.alpha.as_slice()) {
                *bi = (*bi).max(a);
            }
        }
        MultiIndex::new(b)
    }

    /// Evaluated coefficients `a_α(x)` in term order.
    pub fn coefficients_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.terms.iter().map(|t| t.coeff.eval(x)).collect()
    }

    /// `L h(x0)` from a jet of `h` at `x0` (the jet must cover every `α`).
    pub fn apply_jet(&self, jet: &JetValue) -> Result<f64> {
        Ok(self.apply_jet_parts(jet)?.0)
    }

    /// `(L h(x0), Σ |a_α ∂^α h|)`; the second number scales zero tests.
    pub fn apply_jet_parts(&self, jet: &JetValue) -> Result<(f64, f64)> {
        let coeffs = self.coefficients_at(&jet.base)?;
        let mut sum = 0.0;
        let mut mag = 0.0;
        for (t, c) in self.terms.iter().zip(coeffs) {
            let d = jet.get(&t.alpha).ok_or_else(|| {
                Error::InvalidInput(format!("jet bound {} does not cover {}", jet.bound, t.alpha))
            })?;
            sum += c * d;
            mag += (c * d).abs();
        }
        Ok((sum, mag))
    }

    pub fn apply_poly(&self, p: &NewtonPolynomial, x: &[f64], precision: Precision) -> Result<f64> {
        let jet = p.eval_jet(x, &self.derivative_bound(), precision)?;
        self.apply_jet(&jet)
    }

    pub fn apply_term_parts(&self, term: &ProductTerm, x: &[f64]) -> Result<(f64, f64)> {
        let jet = term.taylor::<f64>(x, &self.derivative_bound()).to_jet(x);
        self.apply_jet_parts(&jet)
    }

    /// Taylor series of `L p` around `x`, truncated to `bound`.
    pub fn apply_taylor(&self, p: &NewtonPolynomial, x: &[f64], bound: &MultiIndex) -> Result<Taylor<f64>> {
        let wide = bound.add(&self.derivative_bound());
        let pt = p.taylor::<f64>(x, &wide);
        let mut acc = Taylor::zero(bound);
        for t in &self.terms {
            let c = t.coeff.taylor::<f64>(x, bound)?;
            let d = pt.derivative(&t.alpha, bound).expect("bound widened by alpha");
            acc.add_assign(&c.mul(&d));
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applies_to_polynomial() {
        // L = x u'' + 2 u, u = x^3  ->  6x^2 + 2x^3 ; at 2: 24 + 16
        let op = DifferentialOperator::from_pairs(&["x1"], &[("x1", &[2]), ("2", &[0])]).unwrap();
        assert_eq!(op.order(), 2);
        let p = NewtonPolynomial {
            dimension: 1,
            terms: vec![ProductTerm::constant(1.0).with_factor(0, 0.0, 3)],
        };
        assert_eq!(op.apply_poly(&p, &[2.0], Precision::Double).unwrap(), 40.0);
        let t = op.apply_taylor(&p, &[2.0], &MultiIndex::new(vec![1])).unwrap();
        // d/dx (6x^2 + 2x^3) = 12x + 6x^2 = 48 at 2
        assert_eq!(t.to_jet(&[2.0]).derivatives(), &[40.0, 48.0]);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(DifferentialOperator::new(1, vec![]).is_err());
        assert!(DifferentialOperator::from_pairs(&["x1"], &[("1", &[1, 0])]).is_err());
    }
}
