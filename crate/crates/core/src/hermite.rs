//! Univariate extended Newton (Hermite) interpolation and interpolation that
//! preserves the values of given differential operators at the nodes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::index::{factorial, MultiIndex};
use crate::jet::{JetSource, JetValue, Scalar, Taylor};
use crate::operator::DifferentialOperator;
use crate::poly::{NewtonPolynomial, Precision, ProductTerm};

/// Optional `1/l!` scaling of the basis, i.e. `Φ_{m,k} / (m mod (k+1))!`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisScaling {
    #[default]
    Plain,
    Factorial,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HermiteOptions {
    pub precision: Precision,
    pub scaling: BasisScaling,
}

#[derive(Clone, Debug)]
pub struct HermiteProblem {
    nodes: Vec<f64>,
    k: u32,
    data: Vec<JetValue>,
}

fn check_distinct(nodes: &[f64]) -> Result<()> {
    if nodes.is_empty() {
        return Err(Error::InvalidInput("at least one node is required".into()));
    }
    for (i, &a) in nodes.iter().enumerate() {
        if !a.is_finite() {
            return Err(Error::InvalidInput(format!("node {i} is not finite")));
        }
        for (j, &b) in nodes.iter().enumerate().skip(i + 1) {
            if a == b {
                return Err(Error::SharedCoordinate {
                    first: i,
                    second: j,
                    axis: 0,
                    value: a,
                });
            }
        }
    }
    Ok(())
}

impl HermiteProblem {
    pub fn new(nodes: Vec<f64>, k: u32, data: Vec<JetValue>) -> Result<Self> {
        check_distinct(&nodes)?;
        if data.len() != nodes.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} data jets",
                nodes.len(),
                data.len()
            )));
        }
        for (i, (x, jet)) in nodes.iter().zip(&data).enumerate() {
            if jet.dim() != 1 || jet.bound.as_slice() != [k] {
                return Err(Error::InvalidInput(format!(
                    "data jet {i} must be univariate of order {k}, got bound {}",
                    jet.bound
                )));
            }
            if jet.base[0] != *x {
                return Err(Error::InvalidInput(format!(
                    "data jet {i} is based at {} instead of node {x}",
                    jet.base[0]
                )));
            }
        }
        Ok(HermiteProblem { nodes, k, data })
    }

    /// Sample jets of order `k` from `source` at every node.
    pub fn from_source(source: &dyn JetSource, nodes: Vec<f64>, k: u32) -> Result<Self> {
        let bound = MultiIndex::new(vec![k]);
        let data = nodes
            .iter()
            .map(|&x| source.jet(&[x], &bound))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes, k, data)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn data(&self) -> &[JetValue] {
        &self.data
    }

    /// Number of coefficients, `(N+1)(k+1)`.
    pub fn len(&self) -> usize {
        self.nodes.len() * (self.k as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `Φ_{m,k}(x) = (x − x_{m div (k+1)})^{m mod (k+1)} Π_{l < m div (k+1)} (x − x_l)^{k+1}`.
pub fn basis(m: usize, k: u32, nodes: &[f64]) -> Result<ProductTerm> {
    let block = k as usize + 1;
    let limit = nodes.len() * block;
    if m >= limit {
        return Err(Error::IndexOutOfRange { index: m, limit });
    }
    let (i, q) = (m / block, (m % block) as u32);
    let mut term = ProductTerm::constant(1.0);
    for &xl in &nodes[..i] {
        term.push_factor(0, xl, k + 1);
    }
    term.push_factor(0, nodes[i], q);
    Ok(term)
}

fn scaled_basis(m: usize, k: u32, nodes: &[f64], scaling: BasisScaling) -> Result<ProductTerm> {
    let t = basis(m, k, nodes)?;
    Ok(match scaling {
        BasisScaling::Plain => t,
        BasisScaling::Factorial => t.scaled(1.0 / factorial(m as u32 % (k + 1))),
    })
}

pub fn interpolate_hermite(prob: &HermiteProblem, opts: HermiteOptions) -> Result<NewtonPolynomial> {
    match opts.precision {
        Precision::Double => solve_blocks::<f64>(prob, opts.scaling),
        Precision::Extended => solve_blocks::<TwoFloat>(prob, opts.scaling),
    }
}

/// Block-forward solve. Each diagonal block is lower triangular, so every
/// coefficient follows from one division against the partial polynomial's jet.
fn solve_blocks<T: Scalar>(prob: &HermiteProblem, scaling: BasisScaling) -> Result<NewtonPolynomial> {
    let k = prob.k;
    let bound = MultiIndex::new(vec![k]);
    let mut p = NewtonPolynomial::new(1);
    for (i, (&xi, jet)) in prob.nodes.iter().zip(&prob.data).enumerate() {
        let at = [xi];
        let mut cur: Taylor<T> = p.taylor(&at, &bound);
        for q in 0..=k as usize {
            let term = scaled_basis(i * (k as usize + 1) + q, k, &prob.nodes, scaling)?;
            let bt: Taylor<T> = term.taylor(&at, &bound);
            let pivot = bt.coeffs()[q];
            if pivot == T::zero() || !pivot.is_finite() {
                return Err(Error::SingularBlock {
                    node: i,
                    condition: f64::INFINITY,
                });
            }
            let target = T::from_f(jet.derivatives()[q]).quot(T::from_f(factorial(q as u32)));
            let a = (target - cur.coeffs()[q]).quot(pivot).to_f();
            cur.add_scaled(T::from_f(a), &bt);
            p.push(term.scaled(a));
        }
    }
    Ok(p)
}

/// Coefficients of `p` against the basis it was built with: `a_m` of
/// `p = Σ a_m Φ_{m,k}`, or of `Σ a_m Φ_{m,k} / (m mod (k+1))!` when scaled.
pub fn hermite_coefficients(p: &NewtonPolynomial, k: u32, scaling: BasisScaling) -> Vec<f64> {
    p.terms
        .iter()
        .enumerate()
        .map(|(m, t)| match scaling {
            BasisScaling::Plain => t.coefficient,
            BasisScaling::Factorial => t.coefficient * factorial(m as u32 % (k + 1)),
        })
        .collect()
}

/// Diagonal blocks `A^{ii}_k[l][q] = Φ^{(l)}_{i(k+1)+q, k}(x_i)`.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub k: u32,
    pub blocks: Vec<DMatrix<f64>>,
}

impl BlockSystem {
    pub fn assemble(nodes: &[f64], k: u32) -> Result<Self> {
        check_distinct(nodes)?;
        let n = k as usize + 1;
        let bound = MultiIndex::new(vec![k]);
        let mut blocks = Vec::with_capacity(nodes.len());
        for (i, &xi) in nodes.iter().enumerate() {
            let mut a = DMatrix::zeros(n, n);
            for q in 0..n {
                let d = basis(i * n + q, k, nodes)?
                    .taylor::<f64>(&[xi], &bound)
                    .to_jet(&[xi]);
                for l in 0..n {
                    a[(l, q)] = d.derivatives()[l];
                }
            }
            blocks.push(a);
        }
        Ok(BlockSystem { k, blocks })
    }

    /// 2-norm condition number of every block.
    pub fn condition_numbers(&self) -> Vec<f64> {
        self.blocks.iter().map(condition_number).collect()
    }

    pub fn max_condition(&self) -> f64 {
        self.condition_numbers().into_iter().fold(0.0, f64::max)
    }
}

pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Full confluent Vandermonde matrix: rows `(i, l)`, column `m` holds `d^l/dx^l x^m` at `x_i`.
pub fn confluent_vandermonde(nodes: &[f64], k: u32) -> DMatrix<f64> {
    let n = nodes.len() * (k as usize + 1);
    DMatrix::from_fn(n, n, |row, m| {
        let (i, l) = (row / (k as usize + 1), (row % (k as usize + 1)) as u32);
        let m = m as u32;
        if l > m {
            0.0
        } else {
            factorial(m) / factorial(m - l) * nodes[i].powi((m - l) as i32)
        }
    })
}

pub fn confluent_vandermonde_condition(nodes: &[f64], k: u32) -> f64 {
    condition_number(&confluent_vandermonde(nodes, k))
}

/// Interpolate `f` so that `p(x_j) = f(x_j)` and `L p(x_j) = L f(x_j)` for every
/// operator and node.
///
/// At node `j` every new term carries `W_j = Π_{l<j} (x − x_l)^{q+1}`, `q` the
/// highest order any operator uses. A first term matches the value; then each
/// derivative order in use, ascending, is fixed through the first operator
/// that contains it.
pub fn interpolate_operator_preserving(
    source: &dyn JetSource,
    ops: &[DifferentialOperator],
    nodes: &[f64],
    precision: Precision,
) -> Result<NewtonPolynomial> {
    match precision {
        Precision::Double => preserve::<f64>(source, ops, nodes),
        Precision::Extended => preserve::<TwoFloat>(source, ops, nodes),
    }
}

fn preserve<T: Scalar>(
    source: &dyn JetSource,
    ops: &[DifferentialOperator],
    nodes: &[f64],
) -> Result<NewtonPolynomial> {
    check_distinct(nodes)?;
    for op in ops {
        if op.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: op.dim(),
            });
        }
    }
    let qmax = ops.iter().map(DifferentialOperator::order).max().unwrap_or(0);
    let bound = MultiIndex::new(vec![qmax]);

    // (order, owning operator), ascending in order
    let mut stages: Vec<(u32, usize)> = Vec::new();
    for (s, op) in ops.iter().enumerate() {
        for t in op.terms() {
            let i = t.alpha[0];
            if i > 0 && !stages.iter().any(|&(o, _)| o == i) {
                stages.push((i, s));
            }
        }
    }
    stages.sort_by_key(|&(o, _)| o);

    let mut p = NewtonPolynomial::new(1);
    for (j, &xj) in nodes.iter().enumerate() {
        let at = [xj];
        let f = source.jet(&at, &bound)?;
        let mut w = ProductTerm::constant(1.0);
        for &xl in &nodes[..j] {
            w.push_factor(0, xl, qmax + 1);
        }
        let w_at = w.eval(&at);
        let mut cur: Taylor<T> = p.taylor(&at, &bound);

        let a0 = (T::from_f(f.value()) - cur.coeffs()[0]).quot(T::from_f(w_at)).to_f();
        let bt: Taylor<T> = w.taylor(&at, &bound);
        cur.add_scaled(T::from_f(a0), &bt);
        p.push(w.clone().scaled(a0));

        for &(order, s) in &stages {
            let op = &ops[s];
            let coeffs = op.coefficients_at(&at)?;
            // partial operator: terms of order ≤ `order`
            let mut residual = T::zero();
            let mut lead = 0.0;
            for (t, &c) in op.terms().iter().zip(&coeffs) {
                let o = t.alpha[0];
                if o > order {
                    continue;
                }
                let fact = T::from_f(factorial(o));
                let df = T::from_f(f.derivatives()[o as usize]);
                let dp = cur.coeffs()[o as usize] * fact;
                residual = residual + T::from_f(c) * (df - dp);
                if o == order {
                    lead += c;
                }
            }
            let pivot = lead * factorial(order) * w_at;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot(format!(
                    "node {j} (x = {xj}), operator {s}, order {order}: coefficient vanishes"
                )));
            }
            let a = residual.quot(T::from_f(pivot)).to_f();
            let term = w.clone().with_factor(0, xj, order);
            let bt: Taylor<T> = term.taylor(&at, &bound);
            cur.add_scaled(T::from_f(a), &bt);
            p.push(term.scaled(a));
        }
    }
    Ok(p)
}
