//! Multivariate Newton interpolation and its Hermite extension.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::hermite::condition_number;
use crate::index::MultiIndex;
use crate::jet::{JetSource, JetValue, Scalar, Taylor};
use crate::poly::{NewtonPolynomial, Precision, ProductTerm};

/// Which derivatives are matched at each node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSet {
    /// Every `γ ≤ β` componentwise.
    Box(MultiIndex),
    /// Every `γ` with `|γ| ≤ l`.
    TotalDegree(u32),
}

impl DerivativeSet {
    /// Members in ascending grlex order.
    pub fn indices(&self, dim: usize) -> Vec<MultiIndex> {
        match self {
            DerivativeSet::Box(b) => b.lattice_below(),
            DerivativeSet::TotalDegree(l) => MultiIndex::total_degree_set(dim, *l),
        }
    }

    /// Smallest box containing the set.
    pub fn bound(&self, dim: usize) -> MultiIndex {
        match self {
            DerivativeSet::Box(b) => b.clone(),
            DerivativeSet::TotalDegree(l) => MultiIndex::uniform(dim, *l),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            DerivativeSet::Box(b) if b.dim() != dim => Err(Error::DimensionMismatch {
                expected: dim,
                found: b.dim(),
            }),
            _ => Ok(()),
        }
    }
}

/// How new terms are made to vanish at earlier nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    /// `Π_{l<j} Π_i (x^i − x^i_l)^{β^i+1}`; needs every coordinate distinct.
    #[default]
    AllAxes,
    /// One factor per earlier node, on an axis where the two nodes differ.
    SeparatingAxis,
}

#[derive(Clone, Debug)]
pub struct MultiHermiteProblem {
    nodes: Vec<Vec<f64>>,
    set: DerivativeSet,
    data: Vec<JetValue>,
    multiplier: Multiplier,
}

fn check_nodes(nodes: &[Vec<f64>], multiplier: Multiplier) -> Result<usize> {
    let dim = nodes
        .first()
        .ok_or_else(|| Error::InvalidInput("at least one node is required".into()))?
        .len();
    if dim == 0 {
        return Err(Error::InvalidInput("nodes must have at least one coordinate".into()));
    }
    for (j, x) in nodes.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("node {j} is not finite")));
        }
        for (l, y) in nodes[..j].iter().enumerate() {
            match multiplier {
                Multiplier::AllAxes => {
                    if let Some(axis) = (0..dim).find(|&a| x[a] == y[a]) {
                        return Err(Error::SharedCoordinate {
                            first: l,
                            second: j,
                            axis,
                            value: x[axis],
                        });
                    }
                }
                Multiplier::SeparatingAxis => {
                    if x == y {
                        return Err(Error::SharedCoordinate {
                            first: l,
                            second: j,
                            axis: 0,
                            value: x[0],
                        });
                    }
                }
            }
        }
    }
    Ok(dim)
}

impl MultiHermiteProblem {
    pub fn new(
        nodes: Vec<Vec<f64>>,
        set: DerivativeSet,
        data: Vec<JetValue>,
        multiplier: Multiplier,
    ) -> Result<Self> {
        let dim = check_nodes(&nodes, multiplier)?;
        set.check_dim(dim)?;
        if data.len() != nodes.len() {
            return Err(Error::InvalidInput(format!(
                "{} nodes but {} data jets",
                nodes.len(),
                data.len()
            )));
        }
        let bound = set.bound(dim);
        for (j, (x, jet)) in nodes.iter().zip(&data).enumerate() {
            if !bound.le_componentwise(&jet.bound) {
                return Err(Error::InvalidInput(format!(
                    "data jet {j} has bound {}, need {bound}",
                    jet.bound
                )));
            }
            if &jet.base != x {
                return Err(Error::InvalidInput(format!(
                    "data jet {j} is based at {:?} instead of node {x:?}",
                    jet.base
                )));
            }
        }
        Ok(MultiHermiteProblem {
            nodes,
            set,
            data,
            multiplier,
        })
    }

    pub fn from_source(
        source: &dyn JetSource,
        nodes: Vec<Vec<f64>>,
        set: DerivativeSet,
        multiplier: Multiplier,
    ) -> Result<Self> {
        let dim = check_nodes(&nodes, multiplier)?;
        set.check_dim(dim)?;
        let bound = set.bound(dim);
        let data = nodes
            .iter()
            .map(|x| source.jet(x, &bound))
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes, set, data, multiplier)
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn set(&self) -> &DerivativeSet {
        &self.set
    }
}

/// `a_{q+1} = (f(x_{q+1}) − p_q(x_{q+1})) / Π_{k≤q} Π_i (x^i_{q+1} − x^i_k)`.
pub fn interpolate_newton_nd(nodes: &[Vec<f64>], values: &[f64]) -> Result<NewtonPolynomial> {
    let dim = check_nodes(nodes, Multiplier::AllAxes)?;
    if values.len() != nodes.len() {
        return Err(Error::InvalidInput(format!(
            "{} nodes but {} values",
            nodes.len(),
            values.len()
        )));
    }
    let mut p = NewtonPolynomial::new(dim);
    let mut w = ProductTerm::constant(1.0);
    for (x, &v) in nodes.iter().zip(values) {
        let a = (v - p.eval(x)) / w.eval(x);
        p.push(w.clone().scaled(a));
        for (axis, &c) in x.iter().enumerate() {
            w.push_factor(axis, c, 1);
        }
    }
    Ok(p)
}

/// Product that vanishes, with every derivative in the set, at nodes `..j`.
fn multiplier_term(nodes: &[Vec<f64>], j: usize, axis_max: &[u32], mode: Multiplier) -> ProductTerm {
    let x = &nodes[j];
    let mut w = ProductTerm::constant(1.0);
    for y in &nodes[..j] {
        match mode {
            Multiplier::AllAxes => {
                for (axis, &c) in y.iter().enumerate() {
                    w.push_factor(axis, c, axis_max[axis] + 1);
                }
            }
            Multiplier::SeparatingAxis => {
                // widest separation; the first such axis on ties
                let mut axis = 0;
                for a in 1..x.len() {
                    if (x[a] - y[a]).abs() > (x[axis] - y[axis]).abs() {
                        axis = a;
                    }
                }
                w.push_factor(axis, y[axis], axis_max[axis] + 1);
            }
        }
    }
    w
}

pub fn interpolate_hermite_nd(prob: &MultiHermiteProblem, precision: Precision) -> Result<NewtonPolynomial> {
    Ok(interpolate_hermite_nd_report(prob, precision)?.0)
}

/// Also returns the condition estimate of every node block.
pub fn interpolate_hermite_nd_report(
    prob: &MultiHermiteProblem,
    precision: Precision,
) -> Result<(NewtonPolynomial, Vec<f64>)> {
    match precision {
        Precision::Double => hermite_nd::<f64>(prob),
        Precision::Extended => hermite_nd::<TwoFloat>(prob),
    }
}

fn hermite_nd<T: Scalar>(prob: &MultiHermiteProblem) -> Result<(NewtonPolynomial, Vec<f64>)> {
    let dim = prob.dim();
    let set = prob.set.indices(dim);
    let bound = prob.set.bound(dim);
    let axis_max = bound.as_slice().to_vec();
    let mut p = NewtonPolynomial::new(dim);
    let mut conditions = Vec::with_capacity(prob.nodes.len());
    for (j, (x, jet)) in prob.nodes.iter().zip(&prob.data).enumerate() {
        let w = multiplier_term(&prob.nodes, j, &axis_max, prob.multiplier);
        let terms: Vec<ProductTerm> = set
            .iter()
            .map(|g| {
                let mut t = w.clone();
                for (axis, &e) in g.as_slice().iter().enumerate() {
                    t.push_factor(axis, x[axis], e);
                }
                t
            })
            .collect();
        let cur: Taylor<T> = p.taylor(x, &bound);
        let n = set.len();
        let mut a = DMatrix::zeros(n, n);
        for (c, t) in terms.iter().enumerate() {
            let tj = t.taylor::<f64>(x, &bound).to_jet(x);
            for (r, d) in set.iter().enumerate() {
                a[(r, c)] = tj.get(d).expect("set lies in bound");
            }
        }
        let rhs = DVector::from_iterator(
            n,
            set.iter().map(|d| {
                let have = cur.coeff(d) * T::from_f(d.factorial());
                (T::from_f(jet.get(d).expect("checked bound")) - have).to_f()
            }),
        );
        let cond = condition_number(&a);
        debug!("node {j}: block {n}x{n}, condition estimate {cond:e}");
        conditions.push(cond);
        let sol = a
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularBlock { node: j, condition: cond })?;
        for (t, &c) in terms.into_iter().zip(sol.iter()) {
            p.push(t.scaled(c));
        }
    }
    Ok((p, conditions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn newton_nd_examples() {
        let p = interpolate_newton_nd(&[vec![0.5, -1.0]], &[3.0]).unwrap();
        assert_eq!(p.coefficients(), vec![3.0]);
        let nodes = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let p = interpolate_newton_nd(&nodes, &[0.0, 2.0]).unwrap();
        assert_eq!(p.coefficients(), vec![0.0, 2.0]);
        assert_eq!(p.eval(&[0.5, 3.0]), 2.0 * 0.5 * 3.0);
        let nodes = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 1.0]];
        let vals = [0.3, -1.7, 2.9];
        let p = interpolate_newton_nd(&nodes, &vals).unwrap();
        for (x, v) in nodes.iter().zip(vals) {
            assert!((p.eval(x) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_coordinate_reports_pair_and_axis() {
        let nodes = vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 2.0]];
        match interpolate_newton_nd(&nodes, &[1.0, 2.0, 3.0]) {
            Err(Error::SharedCoordinate {
                first: 1,
                second: 2,
                axis: 1,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_node_product() {
        let f = parse("x1*x2", &["x1", "x2"]).unwrap();
        let prob = MultiHermiteProblem::from_source(
            &f,
            vec![vec![0.0, 0.0]],
            DerivativeSet::Box(mi(&[1, 1])),
            Multiplier::AllAxes,
        )
        .unwrap();
        let p = interpolate_hermite_nd(&prob, Precision::Double).unwrap();
        // grlex order: 1, x2, x1, x1 x2
        assert_eq!(p.coefficients(), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(p.terms[1].factors[0].var, 1);
    }

    #[test]
    fn constant_data_everywhere() {
        let f = parse("4", &["x1", "x2"]).unwrap();
        let nodes = vec![vec![0.0, 0.1], vec![0.5, 0.7], vec![1.0, -0.3]];
        let prob =
            MultiHermiteProblem::from_source(&f, nodes, DerivativeSet::Box(mi(&[1, 2])), Multiplier::AllAxes)
                .unwrap();
        let c = interpolate_hermite_nd(&prob, Precision::Double).unwrap().coefficients();
        assert_eq!(c[0], 4.0);
        assert!(c[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_jets_match() {
        let f = parse("exp(x1-x2)", &["x1", "x2"]).unwrap();
        let nodes = vec![vec![0.1, 0.2], vec![0.6, 0.9]];
        let beta = mi(&[2, 2]);
        let prob = MultiHermiteProblem::from_source(&f, nodes.clone(), DerivativeSet::Box(beta.clone()), Multiplier::AllAxes)
            .unwrap();
        for precision in [Precision::Double, Precision::Extended] {
            let p = interpolate_hermite_nd(&prob, precision).unwrap();
            for x in &nodes {
                let pj = p.eval_jet(x, &beta, Precision::Double).unwrap();
                let fj = f.eval_jet(x, &beta).unwrap();
                for (g, v) in fj.entries() {
                    assert!((pj.get(&g).unwrap() - v).abs() < 1e-8, "{g}");
                }
            }
        }
    }

    #[test]
    fn zero_bound_coincides_with_newton() {
        let nodes = vec![vec![0.0, 0.3, 1.0], vec![0.4, 0.1, -1.0], vec![0.9, 0.7, 0.5]];
        let f = parse("sin(x1) + x2*x3", &["x1", "x2", "x3"]).unwrap();
        let vals: Vec<f64> = nodes.iter().map(|x| f.eval(x).unwrap()).collect();
        let a = interpolate_newton_nd(&nodes, &vals).unwrap();
        let prob = MultiHermiteProblem::from_source(&f, nodes, DerivativeSet::Box(mi(&[0, 0, 0])), Multiplier::AllAxes)
            .unwrap();
        let b = interpolate_hermite_nd(&prob, Precision::Double).unwrap();
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn separating_axis_allows_shared_time() {
        let f = parse("sin(x1)*cos(t)", &["x1", "t"]).unwrap();
        let nodes = vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0], vec![0.5, 0.4]];
        assert!(MultiHermiteProblem::from_source(&f, nodes.clone(), DerivativeSet::TotalDegree(1), Multiplier::AllAxes)
            .is_err());
        let prob =
            MultiHermiteProblem::from_source(&f, nodes.clone(), DerivativeSet::TotalDegree(1), Multiplier::SeparatingAxis)
                .unwrap();
        let p = interpolate_hermite_nd(&prob, Precision::Double).unwrap();
        let bound = mi(&[1, 1]);
        for x in &nodes {
            let pj = p.eval_jet(x, &bound, Precision::Double).unwrap();
            let fj = f.eval_jet(x, &bound).unwrap();
            for g in MultiIndex::total_degree_set(2, 1) {
                assert!((pj.get(&g).unwrap() - fj.get(&g).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn appending_a_node_keeps_earlier_terms() {
        let f = parse("exp(x1)*x2", &["x1", "x2"]).unwrap();
        let nodes = vec![vec![0.0, 0.1], vec![0.5, 0.7], vec![1.0, -0.3]];
        let set = DerivativeSet::Box(mi(&[1, 1]));
        let short = MultiHermiteProblem::from_source(&f, nodes[..2].to_vec(), set.clone(), Multiplier::AllAxes).unwrap();
        let long = MultiHermiteProblem::from_source(&f, nodes, set, Multiplier::AllAxes).unwrap();
        let a = interpolate_hermite_nd(&short, Precision::Double).unwrap();
        let b = interpolate_hermite_nd(&long, Precision::Double).unwrap();
        assert_eq!(a.terms[..], b.terms[..a.len()]);
    }
}
