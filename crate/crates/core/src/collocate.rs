//! Polynomials that satisfy a linear differential equation at collocation
//! nodes while interpolating boundary (or initial) data exactly.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::index::MultiIndex;
use crate::jet::{JetSource, JetValue};
use crate::multivariate::{interpolate_hermite_nd, DerivativeSet, MultiHermiteProblem, Multiplier};
use crate::operator::{DifferentialOperator, OperatorTerm};
use crate::poly::{NewtonPolynomial, Precision, ProductTerm};

/// Relative size below which a pivot counts as zero.
const PIVOT_ZERO: f64 = 1e-12;
/// Relative size below which a residual counts as already satisfied.
const RESIDUAL_ZERO: f64 = 1e-10;

/// Add `c · term` to `p` so that `L p(x) = f(x)`; returns `c`.
///
/// A stage whose equation already holds contributes a zero coefficient even
/// when its pivot vanishes. A vanishing pivot with a nonzero residual fails.
fn collocate_term(
    p: &mut NewtonPolynomial,
    op: &DifferentialOperator,
    x: &[f64],
    f_x: f64,
    term: ProductTerm,
    precision: Precision,
    stage: impl Fn() -> String,
) -> Result<f64> {
    let jet = p.eval_jet(x, &op.derivative_bound(), precision)?;
    let (lp, lp_mag) = op.apply_jet_parts(&jet)?;
    let residual = f_x - lp;
    let (pivot, pivot_mag) = op.apply_term_parts(&term, x)?;
    let satisfied = residual.abs() <= RESIDUAL_ZERO * (f_x.abs() + lp_mag).max(f64::MIN_POSITIVE);
    let c = if pivot_mag == 0.0 || pivot.abs() <= PIVOT_ZERO * pivot_mag {
        if !satisfied {
            return Err(Error::ZeroPivot(format!(
                "{}: operator applied to the new term vanishes (residual {residual:e})",
                stage()
            )));
        }
        0.0
    } else {
        residual / pivot
    };
    p.push(term.scaled(c));
    Ok(c)
}

/// `a u'' + b u' + c u = f` on `(d, e)` with `u(d) = c_d`, `u(e) = c_e`.
#[derive(Clone, Debug)]
pub struct Bvp1D {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub f: Expr,
    pub interval: (f64, f64),
    pub boundary: (f64, f64),
    pub nodes: Vec<f64>,
}

impl Bvp1D {
    pub fn operator(&self) -> Result<DifferentialOperator> {
        DifferentialOperator::new(
            1,
            vec![
                OperatorTerm {
                    coeff: self.a.clone(),
                    alpha: MultiIndex::new(vec![2]),
                },
                OperatorTerm {
                    coeff: self.b.clone(),
                    alpha: MultiIndex::new(vec![1]),
                },
                OperatorTerm {
                    coeff: self.c.clone(),
                    alpha: MultiIndex::new(vec![0]),
                },
            ],
        )
    }

    fn validate(&self) -> Result<()> {
        let (d, e) = self.interval;
        if !(d.is_finite() && e.is_finite() && d < e) {
            return Err(Error::InvalidInput(format!("interval ({d}, {e}) is empty")));
        }
        if self.nodes.is_empty() {
            return Err(Error::InvalidInput("at least one interior node is required".into()));
        }
        for (j, &x) in self.nodes.iter().enumerate() {
            if x == d || x == e {
                return Err(Error::InvalidInput(format!(
                    "node {j} = {x} lies on the boundary; need x_0 ≠ d and x_0 ≠ e for every node"
                )));
            }
            if !(d < x && x < e) {
                return Err(Error::InvalidInput(format!("node {j} = {x} lies outside ({d}, {e})")));
            }
            if let Some(l) = self.nodes[..j].iter().position(|&y| y == x) {
                return Err(Error::SharedCoordinate {
                    first: l,
                    second: j,
                    axis: 0,
                    value: x,
                });
            }
        }
        Ok(())
    }
}

/// Linear boundary interpolant, then three terms per node:
/// `(x−x_j)² B_j`, `(x−x_j) B_j`, `B_j`, each fixing `L p(x_j) = f(x_j)`.
/// `B_0 = (x−d)(x−e)`; later `B_j = (x−d)³(x−e)³ Π_{l<j} (x−x_l)³`.
pub fn solve_bvp_1d(prob: &Bvp1D, precision: Precision) -> Result<NewtonPolynomial> {
    prob.validate()?;
    let op = prob.operator()?;
    let (d, e) = prob.interval;
    let (cd, ce) = prob.boundary;
    let mut p = NewtonPolynomial::new(1);
    p.push(ProductTerm::constant(cd));
    p.push(ProductTerm::constant((ce - cd) / (e - d)).with_factor(0, d, 1));
    for (j, &xj) in prob.nodes.iter().enumerate() {
        let b = if j == 0 {
            ProductTerm::constant(1.0).with_factor(0, d, 1).with_factor(0, e, 1)
        } else {
            let mut b = ProductTerm::constant(1.0).with_factor(0, d, 3).with_factor(0, e, 3);
            for &xl in &prob.nodes[..j] {
                b.push_factor(0, xl, 3);
            }
            b
        };
        let f_x = prob.f.eval(&[xj])?;
        for (sub, power) in [2u32, 1, 0].into_iter().enumerate() {
            let term = b.clone().with_factor(0, xj, power);
            collocate_term(&mut p, &op, &[xj], f_x, term, precision, || {
                format!("node {j} (x = {xj}), substep {}", sub + 1)
            })?;
        }
    }
    Ok(p)
}

/// Data matched on the boundary node set.
#[derive(Clone, Debug)]
pub enum BoundaryData {
    /// Values and derivatives of `g`.
    Function(Expr),
    /// Cauchy data on a flat initial surface `x^axis = const`: `u = g` and
    /// `∂_axis u = ω`.
    Initial { g: Expr, omega: Expr, time_axis: usize },
}

impl JetSource for BoundaryData {
    fn jet(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue> {
        match self {
            BoundaryData::Function(g) => g.eval_jet(point, bound),
            BoundaryData::Initial { g, omega, time_axis } => {
                let t = *time_axis;
                let gj = g.eval_jet(point, bound)?;
                let oj = omega.eval_jet(point, bound)?;
                let unit = MultiIndex::unit(point.len(), t);
                Ok(JetValue::from_fn(point, bound, |gamma| match gamma[t] {
                    0 => gj.get(gamma).expect("in bound"),
                    1 => oj.get(&gamma.checked_sub(&unit).expect("γ_t = 1")).expect("in bound"),
                    _ => f64::NAN,
                }))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct CollocationProblem {
    pub operator: DifferentialOperator,
    /// Right-hand side of `L u = f`.
    pub rhs: Expr,
    pub boundary_nodes: Vec<Vec<f64>>,
    pub boundary_data: BoundaryData,
    /// Derivatives up to total order `l` are matched on the boundary.
    pub l: u32,
    pub interior_nodes: Vec<Vec<f64>>,
    pub multiplier: Multiplier,
}

impl CollocationProblem {
    fn validate(&self) -> Result<()> {
        let n = self.operator.dim();
        for x in self.boundary_nodes.iter().chain(&self.interior_nodes) {
            if x.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: x.len(),
                });
            }
        }
        if self.rhs.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.rhs.dim(),
            });
        }
        if let BoundaryData::Initial { time_axis, .. } = self.boundary_data {
            if time_axis >= n {
                return Err(Error::IndexOutOfRange {
                    index: time_axis,
                    limit: n,
                });
            }
            if self.l > 1 {
                return Err(Error::InvalidInput(
                    "initial data fixes only the first normal derivative; use l ≤ 1".into(),
                ));
            }
        }
        for (i, x) in self.interior_nodes.iter().enumerate() {
            if self.boundary_nodes.contains(x) {
                return Err(Error::InvalidInput(format!(
                    "interior node {i} {x:?} is also a boundary node"
                )));
            }
            for (b, y) in self.boundary_nodes.iter().enumerate() {
                if let Some(axis) = (0..n).find(|&a| x[a] == y[a]) {
                    return Err(Error::InvalidInput(format!(
                        "interior node {i} shares coordinate {} on axis {axis} with boundary node {b}; the boundary multiplier vanishes there",
                        x[axis]
                    )));
                }
            }
            for (j, y) in self.interior_nodes[..i].iter().enumerate() {
                if let Some(axis) = (0..n).find(|&a| x[a] == y[a]) {
                    return Err(Error::SharedCoordinate {
                        first: j,
                        second: i,
                        axis,
                        value: x[axis],
                    });
                }
            }
        }
        Ok(())
    }

    /// `Φ_b = Π_i Π_j (x^j − x^j_i)^{l+1}` over boundary nodes.
    pub fn boundary_multiplier(&self) -> ProductTerm {
        let mut phi = ProductTerm::constant(1.0);
        for y in &self.boundary_nodes {
            for (axis, &c) in y.iter().enumerate() {
                phi.push_factor(axis, c, self.l + 1);
            }
        }
        phi
    }
}

/// Boundary stage by multivariate Hermite interpolation, then per interior
/// node one term per operator term (highest order first), each fixing the
/// operator equation there.
pub fn solve_collocation(prob: &CollocationProblem, precision: Precision) -> Result<NewtonPolynomial> {
    prob.validate()?;
    let op = &prob.operator;
    let n = op.dim();
    let mut p = if prob.boundary_nodes.is_empty() {
        NewtonPolynomial::new(n)
    } else {
        let hp = MultiHermiteProblem::from_source(
            &prob.boundary_data,
            prob.boundary_nodes.clone(),
            DerivativeSet::TotalDegree(prob.l),
            prob.multiplier,
        )?;
        interpolate_hermite_nd(&hp, precision)?
    };
    let phi = prob.boundary_multiplier();
    let r = (op.order() + 1).max(3);
    let mut sweep: Vec<&OperatorTerm> = op.terms().iter().collect();
    sweep.sort_by_key(|t| std::cmp::Reverse(t.alpha.total()));

    for (i, x) in prob.interior_nodes.iter().enumerate() {
        let mut w = phi.clone();
        for y in &prob.interior_nodes[..i] {
            for (axis, &c) in y.iter().enumerate() {
                w.push_factor(axis, c, r);
            }
        }
        let f_x = prob.rhs.eval(x)?;
        for (s, t) in sweep.iter().enumerate() {
            let mut term = w.clone();
            for (axis, &e) in t.alpha.as_slice().iter().enumerate() {
                term.push_factor(axis, x[axis], e);
            }
            collocate_term(&mut p, op, x, f_x, term, precision, || {
                format!("interior node {i} {x:?}, operator term {s} (∂^{})", t.alpha)
            })?;
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn e1(s: &str) -> Expr {
        parse(s, &["x1"]).unwrap()
    }

    fn bvp(a: &str, b: &str, c: &str, f: &str, bc: (f64, f64), nodes: Vec<f64>) -> Bvp1D {
        Bvp1D {
            a: e1(a),
            b: e1(b),
            c: e1(c),
            f: e1(f),
            interval: (0.0, 1.0),
            boundary: bc,
            nodes,
        }
    }

    #[test]
    fn linear_solution_needs_no_correction() {
        let p = solve_bvp_1d(&bvp("1", "0", "0", "0", (0.0, 1.0), vec![0.5]), Precision::Double).unwrap();
        assert_eq!(p.coefficients(), vec![0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.eval(&[0.37]), 0.37);
    }

    #[test]
    fn constant_forcing() {
        let prob = bvp("1", "0", "0", "2", (0.0, 1.0), vec![0.5]);
        let p = solve_bvp_1d(&prob, Precision::Double).unwrap();
        assert_eq!(p.eval(&[0.0]), 0.0);
        assert!((p.eval(&[1.0]) - 1.0).abs() < 1e-15);
        let j = p.eval_jet_1d(0.5, 2, Precision::Double).unwrap();
        assert!((j[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn node_on_boundary_rejected() {
        let err = solve_bvp_1d(&bvp("1", "0", "0", "0", (0.0, 1.0), vec![0.0]), Precision::Double).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("x_0 ≠ d and x_0 ≠ e"));
    }

    #[test]
    fn vanishing_leading_coefficient_with_residual_fails() {
        // a(x) = x − 0.5 vanishes at the node; b = c = 0 leaves no pivot at all
        let err = solve_bvp_1d(&bvp("x1-0.5", "0", "0", "1", (0.0, 1.0), vec![0.5]), Precision::Double)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("node 0") && msg.contains("substep 1"), "{msg}");
    }

    #[test]
    fn sinh_residuals_at_nodes() {
        let nodes: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let prob = bvp("1", "0", "-1", "0", (0.0, 1.0f64.sinh()), nodes.clone());
        let p = solve_bvp_1d(&prob, Precision::Double).unwrap();
        let op = prob.operator().unwrap();
        for &x in &nodes {
            assert!(op.apply_poly(&p, &[x], Precision::Double).unwrap().abs() < 1e-9);
        }
        assert!((p.eval(&[1.0]) - 1.0f64.sinh()).abs() < 1e-14);
    }

    fn laplace() -> DifferentialOperator {
        DifferentialOperator::from_pairs(&["x1", "x2"], &[("1", &[2, 0]), ("1", &[0, 2])]).unwrap()
    }

    #[test]
    fn laplace_with_harmonic_boundary_data() {
        let vars = ["x1", "x2"];
        let g = parse("x1^2 - x2^2", &vars).unwrap();
        let prob = CollocationProblem {
            operator: laplace(),
            rhs: parse("0", &vars).unwrap(),
            boundary_nodes: vec![vec![0.0, 0.1], vec![1.0, 0.2], vec![0.9, 1.0], vec![0.1, 0.95]],
            boundary_data: BoundaryData::Function(g.clone()),
            l: 0,
            interior_nodes: vec![vec![0.3, 0.4]],
            multiplier: Multiplier::AllAxes,
        };
        let p = solve_collocation(&prob, Precision::Double).unwrap();
        for x in &prob.boundary_nodes {
            assert!((p.eval(x) - g.eval(x).unwrap()).abs() < 1e-9);
        }
        let lp = prob.operator.apply_poly(&p, &[0.3, 0.4], Precision::Double).unwrap();
        assert!(lp.abs() < 1e-9, "{lp}");
    }

    #[test]
    fn zero_data_gives_zero_polynomial() {
        let vars = ["x1", "x2"];
        let prob = CollocationProblem {
            operator: laplace(),
            rhs: parse("0", &vars).unwrap(),
            boundary_nodes: vec![vec![0.0, 0.1], vec![1.0, 0.2]],
            boundary_data: BoundaryData::Function(parse("0", &vars).unwrap()),
            l: 1,
            interior_nodes: vec![vec![0.3, 0.4], vec![0.6, 0.7]],
            multiplier: Multiplier::AllAxes,
        };
        let p = solve_collocation(&prob, Precision::Double).unwrap();
        assert!(p.coefficients().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn wave_operator_on_initial_line() {
        let vars = ["x1", "t"];
        let op = DifferentialOperator::from_pairs(&vars, &[("1", &[0, 2]), ("-1", &[2, 0])]).unwrap();
        let prob = CollocationProblem {
            operator: op,
            rhs: parse("0", &vars).unwrap(),
            boundary_nodes: vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]],
            boundary_data: BoundaryData::Initial {
                g: parse("sin(x1)", &vars).unwrap(),
                omega: parse("cos(x1)", &vars).unwrap(),
                time_axis: 1,
            },
            l: 1,
            interior_nodes: vec![vec![0.3, 0.4]],
            multiplier: Multiplier::SeparatingAxis,
        };
        let p = solve_collocation(&prob, Precision::Double).unwrap();
        let bound = MultiIndex::new(vec![1, 1]);
        for x in &prob.boundary_nodes {
            let j = p.eval_jet(x, &bound, Precision::Double).unwrap();
            assert!((j.value() - x[0].sin()).abs() < 1e-10);
            assert!((j.get(&MultiIndex::new(vec![0, 1])).unwrap() - x[0].cos()).abs() < 1e-10);
        }
        let lp = prob.operator.apply_poly(&p, &[0.3, 0.4], Precision::Double).unwrap();
        assert!(lp.abs() < 1e-9, "{lp}");
    }

    #[test]
    fn appending_interior_node_keeps_coefficients() {
        let vars = ["x1", "x2"];
        let mk = |interior: Vec<Vec<f64>>| CollocationProblem {
            operator: laplace(),
            rhs: parse("x1*x2", &vars).unwrap(),
            boundary_nodes: vec![vec![0.0, 0.1], vec![1.0, 0.2]],
            boundary_data: BoundaryData::Function(parse("x1+x2", &vars).unwrap()),
            l: 0,
            interior_nodes: interior,
            multiplier: Multiplier::AllAxes,
        };
        let a = solve_collocation(&mk(vec![vec![0.3, 0.4]]), Precision::Double).unwrap();
        let b = solve_collocation(&mk(vec![vec![0.3, 0.4], vec![0.6, 0.7]]), Precision::Double).unwrap();
        assert_eq!(a.terms[..], b.terms[..a.len()]);
    }
}
