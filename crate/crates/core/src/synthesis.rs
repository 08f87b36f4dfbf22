//! Blending interpolants built on disjoint node sets into one polynomial that
//! keeps every member's jet conditions.
//!
//! For each node `x_j` of the union, owned by member `p`, the blend carries
//! `w_j · p_p` with `w_j = Π_{m≠j} Π_i ((x^i − x^i_m)/(x^i_j − x^i_m))^{k+1}`,
//! plus corrections `a_γ (x − x_j)^γ w_j`, `0 < |γ| ≤ k`, that restore the jet
//! of `p_p` at `x_j`. Every `w_j` vanishes to order `k+1` at the other nodes.

use log::debug;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::index::MultiIndex;
use crate::jet::{Scalar, Taylor};
use crate::poly::{NewtonPolynomial, Precision, ProductTerm};

/// A polynomial together with the nodes whose jets it is trusted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub nodes: Vec<Vec<f64>>,
    pub polynomial: NewtonPolynomial,
}

#[derive(Clone, Debug)]
pub struct Partition {
    members: Vec<Member>,
    k: u32,
}

fn check_disjoint(members: &[&Member]) -> Result<()> {
    let mut seen: Vec<(&[f64], usize)> = Vec::new();
    for (i, m) in members.iter().enumerate() {
        if m.nodes.is_empty() {
            return Err(Error::InvalidInput(format!("member {i} has no nodes")));
        }
        for x in &m.nodes {
            if x.len() != m.polynomial.dimension {
                return Err(Error::DimensionMismatch {
                    expected: m.polynomial.dimension,
                    found: x.len(),
                });
            }
            if let Some(&(_, other)) = seen.iter().find(|(y, _)| *y == x.as_slice()) {
                return Err(Error::InvalidInput(format!(
                    "node {x:?} appears in member {other} and member {i}; node sets must be disjoint"
                )));
            }
            seen.push((x, i));
        }
    }
    let dim = members[0].polynomial.dimension;
    if let Some(m) = members.iter().find(|m| m.polynomial.dimension != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: m.polynomial.dimension,
        });
    }
    Ok(())
}

impl Partition {
    pub fn new(members: Vec<Member>, k: u32) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidInput("a partition needs at least one member".into()));
        }
        check_disjoint(&members.iter().collect::<Vec<_>>())?;
        Ok(Partition { members, k })
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn k(&self) -> u32 {
        self.k
    }
}

/// Normalized weight of node `j` among `nodes`.
fn weight(nodes: &[&[f64]], j: usize, k: u32) -> Result<ProductTerm> {
    let x = nodes[j];
    let mut w = ProductTerm::constant(1.0);
    for (m, y) in nodes.iter().enumerate() {
        if m == j {
            continue;
        }
        for (axis, (&xa, &ya)) in x.iter().zip(y.iter()).enumerate() {
            if xa == ya {
                return Err(Error::SharedCoordinate {
                    first: j.min(m),
                    second: j.max(m),
                    axis,
                    value: xa,
                });
            }
            w.coefficient /= (xa - ya).powi(k as i32 + 1);
            w.push_factor(axis, ya, k + 1);
        }
    }
    if !w.coefficient.is_finite() || w.coefficient == 0.0 {
        return Err(Error::IllConditioned(format!(
            "weight normalization for node {j} is {}",
            w.coefficient
        )));
    }
    Ok(w)
}

pub fn blend_pair(first: &Member, second: &Member, k: u32, precision: Precision) -> Result<Member> {
    check_disjoint(&[first, second])?;
    match precision {
        Precision::Double => blend::<f64>(first, second, k),
        Precision::Extended => blend::<TwoFloat>(first, second, k),
    }
}

fn blend<T: Scalar>(first: &Member, second: &Member, k: u32) -> Result<Member> {
    let dim = first.polynomial.dimension;
    let owners: Vec<(&[f64], &NewtonPolynomial)> = first
        .nodes
        .iter()
        .map(|x| (x.as_slice(), &first.polynomial))
        .chain(second.nodes.iter().map(|x| (x.as_slice(), &second.polynomial)))
        .collect();
    let nodes: Vec<&[f64]> = owners.iter().map(|(x, _)| *x).collect();
    let bound = MultiIndex::uniform(dim, k);
    let corrections: Vec<MultiIndex> = MultiIndex::total_degree_set(dim, k)
        .into_iter()
        .filter(|g| g.total() > 0)
        .collect();

    let mut out = NewtonPolynomial::new(dim);
    for (j, &(x, p)) in owners.iter().enumerate() {
        let w = weight(&nodes, j, k)?;
        let wt: Taylor<T> = w.taylor(x, &bound);
        let target: Taylor<T> = p.taylor(x, &bound);
        let mut cur = wt.mul(&target);
        for t in &p.terms {
            out.push(w.times(t));
        }
        for g in &corrections {
            // (x − x_j)^γ w_j has Taylor coefficient w_j(x_j) = 1 at γ and none below
            let a = (target.coeff(g) - cur.coeff(g)).to_f();
            let mut term = w.clone();
            for (axis, &e) in g.as_slice().iter().enumerate() {
                term.push_factor(axis, x[axis], e);
            }
            let tt: Taylor<T> = term.taylor(x, &bound);
            cur.add_scaled(T::from_f(a), &tt);
            out.push(term.scaled(a));
        }
    }
    debug!("blended {} + {} nodes into {} terms", first.nodes.len(), second.nodes.len(), out.len());
    Ok(Member {
        nodes: nodes.iter().map(|x| x.to_vec()).collect(),
        polynomial: out,
    })
}

#[derive(Clone, Debug)]
pub struct BlendOutcome {
    pub member: Member,
    pub rounds: usize,
}

/// Left-balanced pairwise reduction: each round blends `(0,1), (2,3), …` in
/// parallel and carries an odd member over unchanged.
pub fn blend_many(partition: &Partition, precision: Precision) -> Result<BlendOutcome> {
    let mut level: Vec<Member> = partition.members.clone();
    let mut rounds = 0;
    while level.len() > 1 {
        level = level
            .par_chunks(2)
            .map(|pair| match pair {
                [a, b] => blend_pair(a, b, partition.k, precision),
                [a] => Ok(a.clone()),
                _ => unreachable!(),
            })
            .collect::<Result<Vec<_>>>()?;
        rounds += 1;
    }
    Ok(BlendOutcome {
        member: level.pop().expect("nonempty partition"),
        rounds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub node: Vec<f64>,
    pub order: MultiIndex,
    pub target: f64,
    pub achieved: f64,
    pub diff: f64,
}

/// Compare every member's jet (`|γ| ≤ k`) at its nodes against `result`.
pub fn condition_audit(
    members: &[Member],
    result: &NewtonPolynomial,
    k: u32,
    precision: Precision,
) -> Result<Vec<AuditRow>> {
    let dim = result.dimension;
    let bound = MultiIndex::uniform(dim, k);
    let set = MultiIndex::total_degree_set(dim, k);
    let mut rows = Vec::new();
    for m in members {
        for x in &m.nodes {
            let want = m.polynomial.eval_jet(x, &bound, precision)?;
            let have = result.eval_jet(x, &bound, precision)?;
            for g in &set {
                let (t, a) = (want.get(g).expect("in bound"), have.get(g).expect("in bound"));
                rows.push(AuditRow {
                    node: x.clone(),
                    order: g.clone(),
                    target: t,
                    achieved: a,
                    diff: (t - a).abs(),
                });
            }
        }
    }
    Ok(rows)
}

/// `node,order,target,achieved,diff` rows; multi-dimensional fields are `;`-separated.
pub fn audit_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from("node,order,target,achieved,diff\n");
    for r in rows {
        let node: Vec<String> = r.node.iter().map(|v| format!("{v:e}")).collect();
        let order: Vec<String> = r.order.as_slice().iter().map(u32::to_string).collect();
        out.push_str(&format!(
            "{},{},{:e},{:e},{:e}\n",
            node.join(";"),
            order.join(";"),
            r.target,
            r.achieved,
            r.diff
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::hermite::{interpolate_hermite, HermiteOptions, HermiteProblem};

    fn constant(c: f64, nodes: Vec<Vec<f64>>) -> Member {
        Member {
            nodes,
            polynomial: NewtonPolynomial {
                dimension: 1,
                terms: vec![ProductTerm::constant(c)],
            },
        }
    }

    fn hermite_member(f: &str, nodes: Vec<f64>, k: u32) -> Member {
        let e = parse(f, &["x1"]).unwrap();
        let prob = HermiteProblem::from_source(&e, nodes.clone(), k).unwrap();
        Member {
            nodes: nodes.into_iter().map(|x| vec![x]).collect(),
            polynomial: interpolate_hermite(&prob, HermiteOptions::default()).unwrap(),
        }
    }

    fn worst(rows: &[AuditRow]) -> f64 {
        rows.iter().map(|r| r.diff / (1.0 + r.target.abs())).fold(0.0, f64::max)
    }

    #[test]
    fn two_constants() {
        let r = blend_pair(&constant(1.0, vec![vec![0.0]]), &constant(2.0, vec![vec![1.0]]), 0, Precision::Double)
            .unwrap();
        assert_eq!(r.polynomial.eval(&[0.0]), 1.0);
        assert_eq!(r.polynomial.eval(&[1.0]), 2.0);
    }

    #[test]
    fn identical_polynomials_keep_jets() {
        let q = hermite_member("sin(x1)", vec![0.0, 0.5, 1.0], 3).polynomial;
        let a = Member {
            nodes: vec![vec![0.1], vec![0.7]],
            polynomial: q.clone(),
        };
        let b = Member {
            nodes: vec![vec![0.3], vec![1.2]],
            polynomial: q,
        };
        let r = blend_pair(&a, &b, 3, Precision::Double).unwrap();
        let rows = condition_audit(&[a, b], &r.polynomial, 3, Precision::Double).unwrap();
        assert_eq!(rows.len(), 16);
        assert!(worst(&rows) < 1e-9, "{}", worst(&rows));
    }

    #[test]
    fn split_union_matches_direct_conditions() {
        let nodes: Vec<f64> = (0..19).map(|i| 0.3 * i as f64).collect();
        let a = hermite_member("1/(1+x1)", nodes[..10].to_vec(), 3);
        let b = hermite_member("1/(1+x1)", nodes[10..].to_vec(), 3);
        for precision in [Precision::Double, Precision::Extended] {
            let r = blend_pair(&a, &b, 3, precision).unwrap();
            let rows = condition_audit(&[a.clone(), b.clone()], &r.polynomial, 3, precision).unwrap();
            assert_eq!(rows.len(), 76);
            assert!(worst(&rows) < 1e-7, "{precision:?}: {}", worst(&rows));
        }
    }

    #[test]
    fn shared_node_rejected_before_work() {
        let err = Partition::new(vec![constant(1.0, vec![vec![0.0]]), constant(2.0, vec![vec![0.0]])], 1)
            .unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn eight_members_take_three_rounds() {
        let members: Vec<Member> = (0..8)
            .map(|i| constant(i as f64, vec![vec![i as f64 * 0.25]]))
            .collect();
        let part = Partition::new(members.clone(), 0).unwrap();
        let out = blend_many(&part, Precision::Double).unwrap();
        assert_eq!(out.rounds, 3);
        let rows = condition_audit(&members, &out.member.polynomial, 0, Precision::Double).unwrap();
        assert!(worst(&rows) < 1e-9);
        let single = Partition::new(vec![members[3].clone()], 0).unwrap();
        let out = blend_many(&single, Precision::Double).unwrap();
        assert_eq!(out.rounds, 0);
        assert_eq!(out.member, members[3]);
    }

    #[test]
    fn four_partitions_bivariate() {
        let f = parse("exp(0.3*x1)*cos(x2)", &["x1", "x2"]).unwrap();
        let mut members = Vec::new();
        for p in 0..4 {
            let nodes: Vec<Vec<f64>> = (0..5)
                .map(|i| {
                    let s = (p * 5 + i) as f64;
                    vec![0.05 * s, 0.9 - 0.037 * s]
                })
                .collect();
            let prob = crate::multivariate::MultiHermiteProblem::from_source(
                &f,
                nodes.clone(),
                crate::multivariate::DerivativeSet::TotalDegree(1),
                crate::multivariate::Multiplier::AllAxes,
            )
            .unwrap();
            let poly = crate::multivariate::interpolate_hermite_nd(&prob, Precision::Double).unwrap();
            members.push(Member { nodes, polynomial: poly });
        }
        let part = Partition::new(members.clone(), 1).unwrap();
        let out = blend_many(&part, Precision::Double).unwrap();
        assert_eq!(out.rounds, 2);
        let rows = condition_audit(&members, &out.member.polynomial, 1, Precision::Double).unwrap();
        assert_eq!(rows.len(), 60);
        assert!(worst(&rows) < 1e-7, "{}", worst(&rows));
    }

    #[test]
    fn blend_is_deterministic() {
        let members: Vec<Member> = (0..5)
            .map(|i| hermite_member("sin(x1)", vec![i as f64 * 0.4, i as f64 * 0.4 + 0.15], 1))
            .collect();
        let part = Partition::new(members, 1).unwrap();
        let a = blend_many(&part, Precision::Double).unwrap();
        let b = blend_many(&part, Precision::Double).unwrap();
        assert_eq!(a.member, b.member);
        assert_eq!(a.rounds, 3);
    }
}
