//! Truncated WKB expansions of the fundamental solution of
//! `∂_t u = ½ Δu + b·∇u` around a base point `y`:
//!
//! `p(t, x, y) = (2πt)^{−n/2} exp(−|x−y|²/(2t) + Σ_k c_k(x) t^k)`.
//!
//! Every `c_k` is a polynomial in `δ = x − y`. With identity diffusion the
//! transport equations `δ·∇c_0 = −b·δ` and `(k+1) c_{k+1} + δ·∇c_{k+1} = R_k`
//! are solved monomial by monomial, since `δ·∇δ^α = |α| δ^α`.

use std::collections::BTreeMap;

use log::info;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::hermite::{interpolate_hermite, HermiteOptions, HermiteProblem};
use crate::index::MultiIndex;
use crate::jet::Scalar;
use crate::multivariate::{interpolate_hermite_nd, DerivativeSet, MultiHermiteProblem, Multiplier};
use crate::poly::{NewtonPolynomial, Precision};

/// Sparse polynomial in `δ = x − y`, truncated at total degree `degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaPoly<T = f64> {
    dim: usize,
    degree: u32,
    coeffs: BTreeMap<MultiIndex, T>,
}

impl<T: Scalar> DeltaPoly<T> {
    pub fn zero(dim: usize, degree: u32) -> Self {
        DeltaPoly {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation degree; coefficients above it are unknown, not zero.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn get(&self, alpha: &MultiIndex) -> T {
        self.coeffs.get(alpha).copied().unwrap_or_else(T::zero)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.coeffs.iter()
    }

    fn add_to(&mut self, alpha: MultiIndex, v: T) {
        if alpha.total() > self.degree || v == T::zero() {
            return;
        }
        let e = self.coeffs.entry(alpha).or_insert_with(T::zero);
        *e = *e + v;
    }

    pub fn derivative(&self, axis: usize) -> Self {
        let mut out = DeltaPoly::zero(self.dim, self.degree.saturating_sub(1));
        let unit = MultiIndex::unit(self.dim, axis);
        for (a, &c) in &self.coeffs {
            if let Some(lower) = a.checked_sub(&unit) {
                out.add_to(lower, c * T::from_f(f64::from(a[axis])));
            }
        }
        out
    }

    /// Product truncated at `degree`.
    pub fn mul(&self, other: &Self, degree: u32) -> Self {
        let mut out = DeltaPoly::zero(self.dim, degree);
        for (a, &c) in &self.coeffs {
            for (b, &d) in &other.coeffs {
                if a.total() + b.total() <= degree {
                    out.add_to(a.add(b), c * d);
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, &c) in &other.coeffs {
            self.add_to(a.clone(), s * c);
        }
    }

    pub fn eval(&self, delta: &[f64]) -> T {
        let d: Vec<T> = delta.iter().map(|&v| T::from_f(v)).collect();
        let mut acc = T::zero();
        for (a, &c) in &self.coeffs {
            let mut m = c;
            for (&e, &di) in a.as_slice().iter().zip(&d) {
                for _ in 0..e {
                    m = m * di;
                }
            }
            acc = acc + m;
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.to_f().abs()).fold(0.0, f64::max)
    }

    fn to_f64(&self) -> DeltaPoly<f64> {
        DeltaPoly {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|(a, c)| (a.clone(), c.to_f())).collect(),
        }
    }

    fn from_f64(p: &DeltaPoly<f64>) -> Self {
        DeltaPoly {
            dim: p.dim,
            degree: p.degree,
            coeffs: p.coeffs.iter().map(|(a, &c)| (a.clone(), T::from_f(c))).collect(),
        }
    }
}

/// A drift component, either closed-form or already approximated.
#[derive(Clone, Debug)]
pub enum DriftSource {
    Expr(Expr),
    Poly(NewtonPolynomial),
}

impl DriftSource {
    fn dim(&self) -> usize {
        match self {
            DriftSource::Expr(e) => e.dim(),
            DriftSource::Poly(p) => p.dimension,
        }
    }

    /// Taylor polynomial around `y` to total degree `degree`.
    fn taylor<T: Scalar>(&self, y: &[f64], degree: u32) -> Result<DeltaPoly<T>> {
        let bound = MultiIndex::uniform(y.len(), degree);
        let t = match self {
            DriftSource::Expr(e) => e.taylor::<T>(y, &bound)?,
            DriftSource::Poly(p) => p.taylor::<T>(y, &bound),
        };
        let mut out = DeltaPoly::zero(y.len(), degree);
        for a in t.indices() {
            let c = t.coeff(&a);
            if !c.is_finite() {
                return Err(Error::Singular {
                    what: "drift Taylor coefficient",
                    point: y.to_vec(),
                });
            }
            out.add_to(a, c);
        }
        Ok(out)
    }
}

/// Identity-diffusion model.
#[derive(Clone, Debug)]
pub struct WkbModel {
    pub drift: Vec<DriftSource>,
    pub y: Vec<f64>,
    /// Truncation order `K` in time.
    pub order: u32,
    /// Spatial degree kept at the last level; level `k` keeps `D + 2(K − k)`.
    pub degree: u32,
}

impl WkbModel {
    pub fn new(drift: Vec<DriftSource>, y: Vec<f64>, order: u32) -> Result<Self> {
        if y.is_empty() || drift.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: drift.len(),
            });
        }
        if let Some(b) = drift.iter().find(|b| b.dim() != y.len()) {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: b.dim(),
            });
        }
        Ok(WkbModel {
            drift,
            y,
            order,
            degree: 2,
        })
    }

    pub fn with_degree(mut self, degree: u32) -> Self {
        self.degree = degree;
        self
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// Degree kept at level `k`.
    pub fn level_degree(&self, k: u32) -> u32 {
        self.degree + 2 * self.order.saturating_sub(k)
    }

    fn drift_taylor<T: Scalar>(&self, degree: u32) -> Result<Vec<DeltaPoly<T>>> {
        self.drift.iter().map(|b| b.taylor(&self.y, degree)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WkbExpansion {
    pub y: Vec<f64>,
    /// `c_0, …, c_K`.
    pub levels: Vec<DeltaPoly>,
}

/// Replace each drift by its regular interpolation polynomial matching
/// derivatives up to `order` at the nodes.
pub fn approximate_drift(
    drift: &[Expr],
    nodes: &[Vec<f64>],
    order: u32,
    precision: Precision,
) -> Result<Vec<NewtonPolynomial>> {
    drift
        .iter()
        .map(|b| {
            let p = if b.dim() == 1 {
                let xs = nodes
                    .iter()
                    .map(|x| match x.as_slice() {
                        [v] => Ok(*v),
                        _ => Err(Error::DimensionMismatch { expected: 1, found: x.len() }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let prob = HermiteProblem::from_source(b, xs, order)?;
                interpolate_hermite(&prob, HermiteOptions { precision, ..Default::default() })?
            } else {
                let prob = MultiHermiteProblem::from_source(
                    b,
                    nodes.to_vec(),
                    DerivativeSet::TotalDegree(order),
                    Multiplier::AllAxes,
                )?;
                interpolate_hermite_nd(&prob, precision)?
            };
            info!(
                "drift approximation: {} nodes, derivative order {order}: {} coefficients, degree {}",
                nodes.len(),
                p.len(),
                p.degree()
            );
            Ok(p)
        })
        .collect()
}

fn c0_generic<T: Scalar>(b: &[DeltaPoly<T>], dim: usize, degree: u32) -> DeltaPoly<T> {
    // δ·∇c_0 = −Σ_i δ_i b_i  ⇒  coefficient of δ_i δ^α is −b_{i,α} / (|α|+1)
    let mut c0 = DeltaPoly::zero(dim, degree);
    for (i, bi) in b.iter().enumerate() {
        let unit = MultiIndex::unit(dim, i);
        for (a, &c) in &bi.coeffs {
            let s = T::from_f(f64::from(a.total() + 1));
            c0.add_to(a.add(&unit), -c.quot(s));
        }
    }
    c0
}

/// `R_k` from `c_0, …, c_k`, truncated at `degree`.
fn rk_generic<T: Scalar>(b: &[DeltaPoly<T>], cs: &[DeltaPoly<T>], degree: u32) -> Result<DeltaPoly<T>> {
    let k = cs.len() - 1;
    let dim = cs[0].dim;
    if cs[k].degree < degree + 2 {
        return Err(Error::InsufficientDegree(format!(
            "c_{k} is kept to degree {}, R_{k} at degree {degree} needs {}",
            cs[k].degree,
            degree + 2
        )));
    }
    if let Some((l, c)) = cs.iter().enumerate().find(|(_, c)| c.degree < degree + 1) {
        return Err(Error::InsufficientDegree(format!(
            "c_{l} is kept to degree {}, R_{k} at degree {degree} needs {}",
            c.degree,
            degree + 1
        )));
    }
    if let Some(bi) = b.iter().find(|bi| bi.degree < degree) {
        return Err(Error::InsufficientDegree(format!(
            "drift Taylor degree {} is below the required {degree}",
            bi.degree
        )));
    }
    let half = T::from_f(0.5);
    let grads: Vec<Vec<DeltaPoly<T>>> = cs
        .iter()
        .map(|c| (0..dim).map(|i| c.derivative(i)).collect())
        .collect();
    let mut r = DeltaPoly::zero(dim, degree);
    for i in 0..dim {
        for l in 0..=k {
            r.add_scaled(half, &grads[l][i].mul(&grads[k - l][i], degree));
        }
        r.add_scaled(half, &grads[k][i].derivative(i));
        r.add_scaled(T::one(), &b[i].mul(&grads[k][i], degree));
    }
    Ok(r)
}

fn next_level<T: Scalar>(r: &DeltaPoly<T>, k: u32) -> DeltaPoly<T> {
    // (k+1) c + δ·∇c = R  ⇒  c_α = R_α / (|α| + k + 1)
    let mut c = DeltaPoly::zero(r.dim, r.degree);
    for (a, &v) in &r.coeffs {
        c.add_to(a.clone(), v.quot(T::from_f(f64::from(a.total() + k + 1))));
    }
    c
}

/// `c_0` to total degree `degree`.
pub fn compute_c0(model: &WkbModel, degree: u32) -> Result<DeltaPoly> {
    let b = model.drift_taylor::<f64>(degree.saturating_sub(1))?;
    Ok(c0_generic(&b, model.dim(), degree))
}

/// `R_k` for `k = previous.len() − 1`, truncated at `degree`.
pub fn compute_rk(model: &WkbModel, previous: &[DeltaPoly], degree: u32) -> Result<DeltaPoly> {
    if previous.is_empty() {
        return Err(Error::InvalidInput("R_k needs at least c_0".into()));
    }
    let b = model.drift_taylor::<f64>(degree)?;
    rk_generic(&b, previous, degree)
}

/// `c_{k+1}` from `c_0, …, c_k`, truncated at `degree`.
pub fn compute_ck(model: &WkbModel, previous: &[DeltaPoly], degree: u32) -> Result<DeltaPoly> {
    let r = compute_rk(model, previous, degree)?;
    Ok(next_level(&r, previous.len() as u32 - 1))
}

/// `c_0, …, c_K` with level degrees `D + 2(K − k)`.
pub fn expand(model: &WkbModel, precision: Precision) -> Result<WkbExpansion> {
    let levels = match precision {
        Precision::Double => expand_generic::<f64>(model)?,
        Precision::Extended => expand_generic::<TwoFloat>(model)?
            .iter()
            .map(DeltaPoly::to_f64)
            .collect(),
    };
    Ok(WkbExpansion {
        y: model.y.clone(),
        levels,
    })
}

fn expand_generic<T: Scalar>(model: &WkbModel) -> Result<Vec<DeltaPoly<T>>> {
    let d0 = model.level_degree(0);
    let b = model.drift_taylor::<T>(d0.saturating_sub(1))?;
    let mut cs = vec![c0_generic(&b, model.dim(), d0)];
    for k in 0..model.order {
        let r = rk_generic(&b, &cs, model.level_degree(k + 1))?;
        cs.push(next_level(&r, k));
    }
    Ok(cs)
}

impl WkbExpansion {
    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// `ln p(t, x, y)`.
    pub fn log_kernel(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {t}")));
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let delta: Vec<f64> = x.iter().zip(&self.y).map(|(a, b)| a - b).collect();
        let d2: f64 = delta.iter().map(|d| d * d).sum();
        let n = self.dim() as f64;
        let mut s = -0.5 * n * (2.0 * std::f64::consts::PI * t).ln() - d2 / (2.0 * t);
        let mut tk = 1.0;
        for c in &self.levels {
            s += c.eval(&delta) * tk;
            tk *= t;
        }
        Ok(s)
    }

    pub fn assemble_kernel(&self, t: f64, x: &[f64]) -> Result<f64> {
        let s = self.log_kernel(t, x)?;
        if s > f64::MAX.ln() {
            return Err(Error::IllConditioned(format!("kernel overflows at t = {t}, x = {x:?}")));
        }
        Ok(s.exp())
    }

    /// `k,multiindex,value` rows; the multiindex is `;`-separated.
    pub fn coefficient_csv(&self) -> String {
        let mut out = String::from("k,multiindex,value\n");
        for (k, c) in self.levels.iter().enumerate() {
            for (a, v) in c.coefficients() {
                let idx: Vec<String> = a.as_slice().iter().map(u32::to_string).collect();
                out.push_str(&format!("{k},{},{v:e}\n", idx.join(";")));
            }
        }
        out
    }
}

pub fn assemble_kernel(expansion: &WkbExpansion, t: f64, x: &[f64]) -> Result<f64> {
    expansion.assemble_kernel(t, x)
}

/// General diffusion model, used only to check candidate expansions.
#[derive(Clone, Debug)]
pub struct GeneralWkbModel {
    /// `a_{ij}` row-major.
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<Expr>,
    pub y: Vec<f64>,
    /// `d²` as a polynomial in `δ`; `Σ δ_i²` when absent.
    pub d2: Option<DeltaPoly>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WkbResidualReport {
    /// First transport equation at every sample point.
    pub transport0: Vec<f64>,
    /// `transport[k][s]`: equation for `c_{k+1}` at sample `s`.
    pub transport: Vec<Vec<f64>>,
    /// `c_0(y) + ½ ln √det(a^{-1}(y))`.
    pub boundary0: f64,
    /// `(k+1) c_{k+1}(y) − R_k(y)`.
    pub boundary: Vec<f64>,
    pub max: f64,
}

struct Local {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

fn local(c: &DeltaPoly, delta: &[f64]) -> Local {
    let n = c.dim();
    let grads: Vec<DeltaPoly> = (0..n).map(|i| c.derivative(i)).collect();
    Local {
        value: c.eval(delta),
        grad: grads.iter().map(|g| g.eval(delta)).collect(),
        hess: grads
            .iter()
            .map(|g| (0..n).map(|j| g.derivative(j).eval(delta)).collect())
            .collect(),
    }
}

impl GeneralWkbModel {
    /// Identity diffusion with the given drifts.
    pub fn identity(b: Vec<Expr>, y: Vec<f64>) -> Self {
        let n = y.len();
        let vars: Vec<String> = b.first().map(|e| e.vars().to_vec()).unwrap_or_default();
        let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }, &vars))
                    .collect()
            })
            .collect();
        GeneralWkbModel { a, b, y, d2: None }
    }

    fn d2(&self) -> DeltaPoly {
        self.d2.clone().unwrap_or_else(|| {
            let n = self.y.len();
            let mut d = DeltaPoly::zero(n, 2);
            for i in 0..n {
                d.add_to(MultiIndex::new((0..n).map(|j| if i == j { 2 } else { 0 }).collect()), 1.0);
            }
            d
        })
    }

    fn coefficients(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let n = self.y.len();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] = self.a[i][j].eval(x)?;
            }
        }
        let b = self.b.iter().map(|e| e.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok((a, b))
    }

    /// Right side of the transport equation for `c_{k+1}` at `x`.
    fn rk_at(&self, cs: &[Local], a: &DMatrix<f64>, b: &[f64]) -> f64 {
        let n = b.len();
        let k = cs.len() - 1;
        let mut r = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut quad = 0.0;
                for l in 0..=k {
                    quad += cs[l].grad[i] * cs[k - l].grad[j];
                }
                r += 0.5 * a[(i, j)] * (quad + cs[k].hess[i][j]);
            }
            r += b[i] * cs[k].grad[i];
        }
        r
    }

    /// Left-minus-right of the transport equations at every sample, and the
    /// boundary conditions at `x = y`.
    pub fn residual(&self, candidates: &[DeltaPoly], samples: &[Vec<f64>]) -> Result<WkbResidualReport> {
        let n = self.y.len();
        if candidates.is_empty() {
            return Err(Error::InvalidInput("no candidate c_k given".into()));
        }
        let d2 = self.d2();
        let mut report = WkbResidualReport {
            transport: vec![Vec::new(); candidates.len() - 1],
            ..Default::default()
        };
        let mut points: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
        points.push(&self.y);
        for (s, x) in points.iter().enumerate() {
            let at_base = s == samples.len();
            let delta: Vec<f64> = x.iter().zip(&self.y).map(|(a, b)| a - b).collect();
            let (a, b) = self.coefficients(x)?;
            let dl = local(&d2, &delta);
            let cs: Vec<Local> = candidates.iter().map(|c| local(c, &delta)).collect();
            if !at_base {
                // −n/2 + ½ L d² + ½ Σ_i (Σ_j (a_ij + a_ji) ∂_j d²/2) ∂_i c_0
                let mut ld2 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        ld2 += 0.5 * a[(i, j)] * dl.hess[i][j];
                    }
                    ld2 += b[i] * dl.grad[i];
                }
                let mut e0 = -0.5 * n as f64 + 0.5 * ld2;
                for i in 0..n {
                    let s: f64 = (0..n).map(|j| (a[(i, j)] + a[(j, i)]) * dl.grad[j] / 2.0).sum();
                    e0 += 0.5 * s * cs[0].grad[i];
                }
                report.transport0.push(e0);
            }
            for k in 0..candidates.len() - 1 {
                let rk = self.rk_at(&cs[..=k], &a, &b);
                if at_base {
                    report.boundary.push((k + 1) as f64 * cs[k + 1].value - rk);
                    continue;
                }
                let mut lhs = (k + 1) as f64 * cs[k + 1].value;
                for i in 0..n {
                    for j in 0..n {
                        lhs += 0.5
                            * a[(i, j)]
                            * (dl.grad[i] / 2.0 * cs[k + 1].grad[j] + dl.grad[j] / 2.0 * cs[k + 1].grad[i]);
                    }
                }
                report.transport[k].push(lhs - rk);
            }
            if at_base {
                let inv = a.clone().try_inverse().ok_or(Error::Singular {
                    what: "diffusion matrix",
                    point: self.y.clone(),
                })?;
                let target = -0.5 * inv.determinant().sqrt().ln();
                report.boundary0 = cs[0].value - target;
            }
        }
        report.max = report
            .transport0
            .iter()
            .chain(report.transport.iter().flatten())
            .chain(&report.boundary)
            .chain(std::iter::once(&report.boundary0))
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        Ok(report)
    }
}

pub fn wkb_residual(
    model: &GeneralWkbModel,
    candidates: &[DeltaPoly],
    samples: &[Vec<f64>],
) -> Result<WkbResidualReport> {
    model.residual(candidates, samples)
}

impl<T: Scalar> DeltaPoly<T> {
    /// Build from `(α, coefficient)` pairs.
    pub fn from_pairs(dim: usize, degree: u32, pairs: &[(Vec<u32>, f64)]) -> Self {
        let mut p = DeltaPoly::zero(dim, degree);
        for (a, c) in pairs {
            p.add_to(MultiIndex::new(a.clone()), T::from_f(*c));
        }
        p
    }

    pub fn lift(p: &DeltaPoly<f64>) -> Self {
        Self::from_f64(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn model(b: &[&str], y: Vec<f64>, order: u32) -> WkbModel {
        let vars = crate::expr::default_vars(y.len());
        let drift = b
            .iter()
            .map(|s| DriftSource::Expr(parse(s, &vars).unwrap()))
            .collect();
        WkbModel::new(drift, y, order).unwrap()
    }

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    /// Composite Simpson rule on [0, 1].
    fn simpson(f: impl Fn(f64) -> f64) -> f64 {
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut s = f(0.0) + f(1.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn zero_drift_is_heat_kernel() {
        let exp = expand(&model(&["0", "0"], vec![0.3, -0.2], 5), Precision::Double).unwrap();
        assert!(exp.levels.iter().all(|c| c.max_abs() <= 1e-12));
        let e1 = expand(&model(&["0"], vec![0.0], 2), Precision::Double).unwrap();
        let want = (2.0 * std::f64::consts::PI * 0.1).powf(-0.5) * (-0.04f64 / 0.2).exp();
        assert!((e1.assemble_kernel(0.1, &[0.2]).unwrap() - want).abs() < 1e-14);
    }

    #[test]
    fn constant_drift_closed_form() {
        let m = model(&["1"], vec![0.4], 1);
        let exp = expand(&m, Precision::Double).unwrap();
        assert_eq!(exp.levels[0].get(&mi(&[1])), -1.0);
        assert!((exp.levels[1].get(&mi(&[0])) + 0.5).abs() < 1e-15);
        for t in [0.05, 0.1] {
            for i in -3..=3 {
                let x = 0.4 + 0.1 * i as f64;
                let d = x - 0.4;
                let exact = (-(d + t).powi(2) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt();
                let got = exp.assemble_kernel(t, &[x]).unwrap();
                assert!(((got - exact) / exact).abs() < 1e-12);
            }
        }
        let m2 = model(&["1", "-2"], vec![0.0, 0.0], 2);
        let exp = expand(&m2, Precision::Double).unwrap();
        assert!((exp.levels[1].get(&mi(&[0, 0])) + 2.5).abs() < 1e-15);
        assert!(exp.levels[2].max_abs() < 1e-15);
    }

    #[test]
    fn c0_against_quadrature() {
        let y = 0.7;
        let m = model(&["-x1"], vec![y], 0).with_degree(4);
        let c0 = compute_c0(&m, 4).unwrap();
        for i in 0..20 {
            let x = y - 0.5 + i as f64 * 0.05;
            let quad = (y - x) * simpson(|s| -(y + s * (x - y)));
            assert!((c0.eval(&[x - y]) - quad).abs() < 1e-10);
        }
    }

    #[test]
    fn c1_against_quadrature() {
        // b = sin: finite Taylor degree, so compare inside a small radius
        let y = 0.2;
        let m = model(&["sin(x1)"], vec![y], 1).with_degree(10);
        let exp = expand(&m, Precision::Double).unwrap();
        let b = parse("sin(x1)", &["x1"]).unwrap();
        let c0 = &exp.levels[0];
        let (g, h) = (c0.derivative(0), c0.derivative(0).derivative(0));
        let r0 = |x: f64| {
            let d = x - y;
            let gx = g.eval(&[d]);
            0.5 * gx * gx + 0.5 * h.eval(&[d]) + b.eval(&[x]).unwrap() * gx
        };
        for i in 0..10 {
            let x = y - 0.1 + 0.02 * i as f64;
            let quad = simpson(|s| r0(y + s * (x - y)));
            assert!((exp.levels[1].eval(&[x - y]) - quad).abs() < 1e-9);
        }
    }

    #[test]
    fn boundary_identity_and_residuals() {
        let vars = ["x1", "x2"];
        let b = vec![parse("sin(x1)*x2", &vars).unwrap(), parse("1/(2+x1)", &vars).unwrap()];
        let y = vec![0.1, 0.3];
        let m = WkbModel::new(b.iter().cloned().map(DriftSource::Expr).collect(), y.clone(), 3)
            .unwrap()
            .with_degree(6);
        let exp = expand(&m, Precision::Double).unwrap();
        for k in 0..3 {
            let r = compute_rk(&m, &exp.levels[..=k], m.level_degree(k as u32 + 1)).unwrap();
            let zero = vec![0.0, 0.0];
            assert!(((k + 1) as f64 * exp.levels[k + 1].eval(&zero) - r.eval(&zero)).abs() <= 1e-12);
        }
        let samples: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let a = i as f64 * 0.8;
                vec![y[0] + 0.02 * a.cos(), y[1] + 0.02 * a.sin()]
            })
            .collect();
        let report = wkb_residual(&GeneralWkbModel::identity(b, y), &exp.levels, &samples).unwrap();
        assert!(report.max <= 1e-8, "{report:?}");
    }

    #[test]
    fn residual_detects_boundary_offset_and_zero_candidates() {
        let b = vec![parse("1+x1", &["x1"]).unwrap()];
        let general = GeneralWkbModel::identity(b, vec![0.5]);
        let mut c0 = compute_c0(&model(&["1+x1"], vec![0.5], 0), 2).unwrap();
        c0.add_to(mi(&[0]), 0.25);
        let r = wkb_residual(&general, &[c0], &[vec![0.6]]).unwrap();
        assert!((r.boundary0 - 0.25).abs() < 1e-15);
        // zero candidates: residual is ½ L d² − n/2 = (1+x)(x−y)
        let r = wkb_residual(&general, &[DeltaPoly::zero(1, 2)], &[vec![0.9]]).unwrap();
        assert!((r.transport0[0] - 1.9 * 0.4).abs() < 1e-14);
    }

    #[test]
    fn insufficient_degree_is_reported() {
        let m = model(&["x1"], vec![0.0], 1);
        let c0 = compute_c0(&m, 2).unwrap();
        let err = compute_ck(&m, &[c0], 2).unwrap_err();
        assert!(err.to_string().contains("needs 4"), "{err}");
    }

    #[test]
    fn even_drift_gives_odd_c0() {
        let y = 0.0;
        let c0 = compute_c0(&model(&["cos(x1)"], vec![y], 0), 9).unwrap();
        for (a, v) in c0.coefficients() {
            assert!(a[0] % 2 == 1 || v.abs() < 1e-15, "{a}: {v}");
        }
    }

    #[test]
    fn kernel_mass_near_one() {
        // b'(y) = 0 keeps the mass defect at O(t²)
        let exp = expand(&model(&["cos(x1)"], vec![0.0], 2), Precision::Double).unwrap();
        let t = 0.01;
        let (lo, hi, n) = (-1.0, 1.0, 4000);
        let h = (hi - lo) / n as f64;
        let mut mass = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            mass += w * exp.assemble_kernel(t, &[lo + i as f64 * h]).unwrap();
        }
        assert!((mass * h - 1.0).abs() < 1e-3, "{}", mass * h);
    }

    #[test]
    fn extended_matches_double() {
        let m = model(&["1/(1+x1)"], vec![0.5], 3);
        let a = expand(&m, Precision::Double).unwrap();
        let b = expand(&m, Precision::Extended).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            for (k, v) in x.coefficients() {
                assert!((v - y.get(k)).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }

    #[test]
    fn drift_approximation_counts() {
        let b = parse("1/(1+x1)", &["x1"]).unwrap();
        let nodes: Vec<Vec<f64>> = (0..19).map(|i| vec![0.3 * i as f64]).collect();
        let p = approximate_drift(std::slice::from_ref(&b), &nodes, 3, Precision::Double).unwrap();
        assert_eq!(p[0].len(), 76);
        let nodes: Vec<Vec<f64>> = (0..20).map(|i| vec![0.25 * i as f64]).collect();
        let p = approximate_drift(&[b], &nodes, 10, Precision::Double).unwrap();
        assert_eq!(p[0].len(), 220);
        assert_eq!(p[0].degree(), 219);
        let c = parse("3", &["x1"]).unwrap();
        let p = approximate_drift(&[c], &nodes[..3], 2, Precision::Double).unwrap();
        assert_eq!(p[0].coefficients()[0], 3.0);
        assert!(p[0].coefficients()[1..].iter().all(|&v| v == 0.0));
    }
}
