//! Truncated multivariate Taylor arithmetic and derivative jets.
//!
//! A [`Taylor`] holds the Taylor coefficients `c_γ = ∂^γ h(x0) / γ!` for every
//! `γ` in the box `0 ≤ γ ≤ bound`. Products truncate to the same box, which is
//! closed under addition of multiindices, so every operation is exact up to
//! rounding. A [`JetValue`] is the user-facing form: plain derivative values.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::dd;
use crate::error::{Error, Result};
use crate::index::{factorial, MultiIndex};

/// Floating point type the jet machinery runs on (`f64` or a double-double).
///
/// Division and elementary functions go through these methods rather than
/// the `Float` ones so the double-double type keeps its full precision.
pub trait Scalar: Float + FromPrimitive + Debug + Send + Sync + 'static {
    fn from_f(v: f64) -> Self;
    fn to_f(self) -> f64;
    fn quot(self, rhs: Self) -> Self;
    fn exponential(self) -> Self;
    fn logarithm(self) -> Self;
    fn square_root(self) -> Self;
    fn sine_cosine(self) -> (Self, Self);
}

impl Scalar for f64 {
    fn from_f(v: f64) -> Self {
        v
    }
    fn to_f(self) -> f64 {
        self
    }
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }
    fn exponential(self) -> Self {
        self.exp()
    }
    fn logarithm(self) -> Self {
        self.ln()
    }
    fn square_root(self) -> Self {
        self.sqrt()
    }
    fn sine_cosine(self) -> (Self, Self) {
        self.sin_cos()
    }
}

impl Scalar for TwoFloat {
    fn from_f(v: f64) -> Self {
        TwoFloat::from(v)
    }
    fn to_f(self) -> f64 {
        self.hi() + self.lo()
    }
    fn quot(self, rhs: Self) -> Self {
        dd::div(self, rhs)
    }
    fn exponential(self) -> Self {
        dd::exp(self)
    }
    fn logarithm(self) -> Self {
        dd::ln(self)
    }
    fn square_root(self) -> Self {
        dd::sqrt(self)
    }
    fn sine_cosine(self) -> (Self, Self) {
        dd::sin_cos(self)
    }
}

#[derive(Clone, Debug)]
pub struct Taylor<T> {
    bound: MultiIndex,
    strides: Vec<usize>,
    coeffs: Vec<T>,
}

fn strides_for(bound: &MultiIndex) -> (Vec<usize>, usize) {
    let n = bound.dim();
    let mut strides = vec![1usize; n];
    let mut size = 1usize;
    for axis in (0..n).rev() {
        strides[axis] = size;
        size *= bound[axis] as usize + 1;
    }
    (strides, size)
}

impl<T: Scalar> Taylor<T> {
    pub fn constant(bound: &MultiIndex, c: T) -> Self {
        let (strides, size) = strides_for(bound);
        let mut coeffs = vec![T::zero(); size];
        coeffs[0] = c;
        Taylor {
            bound: bound.clone(),
            strides,
            coeffs,
        }
    }

    pub fn zero(bound: &MultiIndex) -> Self {
        Self::constant(bound, T::zero())
    }

    /// The coordinate function `x^axis` expanded around `value`.
    pub fn variable(bound: &MultiIndex, axis: usize, value: T) -> Self {
        let mut t = Self::constant(bound, value);
        if bound[axis] >= 1 {
            let pos = t.strides[axis];
            t.coeffs[pos] = T::one();
        }
        t
    }

    pub fn bound(&self) -> &MultiIndex {
        &self.bound
    }

    pub fn dim(&self) -> usize {
        self.bound.dim()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    fn position(&self, gamma: &[u32]) -> usize {
        gamma
            .iter()
            .zip(&self.strides)
            .map(|(&g, &s)| g as usize * s)
            .sum()
    }

    fn decode(&self, mut pos: usize) -> Vec<u32> {
        let mut g = vec![0u32; self.dim()];
        for axis in 0..self.dim() {
            g[axis] = (pos / self.strides[axis]) as u32;
            pos %= self.strides[axis];
        }
        g
    }

    /// Taylor coefficient at `γ` (zero outside the box).
    pub fn coeff(&self, gamma: &MultiIndex) -> T {
        if !gamma.le_componentwise(&self.bound) {
            return T::zero();
        }
        self.coeffs[self.position(gamma.as_slice())]
    }

    pub fn set_coeff(&mut self, gamma: &MultiIndex, v: T) {
        let p = self.position(gamma.as_slice());
        self.coeffs[p] = v;
    }

    /// Every multiindex of the box in storage order.
    pub fn indices(&self) -> Vec<MultiIndex> {
        (0..self.coeffs.len())
            .map(|p| MultiIndex::new(self.decode(p)))
            .collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.bound, other.bound);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a + *b;
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a + *b;
        }
    }

    /// `self += s · other`
    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a + s * *b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a = *a - *b;
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(-T::one())
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a = *a * s;
        }
        out
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0] + s;
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.bound, other.bound);
        if self.dim() == 1 {
            let n = self.coeffs.len();
            let mut out = vec![T::zero(); n];
            for (i, &a) in self.coeffs.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (j, &b) in other.coeffs[..n - i].iter().enumerate() {
                    out[i + j] = out[i + j] + a * b;
                }
            }
            return Taylor {
                bound: self.bound.clone(),
                strides: self.strides.clone(),
                coeffs: out,
            };
        }
        let idx: Vec<Vec<u32>> = (0..self.coeffs.len()).map(|p| self.decode(p)).collect();
        let mut out = vec![T::zero(); self.coeffs.len()];
        for (i, gi) in idx.iter().enumerate() {
            let a = self.coeffs[i];
            if a == T::zero() {
                continue;
            }
            for (j, gj) in idx.iter().enumerate() {
                let fits = gi
                    .iter()
                    .zip(gj)
                    .zip(self.bound.as_slice())
                    .all(|((x, y), b)| x + y <= *b);
                if fits {
                    // positions are additive inside the box
                    out[i + j] = out[i + j] + a * other.coeffs[j];
                }
            }
        }
        Taylor {
            bound: self.bound.clone(),
            strides: self.strides.clone(),
            coeffs: out,
        }
    }

    /// Multiply by a series that depends on a single axis only; `series[j]` is
    /// the coefficient of `h_axis^j`.
    pub fn mul_axis_series(&self, axis: usize, series: &[T]) -> Self {
        let stride = self.strides[axis];
        let mut out = vec![T::zero(); self.coeffs.len()];
        for p in 0..self.coeffs.len() {
            let g = (p / stride) % (self.bound[axis] as usize + 1);
            let mut acc = T::zero();
            for j in 0..=g.min(series.len().saturating_sub(1)) {
                acc = acc + series[j] * self.coeffs[p - j * stride];
            }
            out[p] = acc;
        }
        Taylor {
            bound: self.bound.clone(),
            strides: self.strides.clone(),
            coeffs: out,
        }
    }

    /// Highest total degree present in the box.
    fn max_degree(&self) -> u32 {
        self.bound.total()
    }

    /// `f(self)` given `derivs[j] = f^{(j)}(self.value())`.
    pub fn compose(&self, derivs: &[T]) -> Self {
        let mut h = self.clone();
        h.coeffs[0] = T::zero();
        let mut out = Self::constant(&self.bound, derivs[0]);
        let mut power = Self::constant(&self.bound, T::one());
        let top = (self.max_degree() as usize).min(derivs.len() - 1);
        let mut fact = T::one();
        for (j, &d) in derivs.iter().enumerate().take(top + 1).skip(1) {
            power = power.mul(&h);
            fact = fact * T::from_usize(j).unwrap();
            out.add_scaled(d.quot(fact), &power);
        }
        out
    }

    pub fn recip(&self) -> Self {
        let u0 = self.value();
        let m = self.max_degree() as usize;
        let mut derivs = Vec::with_capacity(m + 1);
        // (1/u)^{(j)} = (-1)^j j! / u^{j+1}
        let mut fact = T::one();
        let mut pow = u0;
        for j in 0..=m {
            if j > 0 {
                fact = fact * T::from_usize(j).unwrap();
                pow = pow * u0;
            }
            let sign = if j % 2 == 0 { T::one() } else { -T::one() };
            derivs.push(sign * fact.quot(pow));
        }
        self.compose(&derivs)
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exponential();
        let derivs = vec![e; self.max_degree() as usize + 1];
        self.compose(&derivs)
    }

    pub fn ln(&self) -> Self {
        let u0 = self.value();
        let m = self.max_degree() as usize;
        let mut derivs = vec![u0.logarithm()];
        // ln^{(j)} = (-1)^{j-1} (j-1)! / u^j
        let mut fact = T::one();
        let mut pow = T::one();
        for j in 1..=m {
            if j > 1 {
                fact = fact * T::from_usize(j - 1).unwrap();
            }
            pow = pow * u0;
            let sign = if j % 2 == 1 { T::one() } else { -T::one() };
            derivs.push(sign * fact.quot(pow));
        }
        self.compose(&derivs)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sine_cosine();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<T> = (0..=self.max_degree() as usize)
            .map(|j| cycle[j % 4])
            .collect();
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sine_cosine();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<T> = (0..=self.max_degree() as usize)
            .map(|j| cycle[j % 4])
            .collect();
        self.compose(&derivs)
    }

    pub fn sqrt(&self) -> Self {
        let u0 = self.value();
        let m = self.max_degree() as usize;
        // d^j u^{1/2} = (1/2)(1/2-1)…(1/2-j+1) u^{1/2-j}
        let half = T::from_f(0.5);
        let mut derivs = Vec::with_capacity(m + 1);
        let mut falling = T::one();
        let mut power = u0.square_root();
        for j in 0..=m {
            if j > 0 {
                falling = falling * (half - T::from_usize(j - 1).unwrap());
                power = power.quot(u0);
            }
            derivs.push(falling * power);
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.recip().powi(-n);
        }
        let mut result = Self::constant(&self.bound, T::one());
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Taylor series of `∂^α self`, truncated to `target` (needs `target + α ≤ bound`).
    pub fn derivative(&self, alpha: &MultiIndex, target: &MultiIndex) -> Option<Self> {
        if !target.add(alpha).le_componentwise(&self.bound) {
            return None;
        }
        let mut out = Self::zero(target);
        for p in 0..out.coeffs.len() {
            let g = MultiIndex::new(out.decode(p));
            let src = g.add(alpha);
            let ratio = src.factorial() / g.factorial();
            out.coeffs[p] = self.coeff(&src) * T::from_f(ratio);
        }
        Some(out)
    }

    /// Re-box to a smaller bound.
    pub fn restrict(&self, target: &MultiIndex) -> Self {
        let mut out = Self::zero(target);
        for p in 0..out.coeffs.len() {
            let g = MultiIndex::new(out.decode(p));
            out.coeffs[p] = self.coeff(&g);
        }
        out
    }

    /// Derivative values `∂^γ h(x0) = γ! c_γ` at the given base point.
    pub fn to_jet(&self, base: &[f64]) -> JetValue {
        let values = (0..self.coeffs.len())
            .map(|p| {
                let g = self.decode(p);
                let f: f64 = g.iter().map(|&x| factorial(x)).product();
                self.coeffs[p].to_f() * f
            })
            .collect();
        JetValue {
            base: base.to_vec(),
            bound: self.bound.clone(),
            values,
        }
    }
}

/// Value plus derivatives `∂^γ h(x0)` for every `γ ≤ bound`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetValue {
    pub base: Vec<f64>,
    pub bound: MultiIndex,
    values: Vec<f64>,
}

impl JetValue {
    /// Univariate jet from `(h(x0), h'(x0), …, h^{(k)}(x0))`.
    pub fn univariate(base: f64, derivatives: Vec<f64>) -> Self {
        assert!(!derivatives.is_empty(), "a jet needs at least the value");
        JetValue {
            base: vec![base],
            bound: MultiIndex::new(vec![derivatives.len() as u32 - 1]),
            values: derivatives,
        }
    }

    /// Build from a closure `γ ↦ ∂^γ h(x0)` over the box.
    pub fn from_fn(base: &[f64], bound: &MultiIndex, mut f: impl FnMut(&MultiIndex) -> f64) -> Self {
        let t: Taylor<f64> = Taylor::zero(bound);
        let values = t.indices().iter().map(&mut f).collect();
        JetValue {
            base: base.to_vec(),
            bound: bound.clone(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self) -> f64 {
        self.values[0]
    }

    /// Raw storage; for univariate jets this is `(h, h', …, h^{(k)})`.
    pub fn derivatives(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, gamma: &MultiIndex) -> Option<f64> {
        if !gamma.le_componentwise(&self.bound) {
            return None;
        }
        let (strides, _) = strides_for(&self.bound);
        let pos: usize = gamma
            .as_slice()
            .iter()
            .zip(&strides)
            .map(|(&g, &s)| g as usize * s)
            .sum();
        Some(self.values[pos])
    }

    /// `(γ, ∂^γ h)` pairs in storage order.
    pub fn entries(&self) -> Vec<(MultiIndex, f64)> {
        let t: Taylor<f64> = Taylor::zero(&self.bound);
        t.indices().into_iter().zip(self.values.iter().copied()).collect()
    }

    pub fn to_taylor<T: Scalar>(&self) -> Taylor<T> {
        let mut t = Taylor::zero(&self.bound);
        for (p, (g, v)) in self.entries().into_iter().enumerate() {
            t.coeffs[p] = T::from_f(v / g.factorial());
        }
        t
    }

    /// Same jet restricted to a smaller derivative bound.
    pub fn restrict(&self, bound: &MultiIndex) -> Option<JetValue> {
        if !bound.le_componentwise(&self.bound) {
            return None;
        }
        Some(JetValue::from_fn(&self.base, bound, |g| self.get(g).unwrap()))
    }
}

/// Anything that can supply derivative jets of a target function.
pub trait JetSource: Sync {
    fn jet(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue>;
}

impl<F> JetSource for F
where
    F: Fn(&[f64], &MultiIndex) -> Result<JetValue> + Sync,
{
    fn jet(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue> {
        self(point, bound)
    }
}

/// Tabulated jets, looked up by exact base point.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct JetTable {
    pub jets: Vec<JetValue>,
}

impl JetSource for JetTable {
    fn jet(&self, point: &[f64], bound: &MultiIndex) -> Result<JetValue> {
        let j = self
            .jets
            .iter()
            .find(|j| j.base == point)
            .ok_or_else(|| Error::InvalidInput(format!("no tabulated jet at {point:?}")))?;
        j.restrict(bound).ok_or_else(|| {
            Error::InvalidInput(format!(
                "tabulated jet at {point:?} has bound {}, need {bound}",
                j.bound
            ))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[u32]) -> MultiIndex {
        MultiIndex::new(v.to_vec())
    }

    #[test]
    fn product_of_variables() {
        let bound = b(&[2, 2]);
        let x: Taylor<f64> = Taylor::variable(&bound, 0, 1.0);
        let y: Taylor<f64> = Taylor::variable(&bound, 1, 2.0);
        let j = x.mul(&y).to_jet(&[1.0, 2.0]);
        assert_eq!(j.value(), 2.0);
        assert_eq!(j.get(&b(&[1, 0])), Some(2.0));
        assert_eq!(j.get(&b(&[0, 1])), Some(1.0));
        assert_eq!(j.get(&b(&[1, 1])), Some(1.0));
        assert_eq!(j.get(&b(&[2, 0])), Some(0.0));
    }

    #[test]
    fn reciprocal_jet_matches_closed_form() {
        let bound = b(&[4]);
        let x: Taylor<f64> = Taylor::variable(&bound, 0, 0.0);
        let j = x.add_scalar(1.0).recip().to_jet(&[0.0]);
        assert_eq!(j.derivatives(), &[1.0, -1.0, 2.0, -6.0, 24.0]);
    }

    #[test]
    fn axis_series_matches_full_product() {
        let bound = b(&[3, 2]);
        let x: Taylor<f64> = Taylor::variable(&bound, 0, 0.5);
        let y: Taylor<f64> = Taylor::variable(&bound, 1, -0.3);
        let base = x.mul(&y).add_scalar(0.7).exp();
        // (x - 0.2)^2 as a series in h_x around 0.5
        let c = 0.3;
        let series = [c * c, 2.0 * c, 1.0, 0.0];
        let f = x.add_scalar(-0.2);
        let full = base.mul(&f.mul(&f));
        let fast = base.mul_axis_series(0, &series);
        for (a, b) in full.coeffs().iter().zip(fast.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_shift() {
        let bound = b(&[4]);
        let x: Taylor<f64> = Taylor::variable(&bound, 0, 2.0);
        let cube = x.powi(3);
        let d = cube.derivative(&b(&[1]), &b(&[2])).unwrap().to_jet(&[2.0]);
        assert_eq!(d.derivatives(), &[12.0, 12.0, 6.0]);
    }

    #[test]
    fn double_double_runs() {
        let bound = b(&[2]);
        let x: Taylor<TwoFloat> = Taylor::variable(&bound, 0, TwoFloat::from(3.0));
        let j = x.powi(2).to_jet(&[3.0]);
        assert_eq!(j.derivatives(), &[9.0, 6.0, 2.0]);
    }
}
