//! Double-double division and elementary functions on top of `twofloat`'s
//! exact sums and products.

use twofloat::TwoFloat;

const LN2: (f64, f64) = (std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);
const FRAC_PI_2: (f64, f64) = (std::f64::consts::FRAC_PI_2, 6.123_233_995_736_766e-17);
const TINY: f64 = 1e-34;

fn dd(c: (f64, f64)) -> TwoFloat {
    TwoFloat::new_add(c.0, c.1)
}

/// Long division with two correction steps.
pub(crate) fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    if !q1.is_finite() || q1 == 0.0 {
        return TwoFloat::from(q1);
    }
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

pub(crate) fn exp(x: TwoFloat) -> TwoFloat {
    let h = x.hi();
    if h.is_nan() {
        return x;
    }
    if h > 709.78 {
        return TwoFloat::from(f64::INFINITY);
    }
    if h < -745.2 {
        return TwoFloat::from(0.0);
    }
    let k = (h / LN2.0).round();
    let r = (x - dd(LN2) * k) * (1.0 / 1024.0);
    // expm1(r) by Taylor series, then (1+s)² − 1 = s(s+2) ten times
    let mut s = r;
    let mut term = r;
    for n in 2..40 {
        term = term * r / f64::from(n);
        s += term;
        if term.hi().abs() < TINY {
            break;
        }
    }
    for _ in 0..10 {
        s = s * (s + 2.0);
    }
    let e = s + 1.0;
    // 2^k in two steps keeps k up to ±1100 representable
    let half = (k / 2.0).trunc();
    e * 2f64.powi(half as i32) * 2f64.powi((k - half) as i32)
}

pub(crate) fn ln(x: TwoFloat) -> TwoFloat {
    let h = x.hi();
    if !(h > 0.0) {
        return TwoFloat::from(h.ln());
    }
    if h.is_infinite() {
        return x;
    }
    let y = TwoFloat::from(h.ln());
    y + (x * exp(-y) - 1.0)
}

pub(crate) fn sqrt(x: TwoFloat) -> TwoFloat {
    let h = x.hi();
    if !(h > 0.0) || h.is_infinite() {
        return TwoFloat::from(h.sqrt());
    }
    let y = h.sqrt();
    let r = x - TwoFloat::new_mul(y, y);
    TwoFloat::new_add(y, r.hi() / (2.0 * y))
}

fn series(r: TwoFloat, first: TwoFloat, start: u32) -> TwoFloat {
    // first + Σ (−1)^j r^{2j+start}/(2j+start)! for j ≥ 1
    let r2 = r * r;
    let mut term = first;
    let mut sum = first;
    let mut n = start;
    loop {
        term = -(term * r2) / f64::from((n + 1) * (n + 2));
        n += 2;
        sum += term;
        if term.hi().abs() < TINY || n > 60 {
            return sum;
        }
    }
}

pub(crate) fn sin_cos(x: TwoFloat) -> (TwoFloat, TwoFloat) {
    let h = x.hi();
    if !h.is_finite() {
        return (TwoFloat::from(f64::NAN), TwoFloat::from(f64::NAN));
    }
    let k = (h / FRAC_PI_2.0).round();
    let r = x - dd(FRAC_PI_2) * k;
    let s = series(r, r, 1);
    let c = series(r, TwoFloat::from(1.0), 0);
    match (k as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: TwoFloat, hi: f64, lo: f64, tol: f64) -> bool {
        ((a - TwoFloat::new_add(hi, lo)).hi() / hi).abs() <= tol
    }

    #[test]
    fn division_is_double_double() {
        let third = div(TwoFloat::from(1.0), TwoFloat::from(3.0));
        assert!((third * 3.0 - 1.0).hi().abs() < 1e-31);
        let a = TwoFloat::new_add(2.6608217690073888, 1.1e-17);
        let b = TwoFloat::new_add(-0.7847582792643215, 3.0e-18);
        assert!(((div(a, b) * b - a).hi() / a.hi()).abs() < 1e-31);
    }

    #[test]
    fn constants() {
        // e, ln 3, √2, sin 1, cos 1 to double-double
        assert!(close(exp(TwoFloat::from(1.0)), std::f64::consts::E, 1.4456468917292502e-16, 1e-31));
        assert!(close(ln(TwoFloat::from(3.0)), 1.0986122886681098, -9.07129723500153e-17, 1e-31));
        assert!(close(sqrt(TwoFloat::from(2.0)), std::f64::consts::SQRT_2, -9.667293313452913e-17, 1e-31));
        let (s, c) = sin_cos(TwoFloat::from(1.0));
        assert!(close(s, 0.8414709848078965, 1.776845092935536e-18, 1e-31));
        assert!(close(c, 0.5403023058681398, -4.760954612604417e-17, 1e-31));
    }

    #[test]
    fn identities() {
        for &v in &[-30.5f64, -2.25, -0.375, 1e-9, 0.7, 3.0, 17.125, 200.0] {
            let x = TwoFloat::from(v);
            let back = ln(exp(x));
            assert!((back - x).hi().abs() <= 1e-30 * v.abs().max(1.0), "{v}");
            let (s, c) = sin_cos(x);
            assert!((s * s + c * c - 1.0).hi().abs() < 1e-30, "{v}");
            if v > 0.0 {
                let r = sqrt(x);
                assert!(((r * r - x).hi() / v).abs() < 1e-31, "{v}");
            }
        }
        assert_eq!(exp(TwoFloat::from(800.0)).hi(), f64::INFINITY);
        assert!(ln(TwoFloat::from(-1.0)).hi().is_nan());
    }
}
