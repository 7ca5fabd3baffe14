//! Complex Airy function `Ai` and its derivative.
//!
//! `|z| ≤ 4`: Maclaurin series. `|z| ≥ 12`: asymptotic expansion, with the
//! connection formula `Ai(z) = -ω Ai(ωz) - ω² Ai(ω²z)`, `ω = e^{2πi/3}`,
//! for `|arg z| > 2π/3`. In between, Taylor stepping of `w'' = z w` along
//! a path on which the integration is stable: inward from the asymptotic
//! value for `|arg z| ≤ π/3`, outward from the series otherwise.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

type C = Complex64;

/// `Ai(0) = 3^{-2/3}/Γ(2/3)`.
pub const AI0: f64 = 0.355_028_053_887_817_24;
/// `Ai'(0) = -3^{-1/3}/Γ(1/3)`.
pub const DAI0: f64 = -0.258_819_403_792_806_8;

const R_SERIES: f64 = 4.0;
const R_ASYM: f64 = 12.0;
const STEP: f64 = 0.5;
const MAX_ABS: f64 = 1000.0;
const EXP_LIMIT: f64 = 700.0;

fn omega() -> C {
    C::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Advances `(w, w')` of `w'' = z w` from `z0` to `z0 + h` by the Taylor
/// series at `z0`.
fn taylor(z0: C, w: C, dw: C, h: C) -> (C, C) {
    // c_{n+2} = (z0 c_n + c_{n-1}) / ((n+2)(n+1))
    let mut cm1 = C::new(0.0, 0.0);
    let mut c0 = w;
    let mut c1 = dw;
    let mut f = c0 + c1 * h;
    let mut df = c1;
    let scale = w.norm().max(dw.norm() * h.norm()).max(1e-300);
    let mut hp = h; // h^{n+1}
    let mut small = 0;
    for n in 0..600usize {
        let c2 = (z0 * c0 + cm1) / ((n + 2) as f64 * (n + 1) as f64);
        let dterm = c2 * hp * (n + 2) as f64;
        hp *= h;
        let term = c2 * hp;
        f += term;
        df += dterm;
        let mag = term.norm().max(dterm.norm() * h.norm());
        if mag <= 1e-18 * scale.max(f.norm()) {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
        cm1 = c0;
        c0 = c1;
        c1 = c2;
    }
    (f, df)
}

/// Integrates `w'' = z w` along the segment from `a` to `b`.
fn walk(a: C, b: C, w: C, dw: C) -> (C, C) {
    let n = ((b - a).norm() / STEP).ceil().max(1.0) as usize;
    let h = (b - a) / n as f64;
    let (mut w, mut dw) = (w, dw);
    for i in 0..n {
        (w, dw) = taylor(a + h * i as f64, w, dw, h);
    }
    (w, dw)
}

/// Integrates along the arc `|z| = r` from angle `t0` to `t1`.
fn walk_arc(r: f64, t0: f64, t1: f64, w: C, dw: C) -> (C, C) {
    let n = ((r * (t1 - t0).abs()) / STEP).ceil().max(1.0) as usize;
    let (mut w, mut dw) = (w, dw);
    for i in 0..n {
        let a = C::from_polar(r, t0 + (t1 - t0) * i as f64 / n as f64);
        let b = C::from_polar(r, t0 + (t1 - t0) * (i + 1) as f64 / n as f64);
        (w, dw) = taylor(a, w, dw, b - a);
    }
    (w, dw)
}

/// Maclaurin evaluation of `(Ai(z), Ai'(z))`.
pub fn airy_series(z: C) -> (C, C) {
    taylor(C::new(0.0, 0.0), C::new(AI0, 0.0), C::new(DAI0, 0.0), z)
}

fn asym_coeffs() -> &'static (Vec<f64>, Vec<f64>) {
    static COEFFS: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut u = vec![1.0];
        let mut v = vec![1.0];
        for k in 1..60usize {
            let kf = k as f64;
            let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
            u.push(uk);
            v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk);
        }
        (u, v)
    })
}

/// `ζ = (2/3) z^{3/2}` and the scaled pair `(Ai e^{ζ}, Ai' e^{ζ})` from
/// the asymptotic expansion; valid for large `|z|` with `|arg z| ≤ 2π/3`.
fn asym_scaled(z: C) -> (C, C, C) {
    let zeta = z.powf(1.5) * (2.0 / 3.0);
    let (u, v) = asym_coeffs();
    let inv = -zeta.inv();
    let mut su = C::new(1.0, 0.0);
    let mut sv = C::new(1.0, 0.0);
    let mut p = C::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..u.len() {
        p *= inv;
        let tu = p * u[k];
        let tv = p * v[k];
        let mag = tu.norm().max(tv.norm());
        if mag > last {
            break;
        }
        su += tu;
        sv += tv;
        last = mag;
        if mag < 1e-17 {
            break;
        }
    }
    let q = z.powf(0.25);
    let c = 0.5 / PI.sqrt();
    (zeta, su * c / q, -sv * q * c)
}

/// `(Ai, Ai')` as a common mantissa pair and an exponent `e`, the values
/// being `mantissa · e^{e}`.
#[derive(Clone, Copy, Debug)]
struct Scaled {
    ai: C,
    dai: C,
    exp: C,
}

impl Scaled {
    fn direct(ai: C, dai: C) -> Self {
        Scaled {
            ai,
            dai,
            exp: C::new(0.0, 0.0),
        }
    }

    fn values(&self) -> (C, C) {
        let e = self.exp.exp();
        (self.ai * e, self.dai * e)
    }
}

fn large(z: C) -> Scaled {
    let th = z.arg();
    if th.abs() <= 2.0 * PI / 3.0 {
        let (zeta, ai, dai) = asym_scaled(z);
        return Scaled { ai, dai, exp: -zeta };
    }
    if th < 0.0 {
        let s = large(z.conj());
        return Scaled {
            ai: s.ai.conj(),
            dai: s.dai.conj(),
            exp: s.exp.conj(),
        };
    }
    let w = omega();
    let w2 = w * w;
    let (z1, a1, d1) = asym_scaled(w * z);
    let (z2, a2, d2) = asym_scaled(w2 * z);
    let (e1, e2) = (-z1, -z2);
    let shift = if e1.re >= e2.re { e1 } else { e2 };
    let f1 = (e1 - shift).exp();
    let f2 = (e2 - shift).exp();
    Scaled {
        ai: -w * a1 * f1 - w2 * a2 * f2,
        dai: -w2 * d1 * f1 - w * d2 * f2,
        exp: shift,
    }
}

fn scaled(z: C) -> Scaled {
    let r = z.norm();
    if r <= R_SERIES {
        let (a, d) = airy_series(z);
        return Scaled::direct(a, d);
    }
    if r >= R_ASYM {
        return large(z);
    }
    let th = z.arg();
    if th.abs() <= PI / 3.0 {
        let start = C::from_polar(R_ASYM, th);
        let (a, d) = large(start).values();
        let (a, d) = walk(start, z, a, d);
        Scaled::direct(a, d)
    } else {
        let start = C::from_polar(R_SERIES, th);
        let (a, d) = airy_series(start);
        let (a, d) = walk(start, z, a, d);
        Scaled::direct(a, d)
    }
}

/// `(Ai(z), Ai'(z))` for `|z| ≤ 1000`; fails where the values leave the
/// double-precision range.
pub fn airy_pair(z: C) -> Result<(C, C)> {
    if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > MAX_ABS {
        return Err(Error::InvalidParameter(format!("Airy argument {z} outside |z| ≤ {MAX_ABS}")));
    }
    let s = scaled(z);
    if s.exp.re.abs() > EXP_LIMIT {
        return Err(Error::Numerical(format!("Airy value at {z} out of floating-point range")));
    }
    Ok(s.values())
}

/// `Ai(z)` for `|z| ≤ 1000`.
pub fn airy_ai(z: C) -> Result<C> {
    Ok(airy_pair(z)?.0)
}

/// A branch of `log Ai(z)`, usable far beyond the range of [`airy_pair`].
pub fn log_airy(z: C) -> C {
    let s = scaled(z);
    s.ai.ln() + s.exp
}

/// Independent evaluation of `(Ai, Ai')` for `|z| < 12`: asymptotic value at
/// radius 12 on the nearest ray with `|arg| ≤ π/3`, continued inward along
/// that ray and then along the arc to `arg z`.
pub fn airy_pair_continued(z: C) -> (C, C) {
    let r = z.norm();
    let th = z.arg();
    let th0 = th.clamp(-PI / 3.0, PI / 3.0);
    let start = C::from_polar(R_ASYM, th0);
    let (a, d) = large(start).values();
    let (a, d) = walk(start, C::from_polar(r, th0), a, d);
    walk_arc(r, th0, th, a, d)
}

/// Newton refinement of a real root of `Ai` from `x0`.
fn newton_root(mut x: f64) -> Result<f64> {
    for _ in 0..50 {
        let (a, d) = airy_pair(C::new(x, 0.0))?;
        let dx = a.re / d.re;
        x -= dx;
        if dx.abs() < 1e-15 * x.abs().max(1.0) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Right-most root `ν₁ ∈ (-3, -2)` of `Ai`, by bisection to `1e-10`
/// followed by a Newton polish.
pub fn airy_rightmost_root() -> f64 {
    static ROOT: OnceLock<f64> = OnceLock::new();
    *ROOT.get_or_init(|| {
        let f = |x: f64| airy_pair(C::new(x, 0.0)).unwrap().0.re;
        let (mut lo, mut hi) = (-3.0, -2.0);
        let flo = f(lo);
        while hi - lo > 1e-10 {
            let m = 0.5 * (lo + hi);
            if (f(m) > 0.0) == (flo > 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        newton_root(0.5 * (lo + hi)).unwrap_or(0.5 * (lo + hi))
    })
}

/// First `n` roots `ν_k` of `Ai` (all negative) with the values `Ai'(ν_k)`.
pub fn airy_roots(n: usize) -> Result<Vec<(f64, f64)>> {
    (1..=n)
        .map(|k| {
            let t = 3.0 * PI * (4.0 * k as f64 - 1.0) / 8.0;
            let guess = -t.powf(2.0 / 3.0) * (1.0 + 5.0 / (48.0 * t * t));
            let x = if k == 1 { airy_rightmost_root() } else { newton_root(guess)? };
            Ok((x, airy_pair(C::new(x, 0.0))?.1.re))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: C, b: C) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn value_at_zero() {
        let a = airy_ai(C::new(0.0, 0.0)).unwrap();
        assert!((a.re - 0.355028).abs() < 1e-6);
        // 3^{-2/3} / Γ(2/3) with Γ(2/3) = 1.3541179394264004169
        let closed = 3f64.powf(-2.0 / 3.0) / 1.354_117_939_426_400_4;
        assert!((a.re - closed).abs() < 1e-15);
    }

    #[test]
    fn positive_and_decreasing_on_positive_axis() {
        let mut prev = f64::INFINITY;
        for i in 0..=500 {
            let x = 5.0 * i as f64 / 500.0;
            let a = airy_ai(C::new(x, 0.0)).unwrap();
            assert!(a.re > 0.0 && a.re < prev && a.im.abs() < 1e-15 * a.re.max(1e-300));
            prev = a.re;
        }
    }

    #[test]
    fn known_values() {
        let cases = [(1.0, 0.135_292_416_312_881_4), (-1.0, 0.535_560_883_292_352_1), (5.0, 1.083_444_281_360_744_6e-4)];
        for (x, v) in cases {
            let a = airy_ai(C::new(x, 0.0)).unwrap().re;
            assert!(((a - v) / v).abs() < 1e-10, "Ai({x}) = {a}, expected {v}");
        }
    }

    #[test]
    fn matches_reference_implementation() {
        for j in 0..24 {
            let th = -PI + 2.0 * PI * j as f64 / 24.0;
            for &r in &[0.5, 3.0, 4.5, 7.0, 11.0, 12.5, 30.0, 80.0] {
                let z = C::from_polar(r, th);
                let Ok((a, d)) = airy_pair(z) else { continue };
                let oa = complex_bessel::airy(z).unwrap();
                let od = complex_bessel::airyprime(z).unwrap();
                assert!(rel(a, oa) < 1e-10 && rel(d, od) < 1e-10, "z={z}: {a} vs {oa}");
            }
        }
    }

    #[test]
    fn overlap_along_rays() {
        for j in 0..8 {
            let th = -PI + 2.0 * PI * (j as f64 + 0.5) / 8.0;
            for i in 0..=8 {
                let r = 3.0 + 2.0 * i as f64 / 8.0;
                let z = C::from_polar(r, th);
                let (a, d) = airy_series(z);
                let (b, e) = airy_pair_continued(z);
                assert!(rel(a, b) < 1e-8 && rel(d, e) < 1e-8, "z={z} {a} {b}");
            }
        }
    }

    #[test]
    fn wronskian_and_connection() {
        // Ai(z) + ω Ai(ωz) + ω² Ai(ω²z) = 0
        let w = omega();
        for &z in &[C::new(2.0, 1.0), C::new(-7.0, 3.0), C::new(15.0, -20.0), C::new(-30.0, 0.5)] {
            let s = airy_ai(z).unwrap() + w * airy_ai(w * z).unwrap() + w * w * airy_ai(w * w * z).unwrap();
            let scale = airy_ai(w * z).unwrap().norm() + airy_ai(w * w * z).unwrap().norm();
            assert!(s.norm() < 1e-10 * scale, "{z}: {s}");
        }
    }

    #[test]
    fn ode_consistency_across_regions() {
        for &z in &[C::new(3.9, 0.5), C::new(6.0, 6.0), C::new(-8.0, 2.0), C::new(11.0, 1.0), C::new(-11.5, -3.0)] {
            let (a, d) = airy_pair(z).unwrap();
            let h = C::new(0.3, 0.2);
            let (b, _) = taylor(z, a, d, h);
            let direct = airy_pair(z + h).unwrap().0;
            assert!(rel(b, direct) < 1e-10, "{z}");
        }
    }

    #[test]
    fn log_form_matches_direct() {
        for &z in &[C::new(13.0, 2.0), C::new(-20.0, 5.0), C::new(20.0, -25.0), C::new(2.0, -1.0)] {
            let a = airy_ai(z).unwrap();
            assert!((log_airy(z).exp() - a).norm() < 1e-10 * a.norm());
        }
        assert!(log_airy(C::new(4000.0, 1000.0)).re < -1e5);
    }

    #[test]
    fn overflow_and_domain_errors() {
        assert!(airy_ai(C::new(-100.0, 100.0)).is_err());
        assert!(airy_ai(C::new(2000.0, 0.0)).is_err());
        assert!(airy_ai(C::new(90.0, 0.0)).is_ok());
    }

    #[test]
    fn rightmost_root() {
        let nu = airy_rightmost_root();
        assert!((nu + 2.338_107_410_459_767).abs() < 1e-10, "{nu}");
        let a = airy_ai(C::new(nu - 1e-6, 0.0)).unwrap().re;
        let b = airy_ai(C::new(nu + 1e-6, 0.0)).unwrap().re;
        assert!(a * b < 0.0);
        let roots = airy_roots(5).unwrap();
        assert!((roots[1].0 + 4.087_949_444_130_970).abs() < 1e-9);
        assert!((roots[0].1 - 0.701_210_822_143_476).abs() < 1e-9);
        assert!(roots.windows(2).all(|w| w[1].0 < w[0].0));
    }
}
