//! Bessel functions `J_m`, `Y_m` and `H^{(1)}_m = J_m + i Y_m` of integer
//! order and positive real argument.
//!
//! `J`: Miller backward recurrence normalized by `J_0 + 2 Σ J_{2k} = 1`.
//! `Y_0, Y_1`: Neumann series in `J_{2k}` for `x < 25`, Hankel expansion
//! otherwise; higher orders by forward recurrence.

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub(crate) const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HANKEL_MIN: f64 = 25.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BesselKind {
    J,
    Y,
    H1,
}

/// `J_m(x)` and `Y_m(x)` for `m = 0..=mmax + 1`.
#[derive(Clone, Debug)]
pub struct BesselTable {
    pub x: f64,
    pub j: Vec<f64>,
    pub y: Vec<f64>,
}

impl BesselTable {
    /// Highest order with a stored derivative.
    pub fn max_order(&self) -> usize {
        self.j.len() - 2
    }

    pub fn h1(&self, m: usize) -> Complex64 {
        Complex64::new(self.j[m], self.y[m])
    }

    fn deriv(v: &[f64], m: usize) -> f64 {
        if m == 0 {
            -v[1]
        } else {
            0.5 * (v[m - 1] - v[m + 1])
        }
    }

    pub fn dj(&self, m: usize) -> f64 {
        Self::deriv(&self.j, m)
    }

    pub fn dy(&self, m: usize) -> f64 {
        Self::deriv(&self.y, m)
    }

    pub fn dh1(&self, m: usize) -> Complex64 {
        Complex64::new(self.dj(m), self.dy(m))
    }

    /// `J_m Y'_m - J'_m Y_m - 2/(πx)`.
    pub fn wronskian_residual(&self, m: usize) -> f64 {
        self.j[m] * self.dy(m) - self.dj(m) * self.y[m] - 2.0 / (PI * self.x)
    }
}

/// `J_0..=J_n` by backward recurrence.
fn miller(n: usize, x: f64) -> Vec<f64> {
    let top = (n as f64).max(x);
    let mut start = (top + 10.0 * top.cbrt() + 40.0).ceil() as usize;
    start += start % 2;
    let mut v = vec![0.0; start + 2];
    v[start] = 1e-300;
    for k in (1..=start).rev() {
        v[k - 1] = 2.0 * k as f64 / x * v[k] - v[k + 1];
        if v[k - 1].abs() > 1e250 {
            for t in v.iter_mut().skip(k - 1) {
                *t *= 1e-250;
            }
        }
    }
    let norm = v[0] + 2.0 * v.iter().step_by(2).skip(1).sum::<f64>();
    v.truncate(n + 1);
    for t in v.iter_mut() {
        *t /= norm;
    }
    v
}

fn hankel_asymptotic(nu: f64, x: f64) -> Complex64 {
    let mu = 4.0 * nu * nu;
    let mut a = 1.0;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut ik = Complex64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        a *= (mu - (2.0 * kf - 1.0).powi(2)) / (8.0 * kf * x);
        ik *= Complex64::new(0.0, 1.0);
        let t = ik * a;
        if t.norm() > last {
            break;
        }
        sum += t;
        last = t.norm();
        if last < 1e-17 {
            break;
        }
    }
    let chi = x - nu * PI / 2.0 - PI / 4.0;
    Complex64::from_polar((2.0 / (PI * x)).sqrt(), chi) * sum
}

/// Table of `J_m(x)`, `Y_m(x)` for `0 ≤ m ≤ mmax + 1`.
pub fn bessel_table(mmax: usize, x: f64) -> Result<BesselTable> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidParameter(format!("Bessel argument {x} must be positive")));
    }
    let n = mmax + 1;
    let (y0, y1, j) = if x < HANKEL_MIN {
        let top = (n as f64).max(x);
        let jall = miller((top + 10.0 * top.cbrt() + 40.0) as usize, x);
        let l = (x / 2.0).ln() + EULER_GAMMA;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for k in 1..(jall.len() - 1) / 2 {
            let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
            s0 += sgn * jall[2 * k] / k as f64;
            s1 += sgn * (jall[2 * k - 1] - jall[2 * k + 1]) / k as f64;
        }
        let y0 = 2.0 / PI * l * jall[0] - 4.0 / PI * s0;
        let y1 = 2.0 / PI * (l * jall[1] - jall[0] / x) + 2.0 / PI * s1;
        (y0, y1, jall[..=n].to_vec())
    } else {
        let h0 = hankel_asymptotic(0.0, x);
        let h1 = hankel_asymptotic(1.0, x);
        (h0.im, h1.im, miller(n, x))
    };
    let mut y = Vec::with_capacity(n + 1);
    y.push(y0);
    y.push(y1);
    for m in 1..n {
        let next = 2.0 * m as f64 / x * y[m] - y[m - 1];
        y.push(next);
    }
    y.truncate(n + 1);
    Ok(BesselTable { x, j, y })
}

/// `(H^{(1)}_0(x), H^{(1)}_1(x))` without building a full table.
pub fn hankel01(x: f64) -> (Complex64, Complex64) {
    if x >= HANKEL_MIN {
        return (hankel_asymptotic(0.0, x), hankel_asymptotic(1.0, x));
    }
    let n = (x + 10.0 * x.cbrt() + 40.0) as usize;
    let j = miller(n, x);
    let l = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in 1..(j.len() - 1) / 2 {
        let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sgn * j[2 * k] / k as f64;
        s1 += sgn * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
    }
    let y0 = 2.0 / PI * l * j[0] - 4.0 / PI * s0;
    let y1 = 2.0 / PI * (l * j[1] - j[0] / x) + 2.0 / PI * s1;
    (Complex64::new(j[0], y0), Complex64::new(j[1], y1))
}

/// `J_m(x)`, `Y_m(x)` or `H^{(1)}_m(x)` as a complex number.
pub fn bessel(kind: BesselKind, m: usize, x: f64) -> Result<Complex64> {
    let t = bessel_table(m, x)?;
    Ok(match kind {
        BesselKind::J => Complex64::new(t.j[m], 0.0),
        BesselKind::Y => Complex64::new(t.y[m], 0.0),
        BesselKind::H1 => t.h1(m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_at_one() {
        let j = bessel(BesselKind::J, 0, 1.0).unwrap().re;
        assert!((j - 0.765_197_686_557_966_6).abs() < 1e-15);
        // Maclaurin: Σ (-1)^k (x/2)^{2k} / (k!)^2
        let mut s = 0.0;
        let mut t = 1.0;
        for k in 0..30 {
            s += t;
            t *= -0.25 / ((k + 1) as f64).powi(2);
        }
        assert!((j - s).abs() < 1e-15);
    }

    #[test]
    fn hankel_definition() {
        let h = bessel(BesselKind::H1, 0, 2.0).unwrap();
        let j = bessel(BesselKind::J, 0, 2.0).unwrap().re;
        let y = bessel(BesselKind::Y, 0, 2.0).unwrap().re;
        assert_eq!(h, Complex64::new(j, y));
        assert!((y - 0.510_375_672_649_745_1).abs() < 1e-13);
    }

    #[test]
    fn matches_reference_implementation() {
        for &x in &[0.1, 1.0, 7.5, 24.99, 25.0, 64.0, 300.0, 512.0] {
            let t = bessel_table(1100, x).unwrap();
            for m in [0usize, 1, 2, 5, 17, 60, 200, 511, 700, 1000] {
                let z = Complex64::new(x, 0.0);
                let oj = complex_bessel::besselj(m as f64, z).map_or(0.0, |v| v.re);
                let oy = complex_bessel::bessely(m as f64, z).map_or(f64::INFINITY, |v| v.re);
                if oj.abs() > 1e-290 {
                    assert!((t.j[m] - oj).abs() <= 1e-10 * oj.abs().max(1e-3 * (2.0 / (PI * x)).sqrt()), "J{m}({x})");
                }
                if oy.is_finite() && oy.abs() < 1e290 {
                    assert!((t.y[m] - oy).abs() <= 1e-10 * oy.abs().max(1e-3 * (2.0 / (PI * x)).sqrt()), "Y{m}({x}) {} {oy}", t.y[m]);
                }
            }
        }
    }

    #[test]
    fn wronskian_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        for _ in 0..1000 {
            let m = rng.random_range(0..=2048usize);
            let x = rng.random_range(0.05..512.0);
            let t = bessel_table(m, x).unwrap();
            if t.j[m].abs() < 1e-280 || !t.y[m + 1].is_finite() || t.y[m + 1].abs() > 1e280 {
                continue;
            }
            checked += 1;
            let w = 2.0 / (PI * x);
            assert!(t.wronskian_residual(m).abs() <= 1e-9 * w, "m={m} x={x}");
        }
        assert!(checked > 300);
    }

    #[test]
    fn fast_hankel_matches_table() {
        for &x in &[1e-4, 0.3, 2.0, 24.0, 26.0, 700.0] {
            let (h0, h1) = hankel01(x);
            let t = bessel_table(1, x).unwrap();
            // phase rounding costs about x ulps
            let tol = 1e-14_f64.max(4.0 * x * f64::EPSILON);
            assert!((h0 - t.h1(0)).norm() <= tol * h0.norm(), "x={x}");
            assert!((h1 - t.h1(1)).norm() <= tol * h1.norm(), "x={x}");
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(bessel_table(3, 0.0).is_err());
        assert!(bessel_table(3, -1.0).is_err());
    }
}
