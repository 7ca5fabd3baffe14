//! Chebyshev series of smooth functions and their network emulation
//! through the three-term recurrence `T_{k+1} = 2x T_k - T_{k-1}`.

use crate::blocks::{multiply_level, multiply_net, scale_pow2, uniform_grid, MAX_ESCALATIONS, PROBE_POINTS};
use crate::chain::{Chain, Row};
use crate::error::{invalid, Error, Result};
use crate::network::{AffineLayer, ComplexNet, EmulatorNet, ReluNetwork};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `Σ' a_k T_k(x / D)`, the first term halved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    pub coeffs: Vec<Complex64>,
    pub halfwidth: f64,
}

impl ChebSeries {
    pub fn new(coeffs: Vec<Complex64>, halfwidth: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return invalid("empty coefficient list");
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("non-finite coefficient");
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return invalid(format!("halfwidth {halfwidth} must be positive"));
        }
        Ok(Self { coeffs, halfwidth })
    }

    pub fn real(coeffs: &[f64], halfwidth: f64) -> Result<Self> {
        Self::new(coeffs.iter().map(|&a| Complex64::new(a, 0.0)).collect(), halfwidth)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|z| z.im == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Clenshaw evaluation at `x ∈ [-D, D]`.
    pub fn eval(&self, x: f64) -> Complex64 {
        clenshaw(&self.coeffs, x / self.halfwidth)
    }

    /// Series with only the first `n + 1` coefficients kept.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            coeffs: self.coeffs[..(n + 1).min(self.coeffs.len())].to_vec(),
            halfwidth: self.halfwidth,
        }
    }

    /// `Σ_{j>n} |a_j|` over the stored coefficients.
    pub fn tail(&self, n: usize) -> f64 {
        self.coeffs.iter().skip(n + 1).map(|z| z.norm()).sum()
    }
}

/// `Σ' a_k T_k(y)` for `y ∈ [-1, 1]`.
pub fn clenshaw(a: &[Complex64], y: f64) -> Complex64 {
    let zero = Complex64::new(0.0, 0.0);
    let (mut b1, mut b2) = (zero, zero);
    for &ak in a.iter().skip(1).rev() {
        let b0 = ak + b1 * (2.0 * y) - b2;
        b2 = b1;
        b1 = b0;
    }
    a.first().copied().unwrap_or(zero) * 0.5 + b1 * y - b2
}

/// Coefficients of order `≤ n` of `f` on `[-d, d]` by discrete cosine
/// summation over `4(n + 1)` Chebyshev points of the first kind.
pub fn try_cheb_coeffs(
    mut f: impl FnMut(f64) -> Result<Complex64>,
    d: f64,
    n: usize,
) -> Result<ChebSeries> {
    let npts = 4 * (n + 1);
    let theta: Vec<f64> = (0..npts).map(|j| PI * (j as f64 + 0.5) / npts as f64).collect();
    let vals = theta
        .iter()
        .map(|t| f(d * t.cos()))
        .collect::<Result<Vec<_>>>()?;
    let scale = 2.0 / npts as f64;
    let coeffs = (0..=n)
        .map(|k| {
            theta
                .iter()
                .zip(&vals)
                .map(|(t, v)| v * (k as f64 * t).cos())
                .sum::<Complex64>()
                * scale
        })
        .collect();
    ChebSeries::new(coeffs, d)
}

/// Infallible form of [`try_cheb_coeffs`].
pub fn cheb_coeffs(f: impl Fn(f64) -> Complex64, d: f64, n: usize) -> Result<ChebSeries> {
    try_cheb_coeffs(|x| Ok(f(x)), d, n)
}

/// Class of functions on `[-D, D]` with `‖f^{(n)}‖ ≤ λ_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothClass {
    pub lambda: Vec<f64>,
    pub halfwidth: f64,
    pub complex: bool,
}

impl SmoothClass {
    pub fn new(lambda: Vec<f64>, halfwidth: f64, complex: bool) -> Result<Self> {
        if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return invalid("derivative bounds must be positive and finite");
        }
        if lambda.windows(2).any(|w| w[1] < w[0]) {
            return invalid("derivative bounds must be nondecreasing");
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return invalid(format!("halfwidth {halfwidth} must be positive"));
        }
        Ok(Self {
            lambda,
            halfwidth,
            complex,
        })
    }

    /// Class with `λ_n = c^n` for `n ≤ len`, floored at 1.
    pub fn geometric(c: f64, len: usize, halfwidth: f64, complex: bool) -> Result<Self> {
        let lambda = (0..len).map(|n| c.powi(n as i32).max(1.0)).collect();
        Self::new(lambda, halfwidth, complex)
    }
}

/// `4^{k+1} · 6 (3e)^k / (1 + k)`.
pub fn jackson_constant(k: u32) -> f64 {
    4f64.powi(k as i32 + 1) * 6.0 * (3.0 * std::f64::consts::E).powi(k as i32) / (1.0 + k as f64)
}

/// `n_k = max{k + 2, ⌈(2 C_k λ_{k+1} / ε)^{1/(k-1)}⌉}`, with `λ_{k+1}`
/// multiplied by `D^{k+1}` when `D > 1` (the rescaled function on `[-1, 1]`).
pub fn truncation_index(class: &SmoothClass, k: u32, eps: f64) -> Result<usize> {
    if k < 2 {
        return invalid("smoothness order must be at least 2");
    }
    if !(eps > 0.0) {
        return invalid(format!("accuracy {eps} must be positive"));
    }
    let idx = k as usize + 1;
    let Some(&lam) = class.lambda.get(idx) else {
        return invalid(format!(
            "derivative bounds given up to order {}, need {idx}",
            class.lambda.len() as isize - 1
        ));
    };
    let lam = lam * class.halfwidth.max(1.0).powi(idx as i32);
    let raw = (2.0 * jackson_constant(k) * lam / eps).powf(1.0 / (k as f64 - 1.0)).ceil();
    let floor = k as usize + 2;
    if !raw.is_finite() || raw > 1e9 {
        return invalid("truncation index overflows");
    }
    Ok(floor.max(raw as usize))
}

/// Per-product accuracy making the accumulated sum error at most `eps`.
///
/// With `|x| ≤ 1` the recurrence error obeys `e_{k+1} ≤ 2ζ + 2e_k + e_{k-1}`
/// projected through `|U_m| ≤ m + 1`, so `e_k ≤ ζ k(k-1)` and the sum errs
/// by at most `ζ Σ |a_k| k(k-1)`.
pub fn cheb_sum_zeta(coeffs: &[Complex64], eps: f64) -> f64 {
    let gain: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(k, a)| a.norm() * (k * k.saturating_sub(1)) as f64)
        .sum();
    if gain > 0.0 {
        (eps / gain).min(0.25)
    } else {
        0.25
    }
}

fn part(coeffs: &[Complex64], im: bool) -> Vec<f64> {
    coeffs.iter().map(|z| if im { z.im } else { z.re }).collect()
}

/// Recurrence network on `[-1, 1]` with products of accuracy `zeta`.
/// Output `j` is `Σ' parts[j]_k T_k`.
fn recurrence_net(parts: &[Vec<f64>], zeta: f64) -> Result<ReluNetwork> {
    let n = parts[0].len() - 1;
    let np = parts.len();
    if n <= 1 {
        let mut l = AffineLayer::zeros(np, 1);
        for (j, a) in parts.iter().enumerate() {
            l.set_b(j, a[0] / 2.0);
            if n == 1 {
                l.set_w(j, 0, a[1]);
            }
        }
        return ReluNetwork::new(vec![l]);
    }
    let mu = multiply_net(1.0, multiply_level(1.0, zeta));
    // state: [x, T_k, T_{k-1}, s_0, s_1, ...] with s_j half the partial sum
    let mut init = vec![Row::coord(0), Row::coord(0), Row::new(vec![], 1.0)];
    init.extend(parts.iter().map(|a| Row::new(vec![(0, a[1] / 2.0)], a[0] / 4.0)));
    let mut ch = Chain::new(1).linear(&init)?;
    for k in 1..n {
        let last = k + 1 == n;
        let acc: Vec<usize> = (3..3 + np).collect();
        if last {
            // state after stage: [μ, s..., T_{k-1}]
            let mut carry = acc.clone();
            carry.push(2);
            ch = ch.stage(&mu, &[0, 1], &carry)?;
            let rows: Vec<Row> = parts
                .iter()
                .enumerate()
                .map(|(j, a)| Row::new(vec![(1 + j, 1.0), (0, a[k + 1]), (1 + np, -a[k + 1] / 2.0)], 0.0))
                .collect();
            ch = ch.linear(&rows)?;
        } else {
            // state after stage: [μ, x, T_k, T_{k-1}, s...]
            let mut carry = vec![0, 1, 2];
            carry.extend(&acc);
            ch = ch.stage(&mu, &[0, 1], &carry)?;
            let mut rows = vec![
                Row::coord(1),
                Row::new(vec![(0, 2.0), (3, -1.0)], 0.0),
                Row::coord(2),
            ];
            rows.extend(
                parts
                    .iter()
                    .enumerate()
                    .map(|(j, a)| Row::new(vec![(4 + j, 1.0), (0, a[k + 1]), (3, -a[k + 1] / 2.0)], 0.0)),
            );
            ch = ch.linear(&rows)?;
        }
    }
    Ok(scale_pow2(ch.finish()?, 1))
}

/// Network approximating `T_n` on `[-1, 1]` with products of accuracy
/// `zeta`; its error is at most `ζ 4^n`.
pub fn cheb_t_net(n: usize, zeta: f64) -> Result<ReluNetwork> {
    if !(zeta > 0.0 && zeta < 0.5) {
        return invalid(format!("product accuracy {zeta} outside (0, 1/2)"));
    }
    let mut a = vec![0.0; n + 1];
    a[n] = if n == 0 { 2.0 } else { 1.0 };
    recurrence_net(&[a], zeta)
}

fn sum_net(series: &ChebSeries, zeta: f64) -> Result<EmulatorNet> {
    if series.is_real() {
        Ok(EmulatorNet::Real(recurrence_net(&[part(&series.coeffs, false)], zeta)?))
    } else {
        let net = recurrence_net(&[part(&series.coeffs, false), part(&series.coeffs, true)], zeta)?;
        Ok(EmulatorNet::Complex(ComplexNet::new(net)?))
    }
}

fn max_dev(net: &EmulatorNet, xs: &[f64], f: impl Fn(f64) -> Complex64) -> f64 {
    net.eval_many(xs)
        .iter()
        .zip(xs)
        .map(|(y, &x)| (y - f(x)).norm())
        .fold(0.0, f64::max)
}

fn escalate(
    stage: &str,
    target: f64,
    mut build: impl FnMut(u32) -> Result<EmulatorNet>,
    mut check: impl FnMut(&EmulatorNet) -> f64,
) -> Result<EmulatorNet> {
    let mut best = f64::INFINITY;
    for k in 0..=MAX_ESCALATIONS {
        let net = build(k)?;
        let err = check(&net);
        if err <= target {
            return Ok(net);
        }
        best = best.min(err);
    }
    Err(Error::Certification {
        stage: stage.to_string(),
        achieved: best,
        target,
    })
}

/// Network for `Σ' a_k T_k(x)` on `[-1, 1]` with sup error at most `eps`
/// (the series halfwidth is ignored). Real series give a scalar network of
/// width ≤ 13, complex ones a two-output network of width ≤ 15; weights are
/// bounded by `max{2, max|a_k|}`.
pub fn build_cheb_sum(series: &ChebSeries, eps: f64) -> Result<EmulatorNet> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    let zeta = cheb_sum_zeta(&series.coeffs, eps);
    let xs = uniform_grid(-1.0, 1.0, PROBE_POINTS.max(8 * series.coeffs.len()));
    escalate(
        "chebyshev sum",
        eps,
        |k| sum_net(series, zeta * 0.25f64.powi(k as i32)),
        |net| max_dev(net, &xs, |y| clenshaw(&series.coeffs, y)),
    )
}

fn scaled_input(net: EmulatorNet, d: f64) -> Result<EmulatorNet> {
    let map = |n: ReluNetwork| crate::blocks::with_input_map(n, 1.0 / d, 0.0);
    Ok(match net {
        EmulatorNet::Real(n) => EmulatorNet::Real(map(n)?),
        EmulatorNet::Complex(c) => EmulatorNet::Complex(ComplexNet::new(map(c.into_net())?)?),
    })
}

/// Smallest order whose Chebyshev tail is at most `tol`, found by doubling
/// and capped at `cap`.
pub fn measured_order(f: &impl Fn(f64) -> Complex64, d: f64, tol: f64, cap: usize) -> Result<ChebSeries> {
    let mut n = 8usize.min(cap.max(1));
    loop {
        let s = cheb_coeffs(f, d, 2 * n)?;
        let need = (0..=2 * n).find(|&m| s.tail(m) <= tol).unwrap_or(2 * n);
        if need <= n || n >= cap {
            return Ok(s.truncated(need.min(cap)));
        }
        n = (2 * n).min(cap);
    }
}

/// Network for an `f` of the class on `(-D, D)` with sup error at most
/// `eps`. The degree is the smallest one whose measured coefficient tail is
/// below `eps / 4`, never above the class's truncation index.
pub fn build_smooth_emulator(
    f: impl Fn(f64) -> Complex64,
    class: &SmoothClass,
    k: u32,
    eps: f64,
) -> Result<EmulatorNet> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    let cap = truncation_index(class, k, eps)?;
    let d = class.halfwidth;
    let complex = class.complex;
    let g = |x: f64| {
        let v = f(x);
        if complex {
            v
        } else {
            Complex64::new(v.re, 0.0)
        }
    };
    let mut cache: Option<(u32, ChebSeries)> = None;
    let npts = PROBE_POINTS.max(8 * cap.min(1 << 16));
    let xs = uniform_grid(-d, d, npts);
    escalate(
        "smooth emulator",
        eps,
        |j| {
            let tight = 0.25f64.powi(j as i32);
            let series = match &cache {
                Some((jj, s)) if *jj == j => s.clone(),
                _ => {
                    let s = measured_order(&g, d, eps * tight / 4.0, cap)?;
                    cache = Some((j, s.clone()));
                    s
                }
            };
            let mut net = sum_net(&series, cheb_sum_zeta(&series.coeffs, eps * tight / 2.0))?;
            if complex && !net.is_complex() {
                net = EmulatorNet::Complex(net.into_complex());
            }
            scaled_input(net, d)
        },
        |net| max_dev(net, &xs, &g),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(z: &[Complex64]) -> Vec<f64> {
        z.iter().map(|c| c.re).collect()
    }

    #[test]
    fn cubic_coefficients() {
        let s = cheb_coeffs(|x| Complex64::new(x * x * x, 0.0), 1.0, 6).unwrap();
        let a = re(&s.coeffs);
        for (k, v) in a.iter().enumerate() {
            let want = match k {
                1 => 0.75,
                3 => 0.25,
                _ => 0.0,
            };
            assert!((v - want).abs() <= 1e-12, "a{k} = {v}");
        }
    }

    #[test]
    fn constant_coefficient_halved() {
        let s = cheb_coeffs(|_| Complex64::new(1.0, 0.0), 3.0, 4).unwrap();
        assert!((s.coeffs[0].re - 2.0).abs() <= 1e-14);
        assert!((s.eval(1.7).re - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn geometric_decay_rate() {
        let s = cheb_coeffs(|x| Complex64::new(1.0 / (2.0 - x), 0.0), 1.0, 20).unwrap();
        let rho = 2.0 - 3f64.sqrt();
        for k in 5..15 {
            let r = s.coeffs[k + 1].re / s.coeffs[k].re;
            assert!((r - rho).abs() <= 1e-8, "k={k} ratio {r}");
        }
    }

    #[test]
    fn clenshaw_matches_cosines() {
        let a: Vec<Complex64> = [0.3, -1.2, 0.5, 0.25].iter().map(|&v| Complex64::new(v, 0.1)).collect();
        for y in [-0.9f64, -0.2, 0.4, 1.0] {
            let t = y.acos();
            let direct: Complex64 = a
                .iter()
                .enumerate()
                .map(|(k, c)| c * (k as f64 * t).cos() * if k == 0 { 0.5 } else { 1.0 })
                .sum();
            assert!((clenshaw(&a, y) - direct).norm() <= 1e-14);
        }
    }

    #[test]
    fn truncation_floor_and_monotone() {
        let c = SmoothClass::new(vec![1e-30; 6], 1.0, false).unwrap();
        assert_eq!(truncation_index(&c, 2, 0.4).unwrap(), 4);
        let c = SmoothClass::new(vec![1.0; 6], 1.0, false).unwrap();
        let mut prev = usize::MAX;
        for eps in [1e-6, 1e-4, 1e-2, 1e-1] {
            let n = truncation_index(&c, 3, eps).unwrap();
            assert!(n <= prev);
            prev = n;
        }
        let direct = (2.0 * jackson_constant(3) / 1e-4).sqrt().ceil() as usize;
        assert_eq!(truncation_index(&c, 3, 1e-4).unwrap(), direct.max(5));
        assert!(truncation_index(&SmoothClass::new(vec![1.0; 3], 1.0, false).unwrap(), 3, 1e-3).is_err());
    }

    #[test]
    fn sum_of_constant_and_cubic() {
        let one = ChebSeries::real(&[2.0], 1.0).unwrap();
        let n = build_cheb_sum(&one, 1e-3).unwrap();
        assert!((n.eval1(0.3).re - 1.0).abs() <= 1e-3);
        let cube = ChebSeries::real(&[0.0, 0.75, 0.0, 0.25], 1.0).unwrap();
        let n = build_cheb_sum(&cube, 1e-4).unwrap();
        assert!((n.eval1(0.5).re - 0.125).abs() <= 1e-4);
        let s = n.stats();
        assert!(s.width <= 13 && s.weight_bound <= 2.0, "{s:?}");
    }

    #[test]
    fn t_subnetworks_within_bound() {
        let zeta = 1e-4;
        for n in 2..8 {
            let net = cheb_t_net(n, zeta).unwrap();
            let xs = uniform_grid(-1.0, 1.0, 2001);
            let ys = net.compile().eval_scalar(&xs);
            let err = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (y - (n as f64 * x.acos()).cos()).abs())
                .fold(0.0, f64::max);
            assert!(err <= zeta * 4f64.powi(n as i32), "n={n} err={err}");
        }
    }

    #[test]
    fn complex_sum_width() {
        let a = vec![Complex64::new(0.5, -1.0), Complex64::new(3.0, 0.2), Complex64::new(-0.5, 1.5), Complex64::new(0.1, 0.1)];
        let s = ChebSeries::new(a.clone(), 1.0).unwrap();
        let n = build_cheb_sum(&s, 1e-3).unwrap();
        assert!(n.is_complex());
        let st = n.stats();
        assert!(st.width <= 15 && st.weight_bound <= 3.0, "{st:?}");
        for y in [-1.0, -0.3, 0.6] {
            assert!((n.eval1(y) - clenshaw(&a, y)).norm() <= 1e-3);
        }
    }

    #[test]
    fn smooth_exp_sin() {
        let d = PI;
        let class = SmoothClass::geometric(2.0, 8, d, false).unwrap();
        let f = |x: f64| Complex64::new(x.sin().exp(), 0.0);
        let net = build_smooth_emulator(f, &class, 4, 1e-3).unwrap();
        let xs = uniform_grid(-d, d, 10_000);
        let err = max_dev(&net, &xs, f);
        assert!(err <= 1e-3, "err {err}");
        assert!(net.stats().width <= 13);
    }

    #[test]
    fn higher_frequency_needs_more_terms() {
        let lo = measured_order(&|x: f64| Complex64::new(x.cos(), 0.0), 1.0, 1e-6, 1000).unwrap();
        let hi = measured_order(&|x: f64| Complex64::new((10.0 * x).cos(), 0.0), 1.0, 1e-6, 1000).unwrap();
        assert!(hi.degree() > lo.degree() + 5, "{} vs {}", hi.degree(), lo.degree());
    }

    #[test]
    fn scaling_covariance() {
        let d = 3.0;
        let f = |x: f64| Complex64::new((0.5 * x).cos(), 0.0);
        let class = SmoothClass::geometric(1.0, 8, d, false).unwrap();
        let direct = build_smooth_emulator(f, &class, 3, 1e-3).unwrap();
        let s = measured_order(&f, d, 1e-3 / 4.0, truncation_index(&class, 3, 1e-3).unwrap()).unwrap();
        let unit = sum_net(&s, cheb_sum_zeta(&s.coeffs, 1e-3 / 2.0)).unwrap();
        for x in [-2.9, -1.0, 0.0, 0.7, 2.5] {
            assert!((direct.eval1(x) - unit.eval1(x / d)).norm() <= 1e-12);
        }
    }
}
