//! Exponential sums for `1/x` and `1/x^n` on `(1, D)`.
//!
//! `1/x = ∫_0^∞ e^{-xt} dt`; with `t = asinh(e^u)` the integrand decays
//! double-exponentially in `u` and the trapezoidal rule with step
//! `h = k^{-1/2}` on `|u| ≤ k h` errs by `O(e^{-√k})`.

use super::exp::exp_decay_with;
use super::multiply::{multiply_level, multiply_net};
use super::{certify, uniform_grid, PROBE_POINTS};
use crate::chain::{Chain, Row};
use crate::error::{invalid, Result};
use crate::network::ReluNetwork;
use serde::{Deserialize, Serialize};

/// Nodes `t_j` and weights `ω_j`, `j = -k..=k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SincRule {
    pub k: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SincRule {
    pub fn eval(&self, x: f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * (-t * x).exp())
            .sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// `t_j = log(e^{jh} + √(1 + e^{2jh}))`, `ω_j = (k + k e^{-2jh})^{-1/2}`.
pub fn sinc_rule(k: usize) -> SincRule {
    assert!(k >= 1, "sinc rule needs k >= 1");
    let kf = k as f64;
    let h = kf.powf(-0.5);
    let ki = k as i64;
    let (nodes, weights) = (-ki..=ki)
        .map(|j| {
            let u = j as f64 * h;
            let t = (u.exp() + (1.0 + (2.0 * u).exp()).sqrt()).ln();
            let w = (kf + kf * (-2.0 * u).exp()).powf(-0.5);
            (t, w)
        })
        .unzip();
    SincRule { k, nodes, weights }
}

/// Sup of `|1/x - Σ ω_j e^{-t_j x}|` over a geometric grid of `[lo, hi]`.
pub fn sinc_error(rule: &SincRule, lo: f64, hi: f64, n: usize) -> f64 {
    let r = (hi / lo).ln();
    (0..n)
        .map(|i| {
            let x = lo * (r * i as f64 / (n - 1) as f64).exp();
            (1.0 / x - rule.eval(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Empirical constant in `sup_{x ≥ 1} |1/x - Σ ω_j e^{-t_j x}| ≤ C_S e^{-√k}`,
/// measured once over `k ∈ {4, 16, 64, 256}` on `[1, 100]` and rounded up.
pub const SINC_CONSTANT: f64 = 2.0;

fn sinc_count(d: f64, tol: f64) -> usize {
    let mut k = ((2.0 * SINC_CONSTANT / tol).ln().max(1.0).powi(2) * 0.5).ceil() as usize;
    k = k.max(1);
    loop {
        if sinc_error(&sinc_rule(k), 1.0, d, 400) <= tol {
            return k;
        }
        k += (k / 8).max(1);
    }
}

/// Components of a reciprocal network: the rule, one exponential network
/// per node and the assembled sum.
pub struct ReciprocalParts {
    pub rule: SincRule,
    pub terms: Vec<ReluNetwork>,
    pub net: ReluNetwork,
}

fn assemble(rule: &SincRule, terms: &[ReluNetwork]) -> Result<ReluNetwork> {
    let n = terms.len();
    // state: [x, acc]
    let mut ch = Chain::new(1);
    for (j, (t, &w)) in terms.iter().zip(&rule.weights).enumerate() {
        let first = j == 0;
        let last = j + 1 == n;
        ch = match (first, last) {
            (true, true) => ch.stage(t, &[0], &[])?.linear(&[Row::new(vec![(0, w)], 0.0)])?,
            (true, false) => ch
                .stage(t, &[0], &[0])?
                .linear(&[Row::coord(1), Row::new(vec![(0, w)], 0.0)])?,
            (false, true) => ch
                .stage(t, &[0], &[1])?
                .linear(&[Row::new(vec![(0, w), (1, 1.0)], 0.0)])?,
            (false, false) => ch
                .stage(t, &[0], &[0, 1])?
                .linear(&[Row::coord(1), Row::new(vec![(0, w), (2, 1.0)], 0.0)])?,
        };
    }
    ch.finish()
}

fn reciprocal_attempt(d: f64, eps: f64, tighten: u32) -> Result<ReciprocalParts> {
    let f = 0.25f64.powi(tighten as i32);
    let rule = sinc_rule(sinc_count(d, eps * f / 2.0));
    let per_term = eps * f / (2.0 * rule.weight_sum());
    let terms = rule
        .nodes
        .iter()
        .map(|&t| exp_decay_with(t, d, per_term))
        .collect::<Result<Vec<_>>>()?;
    let net = assemble(&rule, &terms)?;
    Ok(ReciprocalParts { rule, terms, net })
}

fn reciprocal_probe(net: &ReluNetwork, d: f64) -> f64 {
    let xs = uniform_grid(1.0, d, PROBE_POINTS);
    let ys = net.compile().eval_scalar(&xs);
    xs.iter()
        .zip(&ys)
        .map(|(x, y)| (y - 1.0 / x).abs())
        .fold(0.0, f64::max)
}

/// Reciprocal network together with its sinc rule and exponential terms.
pub fn reciprocal_parts(d: f64, eps: f64) -> Result<ReciprocalParts> {
    if !(d > 1.0 && d.is_finite()) {
        return invalid(format!("range {d} must exceed 1"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    certify(
        "reciprocal",
        eps,
        |k| reciprocal_attempt(d, eps, k),
        |p| reciprocal_probe(&p.net, d),
    )
}

/// Network for `1/x` on `(1, d)` with sup error at most `eps`; width ≤ 13.
pub fn build_reciprocal(d: f64, eps: f64) -> Result<ReluNetwork> {
    Ok(reciprocal_parts(d, eps)?.net)
}

/// Per-stage accuracy `ζ` used for `1/x^n` so that the accumulated bound
/// `(2n+1)(1+ζ)^n ζ` stays below `eps`.
pub fn reciprocal_power_zeta(n: u32, eps: f64) -> f64 {
    eps / ((2 * n + 1) as f64 * (1.0 + eps).powi(n as i32))
}

fn reciprocal_power_attempt(n: u32, d: f64, zeta: f64) -> Result<ReluNetwork> {
    let phi = reciprocal_attempt(d, zeta, 0)?.net;
    let mu = multiply_net(1.0, multiply_level(1.0, zeta));
    // state: [φ], then [ψ_k, φ]
    let mut ch = Chain::new(1).stage(&phi, &[0], &[])?;
    for k in 1..n {
        let last = k + 1 == n;
        let (inputs, carry): ([usize; 2], &[usize]) = match (k == 1, last) {
            (true, true) => ([0, 0], &[]),
            (true, false) => ([0, 0], &[0]),
            (false, true) => ([0, 1], &[]),
            (false, false) => ([0, 1], &[1]),
        };
        ch = ch.stage(&mu, &inputs, carry)?;
    }
    ch.finish()
}

/// Network for `x^{-n}` on `(1, d)`, `n ≥ 2`: one reciprocal `φ` carried
/// alongside a chain of products `ψ_{k+1} = μ(ψ_k, φ)`; width ≤ 13.
pub fn build_reciprocal_power(n: u32, d: f64, eps: f64) -> Result<ReluNetwork> {
    if n < 2 {
        return invalid("exponent must be at least 2");
    }
    if !(d > 1.0 && d.is_finite()) {
        return invalid(format!("range {d} must exceed 1"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    certify(
        "reciprocal power",
        eps,
        |k| reciprocal_power_attempt(n, d, reciprocal_power_zeta(n, eps) * 0.25f64.powi(k as i32)),
        |net| {
            let xs = uniform_grid(1.0, d, PROBE_POINTS);
            let ys = net.compile().eval_scalar(&xs);
            xs.iter()
                .zip(&ys)
                .map(|(x, y)| (y - x.powi(-(n as i32))).abs())
                .fold(0.0, f64::max)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::sup_error;

    #[test]
    fn rule_k1() {
        let r = sinc_rule(1);
        assert_eq!(r.len(), 3);
        assert!((r.nodes[1] - 0.881373587019543).abs() < 1e-12);
        assert!((r.weights[1] - 0.7071067811865476).abs() < 1e-12);
        assert!((r.nodes[2] - 1.7253825588523148).abs() < 1e-12);
    }

    #[test]
    fn rule_invariants() {
        for k in [1, 5, 40, 300] {
            let r = sinc_rule(k);
            let cap = (k as f64).powf(-0.5);
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            assert!(r.nodes[0] > 0.0);
            assert!(r.weights.iter().all(|&w| w > 0.0 && w <= cap + 1e-15));
        }
    }

    #[test]
    fn sinc_constant_covers_measurements() {
        for k in [4, 16, 64, 256] {
            let e = sinc_error(&sinc_rule(k), 1.0, 100.0, 2000);
            assert!(e <= SINC_CONSTANT * (-(k as f64).sqrt()).exp(), "k={k} e={e}");
        }
    }

    #[test]
    fn reciprocal_values() {
        let p = reciprocal_parts(100.0, 1e-3).unwrap();
        assert!((p.net.eval1(50.0) - 0.02).abs() <= 1e-3);
        assert!((p.net.eval1(1.0) - 1.0).abs() <= 1e-3);
        let s = p.net.stats();
        assert!(s.width <= 13 && s.weight_bound <= 1.0, "{s:?}");
        for x in [1.0, 2.5, 17.0, 99.0] {
            let direct: f64 = p
                .terms
                .iter()
                .zip(&p.rule.weights)
                .map(|(t, w)| w * t.eval1(x))
                .sum();
            assert!((direct - p.net.eval1(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn reciprocal_power_values() {
        let n = build_reciprocal_power(3, 8.0, 1e-3).unwrap();
        assert!((n.eval1(2.0) - 0.125).abs() <= 1e-3);
        assert!(sup_error(&n, |x| x.powi(-3), 1.0, 8.0, 10_000) <= 1e-3);
        assert!(n.width() <= 13);
        let n2 = build_reciprocal_power(2, 4.0, 1e-2).unwrap();
        assert!((n2.eval1(1.0) - 1.0).abs() <= 1e-2);
    }
}
