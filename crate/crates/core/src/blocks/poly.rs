//! Polynomials by Horner's scheme with approximate multiplications.

use super::multiply::{multiply_level, multiply_net};
use super::{certify, scale_pow2, uniform_grid, PROBE_POINTS};
use crate::chain::{Chain, Row};
use crate::error::{invalid, Result};
use crate::network::{bounded_affine, log2_ceil, ComplexNet, ReluNetwork};
use num_complex::Complex64;

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn trim(c: &[f64]) -> &[f64] {
    let mut n = c.len();
    while n > 1 && c[n - 1] == 0.0 {
        n -= 1;
    }
    &c[..n]
}

/// Bound on every Horner accumulator for `|x| ≤ d`.
fn acc_bound(c: &[f64], d: f64) -> f64 {
    let mut a = 0.0f64;
    let mut best = 0.0f64;
    for &ci in c.iter().rev() {
        a = a * d + ci.abs();
        best = best.max(a);
    }
    best
}

/// Error amplification `Σ_{j=0}^{N-2} d^j` of a degree-`N` Horner chain
/// whose products each err by at most one unit.
fn horner_gain(deg: usize, d: f64) -> f64 {
    (0..deg.saturating_sub(1)).map(|j| d.powi(j as i32)).sum()
}

/// Appends a Horner evaluation of `Σ c_k x^k` to a chain.
///
/// The variable is state coordinate `x`; `carry` coordinates are kept. The
/// new state is `[carry..., x (if keep_x), value]`.
pub fn horner_stage(
    chain: Chain,
    x: usize,
    carry: &[usize],
    c: &[f64],
    mu: &ReluNetwork,
    keep_x: bool,
) -> Result<Chain> {
    let c = trim(c);
    let n = c.len() - 1;
    let mut keep: Vec<usize> = carry.to_vec();
    if keep_x {
        keep.push(x);
    }
    let mut rows: Vec<Row> = keep.iter().map(|&i| Row::coord(i)).collect();
    if n == 0 {
        rows.push(Row::new(vec![], c[0]));
        return chain.linear(&rows);
    }
    if n == 1 {
        rows.push(Row::new(vec![(x, c[1])], c[0]));
        return chain.linear(&rows);
    }
    // state: [x, carry..., acc]
    let mut init = vec![Row::coord(x)];
    init.extend(carry.iter().map(|&i| Row::coord(i)));
    init.push(Row::new(vec![(x, c[n])], c[n - 1]));
    let mut ch = chain.linear(&init)?;
    let nc = carry.len();
    let acc = 1 + nc;
    for k in (0..n - 1).rev() {
        let last = k == 0;
        let pass: Vec<usize> = if last && !keep_x {
            (1..=nc).collect()
        } else {
            (0..=nc).collect()
        };
        // state after stage: [μ, pass...]
        ch = ch.stage(mu, &[0, acc], &pass)?;
        let mu_out = Row::new(vec![(0, 1.0)], c[k]);
        let mut next: Vec<Row> = Vec::new();
        if last {
            // [carry..., x?, value]
            let off = if keep_x { 2 } else { 1 };
            next.extend((0..nc).map(|i| Row::coord(off + i)));
            if keep_x {
                next.push(Row::coord(1));
            }
        } else {
            next.push(Row::coord(1));
            next.extend((0..nc).map(|i| Row::coord(2 + i)));
        }
        next.push(mu_out);
        ch = ch.linear(&next)?;
    }
    Ok(ch)
}

/// Internal plan shared by the real and complex polynomial builders.
#[derive(Clone, Debug)]
pub struct PolyPlan {
    /// Exponent `a` with `2^a ≥ max|coefficient|`.
    pub scale_exp: u32,
    /// Working range of the multiplications.
    pub mu_range: f64,
    /// Refinement level of the multiplications.
    pub level: u32,
}

impl PolyPlan {
    /// Plans a Horner evaluation of polynomials with coefficients bounded by
    /// `amax`, degree `deg`, on `[-d, d]`, with output error `eps`.
    pub fn new(parts: &[&[f64]], d: f64, eps: f64) -> Self {
        let amax = parts
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let scale_exp = log2_ceil(amax);
        let s = 2f64.powi(-(scale_exp as i32));
        let mut mu_range = d;
        let mut gain = 0.0f64;
        for p in parts {
            let c: Vec<f64> = p.iter().map(|v| v * s).collect();
            let c = trim(&c);
            mu_range = mu_range.max(acc_bound(c, d));
            gain = gain.max(horner_gain(c.len() - 1, d));
        }
        let zeta = if gain > 0.0 {
            eps / (2f64.powi(scale_exp as i32) * gain)
        } else {
            0.25
        };
        let level = multiply_level(mu_range, zeta.min(0.25));
        Self {
            scale_exp,
            mu_range,
            level,
        }
    }

    fn mu(&self, extra: u32) -> ReluNetwork {
        multiply_net(self.mu_range, self.level + extra)
    }

    fn scaled(&self, c: &[f64]) -> Vec<f64> {
        let s = 2f64.powi(-(self.scale_exp as i32));
        c.iter().map(|v| v * s).collect()
    }
}

fn check(coeffs_len: usize, d: f64, eps: f64) -> Result<()> {
    if coeffs_len == 0 {
        return invalid("empty coefficient list");
    }
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    if !(d > 0.0 && d.is_finite()) {
        return invalid(format!("range {d} must be positive"));
    }
    Ok(())
}

/// Network for `x ↦ Σ a_k x^k` on `[-d, d]` with sup error at most `eps`.
///
/// Degrees 0 and 1 are realized exactly; higher degrees use `N - 1`
/// products of width 5 with the variable carried alongside (width ≤ 7),
/// and the coefficient scale `2^a` is restored by doubling layers.
pub fn build_polynomial(coeffs: &[f64], d: f64, eps: f64) -> Result<ReluNetwork> {
    check(coeffs.len(), d, eps)?;
    if coeffs.iter().any(|v| !v.is_finite()) {
        return invalid("non-finite coefficient");
    }
    let c = trim(coeffs);
    if c.len() <= 2 {
        let a1 = c.get(1).copied().unwrap_or(0.0);
        return bounded_affine(&[vec![a1]], &[c[0]]);
    }
    let plan = PolyPlan::new(&[c], d, eps);
    let sc = plan.scaled(c);
    certify(
        "polynomial",
        eps,
        |k| {
            let net = horner_stage(Chain::new(1), 0, &[], &sc, &plan.mu(k), false)?.finish()?;
            Ok(scale_pow2(net, plan.scale_exp))
        },
        |n| super::sup_error(n, |x| horner(c, x), -d, d, PROBE_POINTS),
    )
}

/// Complex-coefficient polynomial as a two-output network: the real part is
/// evaluated first with the variable carried, then the imaginary part with
/// the real result carried (width ≤ 9). Each component errs by at most
/// `eps / √2`.
pub fn build_polynomial_complex(coeffs: &[Complex64], d: f64, eps: f64) -> Result<ComplexNet> {
    check(coeffs.len(), d, eps)?;
    let re: Vec<f64> = coeffs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = coeffs.iter().map(|z| z.im).collect();
    if re.iter().chain(&im).any(|v| !v.is_finite()) {
        return invalid("non-finite coefficient");
    }
    let target = eps / std::f64::consts::SQRT_2;
    let plan = PolyPlan::new(&[&re, &im], d, target);
    let (sre, sim) = (plan.scaled(&re), plan.scaled(&im));
    let net = certify(
        "complex polynomial",
        target,
        |k| {
            let mu = plan.mu(k);
            let ch = horner_stage(Chain::new(1), 0, &[], &sre, &mu, true)?;
            // state: [x, re]
            let ch = horner_stage(ch, 0, &[1], &sim, &mu, false)?;
            Ok(scale_pow2(ch.finish()?, plan.scale_exp))
        },
        |n| {
            let xs = uniform_grid(-d, d, PROBE_POINTS);
            let out = n.compile().eval_flat(&xs);
            xs.iter()
                .zip(out.chunks(2))
                .map(|(&x, o)| (o[0] - horner(&re, x)).abs().max((o[1] - horner(&im, x)).abs()))
                .fold(0.0, f64::max)
        },
    )?;
    ComplexNet::new(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_exact() {
        let n = build_polynomial(&[0.0, 1.0], 1.0, 1e-3).unwrap();
        assert_eq!(n.eval1(0.3), 0.3);
        let n = build_polynomial(&[5.0, -3.0], 2.0, 1e-3).unwrap();
        assert_eq!(n.eval1(1.0), 2.0);
        assert!(n.weight_bound() <= 1.0);
    }

    #[test]
    fn cubic_at_point() {
        let n = build_polynomial(&[0.0, 0.0, 0.0, 1.0], 1.0, 1e-4).unwrap();
        assert!((n.eval1(0.7) - 0.343).abs() <= 1e-4);
        let s = n.stats();
        assert!(s.width <= 9 && s.weight_bound <= 1.0, "{s:?}");
    }

    #[test]
    fn large_coefficients_and_range() {
        let c = [3.0, -7.5, 0.25, 12.0, -1.0];
        let n = build_polynomial(&c, 2.5, 1e-3).unwrap();
        let err = super::super::sup_error(&n, |x| horner(&c, x), -2.5, 2.5, 10_000);
        assert!(err <= 1e-3, "err {err}");
        assert!(n.width() <= 9 && n.weight_bound() <= 1.0);
    }

    #[test]
    fn complex_quadratic() {
        let c = [Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0)];
        let n = build_polynomial_complex(&c, 1.0, 1e-3).unwrap();
        for i in 0..=50 {
            let x = -1.0 + i as f64 / 25.0;
            let z = n.eval1(x);
            assert!((z.re - x * x).abs() <= 1e-3 && (z.im - x * x).abs() <= 1e-3);
        }
        let s = n.stats();
        assert!(s.width <= 11 && s.weight_bound <= 1.0, "{s:?}");
    }

    #[test]
    fn rejects_empty() {
        assert!(build_polynomial(&[], 1.0, 1e-2).is_err());
    }
}
