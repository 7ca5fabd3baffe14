//! Cosine and sine: a Taylor core on a reduced argument followed by
//! double-angle steps `cos 2y = 2 cos² y - 1`.

use super::multiply::{multiply_level, square_net, square_net_dup};
use super::poly::horner_stage;
use super::{add_unit_constant, certify, sup_error, with_input_map, PROBE_POINTS};
use crate::chain::Chain;
use crate::error::{invalid, Result};
use crate::network::{log2_ceil, AffineLayer, ReluNetwork};
use crate::blocks::multiply::multiply_net;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Cos,
    Sin,
}

/// `x ↦ |x|` as ρ(x) + ρ(-x), depth 2.
pub(crate) fn abs_net() -> ReluNetwork {
    ReluNetwork::new(vec![
        AffineLayer::new(2, 1, vec![1.0, -1.0], vec![0.0, 0.0]).unwrap(),
        AffineLayer::new(1, 2, vec![1.0, 1.0], vec![0.0]).unwrap(),
    ])
    .unwrap()
}

/// `x ↦ |x|` from four half-weight neurons, so that an incoming bias of
/// magnitude up to 2 still yields weights in `[-1, 1]`.
pub(crate) fn abs_net_half() -> ReluNetwork {
    ReluNetwork::new(vec![
        AffineLayer::new(4, 1, vec![0.5, 0.5, -0.5, -0.5], vec![0.0; 4]).unwrap(),
        AffineLayer::new(1, 4, vec![1.0; 4], vec![0.0]).unwrap(),
    ])
    .unwrap()
}

/// Smallest `m` with `4^{-m-1} ≤ eps`.
pub(crate) fn square_level(eps: f64) -> u32 {
    let mut m = 1;
    while 0.25f64.powi(m as i32 + 1) > eps {
        m += 1;
    }
    m
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |p, k| p * k as f64)
}

/// Taylor coefficients of `cos(√w)` in `w` up to the first order whose
/// remainder on `[0, 1]` is at most `tol`.
fn cos_core_coeffs(tol: f64) -> Vec<f64> {
    let mut k = 1u32;
    while 1.0 / factorial(2 * k + 2) > tol {
        k += 1;
    }
    (0..=k)
        .map(|j| (if j % 2 == 0 { 1.0 } else { -1.0 }) / factorial(2 * j))
        .collect()
}

/// Cosine of the reduced argument `y ∈ [-1, 1]` followed by `n` doublings;
/// realizes `≈ cos(2^n y)` with sup error at most `eps`.
pub(crate) fn cos_doubling_net(n: u32, eps: f64) -> Result<ReluNetwork> {
    let amp = 4f64.powi(n as i32);
    let delta0 = eps / (2.0 * amp);
    let zeta_d = if n > 0 { 0.75 * eps / (amp - 1.0) } else { 1.0 };
    let coeffs = cos_core_coeffs(delta0 / 3.0);
    let k = coeffs.len() - 1;
    // |q'| ≤ 1/2 on [0, 1]
    let zeta_s = 2.0 * delta0 / 3.0;
    let zeta_mu = delta0 / 3.0 / (k.saturating_sub(1).max(1) as f64);
    let mu = multiply_net(2.0, multiply_level(2.0, zeta_mu));
    let sq = ReluNetwork::compose_absorb(&square_net(square_level(zeta_s)), &abs_net())?;
    let mut ch = Chain::new(1).stage(&sq, &[0], &[])?;
    ch = horner_stage(ch, 0, &[], &coeffs, &mu, false)?;
    if n > 0 {
        let dbl = ReluNetwork::compose_absorb(&square_net_dup(square_level(zeta_d / 2.0)), &abs_net_half())?;
        let dbl = add_unit_constant(dbl, -1.0);
        for _ in 0..n {
            ch = ch.stage(&dbl, &[0], &[])?;
        }
    }
    ch.finish()
}

/// Network for `cos(ax)` or `sin(ax)` on `[-d, d]` with sup error at most
/// `eps`; width ≤ 9, weights in `[-1, 1]`.
pub fn build_trig(kind: Trig, a: f64, d: f64, eps: f64) -> Result<ReluNetwork> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    if !(a > 0.0 && d > 0.0 && a.is_finite() && d.is_finite()) {
        return invalid("frequency and range must be positive");
    }
    let shift = match kind {
        Trig::Cos => 0.0,
        Trig::Sin => std::f64::consts::FRAC_PI_2,
    };
    let n = log2_ceil(a * d + shift);
    let s = 2f64.powi(-(n as i32));
    let f = move |x: f64| match kind {
        Trig::Cos => (a * x).cos(),
        Trig::Sin => (a * x).sin(),
    };
    let probe = PROBE_POINTS.max(20 * (a * d).ceil() as usize + 1);
    certify(
        "trig",
        eps,
        |k| {
            let core = cos_doubling_net(n, eps * 0.25f64.powi(k as i32))?;
            with_input_map(core, a * s, -shift * s)
        },
        |net| sup_error(net, f, -d, d, probe),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        let c = build_trig(Trig::Cos, 1.0, 1.0, 1e-3).unwrap();
        assert!((c.eval1(0.0) - 1.0).abs() <= 1e-3);
        let s = build_trig(Trig::Sin, 1.0, 1.0, 1e-3).unwrap();
        assert!(s.eval1(0.0).abs() <= 1e-3);
    }

    #[test]
    fn high_frequency_cosine() {
        let d = 2.0 * std::f64::consts::PI;
        let c = build_trig(Trig::Cos, 32.0, d, 1e-3).unwrap();
        let n = 2 * (32.0 * d).ceil() as usize * 10;
        assert!(sup_error(&c, |x| (32.0 * x).cos(), -d, d, n) <= 1e-3);
        let st = c.stats();
        assert!(st.width <= 9 && st.weight_bound <= 1.0, "{st:?}");
    }

    #[test]
    fn sine_small_range() {
        let s = build_trig(Trig::Sin, 3.0, 0.2, 1e-4).unwrap();
        assert!(sup_error(&s, |x| (3.0 * x).sin(), -0.2, 0.2, 10_000) <= 1e-4);
        assert!(s.weight_bound() <= 1.0);
    }
}
