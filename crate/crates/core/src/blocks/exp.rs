//! Decaying exponentials `e^{-ax}` on `(0, D)`: a Taylor core for
//! `e^{-s}` with `s ∈ [0, 1]` followed by repeated squaring.

use super::multiply::{multiply_level, multiply_net, square_net};
use super::poly::horner_stage;
use super::trig::square_level;
use super::{certify, sup_error, with_input_map, PROBE_POINTS};
use crate::chain::Chain;
use crate::error::{invalid, Result};
use crate::network::{log2_ceil, ReluNetwork};

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |p, k| p * k as f64)
}

/// `≈ e^{-2^n s}` for `s ∈ [0, 1]` with sup error at most `eps`.
pub(crate) fn exp_squaring_net(n: u32, eps: f64) -> Result<ReluNetwork> {
    let amp = 2f64.powi(n as i32);
    let delta0 = eps / (2.0 * amp);
    let zeta_sq = eps / (2.0 * amp);
    let mut k = 1u32;
    while 1.0 / factorial(k + 1) > delta0 / 2.0 {
        k += 1;
    }
    let coeffs: Vec<f64> = (0..=k)
        .map(|j| (if j % 2 == 0 { 1.0 } else { -1.0 }) / factorial(j))
        .collect();
    let zeta_mu = delta0 / 2.0 / ((k as f64 - 1.0).max(1.0));
    let mu = multiply_net(4.0, multiply_level(4.0, zeta_mu));
    let mut ch = horner_stage(Chain::new(1), 0, &[], &coeffs, &mu, false)?;
    if n > 0 {
        let sq = square_net(square_level(zeta_sq));
        for _ in 0..n {
            ch = ch.stage(&sq, &[0], &[])?;
        }
    }
    ch.finish()
}

/// Uncertified construction with internal target `eps` (used by the
/// reciprocal builder, which certifies the whole sum).
pub fn exp_decay_with(a: f64, d: f64, eps: f64) -> Result<ReluNetwork> {
    let n = log2_ceil(a * d);
    let core = exp_squaring_net(n, eps)?;
    with_input_map(core, a * 2f64.powi(-(n as i32)), 0.0)
}

/// Network for `e^{-ax}` on `(0, d)` with sup error at most `eps`; width ≤ 9.
/// Outside `(0, d)` the network's natural extension carries no guarantee.
pub fn build_exp_decay(a: f64, d: f64, eps: f64) -> Result<ReluNetwork> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    if !(a > 0.0 && d > 0.0 && a.is_finite() && d.is_finite()) {
        return invalid("rate and range must be positive");
    }
    certify(
        "exp decay",
        eps,
        |k| exp_decay_with(a, d, eps * 0.25f64.powi(k as i32)),
        |net| sup_error(net, |x| (-a * x).exp(), 0.0, d, PROBE_POINTS),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn at_zero_and_one() {
        let n = build_exp_decay(1.0, 1.0, 1e-4).unwrap();
        assert!((n.eval1(0.0) - 1.0).abs() <= 1e-4);
        assert!((n.eval1(1.0) - 0.36787944117144233).abs() <= 1e-4);
        let s = n.stats();
        assert!(s.width <= 9 && s.weight_bound <= 1.0, "{s:?}");
    }

    #[test]
    fn fast_decay_on_grid() {
        let n = build_exp_decay(8.0, 4.0, 1e-3).unwrap();
        assert!(sup_error(&n, |x| (-8.0 * x).exp(), 0.0, 4.0, 10_000) <= 1e-3);
        assert!(n.width() <= 9 && n.weight_bound() <= 1.0);
    }

    #[test]
    fn small_range_uses_bounded_weights() {
        let n = build_exp_decay(50.0, 0.01, 1e-3).unwrap();
        assert!(n.weight_bound() <= 1.0);
        assert!(sup_error(&n, |x| (-50.0 * x).exp(), 0.0, 0.01, 1000) <= 1e-3);
    }
}
