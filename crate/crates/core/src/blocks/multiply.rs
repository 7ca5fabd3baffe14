//! Squaring on `[0, 1]` by sawtooth interpolation and multiplication by
//! polarization.

use super::{certify, scale_pow2, uniform_grid, PROBE_POINTS};
use crate::error::{invalid, Result};
use crate::network::{log2_ceil, AffineLayer, ReluNetwork};

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    Ok(())
}

/// Piecewise-linear interpolant of `x²` at the dyadic points `j 2^{-m}` of
/// `[0, 1]`; width 3, depth `m + 1`, error at most `4^{-m-1}`.
///
/// Neurons carry `P, Q` with `P + Q = |u|` for the current sawtooth offset
/// and an accumulator `R` that stays nonnegative.
pub fn square_net(m: u32) -> ReluNetwork {
    square_net_impl(m, false)
}

/// Same interpolant but returning `2 f_m(x)`, with the accumulator
/// duplicated so all weights stay in `[-1, 1]`; width 4.
pub fn square_net_dup(m: u32) -> ReluNetwork {
    square_net_impl(m, true)
}

fn square_net_impl(m: u32, dup: bool) -> ReluNetwork {
    assert!(m >= 1);
    let nr = if dup { 2 } else { 1 };
    let w = 2 + nr;
    let mut layers = Vec::with_capacity(m as usize + 1);
    let mut first = AffineLayer::zeros(w, 1);
    first.set_w(0, 0, 1.0);
    first.set_b(0, -0.5);
    first.set_w(1, 0, -1.0);
    first.set_b(1, 0.5);
    for r in 0..nr {
        first.set_w(2 + r, 0, 1.0);
    }
    layers.push(first);
    for s in 1..m {
        let h = 0.5f64.powi(s as i32);
        let mut l = AffineLayer::zeros(w, w);
        l.set_w(0, 0, -1.0);
        l.set_w(0, 1, -1.0);
        l.set_b(0, h / 2.0);
        l.set_w(1, 0, 1.0);
        l.set_w(1, 1, 1.0);
        l.set_b(1, -h / 2.0);
        for r in 0..nr {
            l.set_w(2 + r, 0, h);
            l.set_w(2 + r, 1, h);
            l.set_w(2 + r, 2 + r, 1.0);
            l.set_b(2 + r, -h * h);
        }
        layers.push(l);
    }
    let h = 0.5f64.powi(m as i32);
    let k = nr as f64;
    let mut out = AffineLayer::zeros(1, w);
    out.set_w(0, 0, k * h);
    out.set_w(0, 1, k * h);
    for r in 0..nr {
        out.set_w(0, 2 + r, 1.0);
    }
    out.set_b(0, -k * h * h);
    layers.push(out);
    ReluNetwork::from_layers_unchecked(layers)
}

fn square_level(eps: f64) -> u32 {
    let mut m = 1;
    while 0.25f64.powi(m as i32 + 1) > eps {
        m += 1;
    }
    m
}

/// Squaring network with sup error at most `eps` on `[0, 1]`.
pub fn build_square(eps: f64) -> Result<ReluNetwork> {
    check_eps(eps)?;
    let m0 = square_level(eps);
    certify(
        "square",
        eps,
        |k| Ok(square_net(m0 + k)),
        |n| super::sup_error(n, |x| x * x, 0.0, 1.0, PROBE_POINTS),
    )
}

/// Power of two `D' ≥ max(D, 1)` used as the working range of `μ`.
pub(crate) fn mult_range(d: f64) -> (f64, u32) {
    let q = log2_ceil(d.max(1.0));
    (2f64.powi(q as i32), q)
}

/// A priori sup error of [`multiply_net`] on `[-D, D]²`.
pub fn multiply_error(d: f64, m: u32) -> f64 {
    let (dp, _) = mult_range(d);
    dp * dp * 0.25f64.powi(m as i32 + 1)
}

/// Smallest refinement level with `multiply_error(d, m) ≤ eps`.
pub fn multiply_level(d: f64, eps: f64) -> u32 {
    let mut m = 1;
    while multiply_error(d, m) > eps {
        m += 1;
    }
    m
}

/// Product network `(x, y) ↦ ≈ xy` on `[-D, D]²` with refinement `m`.
///
/// With `u = |x+y|/(2D')`, `v = |x-y|/(2D')` the output is
/// `D'² (f_m(u) - f_m(v))`; the two sawtooth chains share one accumulator
/// `R = 1 + f_s(u) - f_s(v) ≥ 0`. Width 5, weights in `[-1, 1]`, and
/// `μ(0, y) = μ(x, 0) = 0` exactly.
pub fn multiply_net(d: f64, m: u32) -> ReluNetwork {
    assert!(m >= 1 && d > 0.0);
    let (dp, q) = mult_range(d);
    let c = 1.0 / (2.0 * dp);
    let mut layers = Vec::new();
    let mut first = AffineLayer::zeros(4, 2);
    for (r, (a, b)) in [(c, c), (-c, -c), (c, -c), (-c, c)].into_iter().enumerate() {
        first.set_w(r, 0, a);
        first.set_w(r, 1, b);
    }
    layers.push(first);
    // state: Pu, Qu, Pv, Qv, R
    let mut l = AffineLayer::zeros(5, 4);
    for (r, (src, sign, bias)) in [(0, 1.0, -0.5), (0, -1.0, 0.5), (2, 1.0, -0.5), (2, -1.0, 0.5)]
        .into_iter()
        .enumerate()
    {
        l.set_w(r, src, sign);
        l.set_w(r, src + 1, sign);
        l.set_b(r, bias);
    }
    l.set_w(4, 0, 1.0);
    l.set_w(4, 1, 1.0);
    l.set_w(4, 2, -1.0);
    l.set_w(4, 3, -1.0);
    l.set_b(4, 1.0);
    layers.push(l);
    for s in 1..m {
        let h = 0.5f64.powi(s as i32);
        let mut l = AffineLayer::zeros(5, 5);
        for base in [0, 2] {
            l.set_w(base, base, -1.0);
            l.set_w(base, base + 1, -1.0);
            l.set_b(base, h / 2.0);
            l.set_w(base + 1, base, 1.0);
            l.set_w(base + 1, base + 1, 1.0);
            l.set_b(base + 1, -h / 2.0);
        }
        l.set_w(4, 0, h);
        l.set_w(4, 1, h);
        l.set_w(4, 2, -h);
        l.set_w(4, 3, -h);
        l.set_w(4, 4, 1.0);
        layers.push(l);
    }
    let h = 0.5f64.powi(m as i32);
    let mut out = AffineLayer::zeros(1, 5);
    out.set_w(0, 0, h);
    out.set_w(0, 1, h);
    out.set_w(0, 2, -h);
    out.set_w(0, 3, -h);
    out.set_w(0, 4, 1.0);
    out.set_b(0, -1.0);
    layers.push(out);
    scale_pow2(ReluNetwork::from_layers_unchecked(layers), 2 * q)
}

/// Multiplication network `μ_{D,ε}` with sup error at most `eps` on `[-D, D]²`.
pub fn build_multiply(d: f64, eps: f64) -> Result<ReluNetwork> {
    check_eps(eps)?;
    if !(d > 0.0 && d.is_finite()) {
        return invalid(format!("range {d} must be positive"));
    }
    let m0 = multiply_level(d, eps);
    certify(
        "multiply",
        eps,
        |k| Ok(multiply_net(d, m0 + k)),
        |n| multiply_probe_error(n, d, 65),
    )
}

/// Sup error of a product network against `xy` on an `n × n` grid.
pub fn multiply_probe_error(net: &ReluNetwork, d: f64, n: usize) -> f64 {
    let g = uniform_grid(-d, d, n);
    let pts: Vec<f64> = g.iter().flat_map(|&x| g.iter().flat_map(move |&y| [x, y])).collect();
    let out = net.compile().eval_flat(&pts);
    pts.chunks(2)
        .zip(&out)
        .map(|(p, z)| (z - p[0] * p[1]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_interpolates_dyadics() {
        for m in 1..8 {
            let n = square_net(m);
            assert_eq!(n.depth(), m as usize + 1);
            assert_eq!(n.width(), 3);
            assert!(n.weight_bound() <= 1.0);
            assert_eq!(n.eval1(0.0), 0.0);
            assert_eq!(n.eval1(1.0), 1.0);
            assert_eq!(n.eval1(0.5), 0.25);
            let h = 0.5f64.powi(m as i32);
            for j in 0..=(1 << m) {
                let x = j as f64 * h;
                assert!((n.eval1(x) - x * x).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn square_error_and_lipschitz() {
        for eps in [1e-2, 1e-4] {
            let n = build_square(eps).unwrap();
            assert!(super::super::sup_error(&n, |x| x * x, 0.0, 1.0, 10_000) <= eps);
        }
        let n = build_square(1e-3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (x, y): (f64, f64) = (rng.random(), rng.random());
            assert!((n.eval1(x) - n.eval1(y)).abs() <= 2.0 * (x - y).abs() + 1e-12);
        }
        assert!(build_square(0.7).is_err());
    }

    #[test]
    fn square_dup_doubles() {
        let a = square_net(5);
        let b = square_net_dup(5);
        assert_eq!(b.width(), 4);
        assert!(b.weight_bound() <= 1.0);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((b.eval1(x) - 2.0 * a.eval1(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn multiply_examples() {
        let mu = build_multiply(4.0, 1e-3).unwrap();
        let s = mu.stats();
        assert!(s.width <= 5 && s.weight_bound <= 1.0);
        assert!((mu.eval_point(&[2.0, 3.0])[0] - 6.0).abs() <= 1e-3);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let y = rng.random_range(-4.0..4.0);
            assert_eq!(mu.eval_point(&[0.0, y])[0], 0.0);
            assert_eq!(mu.eval_point(&[y, 0.0])[0], 0.0);
        }
    }

    #[test]
    fn multiply_error_bound_holds() {
        for (d, m) in [(1.0, 3), (3.0, 5), (0.2, 4), (10.0, 8)] {
            let n = multiply_net(d, m);
            let err = multiply_probe_error(&n, d, 81);
            assert!(err <= multiply_error(d, m) * (1.0 + 1e-9), "d={d} m={m} err={err}");
        }
    }

    #[test]
    fn multiply_depth_is_affine_in_log_eps() {
        let depths: Vec<f64> = (1..=6)
            .map(|k| build_multiply(4.0, 10f64.powi(-k)).unwrap().depth() as f64)
            .collect();
        let diffs: Vec<f64> = depths.windows(2).map(|w| w[1] - w[0]).collect();
        // log2(10)/2 ≈ 1.66 levels per decade
        assert!(diffs.iter().all(|&d| (1.0..=3.0).contains(&d)), "{diffs:?}");
    }
}
