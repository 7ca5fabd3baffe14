//! Elementary constructive builders.
//!
//! Every builder chooses its internal accuracies from an a priori error
//! budget, then checks the result on a probe grid and tightens the budget
//! if the check fails.

mod exp;
mod multiply;
mod poly;
mod sinc;
mod trig;

pub use exp::{build_exp_decay, exp_decay_with};
pub use multiply::{
    build_multiply, build_square, multiply_level, multiply_error, multiply_net, multiply_probe_error, square_net,
    square_net_dup,
};
pub use poly::{build_polynomial, build_polynomial_complex, horner_stage, PolyPlan};
pub use sinc::{
    build_reciprocal, build_reciprocal_power, reciprocal_parts, reciprocal_power_zeta, sinc_error,
    sinc_rule, ReciprocalParts, SincRule, SINC_CONSTANT,
};
pub use trig::{build_trig, Trig};

use crate::error::{Error, Result};
use crate::network::{AffineLayer, ReluNetwork};

/// Number of probe points used for builder self-certification.
pub const PROBE_POINTS: usize = 2049;
/// Maximum number of budget tightenings before a builder gives up.
pub const MAX_ESCALATIONS: u32 = 6;

/// Uniform grid of `n ≥ 2` points on `[lo, hi]`, endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Sup error of a scalar network against `f` on a uniform grid.
pub fn sup_error(net: &ReluNetwork, f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let xs = uniform_grid(lo, hi, n);
    let ys = net.compile().eval_scalar(&xs);
    xs.iter()
        .zip(&ys)
        .map(|(&x, &y)| (y - f(x)).abs())
        .fold(0.0, f64::max)
}

/// Runs `build(k)` for `k = 0, 1, ...` until `check` accepts, returning the
/// first accepted network or a certification error with the best achieved
/// value.
pub(crate) fn certify<T>(
    stage: &str,
    target: f64,
    mut build: impl FnMut(u32) -> Result<T>,
    mut check: impl FnMut(&T) -> f64,
) -> Result<T> {
    let mut best = f64::INFINITY;
    for k in 0..=MAX_ESCALATIONS {
        let candidate = build(k)?;
        let err = check(&candidate);
        if err <= target {
            return Ok(candidate);
        }
        best = best.min(err);
    }
    Err(Error::Certification {
        stage: stage.to_string(),
        achieved: best,
        target,
    })
}

/// Multiplies the outputs of a network by `2^j` while keeping every weight
/// in `[-1, 1]`: the last layer is emitted four times per output
/// (`y, y, -y, -y`), followed by `j - 1` pairwise-summing layers.
pub fn scale_pow2(net: ReluNetwork, j: u32) -> ReluNetwork {
    if j == 0 {
        return net;
    }
    let k = net.output_dim();
    let mut layers = net.into_layers();
    let last = layers.pop().unwrap();
    let mut split = AffineLayer::zeros(4 * k, last.cols());
    for i in 0..k {
        for (s, sign) in [1.0, 1.0, -1.0, -1.0].into_iter().enumerate() {
            for c in 0..last.cols() {
                split.set_w(4 * i + s, c, sign * last.w(i, c));
            }
            split.set_b(4 * i + s, sign * last.bias()[i]);
        }
    }
    layers.push(split);
    let mut dbl = AffineLayer::zeros(4 * k, 4 * k);
    for i in 0..k {
        for r in 0..2 {
            dbl.set_w(4 * i + r, 4 * i, 1.0);
            dbl.set_w(4 * i + r, 4 * i + 1, 1.0);
            dbl.set_w(4 * i + 2 + r, 4 * i + 2, 1.0);
            dbl.set_w(4 * i + 2 + r, 4 * i + 3, 1.0);
        }
    }
    for _ in 1..j {
        layers.push(dbl.clone());
    }
    let mut out = AffineLayer::zeros(k, 4 * k);
    for i in 0..k {
        out.set_w(i, 4 * i, 1.0);
        out.set_w(i, 4 * i + 1, 1.0);
        out.set_w(i, 4 * i + 2, -1.0);
        out.set_w(i, 4 * i + 3, -1.0);
    }
    layers.push(out);
    ReluNetwork::from_layers_unchecked(layers)
}

/// Adds the constant `c` to the output of a network of depth ≥ 2 through
/// `⌈|c|⌉` unit neurons `ρ(1) = 1` in the last hidden layer, each with
/// output weight `c / ⌈|c|⌉`, so the output bias does not grow.
pub fn add_unit_constant(net: ReluNetwork, c: f64) -> ReluNetwork {
    assert!(net.depth() >= 2 && c.is_finite());
    let k = (c.abs().ceil() as usize).max(1);
    let mut layers = net.into_layers();
    let out = layers.pop().unwrap();
    let hid = layers.pop().unwrap();
    let mut h2 = AffineLayer::zeros(hid.rows() + k, hid.cols());
    for r in 0..hid.rows() {
        for col in 0..hid.cols() {
            h2.set_w(r, col, hid.w(r, col));
        }
        h2.set_b(r, hid.bias()[r]);
    }
    for j in 0..k {
        h2.set_b(hid.rows() + j, 1.0);
    }
    let mut o2 = AffineLayer::zeros(out.rows(), out.cols() + k);
    for r in 0..out.rows() {
        for col in 0..out.cols() {
            o2.set_w(r, col, out.w(r, col));
        }
        for j in 0..k {
            o2.set_w(r, out.cols() + j, c / k as f64);
        }
        o2.set_b(r, out.bias()[r]);
    }
    layers.push(h2);
    layers.push(o2);
    ReluNetwork::from_layers_unchecked(layers)
}

/// Precomposes `x ↦ αx + β` on a scalar network, folding it into the first
/// layer when that keeps the weight bound, and otherwise going through
/// [`bounded_affine`](crate::network::bounded_affine).
pub fn with_input_map(net: ReluNetwork, alpha: f64, beta: f64) -> Result<ReluNetwork> {
    let bound = net.weight_bound().max(1.0);
    let pre = AffineLayer::new(1, 1, vec![alpha], vec![beta])?;
    let folded = net.clone().map_input(&pre)?;
    if folded.layers()[0].max_abs() <= bound {
        return Ok(folded);
    }
    let scaler = crate::network::bounded_affine(&[vec![alpha]], &[beta])?;
    ReluNetwork::compose(&net, &scaler)
}
