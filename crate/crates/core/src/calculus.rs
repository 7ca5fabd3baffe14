//! Products and products-of-compositions of emulated functions, and the
//! partition-of-unity gluing over a wavenumber-dependent interval.

use crate::blocks::{add_unit_constant, multiply_level, multiply_net, uniform_grid};
use crate::chain::{Chain, Row};
use crate::error::{invalid, Result};
use crate::network::{bounded_affine, AffineLayer, ComplexNet, ReluNetwork};
use serde::{Deserialize, Serialize};

/// Sup of `|f|` on a dense grid of `[lo, hi]`, inflated by 10%.
pub fn measured_bound(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    1.1 * uniform_grid(lo, hi, 4001)
        .into_iter()
        .map(|x| f(x).abs())
        .fold(0.0, f64::max)
}

fn mu(range: f64, zeta: f64) -> ReluNetwork {
    multiply_net(range, multiply_level(range, zeta))
}

fn check_bounds(bounds: &[f64], eps: f64) -> Result<()> {
    if bounds.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return invalid("sup-bounds must be positive and finite");
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid(format!("accuracy {eps} must be positive"));
    }
    Ok(())
}

/// Accuracies the factors of a product must meet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductBudget {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
}

/// `α ≈ ε/(3‖β‖)`, `β ≈ ε/(6‖α‖)`, products `ε/3`; with
/// `‖Φ_α‖ ≤ 2‖α‖` the three contributions sum to `ε`.
pub fn product_budget(alpha_bound: f64, beta_bound: f64, eps: f64) -> ProductBudget {
    ProductBudget {
        alpha: eps / (3.0 * beta_bound),
        beta: eps / (6.0 * alpha_bound),
        mu: eps / 3.0,
    }
}

/// Width of [`product_nets`]: `max{2 + M_β, 2 + M_α, 5}`.
pub fn product_width(m_alpha: usize, m_beta: usize) -> usize {
    (2 + m_beta).max(2 + m_alpha).max(5)
}

/// `x ↦ μ(Φ_α(x), Φ_β(x))` with `μ` accurate to `ε/3` on `(-U, U)²`,
/// `U = 2 max{‖α‖, ‖β‖}`. `Φ_β` runs first with `x` carried, then `Φ_α`
/// with `Φ_β(x)` carried.
pub fn product_nets(
    alpha: &ReluNetwork,
    beta: &ReluNetwork,
    alpha_bound: f64,
    beta_bound: f64,
    eps: f64,
) -> Result<ReluNetwork> {
    check_bounds(&[alpha_bound, beta_bound], eps)?;
    scalar(alpha)?;
    scalar(beta)?;
    let u = 2.0 * alpha_bound.max(beta_bound);
    let m = mu(u, product_budget(alpha_bound, beta_bound, eps).mu);
    Chain::new(1)
        .stage(beta, &[0], &[0])?
        // [β, x]
        .stage(alpha, &[1], &[0])?
        // [α, β]
        .stage(&m, &[0, 1], &[])?
        .finish()
}

fn scalar(n: &ReluNetwork) -> Result<()> {
    if n.input_dim() != 1 || n.output_dim() != 1 {
        return invalid("factor networks must map 1 input to 1 output");
    }
    Ok(())
}

/// Appends the four cross products of `(a_r, a_i)` and `(b_r, b_i)` at
/// state coordinates `a` and `b`, leaving `[re, im]` followed by `keep`.
fn complex_products(ch: Chain, a: usize, b: usize, keep: &[usize], m: &ReluNetwork) -> Result<Chain> {
    let (ar, ai, br, bi) = (a, a + 1, b, b + 1);
    let mut carry = vec![ar, ai, br, bi];
    carry.extend(keep);
    // [ar·br, ai·bi, ar, ai, br, bi, keep...]
    let ch = ch.stage_many(&[m, m], &[vec![ar, br], vec![ai, bi]], &carry)?;
    let mut rows = vec![Row::new(vec![(0, 1.0), (1, -1.0)], 0.0)];
    rows.extend((2..6 + keep.len()).map(Row::coord));
    // [re, ar, ai, br, bi, keep...]
    let ch = ch.linear(&rows)?;
    let carry: Vec<usize> = std::iter::once(0).chain(5..5 + keep.len()).collect();
    // [ar·bi, ai·br, re, keep...]
    let ch = ch.stage_many(&[m, m], &[vec![1, 4], vec![2, 3]], &carry)?;
    let mut rows = vec![Row::coord(2), Row::new(vec![(0, 1.0), (1, 1.0)], 0.0)];
    rows.extend((3..3 + keep.len()).map(Row::coord));
    ch.linear(&rows)
}

/// Budgets for the complex product: `α` to `ε/(4‖β‖)`, `β` to `ε/(8‖α‖)`,
/// each real product to `ε/(4√2)` (two per component).
pub fn product_budget_complex(alpha_bound: f64, beta_bound: f64, eps: f64) -> ProductBudget {
    ProductBudget {
        alpha: eps / (4.0 * beta_bound),
        beta: eps / (8.0 * alpha_bound),
        mu: eps / (4.0 * std::f64::consts::SQRT_2),
    }
}

/// Width of [`product_nets_complex`]: `max{2 + M_β, 4 + M_α, 18}`.
pub fn product_width_complex(m_alpha: usize, m_beta: usize) -> usize {
    (2 + m_beta).max(4 + m_alpha).max(18)
}

/// Complex product `αβ` from four real products:
/// `(Re α Re β - Im α Im β, Re α Im β + Im α Re β)`.
pub fn product_nets_complex(
    alpha: &ComplexNet,
    beta: &ComplexNet,
    alpha_bound: f64,
    beta_bound: f64,
    eps: f64,
) -> Result<ComplexNet> {
    check_bounds(&[alpha_bound, beta_bound], eps)?;
    let u = 2.0 * alpha_bound.max(beta_bound);
    let m = mu(u, product_budget_complex(alpha_bound, beta_bound, eps).mu);
    let ch = Chain::new(1)
        .stage(beta.net(), &[0], &[0])?
        // [βr, βi, x]
        .stage(alpha.net(), &[2], &[0, 1])?;
    // [αr, αi, βr, βi]
    ComplexNet::new(complex_products(ch, 0, 2, &[], &m)?.finish()?)
}

/// Sup-bounds entering a product of compositions `α · (ω ∘ β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionBounds {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    /// Sup of `|ω'|` on `(-2‖β‖, 2‖β‖)`.
    pub omega_prime: f64,
    /// Halfwidth of the interval on which `Φ_ω` is accurate.
    pub omega_domain: f64,
}

/// Accuracies for `α · (ω ∘ β)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionBudget {
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub mu: f64,
}

/// `α` to `ε/(6‖ω‖)`, `β` to `ε/(6‖α‖‖ω'‖)`, `ω` to `ε/(6‖α‖)`; with
/// `‖Φ_α‖ ≤ 2‖α‖` these contribute `5ε/6` and the products take the rest.
/// `complex` splits the product share over two real products per component.
pub fn composition_budget(b: &CompositionBounds, eps: f64, complex: bool) -> CompositionBudget {
    let beta = if b.omega_prime > 0.0 {
        eps / (6.0 * b.alpha * b.omega_prime)
    } else {
        f64::INFINITY
    };
    CompositionBudget {
        alpha: eps / (6.0 * b.omega),
        beta,
        omega: eps / (6.0 * b.alpha),
        mu: if complex {
            eps / (12.0 * std::f64::consts::SQRT_2)
        } else {
            eps / 6.0
        },
    }
}

fn composition_checks(b: &CompositionBounds, eps: f64) -> Result<()> {
    check_bounds(&[b.alpha, b.beta, b.omega, b.omega_domain], eps)?;
    if !(b.omega_prime >= 0.0 && b.omega_prime.is_finite()) {
        return invalid("derivative bound must be nonnegative and finite");
    }
    if b.omega_domain < 2.0 * b.beta {
        return invalid(format!(
            "outer network covers (-{}, {}) but the inner range needs (-{}, {})",
            b.omega_domain,
            b.omega_domain,
            2.0 * b.beta,
            2.0 * b.beta
        ));
    }
    Ok(())
}

/// Width of [`multiply_compose`]: `max{2 + max{M_ω, M_β}, 2 + M_α, 5}`.
pub fn compose_width(m_alpha: usize, m_omega: usize, m_beta: usize) -> usize {
    (2 + m_omega.max(m_beta)).max(2 + m_alpha).max(5)
}

/// `x ↦ μ(Φ_α(x), Φ_ω(Φ_β(x)))`.
pub fn multiply_compose(
    alpha: &ReluNetwork,
    omega: &ReluNetwork,
    beta: &ReluNetwork,
    bounds: &CompositionBounds,
    eps: f64,
) -> Result<ReluNetwork> {
    composition_checks(bounds, eps)?;
    for n in [alpha, omega, beta] {
        scalar(n)?;
    }
    let u = 2.0 * bounds.alpha.max(bounds.omega);
    let m = mu(u, composition_budget(bounds, eps, false).mu);
    let inner = ReluNetwork::compose(omega, beta)?;
    Chain::new(1)
        .stage(&inner, &[0], &[0])?
        .stage(alpha, &[1], &[0])?
        .stage(&m, &[0, 1], &[])?
        .finish()
}

/// Width of [`multiply_compose_complex`]:
/// `max{2 + max{M_ω, M_β}, 4 + M_α, 18}`.
pub fn compose_width_complex(m_alpha: usize, m_omega: usize, m_beta: usize) -> usize {
    (2 + m_omega.max(m_beta)).max(4 + m_alpha).max(18)
}

/// Complex `α · (ω ∘ β)` with real `β`: the composition runs first with
/// `x` carried, then `Φ_α`, then the four real products.
pub fn multiply_compose_complex(
    alpha: &ComplexNet,
    omega: &ComplexNet,
    beta: &ReluNetwork,
    bounds: &CompositionBounds,
    eps: f64,
) -> Result<ComplexNet> {
    composition_checks(bounds, eps)?;
    scalar(beta)?;
    let u = 2.0 * bounds.alpha.max(bounds.omega);
    let m = mu(u, composition_budget(bounds, eps, true).mu);
    let inner = ReluNetwork::compose(omega.net(), beta)?;
    let ch = Chain::new(1)
        .stage(&inner, &[0], &[0])?
        // [ωr, ωi, x]
        .stage(alpha.net(), &[2], &[0, 1])?;
    // [αr, αi, ωr, ωi]
    ComplexNet::new(complex_products(ch, 0, 2, &[], &m)?.finish()?)
}

/// Piecewise-affine map of `[-H, H]` onto `[-3, 3]` with `-D⁻ ↦ -2`,
/// `0 ↦ 0`, `D⁺ ↦ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub halfwidth: f64,
    pub d_minus: f64,
    pub d_plus: f64,
}

impl PartitionSpec {
    pub fn new(halfwidth: f64, d_minus: f64, d_plus: f64) -> Result<Self> {
        if !(d_minus > 0.0 && d_plus > 0.0 && halfwidth.is_finite()) {
            return invalid("breakpoints must be positive and finite");
        }
        if halfwidth <= d_minus.max(d_plus) {
            return invalid(format!(
                "halfwidth {halfwidth} must exceed both breakpoints ({d_minus}, {d_plus})"
            ));
        }
        Ok(Self {
            halfwidth,
            d_minus,
            d_plus,
        })
    }

    /// Interval `(-κ^{1/3} A, κ^{1/3} A)` with the given breakpoints.
    pub fn for_wavenumber(kappa: f64, a: f64, d_minus: f64, d_plus: f64) -> Result<Self> {
        Self::new(kappa.cbrt() * a, d_minus, d_plus)
    }

    /// Whether `D⁺ ≥ D⁻` holds.
    pub fn plus_dominates(&self) -> bool {
        self.d_plus >= self.d_minus
    }

    pub fn map(&self, x: f64) -> f64 {
        let (h, dm, dp) = (self.halfwidth, self.d_minus, self.d_plus);
        if x < -dm {
            -3.0 + (x + h) / (h - dm)
        } else if x < 0.0 {
            2.0 * x / dm
        } else if x < dp {
            2.0 * x / dp
        } else {
            2.0 + (x - dp) / (h - dp)
        }
    }

    /// Output-layer slopes of `ρ(x + H), ρ(x + D⁻), ρ(x), ρ(x - D⁺)`.
    fn slopes(&self) -> [f64; 4] {
        let (h, dm, dp) = (self.halfwidth, self.d_minus, self.d_plus);
        let s1 = 1.0 / (h - dm);
        let s2 = 2.0 / dm;
        let s3 = 2.0 / dp;
        let s4 = 1.0 / (h - dp);
        [s1, s2 - s1, s3 - s2, s4 - s3]
    }

    /// Preimage under the map of the support `(lo, hi)` of a hat sum.
    pub fn preimage(&self, lo: f64, hi: f64) -> (f64, f64) {
        (self.inverse(lo.max(-3.0)), self.inverse(hi.min(3.0)))
    }

    pub fn inverse(&self, t: f64) -> f64 {
        let (h, dm, dp) = (self.halfwidth, self.d_minus, self.d_plus);
        if t < -2.0 {
            (t + 3.0) * (h - dm) - h
        } else if t < 0.0 {
            t * dm / 2.0
        } else if t < 2.0 {
            t * dp / 2.0
        } else {
            dp + (t - 2.0) * (h - dp)
        }
    }
}

/// Exact network for the partition map. The four breakpoint neurons come
/// from a weight-bounded affine map, the constant `-3` from unit neurons;
/// weights are bounded by `max{1, 2/D⁻, 2/D⁺}`.
pub fn build_partition_map(spec: &PartitionSpec) -> Result<ReluNetwork> {
    let pre = bounded_affine(
        &[vec![1.0], vec![1.0], vec![1.0], vec![1.0]],
        &[spec.halfwidth, spec.d_minus, 0.0, -spec.d_plus],
    )?;
    let s = spec.slopes();
    let relu = ReluNetwork::new(vec![
        AffineLayer::new(4, 4, identity4(), vec![0.0; 4])?,
        AffineLayer::new(1, 4, s.to_vec(), vec![0.0])?,
    ])?;
    let t = ReluNetwork::compose_absorb(&relu, &pre)?;
    Ok(add_unit_constant(t, -3.0))
}

fn identity4() -> Vec<f64> {
    let mut w = vec![0.0; 16];
    for i in 0..4 {
        w[5 * i] = 1.0;
    }
    w
}

/// Scale used inside [`hat_sum_net`] to keep its biases in `[-1, 1]`.
const HAT_SCALE: f64 = 8.0;

/// `Σ_{ℓ=first}^{last} χ(y - ℓ)` as
/// `ρ(y-first+1) - ρ(y-first) - ρ(y-last) + ρ(y-last-1)`, with the hidden
/// layer scaled by `1/8` and the output by `8`.
pub fn hat_sum_net(first: i32, last: i32) -> ReluNetwork {
    assert!(first <= last && first >= -3 && last <= 3);
    let (a, b) = (first as f64, last as f64);
    let s = 1.0 / HAT_SCALE;
    ReluNetwork::new(vec![
        AffineLayer::new(4, 1, vec![s; 4], vec![(1.0 - a) * s, -a * s, -b * s, (-b - 1.0) * s]).unwrap(),
        AffineLayer::new(1, 4, vec![HAT_SCALE, -HAT_SCALE, -HAT_SCALE, HAT_SCALE], vec![0.0]).unwrap(),
    ])
    .unwrap()
}

/// Width of the glued network for pieces of widths `m`.
pub fn glue_width(t_width: usize, pieces: &[usize]) -> usize {
    let max_piece = pieces.iter().copied().max().unwrap_or(0);
    (max_piece + 6).max(t_width.max(4) + 10).max(16)
}

/// Consecutive runs of identical pieces, as `(first ℓ, last ℓ, index)`.
fn groups(pieces: &[&ComplexNet]) -> Vec<(i32, i32, usize)> {
    let mut out: Vec<(i32, i32, usize)> = Vec::new();
    for (i, p) in pieces.iter().enumerate() {
        let l = i as i32 - 3;
        match out.last_mut() {
            Some(g) if std::ptr::eq(*p, pieces[g.2]) || **p == *pieces[g.2] => g.1 = l,
            _ => out.push((l, l, i)),
        }
    }
    out
}

/// `Σ_ℓ μ((χ_ℓ ∘ T)(τ), piece_ℓ(τ))` for `ℓ = -3..3`, componentwise, with
/// products accurate to `eps` on `(-2λ, 2λ)²`. Runs of identical pieces
/// share one product against the sum of their hats. When every piece is
/// accurate to `eps` where its hats are supported, the result is within
/// `6 eps` of the glued target.
pub fn glue_partition(
    t: &ReluNetwork,
    pieces: &[&ComplexNet],
    lambda: f64,
    eps: f64,
) -> Result<ComplexNet> {
    if pieces.len() != 7 {
        return invalid(format!("expected 7 pieces, got {}", pieces.len()));
    }
    if t.input_dim() != 1 || t.output_dim() != 1 {
        return invalid("partition map must be scalar");
    }
    if pieces.iter().any(|p| p.net().input_dim() != 1) {
        return invalid("pieces must take one input");
    }
    check_bounds(&[lambda], eps)?;
    let m = mu((2.0 * lambda).max(HAT_SCALE), eps);
    let gs = groups(pieces);
    // state: [τ] then [τ, acc_re, acc_im]
    let mut ch = Chain::new(1);
    for (gi, &(first, last, idx)) in gs.iter().enumerate() {
        let started = gi > 0;
        let more = gi + 1 < gs.len();
        let acc: Vec<usize> = if started { vec![1, 2] } else { vec![] };
        let mut carry = vec![0];
        carry.extend(&acc);
        // [pr, pi, τ, acc...]
        ch = ch.stage(pieces[idx].net(), &[0], &carry)?;
        let w = ReluNetwork::compose_absorb(&hat_sum_net(first, last), t)?;
        let carry: Vec<usize> = if more { (0..3 + acc.len()).collect() } else {
            std::iter::once(0).chain(1..2).chain(3..3 + acc.len()).collect()
        };
        // [w, pr, pi, (τ), acc...]
        ch = ch.stage(&w, &[2], &carry)?;
        let rest: Vec<usize> = if more { (3..4 + acc.len()).collect() } else { (3..3 + acc.len()).collect() };
        // [mr, mi, (τ), acc...]
        ch = ch.stage_many(&[&m, &m], &[vec![0, 1], vec![0, 2]], &rest)?;
        let off = if more { 3 } else { 2 };
        let mut rows = Vec::new();
        if more {
            rows.push(Row::coord(2));
        }
        if started {
            rows.push(Row::new(vec![(0, 1.0), (off, 1.0)], 0.0));
            rows.push(Row::new(vec![(1, 1.0), (off + 1, 1.0)], 0.0));
        } else {
            rows.push(Row::coord(0));
            rows.push(Row::coord(1));
        }
        ch = ch.linear(&rows)?;
    }
    ComplexNet::new(ch.finish()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{build_polynomial, build_trig, sup_error, Trig};
    use crate::network::{p0, p1};
    use num_complex::Complex64;

    fn cnet(re: ReluNetwork, im: ReluNetwork) -> ComplexNet {
        let n = crate::network::parallel(1, &[&re, &im], &crate::network::Wiring::shared(2, 1)).unwrap();
        ComplexNet::new(n).unwrap()
    }

    fn constant(c: f64) -> ReluNetwork {
        ReluNetwork::new(vec![AffineLayer::new(1, 1, vec![0.0], vec![c]).unwrap()]).unwrap()
    }

    #[test]
    fn product_of_constants_and_squares() {
        let n = product_nets(&p0(), &p0(), 1.0, 1.0, 1e-3).unwrap();
        assert!((n.eval1(0.4) - 1.0).abs() <= 1e-3);
        let n = product_nets(&p1(), &p1(), 2.0, 2.0, 1e-3).unwrap();
        assert!(sup_error(&n, |x| x * x, -2.0, 2.0, 1000) <= 1e-3);
    }

    #[test]
    fn product_width_matches() {
        for (da, db) in [(3u32, 5u32), (7, 2), (1, 1)] {
            let a = build_polynomial(&[0.0, 0.5, 0.0, 0.25 * da as f64], 1.0, 1e-3).unwrap();
            let b = build_trig(Trig::Cos, db as f64, 1.0, 1e-3).unwrap();
            let n = product_nets(&a, &b, 1.0, 1.0, 1e-2).unwrap();
            assert_eq!(n.width(), product_width(a.width(), b.width()));
            let n = product_nets(&b, &a, 1.0, 1.0, 1e-2).unwrap();
            assert_eq!(n.width(), product_width(b.width(), a.width()));
        }
    }

    #[test]
    fn stated_width_when_alpha_narrower() {
        let a = p1();
        let b = build_trig(Trig::Cos, 3.0, 1.0, 1e-3).unwrap();
        let n = product_nets(&a, &b, 1.0, 1.0, 1e-2).unwrap();
        let stated = (2 + b.width()).max(a.width().max(5));
        assert_eq!(n.width(), stated);
    }

    #[test]
    fn complex_products() {
        let one = cnet(constant(1.0), constant(0.0));
        let i = cnet(constant(0.0), constant(1.0));
        let n = product_nets_complex(&one, &i, 1.0, 1.0, 1e-3).unwrap();
        assert!((n.eval1(0.2) - Complex64::new(0.0, 1.0)).norm() <= 1e-3);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let z = cnet(constant(r), constant(r));
        let n = product_nets_complex(&z, &z, 1.0, 1.0, 1e-3).unwrap();
        assert!((n.eval1(-0.7) - Complex64::new(0.0, 1.0)).norm() <= 1e-3);
        assert_eq!(n.stats().width, product_width_complex(z.stats().width, z.stats().width));
    }

    #[test]
    fn composition_cosine() {
        let b = CompositionBounds {
            alpha: 1.0,
            beta: 2.0,
            omega: 1.0,
            omega_prime: 1.0,
            omega_domain: 4.0,
        };
        let bud = composition_budget(&b, 1e-2, false);
        let omega = build_trig(Trig::Cos, 1.0, 4.0, bud.omega).unwrap();
        let beta = bounded_affine(&[vec![2.0]], &[0.0]).unwrap();
        let n = multiply_compose(&p1(), &omega, &beta, &b, 1e-2).unwrap();
        assert!(sup_error(&n, |x| x * (2.0 * x).cos(), -1.0, 1.0, 1000) <= 1e-2);
        assert_eq!(n.width(), compose_width(p1().width(), omega.width(), beta.width()));
        let narrow = CompositionBounds { omega_domain: 3.0, ..b };
        assert!(multiply_compose(&p1(), &omega, &beta, &narrow, 1e-2).is_err());
    }

    #[test]
    fn composition_identity() {
        let b = CompositionBounds {
            alpha: 1.0,
            beta: 1.0,
            omega: 2.0,
            omega_prime: 1.0,
            omega_domain: 2.0,
        };
        let n = multiply_compose(&p0(), &p1(), &p1(), &b, 1e-3).unwrap();
        assert!(sup_error(&n, |x| x, -1.0, 1.0, 1000) <= 1e-3);
    }

    #[test]
    fn under_accurate_inner_fails() {
        let b = CompositionBounds {
            alpha: 1.0,
            beta: 1.0,
            omega: 1.0,
            omega_prime: 10.0,
            omega_domain: 2.0,
        };
        let eps = 1e-3;
        let omega = build_trig(Trig::Cos, 10.0, 2.0, composition_budget(&b, eps, false).omega).unwrap();
        let rough = ReluNetwork::new(vec![AffineLayer::new(1, 1, vec![1.0], vec![0.05]).unwrap()]).unwrap();
        let n = multiply_compose(&p0(), &omega, &rough, &b, eps).unwrap();
        assert!(sup_error(&n, |x| (10.0 * x).cos(), -1.0, 1.0, 1000) > eps);
    }

    #[test]
    fn partition_map_values() {
        let s = PartitionSpec::for_wavenumber(512.0, 4.0, 3.0, 5.0).unwrap();
        let t = build_partition_map(&s).unwrap();
        assert_eq!(t.eval1(0.0), 0.0);
        assert!((t.eval1(5.0) - 2.0).abs() <= 1e-14);
        assert!((t.eval1(-32.0) + 3.0).abs() <= 1e-14);
        assert!((t.eval1(32.0) - 3.0).abs() <= 1e-14);
        assert!((t.eval1(-3.0) + 2.0).abs() <= 1e-14);
        assert!(t.weight_bound() <= 1.0);
        assert!(t.depth() as f64 <= 32f64.log2() + 5.0);
        for x in uniform_grid(-32.0, 32.0, 777) {
            assert!((t.eval1(x) - s.map(x)).abs() <= 1e-13);
        }
    }

    #[test]
    fn partition_of_unity_after_map() {
        let s = PartitionSpec::for_wavenumber(64.0, 3.0, 2.5, 4.0).unwrap();
        let t = build_partition_map(&s).unwrap();
        let hats: Vec<ReluNetwork> = (-3..=3)
            .map(|l| ReluNetwork::compose_absorb(&hat_sum_net(l, l), &t).unwrap())
            .collect();
        for x in uniform_grid(-12.0, 12.0, 10_000) {
            let sum: f64 = hats.iter().map(|h| h.eval1(x)).sum();
            assert!((sum - 1.0).abs() <= 1e-12, "x={x} sum={sum}");
        }
    }

    #[test]
    fn glue_constants() {
        let s = PartitionSpec::for_wavenumber(64.0, 3.0, 2.5, 4.0).unwrap();
        let t = build_partition_map(&s).unwrap();
        let one = cnet(constant(1.0), constant(0.0));
        let pieces = vec![&one; 7];
        let eps = 1e-3;
        let g = glue_partition(&t, &pieces, 1.0, eps).unwrap();
        for x in uniform_grid(-12.0, 12.0, 1001) {
            assert!((g.eval1(x) - Complex64::new(1.0, 0.0)).norm() <= 6.0 * eps);
        }
    }

    #[test]
    fn glue_blend() {
        let s = PartitionSpec::new(10.0, 2.0, 2.0).unwrap();
        let t = build_partition_map(&s).unwrap();
        let a = cnet(constant(1.0), constant(0.0));
        let b = cnet(constant(0.0), constant(2.0));
        let pieces = vec![&a, &a, &a, &b, &b, &b, &b];
        let eps = 1e-4;
        let g = glue_partition(&t, &pieces, 2.0, eps).unwrap();
        for x in uniform_grid(-10.0, 10.0, 801) {
            let y = s.map(x);
            let wb = (y + 1.0).clamp(0.0, 1.0);
            let want = Complex64::new(1.0 - wb, 2.0 * wb);
            assert!((g.eval1(x) - want).norm() <= 6.0 * eps, "x={x}");
        }
        let widths = [a.stats().width, b.stats().width];
        assert!(g.stats().width <= glue_width(t.width(), &widths));
    }
}
