//! Emulation of `Ψ^{(ℓ)}` on `I_κ = (-κ^{1/3} A, κ^{1/3} A)`.
//!
//! Three local pieces are glued by the partition of unity:
//! - for `τ ≥ D⁺/2` the large-`τ` expansion
//!   `∂^ℓ (a₀ τ + Σ_{j=1}^n a_j τ^{1-3j})`, from a reciprocal network and a
//!   chain of products for the powers of `1/τ`;
//! - for `τ ≤ -D⁻/2` the leading residue term
//!   `c₀ q_ℓ(τ) e^{ν₁√3/2 |τ|} e^{iϑ(τ)}`, `ϑ(τ) = ν₁τ/2 - τ³/3`, where
//!   `q_ℓ e^{g}` is the `ℓ`-th derivative of `e^{g}`,
//!   `g(τ) = -iτ³/3 - iτα₁`; it is a product of a polynomial, an exponential
//!   and the trig pair composed with `ϑ`;
//! - on `[-D, D]`, `D = max{D⁻, D⁺}`, a Chebyshev emulator.
//!
//! Each piece sees its input clamped to its own domain, so its output stays
//! bounded where its hat vanishes. The breakpoints start from
//! `D⁺ = 2 max{(2C⁺/ε)^{1/(3n+2+ℓ)}, 1}` and
//! `D⁻ = 2 max{log(2C⁻/ε) / |ν₁√3/2 - β|, 1}` with constants fitted to the
//! oracle, and are enlarged until the expansions are within `ε/4`.

use super::{best_class, cert_grid, check_eps, clamped, interpolant, shift_input, par_map, scale_complex, sup_dev, EmulatorReport, LedgerEntry, CERT_POINTS};
use crate::blocks::{
    build_exp_decay, build_polynomial, build_polynomial_complex, build_reciprocal, build_trig, certify,
    multiply_level, multiply_net, uniform_grid, with_input_map, Trig, MAX_ESCALATIONS, PROBE_POINTS,
};
use crate::calculus::{
    build_partition_map, composition_budget, glue_partition, multiply_compose_complex, product_budget_complex,
    product_nets_complex, CompositionBounds, PartitionSpec,
};
use crate::chain::{Chain, Row};
use crate::cheb::build_smooth_emulator;
use crate::error::{invalid, Error, Result};
use crate::network::{parallel, AffineLayer, ComplexNet, Wiring};
use crate::special::{airy_rightmost_root, fock_pole, fock_psi, fock_tail_coeffs, FockOracleConfig, MAX_DERIVATIVE};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::SQRT_2;
use std::sync::{Mutex, OnceLock};

type C = Complex64;

/// Tolerance of the oracle used for certification.
const ORACLE_TOL: f64 = 1e-8;
/// Number of expansion terms fitted once and truncated per request.
const FIT_TERMS: usize = 4;

fn oracle_config() -> FockOracleConfig {
    FockOracleConfig {
        tol: ORACLE_TOL,
        ..Default::default()
    }
}

fn cache() -> &'static Mutex<HashMap<(u64, usize), C>> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, usize), C>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `Ψ^{(ℓ)}` at each point, memoized across calls.
pub fn fock_oracle(taus: &[f64], ell: usize) -> Result<Vec<C>> {
    if ell > MAX_DERIVATIVE {
        return invalid(format!("derivative order {ell} > {MAX_DERIVATIVE}"));
    }
    let missing: Vec<f64> = {
        let c = cache().lock().unwrap();
        let mut m: Vec<f64> = taus.iter().copied().filter(|t| !c.contains_key(&(t.to_bits(), ell))).collect();
        m.sort_by(f64::total_cmp);
        m.dedup();
        m
    };
    let cfg = oracle_config();
    let fresh = par_map(&missing, |t| fock_psi(t, ell, &cfg));
    let mut c = cache().lock().unwrap();
    for (t, v) in missing.iter().zip(fresh) {
        c.insert((t.to_bits(), ell), v?);
    }
    Ok(taus.iter().map(|t| c[&(t.to_bits(), ell)]).collect())
}

/// Fitted expansion data shared by all builds.
struct Asymptotics {
    a: Vec<C>,
    c0: C,
    beta: f64,
    nu1: f64,
}

fn asymptotics() -> Result<&'static Asymptotics> {
    static DATA: OnceLock<Asymptotics> = OnceLock::new();
    if let Some(d) = DATA.get() {
        return Ok(d);
    }
    let t = fock_tail_coeffs(FIT_TERMS, &FockOracleConfig::default())?;
    Ok(DATA.get_or_init(|| Asymptotics {
        a: t.a,
        c0: t.c0,
        beta: t.beta,
        nu1: airy_rightmost_root(),
    }))
}

fn falling(e: f64, ell: usize) -> f64 {
    (0..ell).map(|i| e - i as f64).product()
}

/// `∂^ℓ (a₀ τ + Σ_{j=1}^n a_j τ^{1-3j})` as `lin·τ + cst + Σ b_j τ^{-p_j}`.
#[derive(Clone, Debug)]
struct PlusTail {
    lin: C,
    cst: C,
    terms: Vec<(u32, C)>,
}

impl PlusTail {
    fn new(a: &[C], n: usize, ell: usize) -> Self {
        let (lin, cst) = match ell {
            0 => (a[0], C::new(0.0, 0.0)),
            1 => (C::new(0.0, 0.0), a[0]),
            _ => (C::new(0.0, 0.0), C::new(0.0, 0.0)),
        };
        let terms = (1..=n)
            .map(|j| {
                let e = 1.0 - 3.0 * j as f64;
                ((3 * j - 1 + ell) as u32, a[j] * falling(e, ell))
            })
            .collect();
        Self { lin, cst, terms }
    }

    fn eval(&self, t: f64) -> C {
        self.lin * t + self.cst + self.terms.iter().map(|&(p, b)| b * t.powi(-(p as i32))).sum::<C>()
    }

    /// `Σ |b_j| p_j`, the gain of the power chain's errors.
    fn gain(&self) -> f64 {
        self.terms.iter().map(|&(p, b)| b.norm() * p as f64).sum()
    }
}

/// `c₀ q_ℓ(τ) e^{g(τ)}` with `q_{k+1} = q_k' + q_k g'`.
#[derive(Clone, Debug)]
struct MinusTail {
    c0: C,
    alpha1: C,
    q: Vec<C>,
    decay: f64,
}

/// Coefficients of `p(u + c)` in `u`.
fn taylor_shift(p: &[C], c: f64) -> Vec<C> {
    let mut q = p.to_vec();
    for i in 0..q.len() {
        for j in (i..q.len() - 1).rev() {
            let t = q[j + 1] * c;
            q[j] += t;
        }
    }
    q
}

fn poly_eval(c: &[C], t: f64) -> C {
    c.iter().rev().fold(C::new(0.0, 0.0), |acc, &v| acc * t + v)
}

impl MinusTail {
    fn new(d: &Asymptotics, ell: usize) -> Self {
        let i = C::new(0.0, 1.0);
        let alpha1 = fock_pole(d.nu1);
        let gp = [-i * alpha1, C::new(0.0, 0.0), -i];
        let mut q = vec![C::new(1.0, 0.0)];
        for _ in 0..ell {
            let mut next = vec![C::new(0.0, 0.0); q.len() + 2];
            for (k, &c) in q.iter().enumerate().skip(1) {
                next[k - 1] += c * k as f64;
            }
            for (k, &c) in q.iter().enumerate() {
                for (m, &g) in gp.iter().enumerate() {
                    next[k + m] += c * g;
                }
            }
            while next.len() > 1 && next.last().unwrap().norm() == 0.0 {
                next.pop();
            }
            q = next;
        }
        Self {
            c0: d.c0,
            alpha1,
            q,
            decay: -d.nu1 * 3f64.sqrt() / 2.0,
        }
    }

    fn eval(&self, t: f64) -> C {
        let i = C::new(0.0, 1.0);
        self.c0 * poly_eval(&self.q, t) * (-i * (t * t * t / 3.0) - i * t * self.alpha1).exp()
    }

    /// `|c₀ q(τ)| e^{-decay |τ|}`, the modulus of the target.
    fn envelope(&self, t: f64) -> f64 {
        self.c0.norm() * poly_eval(&self.q, t).norm() * (-self.decay * t.abs()).exp()
    }

    /// Smallest `T ≥ lo` past which the envelope stays below `bound`.
    fn cutoff(&self, lo: f64, bound: f64) -> f64 {
        let mut t = lo;
        while (0..160).any(|k| self.envelope(-(t + 0.25 * k as f64)) > bound) {
            t += 0.25;
        }
        t
    }
}

/// Breakpoints of the partition and the fitted constants behind them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockBreakpoints {
    pub d_plus: f64,
    pub d_minus: f64,
    /// `sup |Ψ^{(ℓ)} - expansion| τ^{3n+2+ℓ}` over `τ ∈ [1, 12]`.
    pub c_plus: f64,
    /// `sup |Ψ^{(ℓ)} - c₀ q_ℓ e^{g}| e^{|ν₁√3/2 - β| |τ|}` over `τ ∈ [-7, -1]`.
    pub c_minus: f64,
    /// Sup errors of the expansions beyond `D⁺/2` and `-D⁻/2`.
    pub plus_error: f64,
    pub minus_error: f64,
}

fn breakpoints_cache() -> &'static Mutex<HashMap<(usize, usize, u64), FockBreakpoints>> {
    static C: OnceLock<Mutex<HashMap<(usize, usize, u64), FockBreakpoints>>> = OnceLock::new();
    C.get_or_init(|| Mutex::new(HashMap::new()))
}

fn step_grid(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = ((hi - lo) / h).round() as usize;
    (0..=n).map(|k| lo + h * k as f64).collect()
}

fn max_err(ts: &[f64], ell: usize, f: impl Fn(f64) -> C) -> Result<f64> {
    let v = fock_oracle(ts, ell)?;
    Ok(ts.iter().zip(&v).map(|(&t, p)| (p - f(t)).norm()).fold(0.0, f64::max))
}

/// Breakpoints for `n` expansion terms, order `ℓ` and accuracy `eps`; the
/// expansions are within `eps/4` beyond `D⁺/2` and below `-D⁻/2`.
pub fn fock_breakpoints(n: usize, ell: usize, eps: f64) -> Result<FockBreakpoints> {
    check_order(n, ell)?;
    check_eps(eps)?;
    let key = (n, ell, eps.to_bits());
    if let Some(b) = breakpoints_cache().lock().unwrap().get(&key) {
        return Ok(*b);
    }
    let d = asymptotics()?;
    let plus = PlusTail::new(&d.a, n, ell);
    let minus = MinusTail::new(d, ell);
    let order = (3 * n + 2 + ell) as i32;
    let ts = step_grid(1.0, 12.0, 0.25);
    let v = fock_oracle(&ts, ell)?;
    let c_plus = ts
        .iter()
        .zip(&v)
        .map(|(&t, p)| (p - plus.eval(t)).norm() * t.powi(order))
        .fold(0.0, f64::max);
    let mut d_plus = 2.0 * (2.0 * c_plus / eps).powf(1.0 / order as f64).max(1.0);
    let rate = (d.nu1 * 3f64.sqrt() / 2.0 - d.beta).abs();
    let ts = step_grid(-7.0, -1.0, 0.25);
    let v = fock_oracle(&ts, ell)?;
    let c_minus = ts
        .iter()
        .zip(&v)
        .map(|(&t, p)| (p - minus.eval(t)).norm() * (rate * t.abs()).exp())
        .fold(0.0, f64::max);
    let mut d_minus = 2.0 * ((2.0 * c_minus / eps).ln() / rate).max(1.0);
    let target = eps / 4.0;
    let mut plus_error = f64::INFINITY;
    for _ in 0..24 {
        plus_error = max_err(&step_grid(d_plus / 2.0, (d_plus / 2.0).max(12.0) + 12.0, 0.125), ell, |t| plus.eval(t))?;
        if plus_error <= target {
            break;
        }
        d_plus *= 1.25;
    }
    let mut minus_error = f64::INFINITY;
    for _ in 0..24 {
        let lo = d_minus / 2.0;
        minus_error = max_err(&step_grid(-(lo.max(6.0) + 6.0), -lo, 0.0625), ell, |t| minus.eval(t))?;
        if minus_error <= target {
            break;
        }
        d_minus *= 1.25;
    }
    if plus_error > target || minus_error > target {
        return Err(Error::Certification {
            stage: "fock expansions".into(),
            achieved: plus_error.max(minus_error),
            target,
        });
    }
    let b = FockBreakpoints {
        d_plus,
        d_minus,
        c_plus,
        c_minus,
        plus_error,
        minus_error,
    };
    breakpoints_cache().lock().unwrap().insert(key, b);
    Ok(b)
}

/// Smallest wavenumber for which `κ^{1/3} A` exceeds both breakpoints.
pub fn fock_kappa_floor(n: usize, ell: usize, eps: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return invalid(format!("interval scale A = {a} must be positive"));
    }
    let b = fock_breakpoints(n, ell, eps)?;
    Ok((b.d_plus.max(b.d_minus) / a).powi(3))
}

fn check_order(n: usize, ell: usize) -> Result<()> {
    if !(2..=FIT_TERMS).contains(&n) {
        return invalid(format!("expansion length n = {n} outside [2, {FIT_TERMS}]"));
    }
    if ell > MAX_DERIVATIVE {
        return invalid(format!("derivative order {ell} > {MAX_DERIVATIVE}"));
    }
    Ok(())
}

/// Plus piece on `[lo, h]`, `lo ≥ 1`: `φ ≈ 1/τ` carried beside the powers
/// `ψ_k = μ(ψ_{k-1}, φ)`, accumulated into the complex output.
fn plus_piece(tail: &PlusTail, lo: f64, h: f64, tol: f64) -> Result<(ComplexNet, f64)> {
    let xs = uniform_grid(lo, h, PROBE_POINTS);
    let want: Vec<C> = xs.iter().map(|&t| tail.eval(t)).collect();
    let gain = tail.gain().max(1e-300);
    let pmax = tail.terms.iter().map(|t| t.0).max().unwrap();
    let coeff = |k: u32| tail.terms.iter().find(|t| t.0 == k).map(|t| t.1);
    let mut achieved = f64::INFINITY;
    let net = certify(
        "fock plus piece",
        tol,
        |k| {
            let zeta = tol * 0.25f64.powi(k as i32) / (4.0 * gain);
            let recip = build_reciprocal(h, zeta.min(0.25))?;
            let mu = multiply_net(1.5, multiply_level(1.5, zeta));
            let (lin, cst) = (tail.lin, tail.cst);
            let mut ch = Chain::new(1)
                .stage(&recip, &[0], &[0])?
                // [φ, τ] -> [ψ = φ, φ, acc_re, acc_im]
                .linear(&[
                    Row::coord(0),
                    Row::coord(0),
                    Row::new(vec![(1, lin.re)], cst.re),
                    Row::new(vec![(1, lin.im)], cst.im),
                ])?;
            for p in 2..=pmax {
                let last = p == pmax;
                let carry: &[usize] = if last { &[2, 3] } else { &[1, 2, 3] };
                ch = ch.stage(&mu, &[0, 1], carry)?;
                let b = coeff(p).unwrap_or(C::new(0.0, 0.0));
                let off = if last { 1 } else { 2 };
                let mut rows = Vec::new();
                if !last {
                    rows.push(Row::coord(0));
                    rows.push(Row::coord(1));
                }
                rows.push(Row::new(vec![(off, 1.0), (0, b.re)], 0.0));
                rows.push(Row::new(vec![(off + 1, 1.0), (0, b.im)], 0.0));
                ch = ch.linear(&rows)?;
            }
            clamped(&ComplexNet::new(ch.finish()?)?, lo, h)
        },
        |net| {
            achieved = sup_dev(net, &xs, &want);
            achieved
        },
    )?;
    Ok((net, achieved))
}

/// `[cos y, sin y]` on `(-b, b)`, each component within `acc`.
fn trig_pair(b: f64, acc: f64) -> Result<ComplexNet> {
    let cos = build_trig(Trig::Cos, 1.0, b, acc)?;
    let sin = build_trig(Trig::Sin, 1.0, b, acc)?;
    ComplexNet::new(parallel(1, &[&cos, &sin], &Wiring::shared(2, 1))?)
}

/// `s c e^{-r|τ|}` on `τ ∈ (-t, 0)` as a complex network, within `acc`.
fn exp_factor(r: f64, t: f64, c: C, acc: f64) -> Result<ComplexNet> {
    let e = build_exp_decay(r, t, (acc / c.norm().max(1.0)).min(0.25))?;
    let e = with_input_map(e, -1.0, 0.0)?;
    let scale = c.norm().max(1.0);
    let unit = c / scale;
    let e = e.map_output(&AffineLayer::new(2, 1, vec![unit.re, unit.im], vec![0.0, 0.0])?)?;
    scale_complex(ComplexNet::new(e)?, scale)
}

/// `p(τ) e^{-r|τ|}` on `[-t, -lo]` as a product of a polynomial network and
/// an exponential one, balanced so both factors have comparable sup.
fn alpha_product(p: &[C], r: f64, a_grid: &[f64], lo: f64, t_cut: f64, acc: f64) -> Result<ComplexNet> {
    let p_sup = a_grid.iter().map(|&t| poly_eval(p, t).norm()).fold(0.0, f64::max) * 1.1;
    let e_sup = (-r * lo).exp();
    let s = (p_sup / e_sup).sqrt();
    let (pb, eb) = (p_sup / s, e_sup * s);
    let pb_budget = product_budget_complex(pb, eb, acc);
    let scaled: Vec<C> = p.iter().map(|&c| c / s).collect();
    // centred variable u = τ + m keeps the Horner intermediates small
    let (m, hw) = ((t_cut + lo) / 2.0, (t_cut - lo) / 2.0);
    let pn = build_polynomial_complex(&taylor_shift(&scaled, -m), hw, pb_budget.alpha.min(0.25))?;
    let pn = ComplexNet::new(with_input_map(pn.into_net(), 1.0, m)?)?;
    let en = exp_factor(r, t_cut, C::new(s, 0.0), pb_budget.beta / SQRT_2)?;
    product_nets_complex(&pn, &en, pb, eb, acc)
}

/// `p(τ) e^{-r|τ|}` on `[-t, -lo]` by a Chebyshev emulator, used when the
/// dynamic range of the factors defeats [`alpha_product`].
fn alpha_direct(p: &[C], r: f64, lo: f64, t_cut: f64, acc: f64) -> Result<ComplexNet> {
    let (c, hw) = (-(t_cut + lo) / 2.0, (t_cut - lo) / 2.0);
    let f = |t: f64| poly_eval(p, t) * (-r * t.abs()).exp();
    let series = interpolant(|xs| Ok(xs.iter().map(|&t| f(t)).collect()), c, hw, acc / 64.0, 1024)?;
    let (class, k) = best_class(&series, true, acc / 2.0)?;
    let net = build_smooth_emulator(|x| series.eval(x), &class, k, acc / 2.0)?;
    Ok(shift_input(net, c)?.into_complex())
}

/// Minus piece on `[-h, -lo]`: `α · (ω ∘ ϑ)` with `α = c₀ q_ℓ e^{-r|τ|}`
/// evaluated on `[-T, -lo]` (beyond `T` the target is below `tol/16`).
fn minus_piece(tail: &MinusTail, nu1: f64, lo: f64, h: f64, tol: f64) -> Result<(ComplexNet, f64, f64, bool)> {
    let t_cut = tail.cutoff(lo, tol / 16.0).max(lo + 1.0).min(h);
    let xs = uniform_grid(-h, -lo, PROBE_POINTS.max((40.0 * t_cut * t_cut) as usize));
    let want: Vec<C> = xs.iter().map(|&t| tail.eval(t)).collect();
    let a_grid = uniform_grid(-t_cut, -lo, 2001);
    let alpha_sup = 1.1 * a_grid.iter().map(|&t| tail.envelope(t)).fold(0.0, f64::max);
    let theta = [0.0, nu1 / 2.0, 0.0, -1.0 / 3.0];
    let beta_sup = 1.05 * (h * nu1.abs() / 2.0 + h * h * h / 3.0);
    let bounds = CompositionBounds {
        alpha: alpha_sup,
        beta: beta_sup,
        omega: 1.0,
        omega_prime: 1.0,
        omega_domain: 2.0 * beta_sup,
    };
    let ell_zero = tail.q.len() == 1;
    let mut achieved = f64::INFINITY;
    let mut direct = false;
    let net = certify(
        "fock minus piece",
        tol,
        |k| {
            let tight = tol * 0.25f64.powi(k as i32);
            let bud = composition_budget(&bounds, tight, true);
            let alpha = if ell_zero {
                exp_factor(tail.decay, t_cut, tail.c0, bud.alpha / SQRT_2)?
            } else {
                let p: Vec<C> = tail.q.iter().map(|&q| q * tail.c0).collect();
                match alpha_product(&p, tail.decay, &a_grid, lo, t_cut, bud.alpha) {
                    Err(Error::Certification { .. }) => {
                        direct = true;
                        alpha_direct(&p, tail.decay, lo, t_cut, bud.alpha)?
                    }
                    r => r?,
                }
            };
            let alpha = clamped(&alpha, -t_cut, -lo)?;
            let omega = trig_pair(bounds.omega_domain, (bud.omega / SQRT_2).min(0.25))?;
            let beta = build_polynomial(&theta, h, bud.beta.min(0.25))?;
            let net = multiply_compose_complex(&alpha, &omega, &beta, &bounds, tight)?;
            clamped(&net, -h, -lo)
        },
        |net| {
            achieved = sup_dev(net, &xs, &want);
            achieved
        },
    )?;
    Ok((net, achieved, t_cut, direct))
}

/// Chebyshev emulator of `Ψ^{(ℓ)}` on `[-d, d]`.
fn centre_piece(ell: usize, d: f64, tol: f64) -> Result<(ComplexNet, f64)> {
    let series = interpolant(|xs| fock_oracle(xs, ell), 0.0, d, 1e-9, 1024)?;
    let (class, k) = best_class(&series, true, tol)?;
    let net = build_smooth_emulator(|x| series.eval(x), &class, k, tol)?.into_complex();
    let xs = uniform_grid(-d, d, PROBE_POINTS);
    let want = fock_oracle(&xs, ell)?;
    let achieved = sup_dev(&net, &xs, &want);
    Ok((clamped(&net, -d, d)?, achieved))
}

/// Network for `Ψ^{(ℓ)}` on `I_κ = (-κ^{1/3} A, κ^{1/3} A)` with sup error
/// at most `eps`, certified against the oracle.
pub fn build_fock_emulator(kappa: f64, n: usize, ell: usize, eps: f64, a: f64) -> Result<(ComplexNet, EmulatorReport)> {
    check_order(n, ell)?;
    check_eps(eps)?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return invalid(format!("wavenumber {kappa} must be positive"));
    }
    let floor = fock_kappa_floor(n, ell, eps, a)?;
    if kappa <= floor {
        return invalid(format!("wavenumber {kappa} is below the floor {floor:.3} for (n, ℓ, ε, A) = ({n}, {ell}, {eps}, {a})"));
    }
    let bp = fock_breakpoints(n, ell, eps)?;
    let d = asymptotics()?;
    let h = kappa.cbrt() * a;
    let spec = PartitionSpec::for_wavenumber(kappa, a, bp.d_minus, bp.d_plus)?;
    let t = build_partition_map(&spec)?;
    let plus_tail = PlusTail::new(&d.a, n, ell);
    let minus_tail = MinusTail::new(d, ell);
    let dc = bp.d_plus.max(bp.d_minus);
    let grid = cert_grid(&[-h, -bp.d_minus, 0.0, bp.d_plus, h], CERT_POINTS);
    let want = fock_oracle(&grid, ell)?;
    let mut best = f64::INFINITY;
    for k in 0..=MAX_ESCALATIONS {
        let piece_tol = eps / 4.0 * 0.25f64.powi(k as i32);
        let (plus, e_plus) = plus_piece(&plus_tail, bp.d_plus / 2.0, h, piece_tol)?;
        let (minus, e_minus, t_cut, direct) = minus_piece(&minus_tail, d.nu1, bp.d_minus / 2.0, h, piece_tol)?;
        let (centre, e_centre) = centre_piece(ell, dc, piece_tol)?;
        let lambda = [&plus, &minus, &centre]
            .iter()
            .flat_map(|p| p.eval_many(&grid))
            .fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()))
            * 1.25
            + 1.0;
        let glue_tol = eps / 4.0 * 0.25f64.powi(k as i32) / (3.0 * SQRT_2);
        let pieces = [&minus, &minus, &centre, &centre, &centre, &plus, &plus];
        let net = glue_partition(&t, &pieces, lambda, glue_tol)?;
        let achieved = sup_dev(&net, &grid, &want);
        if achieved <= eps {
            let mut r = EmulatorReport::new("fock", kappa, eps, net.stats());
            r.achieved = achieved;
            r.certified = true;
            r.grid_points = grid.len();
            let asym = bp.plus_error.max(bp.minus_error);
            r.ledger = vec![
                LedgerEntry::new("tail expansions", eps / 4.0, Some(asym)),
                LedgerEntry::new("local pieces", piece_tol, Some(e_plus.max(e_minus).max(e_centre))),
                LedgerEntry::new("partition products", 3.0 * SQRT_2 * glue_tol, None),
            ];
            for (key, v) in [
                ("n", n as f64),
                ("ell", ell as f64),
                ("A", a),
                ("halfwidth", h),
                ("d_plus", bp.d_plus),
                ("d_minus", bp.d_minus),
                ("c_plus", bp.c_plus),
                ("c_minus", bp.c_minus),
                ("kappa_floor", floor),
                ("minus_cutoff", t_cut),
                ("err_plus_piece", e_plus),
                ("err_minus_piece", e_minus),
                ("err_centre_piece", e_centre),
                ("escalations", k as f64),
                ("minus_alpha_direct", f64::from(u8::from(direct))),
            ] {
                r.params.insert(key.to_string(), v);
            }
            return Ok((net, r));
        }
        best = best.min(achieved);
    }
    Err(Error::Certification {
        stage: "fock emulator".into(),
        achieved: best,
        target: eps,
    })
}
