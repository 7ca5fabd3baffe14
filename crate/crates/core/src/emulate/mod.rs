//! Wavenumber-robust emulators: Fock's integral and its derivatives, the
//! envelope `V_κ` (generic and through its asymptotic expansion), the phase
//! and oscillation factors, and the full Neumann trace.
//!
//! Every builder splits its accuracy target into per-stage budgets, builds
//! each stage against its budget, and certifies the assembled network on a
//! grid of Chebyshev points per sub-interval plus uniform global points.
//! The budgets and measured errors are recorded in an [`EmulatorReport`].

mod envelope;
mod fock;
mod trace;

pub use envelope::{
    build_v_emulator_asymptotic, build_v_emulator_generic, ComplexFn, ExpansionSpec, RealFn, RemainderFn, VSource,
};
pub use fock::{
    build_fock_emulator, fock_breakpoints, fock_kappa_floor, fock_oracle, FockBreakpoints,
};
pub use trace::{build_phase_emulator, build_trace_emulator, oscillation_factor, TraceEmulator, TraceVSource};

use crate::blocks::with_input_map;
use crate::cheb::{try_cheb_coeffs, ChebSeries, SmoothClass};
use crate::error::{invalid, Result};
use crate::network::{bounded_affine, AffineLayer, ComplexNet, EmulatorNet, NetworkStats, ReluNetwork};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

type C = Complex64;

/// Points per sub-interval (and globally) of the certification grid.
pub const CERT_POINTS: usize = 2048;

/// One stage of an error budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    /// Share of the target assigned to the stage.
    pub budget: f64,
    /// Measured error of the stage, when it was checked in isolation.
    pub achieved: Option<f64>,
}

impl LedgerEntry {
    pub fn new(stage: impl Into<String>, budget: f64, achieved: Option<f64>) -> Self {
        Self {
            stage: stage.into(),
            budget,
            achieved,
        }
    }
}

/// Outcome of an emulator build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmulatorReport {
    pub emulator: String,
    pub kappa: f64,
    pub target: f64,
    /// Sup error on the certification grid.
    pub achieved: f64,
    pub certified: bool,
    pub stats: NetworkStats,
    pub grid_points: usize,
    pub ledger: Vec<LedgerEntry>,
    pub params: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl EmulatorReport {
    pub(crate) fn new(emulator: &str, kappa: f64, target: f64, stats: NetworkStats) -> Self {
        Self {
            emulator: emulator.to_string(),
            kappa,
            target,
            achieved: f64::NAN,
            certified: false,
            stats,
            grid_points: 0,
            ledger: Vec::new(),
            params: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Sum of the stage budgets.
    pub fn budget_total(&self) -> f64 {
        self.ledger.iter().map(|e| e.budget).sum()
    }

    /// Whether the budgets cover the measured total error.
    pub fn ledger_sound(&self) -> bool {
        self.achieved <= self.budget_total()
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| crate::Error::Io(e.to_string()))
    }
}

/// `n` Chebyshev points of the first kind on `[lo, hi]`.
pub fn chebyshev_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (c, h) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
    (0..n)
        .map(|k| c - h * (PI * (k as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Certification grid: `n` Chebyshev points in each consecutive pair of
/// `breaks` and `n` uniform points on the whole range, sorted.
pub fn cert_grid(breaks: &[f64], n: usize) -> Vec<f64> {
    assert!(breaks.len() >= 2 && n >= 2);
    let mut xs: Vec<f64> = breaks
        .windows(2)
        .flat_map(|w| chebyshev_points(w[0], w[1], n))
        .collect();
    xs.extend(crate::blocks::uniform_grid(breaks[0], breaks[breaks.len() - 1], n));
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Maps `f` over `xs` on the available cores, preserving order.
pub(crate) fn par_map<T: Send>(xs: &[f64], f: impl Fn(f64) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    if threads <= 1 || xs.len() < 64 {
        return xs.iter().map(|&x| f(x)).collect();
    }
    let chunk = xs.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = xs
            .chunks(chunk)
            .map(|c| {
                let f = &f;
                s.spawn(move || c.iter().map(|&x| f(x)).collect::<Vec<T>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    })
}

/// Sup of `|net - target|` over `xs`.
pub(crate) fn sup_dev(net: &ComplexNet, xs: &[f64], target: &[C]) -> f64 {
    net.eval_many(xs)
        .iter()
        .zip(target)
        .map(|(y, t)| (y - t).norm())
        .fold(0.0, f64::max)
}

/// Chebyshev interpolant on `[c - h, c + h]` from batched samples, doubling
/// the order from 32 until the coefficient tail is below `tol` or `cap` is
/// reached. The returned series is in the shifted variable `x - c`.
pub(crate) fn interpolant(
    samples: impl Fn(&[f64]) -> Result<Vec<C>>,
    c: f64,
    h: f64,
    tol: f64,
    cap: usize,
) -> Result<ChebSeries> {
    let mut n = 32usize.min(cap);
    loop {
        let npts = 4 * (n + 1);
        let xs: Vec<f64> = (0..npts)
            .map(|j| c + h * (PI * (j as f64 + 0.5) / npts as f64).cos())
            .collect();
        let vals = samples(&xs)?;
        let mut it = vals.into_iter();
        let s = try_cheb_coeffs(|_| Ok(it.next().unwrap()), h, n)?;
        let need = (0..=n).find(|&m| s.tail(m) <= tol);
        match need {
            Some(m) if m < n => return Ok(s.truncated(m)),
            _ if n >= cap => return Ok(s),
            _ => n = (2 * n).min(cap),
        }
    }
}

/// Chebyshev coefficients of the derivative (in the `[-1, 1]` variable).
pub(crate) fn cheb_derivative(a: &[C]) -> Vec<C> {
    let n = a.len();
    if n <= 1 {
        return vec![C::new(0.0, 0.0)];
    }
    let mut d = vec![C::new(0.0, 0.0); n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + a[k] * (2.0 * k as f64);
    }
    d.truncate(n - 1);
    d
}

/// Class with `λ_j` the measured sup of `|f^{(j)}|` for `j ≤ k + 1`, made
/// nondecreasing and inflated by 1.5.
pub(crate) fn measured_class(series: &ChebSeries, k: u32, complex: bool) -> Result<SmoothClass> {
    let h = series.halfwidth;
    let ys = crate::blocks::uniform_grid(-1.0, 1.0, 2001);
    let mut coeffs = series.coeffs.clone();
    let mut lambda = Vec::new();
    let mut run = 0.0f64;
    for j in 0..=(k as usize + 1) {
        let sup = ys
            .iter()
            .map(|&y| crate::cheb::clenshaw(&coeffs, y).norm())
            .fold(0.0, f64::max)
            / h.powi(j as i32);
        run = run.max(1.5 * sup).max(1e-12);
        lambda.push(run);
        coeffs = cheb_derivative(&coeffs);
    }
    SmoothClass::new(lambda, h, complex)
}

/// Measured class and smoothness order `k ∈ 2..=8` with the smallest
/// truncation index at accuracy `eps`.
pub(crate) fn best_class(series: &ChebSeries, complex: bool, eps: f64) -> Result<(SmoothClass, u32)> {
    pick_order(&measured_class(series, 8, complex)?, 2, eps)
}

/// Restriction of `full` (bounds up to order 9) to the order `k ∈ from..=8`
/// with the smallest truncation index at accuracy `eps`.
pub(crate) fn pick_order(full: &SmoothClass, from: u32, eps: f64) -> Result<(SmoothClass, u32)> {
    (from..=8u32)
        .filter_map(|k| {
            let lambda = full.lambda.get(..k as usize + 2)?.to_vec();
            let cl = SmoothClass::new(lambda, full.halfwidth, full.complex).ok()?;
            let n = crate::cheb::truncation_index(&cl, k, eps).ok()?;
            Some((n, cl, k))
        })
        .min_by_key(|t| t.0)
        .map(|(_, cl, k)| (cl, k))
        .ok_or_else(|| crate::Error::Numerical("no smoothness order gives a finite truncation index".into()))
}

/// Precomposes `x ↦ x - c` on an emulator.
pub(crate) fn shift_input(net: EmulatorNet, c: f64) -> Result<EmulatorNet> {
    if c == 0.0 {
        return Ok(net);
    }
    Ok(match net {
        EmulatorNet::Real(n) => EmulatorNet::Real(with_input_map(n, 1.0, -c)?),
        EmulatorNet::Complex(z) => EmulatorNet::Complex(ComplexNet::new(with_input_map(z.into_net(), 1.0, -c)?)?),
    })
}

/// Emulator of `f` on `[0, 2π]`: a Chebyshev interpolant of `f(x + π)` on
/// `[-π, π]` to `eps / 64`, emulated to `eps / 2` in the class and order
/// chosen by `class_of`, with the input shifted back by `π`.
pub(crate) fn periodic_emulator(
    f: impl Fn(f64) -> C + Sync,
    eps: f64,
    class_of: impl FnOnce(&ChebSeries) -> Result<(SmoothClass, u32)>,
) -> Result<(EmulatorNet, ChebSeries)> {
    let series = interpolant(|xs| Ok(par_map(xs, |x| f(x + PI))), 0.0, PI, eps / 64.0, 4096)?;
    let (class, k) = class_of(&series)?;
    let net = crate::cheb::build_smooth_emulator(|x| series.eval(x), &class, k, eps / 2.0)?;
    Ok((shift_input(net, PI)?, series))
}

/// Multiplies the output of a scalar network by `factor` with weights kept
/// in `[-1, 1]`.
pub(crate) fn scale_real(net: ReluNetwork, factor: f64) -> Result<ReluNetwork> {
    let post = bounded_affine(&[vec![factor]], &[0.0])?;
    ReluNetwork::compose_absorb(&post, &net)
}

/// Exact network for `x ↦ min{max{x, lo}, hi}` with weights in `[-1, 1]`:
/// `lo + ρ(x - lo) - ρ(x - hi)`, the shifts and the constant realized by
/// weight-bounded affine maps.
pub fn clamp_net(lo: f64, hi: f64) -> Result<ReluNetwork> {
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return invalid(format!("clamp interval [{lo}, {hi}] is empty"));
    }
    let pre = bounded_affine(&[vec![1.0], vec![1.0]], &[-lo, -hi])?;
    let relu = ReluNetwork::new(vec![
        AffineLayer::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![0.0; 2])?,
        AffineLayer::new(1, 2, vec![1.0, -1.0], vec![0.0])?,
    ])?;
    let inner = ReluNetwork::compose_absorb(&relu, &pre)?;
    if lo.abs() <= 1.0 {
        let mut layers = inner.into_layers();
        let last = layers.last_mut().unwrap();
        last.add_b(0, lo);
        return ReluNetwork::new(layers);
    }
    let post = bounded_affine(&[vec![1.0]], &[lo])?;
    ReluNetwork::compose_absorb(&post, &inner)
}

/// Precomposes a clamp to `[lo, hi]` on a complex network.
pub(crate) fn clamped(net: &ComplexNet, lo: f64, hi: f64) -> Result<ComplexNet> {
    ComplexNet::new(ReluNetwork::compose_absorb(net.net(), &clamp_net(lo, hi)?)?)
}

/// Multiplies both outputs of a complex network by a real factor with
/// weights kept in `[-1, 1]`.
pub(crate) fn scale_complex(net: ComplexNet, factor: f64) -> Result<ComplexNet> {
    let post = bounded_affine(&[vec![factor, 0.0], vec![0.0, factor]], &[0.0, 0.0])?;
    ComplexNet::new(ReluNetwork::compose_absorb(&post, net.net())?)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("accuracy {eps} outside (0, 1/2)"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_is_exact() {
        for (lo, hi) in [(-0.5, 0.75), (1.5, 16.0), (-16.0, -1.25)] {
            let c = clamp_net(lo, hi).unwrap();
            for x in [-40.0, lo - 0.1, lo, (lo + hi) / 2.0, hi, hi + 3.0, 100.0] {
                let want = x.clamp(lo, hi);
                assert!((c.eval1(x) - want).abs() <= 1e-12 * want.abs().max(1.0), "{x}");
            }
            assert!(c.weight_bound() <= 1.0);
        }
    }

    #[test]
    fn derivative_of_series() {
        let s = crate::cheb::cheb_coeffs(|x| C::new(x.powi(4) + x, 0.0), 1.0, 6).unwrap();
        let d = cheb_derivative(&s.coeffs);
        for y in [-0.7, 0.1, 0.9] {
            let want = 4.0 * y * y * y + 1.0;
            assert!((crate::cheb::clenshaw(&d, y).re - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn grid_shape() {
        let g = cert_grid(&[-3.0, -1.0, 0.0, 2.0], 16);
        assert!(g.len() <= 64 && g.len() > 48);
        assert_eq!(g[0], -3.0);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interpolant_of_entire_function() {
        let s = interpolant(|xs| Ok(xs.iter().map(|&x| C::new(0.0, x).exp()).collect()), 1.0, 2.0, 1e-13, 256).unwrap();
        for x in [-1.0, 0.3, 3.0] {
            assert!((s.eval(x - 1.0) - C::new(0.0, x).exp()).norm() <= 1e-12);
        }
        let cl = measured_class(&s, 3, true).unwrap();
        assert!((cl.lambda[0] - 1.5).abs() <= 1e-6 && (cl.lambda[4] - 1.5).abs() <= 1e-6);
    }
}
