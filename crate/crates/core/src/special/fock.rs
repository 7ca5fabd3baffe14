//! Fock's integral `Ψ(τ) = e^{-iτ³/3} ∫ e^{-izτ} / Ai(e^{2πi/3} z) dz`.
//!
//! The contour comes from infinity in a direction with `arg ∈ (π/3, π)`,
//! passes below the origin and leaves in a direction with
//! `arg ∈ (-π/3, π/3)`; the poles `z_k = e^{-2πi/3} ν_k` lie on the ray
//! `arg z = π/3` above it. For `τ ≥ 2` the vertex sits on the saddle
//! `z = -τ²` with the rays along the steepest-descent directions; for
//! very negative `τ` the residue series over the poles is summed instead.

use super::airy::{airy_roots, log_airy};
use super::quad::{integrate, QuadTol};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

type C = Complex64;

/// Highest supported derivative order.
pub const MAX_DERIVATIVE: usize = 4;
const ROOT_COUNT: usize = 60;
const DROP: f64 = 75.0;

fn i() -> C {
    C::new(0.0, 1.0)
}

fn omega() -> C {
    C::from_polar(1.0, 2.0 * PI / 3.0)
}

/// Two rays from `vertex`: the contour runs in from `vertex + ∞·dir_in`
/// and out to `vertex + ∞·dir_out`, truncated at length `radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockContour {
    pub vertex: C,
    pub dir_in: C,
    pub dir_out: C,
    pub radius: f64,
}

impl FockContour {
    /// Vertex `-i/2`, rays along `e^{2πi/3}` and `1`; used for `|τ| ≲ 3`.
    pub fn near() -> Self {
        FockContour {
            vertex: C::new(0.0, -0.5),
            dir_in: C::from_polar(1.0, 2.0 * PI / 3.0),
            dir_out: C::new(1.0, 0.0),
            radius: 1e3,
        }
    }

    /// Second admissible contour for cross-checks: vertex `-i`, rays along
    /// `e^{5πi/6}` and `e^{-iπ/12}`.
    pub fn near_alt() -> Self {
        FockContour {
            vertex: C::new(0.0, -1.0),
            dir_in: C::from_polar(1.0, 5.0 * PI / 6.0),
            dir_out: C::from_polar(1.0, -PI / 12.0),
            radius: 1e3,
        }
    }

    /// Vertex at the saddle `-τ²`, rays along `e^{3πi/4}` and `e^{-iπ/4}`.
    pub fn saddle(tau: f64) -> Self {
        FockContour {
            vertex: C::new(-tau * tau, 0.0),
            dir_in: C::from_polar(1.0, 0.75 * PI),
            dir_out: C::from_polar(1.0, -0.25 * PI),
            radius: 1e4 + 10.0 * tau * tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a_in = self.dir_in.arg();
        let a_out = self.dir_out.arg();
        let ok = self.dir_in.norm() > 0.0
            && self.dir_out.norm() > 0.0
            && a_in > PI / 3.0
            && a_in < PI
            && a_out.abs() < PI / 3.0
            && self.vertex.im <= 0.0
            && self.vertex.re <= 0.0
            && self.radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inadmissible Fock contour {self:?}")))
        }
    }
}

/// Oracle settings. With `contour = None` the contour is chosen per `τ`
/// and the residue series is used for `τ ≤ residue_below`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockOracleConfig {
    pub contour: Option<FockContour>,
    /// Initial Gauss–Kronrod panels per ray (15 nodes each).
    pub panels: usize,
    pub tol: f64,
    pub ell_max: usize,
    pub residue_below: f64,
}

impl Default for FockOracleConfig {
    fn default() -> Self {
        FockOracleConfig {
            contour: None,
            panels: 8,
            tol: 1e-11,
            ell_max: MAX_DERIVATIVE,
            residue_below: -3.0,
        }
    }
}

impl FockOracleConfig {
    pub fn with_contour(c: FockContour) -> Self {
        FockOracleConfig {
            contour: Some(c),
            residue_below: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell_max > MAX_DERIVATIVE {
            return Err(Error::InvalidParameter(format!("derivative order cap {} > {MAX_DERIVATIVE}", self.ell_max)));
        }
        if !(self.tol > 0.0) || self.panels == 0 {
            return Err(Error::InvalidParameter("tolerance and panel count must be positive".into()));
        }
        if let Some(c) = &self.contour {
            c.validate()?;
        }
        Ok(())
    }
}

/// `Ψ^{(ℓ)}(τ)` for `ℓ = 0..=ell_max` with per-order error estimates.
#[derive(Clone, Debug)]
pub struct FockValues {
    pub values: Vec<C>,
    pub errors: Vec<f64>,
}

/// Complete Bell polynomials in `u = φ_τ`, `a = φ_ττ = -2iτ`,
/// `b = φ_τττ = -2i`: `∂_τ^ℓ e^{φ} = g_ℓ e^{φ}`.
fn bell(u: C, tau: f64, out: &mut [C]) {
    let a = C::new(0.0, -2.0 * tau);
    let b = C::new(0.0, -2.0);
    let u2 = u * u;
    let g = [
        C::new(1.0, 0.0),
        u,
        u2 + a,
        u2 * u + u * a * 3.0 + b,
        u2 * u2 + u2 * a * 6.0 + u * b * 4.0 + a * a * 3.0,
    ];
    out.copy_from_slice(&g[..out.len()]);
}

fn phase(z: C, tau: f64) -> C {
    -i() * z * tau - i() * (tau * tau * tau / 3.0) - log_airy(omega() * z)
}

/// Length along a ray beyond which the integrand is negligible.
fn ray_extent(v: C, d: C, tau: f64, radius: f64) -> Result<f64> {
    let dt = 0.25 * tau.abs().sqrt().max(1.0);
    let mut best = f64::NEG_INFINITY;
    let mut t = 0.0;
    loop {
        let m = phase(v + d * t, tau).re;
        best = best.max(m);
        if m < best - DROP && t > 4.0 * dt {
            return Ok(t);
        }
        t += dt;
        if t > radius {
            return Err(Error::Oracle(format!("Fock integrand not negligible at truncation radius {radius}")));
        }
    }
}

fn contour_values(tau: f64, c: &FockContour, cfg: &FockOracleConfig) -> Result<FockValues> {
    // The two rays can cancel; when a per-ray relative tolerance is too
    // loose for the sum, retry with an absolute one.
    let rel = contour_pass(tau, c, cfg, cfg.tol, QuadTol::default().floor);
    match rel {
        Err(Error::Oracle(_)) => contour_pass(tau, c, cfg, 0.0, 1e-12),
        r => r,
    }
}

fn contour_pass(tau: f64, c: &FockContour, cfg: &FockOracleConfig, rel: f64, floor: f64) -> Result<FockValues> {
    let dim = cfg.ell_max + 1;
    let mut total = vec![C::new(0.0, 0.0); dim];
    let mut errors = vec![0.0; dim];
    let mut l1 = vec![0.0; dim];
    let tol = QuadTol {
        abs: 0.1 * cfg.tol,
        rel,
        floor,
        init: cfg.panels,
        ..Default::default()
    };
    for (dir, sign) in [(c.dir_out, 1.0), (c.dir_in, -1.0)] {
        let t_max = ray_extent(c.vertex, dir, tau, c.radius)?;
        let mut g = vec![C::new(0.0, 0.0); dim];
        let q = integrate(
            |t, out: &mut [C]| {
                let z = c.vertex + dir * t;
                let e = phase(z, tau).exp() * dir;
                bell(-i() * (z + tau * tau), tau, &mut g);
                for (o, gl) in out.iter_mut().zip(&g) {
                    *o = gl * e;
                }
            },
            0.0,
            t_max,
            dim,
            &tol,
        );
        for d in 0..dim {
            total[d] += q.value[d] * sign;
            errors[d] += q.error[d];
            l1[d] += q.l1[d];
        }
    }
    for (l, ((v, e), m)) in total.iter().zip(&errors).zip(&l1).enumerate() {
        let allow = ((1e3 * cfg.tol).max(1e-8) * v.norm().max(1.0)).max(10.0 * tol.floor * m);
        if !(v.re.is_finite() && v.im.is_finite()) || *e > allow {
            return Err(Error::Oracle(format!(
                "Fock quadrature for order {l} at τ = {tau} not converged: estimate {e:.2e}"
            )));
        }
    }
    Ok(FockValues { values: total, errors })
}

fn roots() -> Result<&'static [(f64, f64)]> {
    static ROOTS: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    if let Some(r) = ROOTS.get() {
        return Ok(r);
    }
    let r = airy_roots(ROOT_COUNT)?;
    Ok(ROOTS.get_or_init(|| r))
}

/// Pole `α_k = e^{-2πi/3} ν_k` of the integrand.
pub fn fock_pole(nu: f64) -> C {
    C::from_polar(1.0, -2.0 * PI / 3.0) * nu
}

/// `c₀ = 2πi / (e^{2πi/3} Ai'(ν₁))`, the leading coefficient of the
/// residue series.
pub fn fock_minus_constant() -> Result<C> {
    let (_, d) = roots()?[0];
    Ok(C::new(0.0, 2.0 * PI) / (omega() * d))
}

fn residue_values(tau: f64, ell_max: usize) -> Result<FockValues> {
    let dim = ell_max + 1;
    let pre = C::new(0.0, 2.0 * PI) / omega();
    let mut total = vec![C::new(0.0, 0.0); dim];
    let mut g = vec![C::new(0.0, 0.0); dim];
    let mut last = f64::INFINITY;
    for &(nu, d) in roots()? {
        let a = fock_pole(nu);
        let e = pre * (-i() * (tau * tau * tau / 3.0) - i() * a * tau).exp() / d;
        bell(-i() * (a + tau * tau), tau, &mut g);
        last = 0.0;
        for (t, gl) in total.iter_mut().zip(&g) {
            *t += gl * e;
            last = f64::max(last, (gl * e).norm());
        }
        let scale = total.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if last < 1e-17 * scale {
            let errors = total.iter().map(|v| 1e-15 * v.norm()).collect();
            return Ok(FockValues { values: total, errors });
        }
    }
    Err(Error::Oracle(format!("residue series at τ = {tau} not converged: last term {last:.2e}")))
}

/// `Ψ^{(ℓ)}(τ)`, `ℓ = 0..=cfg.ell_max`.
pub fn fock_psi_all(tau: f64, cfg: &FockOracleConfig) -> Result<FockValues> {
    cfg.validate()?;
    if !tau.is_finite() {
        return Err(Error::InvalidParameter("τ must be finite".into()));
    }
    if tau <= cfg.residue_below {
        return residue_values(tau, cfg.ell_max);
    }
    let c = match cfg.contour {
        Some(c) => c,
        None if tau >= 2.0 => FockContour::saddle(tau),
        None => FockContour::near(),
    };
    contour_values(tau, &c, cfg)
}

/// `Ψ^{(ℓ)}(τ)` for a single derivative order `ℓ ≤ 4`.
pub fn fock_psi(tau: f64, ell: usize, cfg: &FockOracleConfig) -> Result<C> {
    if ell > MAX_DERIVATIVE {
        return Err(Error::InvalidParameter(format!("derivative order {ell} > {MAX_DERIVATIVE}")));
    }
    let local = FockOracleConfig {
        ell_max: ell,
        ..cfg.clone()
    };
    Ok(fock_psi_all(tau, &local)?.values[ell])
}

/// Least-squares fit `Ψ(τ) ≈ Σ_{j=0}^{n} a_j τ^{1-3j}` on a window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailFit {
    pub coeffs: Vec<C>,
    /// Max abs residual over the samples.
    pub residual: f64,
}

/// Fits the large-`τ` expansion on `samples` points of `[lo, hi]`.
pub fn fock_tail_fit(n: usize, lo: f64, hi: f64, samples: usize, cfg: &FockOracleConfig) -> Result<TailFit> {
    if n > 4 || !(lo > 0.0 && hi > lo) || samples < n + 2 {
        return Err(Error::InvalidParameter("bad tail fit window".into()));
    }
    let taus: Vec<f64> = (0..samples)
        .map(|k| lo + (hi - lo) * k as f64 / (samples - 1) as f64)
        .collect();
    let psi = taus
        .iter()
        .map(|&t| fock_psi(t, 0, cfg))
        .collect::<Result<Vec<_>>>()?;
    // columns scaled by lo^{3j-1} for conditioning
    let m = DMatrix::from_fn(samples, n + 1, |r, j| {
        C::new((taus[r] / lo).powi(1 - 3 * j as i32), 0.0)
    });
    let b = DVector::from_vec(psi.clone());
    let svd = m.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv[sv.len() - 1] < 1e-12 * sv[0] {
        return Err(Error::Numerical("ill-conditioned tail fit".into()));
    }
    let x = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let residual = (&m * &x - &b).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let coeffs = (0..=n).map(|j| x[j] * lo.powi(3 * j as i32 - 1)).collect();
    Ok(TailFit { coeffs, residual })
}

/// Empirical asymptotic data for both tails.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FockTail {
    pub a: Vec<C>,
    pub residual: f64,
    pub c0: C,
    pub beta: f64,
}

/// `a_0..a_n` fitted on `τ ∈ [15, 80]`; `c₀` and `β` fitted on
/// `τ ∈ [-40, -10]` from `Ψ(τ) e^{iτ³/3 + iτα₁} = c₀ (1 + O(e^{-β|τ|}))`.
pub fn fock_tail_coeffs(n: usize, cfg: &FockOracleConfig) -> Result<FockTail> {
    let fit = fock_tail_fit(n, 15.0, 80.0, 66, cfg)?;
    let (c0, beta) = fock_minus_fit(cfg)?;
    Ok(FockTail {
        a: fit.coeffs,
        residual: fit.residual,
        c0,
        beta,
    })
}

/// `(c₀, β)` from samples on `[-40, -10]`.
pub fn fock_minus_fit(cfg: &FockOracleConfig) -> Result<(C, f64)> {
    let nu1 = roots()?[0].0;
    let a1 = fock_pole(nu1);
    let ratios = (0..=60)
        .map(|k| {
            let t = -40.0 + 0.5 * k as f64;
            let p = fock_psi(t, 0, cfg)?;
            Ok((t, p / (-i() * (t * t * t / 3.0) - i() * t * a1).exp()))
        })
        .collect::<Result<Vec<_>>>()?;
    let far: Vec<C> = ratios.iter().filter(|(t, _)| *t <= -30.0).map(|r| r.1).collect();
    let c0 = far.iter().sum::<C>() / far.len() as f64;
    let pts: Vec<(f64, f64)> = ratios
        .iter()
        .filter_map(|&(t, r)| {
            let d = (r / c0 - 1.0).norm();
            (d > 1e-11).then(|| (t.abs(), d.ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::Numerical("too few points above noise for the decay fit".into()));
    }
    let (slope, _) = linear_fit(&pts);
    Ok((c0, -slope))
}

/// Least-squares line `y = s x + c`, returns `(s, c)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let s = sxy / sxx;
    (s, my - s * mx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near() -> FockOracleConfig {
        FockOracleConfig::with_contour(FockContour::near())
    }

    #[test]
    fn contour_independence_near_origin() {
        let alt = FockOracleConfig::with_contour(FockContour::near_alt());
        for k in 0..50 {
            let t = -3.0 + 5.0 * k as f64 / 49.0;
            let a = fock_psi_all(t, &near()).unwrap();
            let b = fock_psi_all(t, &alt).unwrap();
            for l in 0..=4 {
                let d = (a.values[l] - b.values[l]).norm();
                assert!(d < 1e-7 * a.values[l].norm().max(1.0), "τ={t} ℓ={l} d={d:e}");
            }
        }
    }

    #[test]
    fn saddle_contour_matches_near_contour() {
        for &t in &[0.5, 1.0, 2.0, 2.5] {
            let a = fock_psi_all(t, &near()).unwrap();
            let b = fock_psi_all(t, &FockOracleConfig::with_contour(FockContour::saddle(t))).unwrap();
            for l in 0..=4 {
                assert!((a.values[l] - b.values[l]).norm() < 1e-8 * a.values[l].norm().max(1.0), "τ={t} ℓ={l}");
            }
        }
    }

    #[test]
    fn residue_series_matches_contour() {
        for &t in &[-3.0, -2.7, -2.3, -2.0] {
            let a = fock_psi_all(t, &near()).unwrap();
            let b = residue_values(t, 4).unwrap();
            for l in 0..=4 {
                let d = (a.values[l] - b.values[l]).norm();
                assert!(d < 1e-8 * a.values[l].norm().max(1e-3), "τ={t} ℓ={l} {} {}", a.values[l], b.values[l]);
            }
        }
    }

    #[test]
    fn derivative_by_differences() {
        let cfg = FockOracleConfig::default();
        for &t in &[-4.0, 0.3, 1.9, 6.0] {
            let d1 = fock_psi(t, 1, &cfg).unwrap();
            let errs: Vec<f64> = [1e-2, 5e-3]
                .iter()
                .map(|&h| {
                    let fd = (fock_psi(t + h, 0, &cfg).unwrap() - fock_psi(t - h, 0, &cfg).unwrap()) / (2.0 * h);
                    (fd - d1).norm()
                })
                .collect();
            let slope = (errs[0] / errs[1]).log2();
            assert!((slope - 2.0).abs() < 0.2, "τ={t} slope {slope} {errs:?}");
        }
    }

    #[test]
    fn growth_bound_and_plus_tail() {
        let cfg = FockOracleConfig::default();
        let c0 = (-30..=30)
            .map(|k| {
                let t = k as f64;
                fock_psi(t, 0, &cfg).unwrap().norm() / (1.0 + t.abs())
            })
            .fold(0.0, f64::max);
        assert!(c0.is_finite() && c0 < 20.0);
        let r: Vec<C> = [20.0, 40.0, 60.0].iter().map(|&t| fock_psi(t, 0, &cfg).unwrap() / t).collect();
        assert!((r[1] - r[2]).norm() < 1e-3 * r[2].norm() && r[2].norm() > 0.1);
        assert!((r[0] - r[2]).norm() < (r[0] - r[1]).norm() * 10.0);
    }

    #[test]
    fn minus_side_decay() {
        let cfg = FockOracleConfig::default();
        let nu1 = super::super::airy::airy_rightmost_root();
        let pts: Vec<(f64, f64)> = (0..=30)
            .map(|k| {
                let t = -40.0 + k as f64;
                (t.abs(), fock_psi(t, 0, &cfg).unwrap().norm().ln())
            })
            .collect();
        let (s, _) = linear_fit(&pts);
        let expect = nu1 * 3f64.sqrt() / 2.0;
        assert!(((s - expect) / expect).abs() < 0.1, "{s} vs {expect}");
        let (c0, beta) = fock_minus_fit(&cfg).unwrap();
        assert!(beta > 0.0);
        assert!((c0 - fock_minus_constant().unwrap()).norm() < 1e-8 * c0.norm());
    }

    #[test]
    fn tail_fit_window_stability() {
        let cfg = FockOracleConfig::default();
        let a = fock_tail_fit(2, 15.0, 45.0, 31, &cfg).unwrap();
        let b = fock_tail_fit(2, 45.0, 80.0, 36, &cfg).unwrap();
        let rel = (a.coeffs[0] - b.coeffs[0]).norm() / b.coeffs[0].norm();
        assert!(rel < 5e-4, "{rel}");
        let res: Vec<f64> = (0..=3)
            .map(|n| fock_tail_fit(n, 15.0, 80.0, 66, &cfg).unwrap().residual)
            .collect();
        assert!(res.windows(2).all(|w| w[1] < w[0]), "{res:?}");
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = FockContour::near();
        c.dir_out = C::from_polar(1.0, 1.2);
        assert!(FockOracleConfig::with_contour(c).validate().is_err());
        assert!(fock_psi(0.0, 5, &FockOracleConfig::default()).is_err());
    }
}
