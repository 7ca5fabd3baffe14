//! Emulators of the envelope `V_κ = κ^{-1} φ e^{-iκ γ·d̂}`: a generic one
//! in a κ-dependent smoothness class, and one assembled from the
//! asymptotic expansion in derivatives of Fock's integral.

use super::{
    best_class, cert_grid, cheb_derivative, check_eps, fock_oracle, pick_order, par_map, periodic_emulator, scale_complex,
    scale_real, sup_dev, EmulatorReport, LedgerEntry, CERT_POINTS,
};
use crate::blocks::{uniform_grid, MAX_ESCALATIONS};
use crate::calculus::{composition_budget, multiply_compose_complex, CompositionBounds};
use crate::chain::{Chain, Row};
use crate::cheb::{clenshaw, ChebSeries, SmoothClass};
use crate::error::{invalid, Error, Result};
use crate::network::{ComplexNet, ReluNetwork};
use crate::scattering::TraceGrid;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

type C = Complex64;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ComplexFn = Arc<dyn Fn(f64) -> C + Send + Sync>;
/// `(s, κ) ↦ R_{L,M,κ}(s)`.
pub type RemainderFn = Arc<dyn Fn(f64, f64) -> C + Send + Sync>;

/// Samples of `V_κ` on `[0, 2π]`: a pointwise oracle or a periodic grid.
#[derive(Clone)]
pub enum VSource {
    Oracle(ComplexFn),
    Grid(TraceGrid),
}

impl fmt::Debug for VSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VSource::Oracle(_) => f.write_str("VSource::Oracle"),
            VSource::Grid(g) => write!(f, "VSource::Grid({} samples)", g.len()),
        }
    }
}

impl VSource {
    pub fn oracle(f: impl Fn(f64) -> C + Send + Sync + 'static) -> Self {
        VSource::Oracle(Arc::new(f))
    }

    pub fn eval(&self, s: f64) -> C {
        match self {
            VSource::Oracle(f) => f(s),
            VSource::Grid(g) => g.interpolate(s),
        }
    }

    fn check_resolution(&self, kappa: f64) -> Result<()> {
        match self {
            VSource::Grid(g) if (g.len() as f64) < 8.0 * kappa => {
                invalid(format!("{} samples do not resolve κ = {kappa} (need ≥ {})", g.len(), 8.0 * kappa))
            }
            _ => Ok(()),
        }
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return invalid(format!("wavenumber {kappa} must be positive"));
    }
    Ok(())
}

fn check_smoothness(n: usize) -> Result<u32> {
    if !(2..=8).contains(&n) {
        return invalid(format!("smoothness order {n} outside 2..=8"));
    }
    Ok(n as u32)
}

/// Class `λ_j = C (1 + κ)^{max(j-1, 0)/3}` with `C` measured from the
/// interpolant's derivatives and inflated by 1.5.
fn kappa_class(series: &ChebSeries, kappa: f64, k: u32) -> Result<SmoothClass> {
    let h = series.halfwidth;
    let ys = uniform_grid(-1.0, 1.0, 4001);
    let mut coeffs = series.coeffs.clone();
    let mut c = 0.0f64;
    for j in 0..=(k as usize + 1) {
        let sup = ys.iter().map(|&y| clenshaw(&coeffs, y).norm()).fold(0.0, f64::max) / h.powi(j as i32);
        c = c.max(sup / (1.0 + kappa).powf(j.saturating_sub(1) as f64 / 3.0));
        coeffs = cheb_derivative(&coeffs);
    }
    let c = (1.5 * c).max(1e-12);
    let lambda = (0..=(k as usize + 1))
        .map(|j| c * (1.0 + kappa).powf(j.saturating_sub(1) as f64 / 3.0))
        .collect();
    SmoothClass::new(lambda, h, true)
}

/// Network for `s ↦ V_κ(s)` on `[0, 2π]` in the class of functions with
/// `‖V^{(j)}‖ ≤ C (1 + κ)^{(j-1)/3}`, certified against the source.
pub fn build_v_emulator_generic(v: &VSource, kappa: f64, n: usize, eps: f64) -> Result<(ComplexNet, EmulatorReport)> {
    check_eps(eps)?;
    check_kappa(kappa)?;
    let k = check_smoothness(n)?;
    v.check_resolution(kappa)?;
    let grid = cert_grid(&[0.0, 2.0 * PI], CERT_POINTS);
    let want = par_map(&grid, |s| v.eval(s));
    let mut best = f64::INFINITY;
    let mut constant = 0.0;
    let mut used = k;
    for j in 0..=MAX_ESCALATIONS {
        let tight = eps * 0.25f64.powi(j as i32);
        let (net, series) = periodic_emulator(|s| v.eval(s), tight, |s| {
            let full = kappa_class(s, kappa, 8)?;
            constant = full.lambda[0];
            let (cl, order) = pick_order(&full, k, tight / 2.0)?;
            used = order;
            Ok((cl, order))
        })?;
        let net = net.into_complex();
        let achieved = sup_dev(&net, &grid, &want);
        if achieved <= eps {
            let mut r = EmulatorReport::new("v-generic", kappa, eps, net.stats());
            r.achieved = achieved;
            r.certified = true;
            r.grid_points = grid.len();
            r.ledger = vec![
                LedgerEntry::new("interpolation", tight / 64.0, None),
                LedgerEntry::new("chebyshev emulation", eps - tight / 64.0, Some(achieved)),
            ];
            for (key, val) in [
                ("n", n as f64),
                ("class_constant", constant),
                ("order_used", used as f64),
                ("degree", series.degree() as f64),
                ("escalations", j as f64),
            ] {
                r.params.insert(key.into(), val);
            }
            return Ok((net, r));
        }
        best = best.min(achieved);
    }
    Err(Error::Certification {
        stage: "v generic".into(),
        achieved: best,
        target: eps,
    })
}

/// Truncated asymptotic expansion
/// `V_κ(s) = Σ_{ℓ≤L, m≤M} κ^{-1/3-2ℓ/3-m} b_{ℓ,m}(s) Ψ^{(ℓ)}(κ^{1/3} Z(s)) + R(s)`.
#[derive(Clone)]
pub struct ExpansionSpec {
    pub l: usize,
    pub m: usize,
    /// `b[ℓ][m]`, smooth and 2π-periodic.
    pub b: Vec<Vec<ComplexFn>>,
    /// Real and 2π-periodic, positive on `(t₁, t₂)` and negative on the
    /// complement.
    pub z: RealFn,
    pub remainder: Option<RemainderFn>,
}

impl fmt::Debug for ExpansionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpansionSpec")
            .field("l", &self.l)
            .field("m", &self.m)
            .field("remainder", &self.remainder.is_some())
            .finish()
    }
}

/// Grid on which the sign pattern and the sup-bounds are checked.
const SPEC_GRID: usize = 4096;

impl ExpansionSpec {
    pub fn new(l: usize, m: usize, b: Vec<Vec<ComplexFn>>, z: RealFn) -> Result<Self> {
        if l > crate::special::MAX_DERIVATIVE {
            return invalid(format!("expansion order L = {l} exceeds {}", crate::special::MAX_DERIVATIVE));
        }
        if b.len() != l + 1 || b.iter().any(|row| row.len() != m + 1) {
            return invalid(format!("coefficient table must be {} × {}", l + 1, m + 1));
        }
        let spec = Self {
            l,
            m,
            b,
            z,
            remainder: None,
        };
        spec.zeros()?;
        for (li, row) in spec.b.iter().enumerate() {
            for (mi, _) in row.iter().enumerate() {
                let sup = spec.b_sup(li, mi);
                if !sup.is_finite() {
                    return invalid(format!("coefficient b[{li}][{mi}] is unbounded on the grid"));
                }
            }
        }
        Ok(spec)
    }

    pub fn with_remainder(mut self, r: RemainderFn) -> Self {
        self.remainder = Some(r);
        self
    }

    /// `μ = -min{2(L+1)/3, M+1}`, the order of the remainder in `κ`.
    pub fn mu(&self) -> f64 {
        -(2.0 * (self.l as f64 + 1.0) / 3.0).min(self.m as f64 + 1.0)
    }

    /// `κ^{-1/3-2ℓ/3-m}`.
    pub fn coefficient(&self, kappa: f64, l: usize, m: usize) -> f64 {
        kappa.powf(-1.0 / 3.0 - 2.0 * l as f64 / 3.0 - m as f64)
    }

    fn spec_grid() -> Vec<f64> {
        (0..SPEC_GRID).map(|i| 2.0 * PI * i as f64 / SPEC_GRID as f64).collect()
    }

    /// The parameters `(t₁, t₂)` where `Z` turns positive and negative,
    /// located on the grid and refined by bisection. Fails unless `Z`
    /// changes sign exactly twice.
    pub fn zeros(&self) -> Result<(f64, f64)> {
        let s = Self::spec_grid();
        let pos: Vec<bool> = s.iter().map(|&t| (self.z)(t) > 0.0).collect();
        let mut up = Vec::new();
        let mut down = Vec::new();
        for i in 0..s.len() {
            let j = (i + 1) % s.len();
            if pos[i] != pos[j] {
                let hi = if j == 0 { 2.0 * PI } else { s[j] };
                let t = self.bisect(s[i], hi, pos[i]);
                if pos[j] {
                    up.push(t);
                } else {
                    down.push(t);
                }
            }
        }
        if up.len() != 1 || down.len() != 1 {
            return invalid(format!(
                "phase must change sign exactly twice, found {} crossings",
                up.len() + down.len()
            ));
        }
        Ok((up[0] % (2.0 * PI), down[0] % (2.0 * PI)))
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, lo_pos: bool) -> f64 {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ((self.z)(mid) > 0.0) == lo_pos {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn z_sup(&self) -> f64 {
        Self::spec_grid().iter().map(|&t| (self.z)(t).abs()).fold(0.0, f64::max)
    }

    fn b_sup(&self, l: usize, m: usize) -> f64 {
        Self::spec_grid().iter().map(|&t| (self.b[l][m])(t).norm()).fold(0.0, f64::max)
    }

    /// Term `(ℓ, m)` of the expansion at the points `s`.
    pub fn term(&self, kappa: f64, l: usize, m: usize, s: &[f64]) -> Result<Vec<C>> {
        let k3 = kappa.cbrt();
        let taus: Vec<f64> = s.iter().map(|&t| k3 * (self.z)(t)).collect();
        let psi = fock_oracle(&taus, l)?;
        let c = self.coefficient(kappa, l, m);
        Ok(s.iter().zip(psi).map(|(&t, p)| (self.b[l][m])(t) * p * c).collect())
    }

    /// The expansion plus the remainder (when given) at the points `s`.
    pub fn manufactured(&self, kappa: f64, s: &[f64]) -> Result<Vec<C>> {
        let mut out = match &self.remainder {
            Some(r) => s.iter().map(|&t| r(t, kappa)).collect(),
            None => vec![C::new(0.0, 0.0); s.len()],
        };
        for l in 0..=self.l {
            for m in 0..=self.m {
                for (o, v) in out.iter_mut().zip(self.term(kappa, l, m, s)?) {
                    *o += v;
                }
            }
        }
        Ok(out)
    }
}

/// Sup of `|Ψ^{(ℓ)}|` and of its difference quotients on `[-h, h]`.
fn fock_bounds(l: usize, h: f64) -> Result<(f64, f64)> {
    let xs = uniform_grid(-h, h, 4097);
    let v = fock_oracle(&xs, l)?;
    let sup = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dx = xs[1] - xs[0];
    let slope = v.windows(2).map(|w| (w[1] - w[0]).norm() / dx).fold(0.0, f64::max);
    Ok((1.1 * sup, 1.25 * slope + 1.0))
}

/// `s ↦ κ^{1/3} Z(s)` within `acc`.
fn phase_net(z: &RealFn, kappa: f64, acc: f64) -> Result<ReluNetwork> {
    let k3 = kappa.cbrt();
    let zf = z.clone();
    let (net, _) = periodic_emulator(move |s| C::new(zf(s), 0.0), acc / k3, |s| best_class(s, false, acc / k3 / 2.0))?;
    scale_real(net.net().clone(), k3)
}

/// Sums complex networks of one input: `s` and the running sum are
/// carried through each term.
fn sum_terms(terms: &[ComplexNet]) -> Result<ComplexNet> {
    let mut ch = Chain::new(1);
    for (i, t) in terms.iter().enumerate() {
        if i == 0 {
            // [tr, ti, s]
            ch = ch.stage(t.net(), &[0], &[0])?.linear(&[Row::coord(2), Row::coord(0), Row::coord(1)])?;
        } else {
            // [tr, ti, s, ar, ai]
            ch = ch.stage(t.net(), &[0], &[0, 1, 2])?.linear(&[
                Row::coord(2),
                Row::new(vec![(0, 1.0), (3, 1.0)], 0.0),
                Row::new(vec![(1, 1.0), (4, 1.0)], 0.0),
            ])?;
        }
    }
    ComplexNet::new(ch.select(&[1, 2])?.finish()?)
}

struct TermStage {
    l: usize,
    m: usize,
    budget: f64,
    net: ComplexNet,
    fock: EmulatorReport,
}

/// Network for the expansion of `V_κ`: each term is `α · (ω ∘ β)` with `α`
/// the scaled coefficient emulator, `ω` the Fock emulator of `Ψ^{(ℓ)}` on
/// `(-2κ^{1/3}‖Z‖, 2κ^{1/3}‖Z‖)` and `β = κ^{1/3} Z`. Certified against the
/// expansion evaluated by oracles. Three quarters of the budget go to the
/// terms; the remaining quarter covers the remainder, emulated when an
/// oracle for it is supplied and otherwise left unmodelled.
pub fn build_v_emulator_asymptotic(
    spec: &ExpansionSpec,
    kappa: f64,
    n: usize,
    eps: f64,
) -> Result<(ComplexNet, EmulatorReport)> {
    check_eps(eps)?;
    check_kappa(kappa)?;
    check_smoothness(n)?;
    let (t1, t2) = spec.zeros()?;
    let nf = n.clamp(2, 4);
    let z_sup = spec.z_sup();
    let a = 2.0 * z_sup;
    let k3 = kappa.cbrt();
    let h = k3 * a;
    let count = (spec.l + 1) * (spec.m + 1);
    let mut breaks = vec![0.0, t1.min(t2), t1.max(t2), 2.0 * PI];
    breaks.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    let grid = cert_grid(&breaks, CERT_POINTS);
    let want = spec.manufactured(kappa, &grid)?;
    let fock_sup: Vec<(f64, f64)> = (0..=spec.l).map(|l| fock_bounds(l, h)).collect::<Result<_>>()?;
    let mut best = f64::INFINITY;
    for esc in 0..=MAX_ESCALATIONS {
        let tight = 0.25f64.powi(esc as i32);
        let term_budget = 0.75 * eps * tight / count as f64;
        let phase_acc = (0..=spec.l)
            .flat_map(|l| (0..=spec.m).map(move |m| (l, m)))
            .map(|(l, m)| {
                let b = term_bounds(spec, kappa, l, m, &fock_sup, k3 * z_sup, h);
                composition_budget(&b, term_budget, true).beta
            })
            .fold(f64::INFINITY, f64::min);
        let beta = phase_net(&spec.z, kappa, phase_acc.min(0.25))?;
        let mut stages = Vec::new();
        for l in 0..=spec.l {
            for m in 0..=spec.m {
                let bounds = term_bounds(spec, kappa, l, m, &fock_sup, k3 * z_sup, h);
                let bud = composition_budget(&bounds, term_budget, true);
                let c = spec.coefficient(kappa, l, m);
                let bf = spec.b[l][m].clone();
                let alpha_acc = (bud.alpha / c).min(0.25);
                let (alpha, _) = periodic_emulator(move |s| bf(s), alpha_acc, |s| best_class(s, true, alpha_acc / 2.0))?;
                let alpha = scale_complex(alpha.into_complex(), c)?;
                let fock_eps = bud.omega.min(0.25);
                let floor = super::fock_kappa_floor(nf, l, fock_eps, a)?;
                if kappa <= floor {
                    return invalid(format!("wavenumber {kappa} is below the floor {floor:.3} of term ({l}, {m})"));
                }
                let (omega, fock) = super::build_fock_emulator(kappa, nf, l, fock_eps, a)?;
                let net = multiply_compose_complex(&alpha, &omega, &beta, &bounds, term_budget)?;
                stages.push(TermStage {
                    l,
                    m,
                    budget: term_budget,
                    net,
                    fock,
                });
            }
        }
        let mut nets: Vec<ComplexNet> = stages.iter().map(|t| t.net.clone()).collect();
        let rem_budget = 0.25 * eps * tight;
        let mut rem_achieved = None;
        if let Some(r) = &spec.remainder {
            let rf = r.clone();
            let (rn, _) = periodic_emulator(move |s| rf(s, kappa), rem_budget, |s| best_class(s, true, rem_budget / 2.0))?;
            let rn = rn.into_complex();
            let rw: Vec<C> = grid.iter().map(|&s| r(s, kappa)).collect();
            rem_achieved = Some(sup_dev(&rn, &grid, &rw));
            nets.push(rn);
        }
        let net = sum_terms(&nets)?;
        let achieved = sup_dev(&net, &grid, &want);
        if achieved <= eps {
            let mut rep = EmulatorReport::new("v-asymptotic", kappa, eps, net.stats());
            rep.achieved = achieved;
            rep.certified = true;
            rep.grid_points = grid.len();
            for t in &stages {
                let tw = spec.term(kappa, t.l, t.m, &grid)?;
                rep.ledger.push(LedgerEntry::new(
                    format!("term ({}, {})", t.l, t.m),
                    t.budget,
                    Some(sup_dev(&t.net, &grid, &tw)),
                ));
            }
            let stage = if spec.remainder.is_some() {
                "remainder"
            } else {
                "remainder (unmodelled)"
            };
            rep.ledger.push(LedgerEntry::new(stage, rem_budget, rem_achieved));
            for (key, val) in [
                ("L", spec.l as f64),
                ("M", spec.m as f64),
                ("n", n as f64),
                ("mu", spec.mu()),
                ("t1", t1),
                ("t2", t2),
                ("A", a),
                ("fock_depth_max", stages.iter().map(|t| t.fock.stats.depth as f64).fold(0.0, f64::max)),
                ("phase_depth", beta.depth() as f64),
                ("escalations", esc as f64),
            ] {
                rep.params.insert(key.into(), val);
            }
            return Ok((net, rep));
        }
        best = best.min(achieved);
    }
    Err(Error::Certification {
        stage: "v asymptotic".into(),
        achieved: best,
        target: eps,
    })
}

fn term_bounds(
    spec: &ExpansionSpec,
    kappa: f64,
    l: usize,
    m: usize,
    fock_sup: &[(f64, f64)],
    beta: f64,
    h: f64,
) -> CompositionBounds {
    let c = spec.coefficient(kappa, l, m);
    CompositionBounds {
        alpha: (c * spec.b_sup(l, m)).max(1e-12),
        beta,
        omega: fock_sup[l].0,
        omega_prime: fock_sup[l].1,
        omega_domain: h,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_spec() -> ExpansionSpec {
        ExpansionSpec::new(0, 0, vec![vec![Arc::new(|_| C::new(1.0, 0.0))]], Arc::new(f64::sin)).unwrap()
    }

    #[test]
    fn sign_pattern() {
        let (t1, t2) = sin_spec().zeros().unwrap();
        assert!(t1.min(2.0 * PI - t1) < 1e-9, "{t1}");
        assert!((t2 - PI).abs() < 1e-9);
        let bad = ExpansionSpec::new(0, 0, vec![vec![Arc::new(|_| C::new(1.0, 0.0))]], Arc::new(|s: f64| (2.0 * s).sin()));
        assert!(bad.is_err());
        assert_eq!(sin_spec().mu(), -2.0 / 3.0);
    }

    #[test]
    fn generic_constant() {
        let v = VSource::oracle(|_| C::new(1.0, 0.0));
        let (net, r) = build_v_emulator_generic(&v, 16.0, 2, 1e-2).unwrap();
        assert!(r.certified && r.achieved <= 1e-2);
        assert!(net.stats().width <= 15);
    }

    #[test]
    fn generic_rejects_coarse_grid() {
        let g = TraceGrid::sample(64, |_| C::new(1.0, 0.0)).unwrap();
        assert!(build_v_emulator_generic(&VSource::Grid(g), 16.0, 2, 1e-2).is_err());
    }
}
