//! The phase `s ↦ γ(s)·d̂`, the oscillation `x ↦ κ e^{iκx}` and the full
//! Neumann trace `φ̂_κ(s) = V_κ(s) · κ e^{iκ γ(s)·d̂}`.

use super::{
    build_v_emulator_asymptotic, build_v_emulator_generic, cert_grid, check_eps, measured_class, par_map, pick_order,
    periodic_emulator, scale_complex, EmulatorReport, ExpansionSpec, LedgerEntry, VSource, CERT_POINTS,
};
use crate::blocks::{build_trig, uniform_grid, Trig, MAX_ESCALATIONS};
use crate::calculus::{composition_budget, multiply_compose_complex, CompositionBounds};
use crate::error::{invalid, Error, Result};
use crate::network::{parallel, ComplexNet, ReluNetwork, Wiring};
use crate::scattering::{cfie_assemble, cfie_solve, far_field, BoundaryCurve, MieDisk, ScatterConfig, TraceGrid};
use num_complex::Complex64;
use std::f64::consts::PI;

type C = Complex64;

fn sup_real(net: &ReluNetwork, xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let out = net.compile().eval_scalar(xs);
    xs.iter().zip(out).map(|(&x, y)| (y - f(x)).abs()).fold(0.0, f64::max)
}

/// Network for `s ↦ γ(s)·d̂` on `[0, 2π]` with sup error at most `eps`.
pub fn build_phase_emulator(curve: &BoundaryCurve, d: [f64; 2], n: usize, eps: f64) -> Result<ReluNetwork> {
    check_eps(eps)?;
    curve.validate()?;
    if !(2..=8).contains(&n) {
        return invalid(format!("smoothness order {n} outside 2..=8"));
    }
    let f = |s: f64| {
        let p = curve.point(s);
        p[0] * d[0] + p[1] * d[1]
    };
    let k = n as u32;
    let xs = uniform_grid(0.0, 2.0 * PI, CERT_POINTS);
    let mut best = f64::INFINITY;
    for j in 0..=MAX_ESCALATIONS {
        let tight = eps * 0.25f64.powi(j as i32);
        let (net, _) = periodic_emulator(|s| C::new(f(s), 0.0), tight, |s| pick_order(&measured_class(s, 8, false)?, k, tight / 2.0))?;
        let net = net.net().clone();
        let err = sup_real(&net, &xs, f);
        if err <= eps {
            return Ok(net);
        }
        best = best.min(err);
    }
    Err(Error::Certification {
        stage: "phase".into(),
        achieved: best,
        target: eps,
    })
}

/// Network for `x ↦ κ e^{iκx}` on `(-B, B)` with sup error at most `eps`:
/// cosine and sine blocks of frequency `κ`, scaled by `κ`.
pub fn oscillation_factor(kappa: f64, eps: f64, b: f64) -> Result<ComplexNet> {
    check_eps(eps)?;
    if !(kappa > 0.0 && kappa.is_finite() && b > 0.0 && b.is_finite()) {
        return invalid(format!("oscillation needs κ > 0 and B > 0, got κ = {kappa}, B = {b}"));
    }
    let xs = uniform_grid(-b, b, CERT_POINTS.max((16.0 * kappa * b) as usize));
    let mut best = f64::INFINITY;
    for j in 0..=MAX_ESCALATIONS {
        let acc = (eps / (2.0 * kappa) * 0.25f64.powi(j as i32)).min(0.25);
        let cos = build_trig(Trig::Cos, kappa, b, acc)?;
        let sin = build_trig(Trig::Sin, kappa, b, acc)?;
        let pair = ComplexNet::new(parallel(1, &[&cos, &sin], &Wiring::shared(2, 1))?)?;
        let net = scale_complex(pair, kappa)?;
        let err = net
            .eval_many(&xs)
            .iter()
            .zip(&xs)
            .map(|(y, &x)| (y - C::from_polar(kappa, kappa * x)).norm())
            .fold(0.0, f64::max);
        if err <= eps {
            return Ok(net);
        }
        best = best.min(err);
    }
    Err(Error::Certification {
        stage: "oscillation".into(),
        achieved: best,
        target: eps,
    })
}

/// Where the envelope `V_κ` comes from.
#[derive(Clone, Debug)]
pub enum TraceVSource {
    /// Samples of `V_κ`, emulated in the κ-dependent smoothness class.
    Generic(VSource),
    /// The asymptotic expansion, emulated term by term.
    Asymptotic(ExpansionSpec),
}

/// A certified trace network with its consistency checks.
#[derive(Clone, Debug)]
pub struct TraceEmulator {
    pub net: ComplexNet,
    pub report: EmulatorReport,
    pub v_report: EmulatorReport,
    /// Sup over 64 directions of the far-field difference to the reference.
    pub far_field_gap: f64,
    /// `2π ‖γ'‖∞ ε`.
    pub far_field_bound: f64,
    /// CFIE residual of the network and of the zero candidate.
    pub residual: f64,
    pub residual_zero: f64,
}

fn nodes(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// Reference trace `φ̂_κ` as a function of the parameter.
enum Reference {
    Mie(MieDisk),
    Grid(TraceGrid),
    Expansion(Box<ExpansionSpec>),
}

impl Reference {
    fn eval(&self, s: &[f64], curve: &BoundaryCurve, cfg: &ScatterConfig) -> Result<Vec<C>> {
        Ok(match self {
            Reference::Mie(m) => par_map(s, |t| m.trace(t)),
            Reference::Grid(g) => par_map(s, |t| g.interpolate(t)),
            Reference::Expansion(spec) => spec
                .manufactured(cfg.kappa, s)?
                .into_iter()
                .zip(s)
                .map(|(v, &t)| v * C::from_polar(cfg.kappa, cfg.kappa * cfg.phase(curve, t)))
                .collect(),
        })
    }
}

/// Nodes of the reference Nyström discretization, `max(64, 16κ)` rounded
/// up to even.
fn reference_nodes(kappa: f64) -> usize {
    let n = (16.0 * kappa).ceil().max(64.0) as usize;
    n + n % 2
}

/// Network for the Neumann trace on `[0, 2π]`: `V · (g_κ ∘ Φ)` with `V`
/// from the source, `g_κ(x) = κ e^{iκx}` on `(-2‖γ‖, 2‖γ‖)` and `Φ` the
/// phase network. Certified against the Mie series on circles and the
/// Nyström solution otherwise (the expansion itself for asymptotic
/// sources), then checked through the far field and the CFIE residual.
pub fn build_trace_emulator(
    curve: &BoundaryCurve,
    cfg: &ScatterConfig,
    source: &TraceVSource,
    n: usize,
    eps: f64,
) -> Result<TraceEmulator> {
    check_eps(eps)?;
    curve.validate()?;
    cfg.validate()?;
    let kappa = cfg.kappa;
    let big_n = reference_nodes(kappa);
    let reference = match source {
        TraceVSource::Asymptotic(spec) => Reference::Expansion(Box::new(spec.clone())),
        TraceVSource::Generic(_) => match curve {
            BoundaryCurve::Circle { .. } => Reference::Mie(MieDisk::from_config(curve, cfg)?),
            _ => Reference::Grid(cfie_solve(curve, cfg, big_n)?),
        },
    };
    let grid = cert_grid(&[0.0, 2.0 * PI], CERT_POINTS);
    let want = reference.eval(&grid, curve, cfg)?;
    let v_sup = 1.1
        * match source {
            TraceVSource::Generic(v) => grid.iter().map(|&s| v.eval(s).norm()).fold(0.0, f64::max),
            TraceVSource::Asymptotic(spec) => spec
                .manufactured(kappa, &grid)?
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max),
        };
    let phase_sup = grid.iter().map(|&s| cfg.phase(curve, s).abs()).fold(0.0, f64::max);
    let bounds = CompositionBounds {
        alpha: v_sup.max(1e-12),
        beta: phase_sup.max(1e-12),
        omega: kappa,
        omega_prime: kappa * kappa,
        omega_domain: 2.0 * curve.max_norm(),
    };
    let mut best = f64::INFINITY;
    for j in 0..=MAX_ESCALATIONS {
        let tight = eps * 0.25f64.powi(j as i32);
        let bud = composition_budget(&bounds, tight, true);
        let (v_net, v_report) = match source {
            TraceVSource::Generic(v) => build_v_emulator_generic(v, kappa, n, bud.alpha.min(0.25))?,
            TraceVSource::Asymptotic(spec) => build_v_emulator_asymptotic(spec, kappa, n, bud.alpha.min(0.25))?,
        };
        let g = oscillation_factor(kappa, bud.omega.min(0.25), bounds.omega_domain)?;
        let phase = build_phase_emulator(curve, cfg.direction, n, bud.beta.min(0.25))?;
        let net = multiply_compose_complex(&v_net, &g, &phase, &bounds, tight)?;
        let achieved = super::sup_dev(&net, &grid, &want);
        if achieved > eps {
            best = best.min(achieved);
            continue;
        }
        let mut report = EmulatorReport::new("trace", kappa, eps, net.stats());
        report.achieved = achieved;
        report.certified = true;
        report.grid_points = grid.len();
        let e_v = v_report.achieved;
        let e_phase = sup_real(&phase, &grid, |s| cfg.phase(curve, s));
        report.ledger = vec![
            LedgerEntry::new("envelope", tight / 6.0, Some(e_v * kappa)),
            LedgerEntry::new("phase", tight / 3.0, Some(e_phase * 2.0 * v_sup * kappa * kappa)),
            LedgerEntry::new("oscillation", tight / 3.0, None),
            LedgerEntry::new("products", tight / 6.0, None),
        ];
        for (key, val) in [
            ("n", n as f64),
            ("log_kappa", kappa.ln()),
            ("v_sup", v_sup),
            ("v_error", e_v),
            ("phase_error", e_phase),
            ("v_depth", v_report.stats.depth as f64),
            ("phase_depth", phase.depth() as f64),
            ("oscillation_depth", g.stats().depth as f64),
            ("reference_nodes", big_n as f64),
            ("escalations", j as f64),
        ] {
            report.params.insert(key.into(), val);
        }
        report
            .notes
            .push(format!("smoothness order n = {n} against log κ = {:.3}", kappa.ln()));

        let s = nodes(big_n);
        let emulated = TraceGrid::new(net.eval_many(&s))?;
        let exact = TraceGrid::new(reference.eval(&s, curve, cfg)?)?;
        let thetas = nodes(64);
        let far_field_gap = far_field(&emulated, curve, cfg, &thetas).sup_diff(&far_field(&exact, curve, cfg, &thetas));
        let far_field_bound = 2.0 * PI * curve.max_speed() * eps;
        let sys = cfie_assemble(curve, cfg, big_n)?;
        let residual = sys.residual_loss(&emulated.values);
        let residual_zero = sys.residual_loss(&vec![C::new(0.0, 0.0); big_n]);
        report.params.insert("far_field_gap".into(), far_field_gap);
        report.params.insert("far_field_bound".into(), far_field_bound);
        report.params.insert("residual".into(), residual);
        report.params.insert("residual_zero".into(), residual_zero);
        return Ok(TraceEmulator {
            net,
            report,
            v_report,
            far_field_gap,
            far_field_bound,
            residual,
            residual_zero,
        });
    }
    Err(Error::Certification {
        stage: "trace".into(),
        achieved: best,
        target: eps,
    })
}
