//! Acceptance criteria. Each criterion produces a deterministic result;
//! wall-clock times are reported separately against per-criterion budgets.

use super::sweep::{log_power, parallel_rows, P_MIN};
use super::{
    build_summary, clear_summaries, compare_models, eps_exponent, fit_power, known_summaries, measure_error, remember,
    BuildSpec, BuildSummary, Builder,
};
use crate::blocks::{sinc_error, sinc_rule};
use crate::emulate::{build_trace_emulator, TraceVSource, VSource};
use crate::error::{invalid, Result};
use crate::format;
use crate::network::EmulatorNet;
use crate::scattering::{cfie_solve, coercivity_probe, far_field, BoundaryCurve, MieDisk, ScatterConfig};
use crate::special::{airy_rightmost_root, fock_psi, fock_tail_fit, linear_fit, FockContour, FockOracleConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::time::Instant;

pub const ALL_CRITERIA: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];
pub const QUICK_CRITERIA: [u32; 7] = [1, 2, 3, 5, 6, 7, 11];

const BLOCK_EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
const SHAPE_EPS: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
const SWEEP_KAPPAS: [f64; 5] = [32.0, 64.0, 128.0, 256.0, 512.0];
const PROBE_KAPPAS: [f64; 5] = [16.0, 32.0, 64.0, 128.0, 256.0];
const BLOCKS: [Builder; 7] = [
    Builder::Square,
    Builder::Multiply,
    Builder::ExpDecay,
    Builder::Cos,
    Builder::Sin,
    Builder::Reciprocal,
    Builder::ReciprocalPower,
];

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub details: Value,
}

/// Wall-clock time of one criterion against its budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriterionTiming {
    pub id: u32,
    pub seconds: f64,
    /// `None` when the criterion has no time limit.
    pub budget: Option<f64>,
}

impl CriterionTiming {
    pub fn within_budget(&self) -> bool {
        self.budget.map_or(true, |b| self.seconds <= b)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub quick: bool,
    pub jobs: usize,
    /// Criteria to run; empty selects all (or the quick subset).
    pub only: Vec<u32>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 7,
            quick: false,
            jobs: 1,
            only: Vec::new(),
        }
    }
}

/// Deterministic part of a verification run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub quick: bool,
    pub results: Vec<CriterionResult>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One line per criterion: status, id, name and summary.
pub fn report_lines(report: &VerifyReport, timings: &[CriterionTiming]) -> Vec<String> {
    report
        .results
        .iter()
        .map(|r| {
            let t = timings.iter().find(|t| t.id == r.id);
            let in_time = t.map_or(true, |t| t.within_budget());
            let status = if r.passed && in_time { "PASS" } else { "FAIL" };
            let time = t.map_or(String::new(), |t| match t.budget {
                Some(b) => format!(" [{:.1} s / {b:.0} s]", t.seconds),
                None => format!(" [{:.1} s]", t.seconds),
            });
            format!("{status} criterion {:>2} {}: {}{time}", r.id, r.name, r.summary)
        })
        .collect()
}

/// Whether every result passed within its time budget.
pub fn all_passed(report: &VerifyReport, timings: &[CriterionTiming]) -> bool {
    report.results.iter().all(|r| r.passed) && timings.iter().all(|t| t.within_budget())
}

fn name(id: u32) -> &'static str {
    match id {
        1 => "elementary block certification",
        2 => "width and weight ceilings",
        3 => "sinc quadrature decay",
        4 => "depth against accuracy",
        5 => "integral equation against series solution",
        6 => "boundedness of the envelope",
        7 => "Fock integral oracle",
        8 => "wavenumber robustness",
        9 => "end-to-end trace emulation",
        10 => "operator probes",
        11 => "determinism and serialization",
        _ => "unknown",
    }
}

fn budget(id: u32) -> Option<f64> {
    match id {
        1 => Some(60.0),
        4 => Some(300.0),
        5 => Some(120.0),
        6 => Some(180.0),
        7 => Some(120.0),
        8 => Some(1800.0),
        9 => Some(1200.0),
        10 => Some(300.0),
        _ => None,
    }
}

type Check = (bool, String, Value);

/// Runs the selected criteria. Criterion 2 inspects every build made by the
/// others, so it runs after them; results are sorted by id.
pub fn run_criteria(opts: &VerifyOptions) -> (VerifyReport, Vec<CriterionTiming>) {
    let mut ids: Vec<u32> = if !opts.only.is_empty() {
        opts.only.clone()
    } else if opts.quick {
        QUICK_CRITERIA.to_vec()
    } else {
        ALL_CRITERIA.to_vec()
    };
    ids.sort_unstable();
    ids.dedup();
    let order: Vec<u32> = ids
        .iter()
        .copied()
        .filter(|&i| i != 2 && i != 11)
        .chain(ids.iter().copied().filter(|&i| i == 2 || i == 11))
        .collect();
    let mut results = Vec::new();
    let mut timings = Vec::new();
    for id in order {
        let t = Instant::now();
        results.push(run_criterion(id, opts));
        timings.push(CriterionTiming {
            id,
            seconds: t.elapsed().as_secs_f64(),
            budget: budget(id),
        });
    }
    results.sort_by_key(|r| r.id);
    timings.sort_by_key(|t| t.id);
    (
        VerifyReport {
            seed: opts.seed,
            quick: opts.quick,
            results,
        },
        timings,
    )
}

/// Runs one criterion; an error inside it is a failure.
pub fn run_criterion(id: u32, opts: &VerifyOptions) -> CriterionResult {
    let out: Result<Check> = match id {
        1 => blocks(opts),
        2 => ceilings(opts),
        3 => sinc(),
        4 => depth_shapes(opts),
        5 => cfie_vs_mie(),
        6 => envelope_bound(),
        7 => fock_oracle(),
        8 => robustness(opts),
        9 => trace(),
        10 => probes(opts),
        11 => determinism(opts),
        _ => invalid(format!("no criterion {id}")),
    };
    let (passed, summary, details) = out.unwrap_or_else(|e| (false, format!("error: {e}"), Value::Null));
    CriterionResult {
        id,
        name: name(id).to_string(),
        passed,
        summary,
        details,
    }
}

fn summaries(specs: &[BuildSpec], jobs: usize) -> Result<Vec<BuildSummary>> {
    parallel_rows(specs, jobs, build_summary).into_iter().collect()
}

fn blocks(opts: &VerifyOptions) -> Result<Check> {
    let specs: Vec<BuildSpec> = BLOCKS
        .iter()
        .flat_map(|&b| BLOCK_EPS.iter().map(move |&e| BuildSpec::new(b, e)))
        .collect();
    let s = summaries(&specs, opts.jobs)?;
    let failed: Vec<String> = s
        .iter()
        .filter(|s| !s.certified)
        .map(|s| format!("{} eps={:e} err={:.3e}", s.spec.builder.name(), s.spec.eps, s.achieved))
        .collect();
    let worst = s.iter().map(|s| s.achieved / s.spec.eps).fold(0.0, f64::max);
    let rows: Vec<Value> = s
        .iter()
        .map(|s| json!({"builder": s.spec.builder.name(), "eps": s.spec.eps, "sup_error": s.achieved, "depth": s.stats.depth}))
        .collect();
    Ok((
        failed.is_empty(),
        format!("{} builds, worst error/eps = {worst:.3}{}", s.len(), fail_note(&failed)),
        json!({"grid_points": super::BLOCK_GRID, "rows": rows}),
    ))
}

fn fail_note(failed: &[String]) -> String {
    if failed.is_empty() {
        String::new()
    } else {
        format!("; failing: {}", failed.join(", "))
    }
}

fn ceilings(opts: &VerifyOptions) -> Result<Check> {
    if !opts.quick {
        let spec = BuildSpec {
            n: 2,
            ..BuildSpec::new(Builder::VAsymptotic, 1e-1).with_kappa(128.0)
        };
        build_summary(&spec)?;
    }
    let mut all = known_summaries();
    if all.is_empty() {
        let specs: Vec<BuildSpec> = BLOCKS.iter().map(|&b| BuildSpec::new(b, 1e-2)).collect();
        all = summaries(&specs, opts.jobs)?;
    }
    all.sort_by(|a, b| serde_json::to_string(&a.spec).unwrap().cmp(&serde_json::to_string(&b.spec).unwrap()));
    let mut failed = Vec::new();
    let mut per_builder = serde_json::Map::new();
    for s in &all {
        let b = s.spec.builder;
        let ok_w = s.stats.width <= b.width_ceiling();
        let ok_b = !b.unit_weights() || s.stats.weight_bound <= 1.0;
        if !(ok_w && ok_b) {
            failed.push(format!(
                "{} kappa={} eps={:e}: width {} (max {}), B {:.3}",
                b.name(),
                s.spec.kappa,
                s.spec.eps,
                s.stats.width,
                b.width_ceiling(),
                s.stats.weight_bound
            ));
        }
        let e = per_builder.entry(b.name()).or_insert(json!({"ceiling": b.width_ceiling(), "max_width": 0, "max_b": 0.0, "count": 0}));
        e["max_width"] = json!(e["max_width"].as_u64().unwrap().max(s.stats.width as u64));
        e["max_b"] = json!(e["max_b"].as_f64().unwrap().max(s.stats.weight_bound));
        e["count"] = json!(e["count"].as_u64().unwrap() + 1);
    }
    let builders: Vec<&str> = per_builder.keys().map(|k| k.as_str()).collect();
    Ok((
        failed.is_empty(),
        format!("{} instances of {}{}", all.len(), builders.join("/"), fail_note(&failed)),
        Value::Object(per_builder),
    ))
}

fn sinc() -> Result<Check> {
    let ks = [4usize, 16, 64, 256];
    let errs: Vec<f64> = ks.iter().map(|&k| sinc_error(&sinc_rule(k), 1.0, 10.0, 10_000)).collect();
    let ln_c = ks
        .iter()
        .zip(&errs)
        .map(|(&k, e)| e.ln() + (k as f64).sqrt())
        .sum::<f64>()
        / ks.len() as f64;
    let res: Vec<f64> = ks
        .iter()
        .zip(&errs)
        .map(|(&k, e)| e.ln() - (ln_c - (k as f64).sqrt()))
        .collect();
    let worst = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
    Ok((
        worst <= 0.5,
        format!("C = {:.3}, max |log residual| = {worst:.3}", ln_c.exp()),
        json!({"k": ks, "error": errs, "log_residual": res, "c": ln_c.exp()}),
    ))
}

fn depth_shapes(opts: &VerifyOptions) -> Result<Check> {
    let builders = [Builder::Multiply, Builder::ExpDecay, Builder::Cos, Builder::Sin, Builder::Reciprocal];
    let specs: Vec<BuildSpec> = builders
        .iter()
        .flat_map(|&b| SHAPE_EPS.iter().map(move |&e| BuildSpec::new(b, e)))
        .collect();
    let s = summaries(&specs, opts.jobs)?;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut details = serde_json::Map::new();
    let mut parts = Vec::new();
    for (i, b) in builders.iter().enumerate() {
        let rows = &s[i * SHAPE_EPS.len()..(i + 1) * SHAPE_EPS.len()];
        let depth: Vec<f64> = rows.iter().map(|r| r.stats.depth as f64).collect();
        let m = log_power(*b);
        let p = eps_exponent(&SHAPE_EPS, &depth, m);
        worst = worst.max(p);
        parts.push(format!("{} {p:.3}", b.name()));
        details.insert(b.name().into(), json!({"log_power": m, "depth": depth, "exponent": p}));
    }
    Ok((
        worst <= 0.05,
        format!("eps exponents: {} (max 0.05)", parts.join(", ")),
        Value::Object(details),
    ))
}

fn cfie_vs_mie() -> Result<Check> {
    let curve = BoundaryCurve::circle(1.0);
    let th: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
    let mut ok = true;
    let mut rows = Vec::new();
    let mut parts = Vec::new();
    for kappa in [1.0, 8.0, 32.0] {
        let cfg = ScatterConfig::new(kappa);
        let n = ((64.0f64).max(16.0 * kappa) as usize + 1) & !1;
        let ny = cfie_solve(&curve, &cfg, n)?;
        let mie = MieDisk::from_config(&curve, &cfg)?.trace_grid(n)?;
        let rel = ny.rel_l2(&mie);
        let f_ny = far_field(&ny, &curve, &cfg, &th);
        let f_mie = far_field(&mie, &curve, &cfg, &th);
        let scale = f_mie.values.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let ff = f_ny.sup_diff(&f_mie) / scale;
        ok &= rel <= 1e-6 && ff <= 1e-6;
        parts.push(format!("k={kappa}: L2 {rel:.1e}, far {ff:.1e}"));
        rows.push(json!({"kappa": kappa, "n": n, "rel_l2": rel, "far_field": ff}));
    }
    Ok((ok, parts.join("; "), json!(rows)))
}

fn envelope_bound() -> Result<Check> {
    let sups = SWEEP_KAPPAS
        .iter()
        .map(|&k| {
            let m = MieDisk::new(k, 1.0, 0.0)?;
            let n = 4096.max(16 * k as usize);
            Ok((0..n).map(|i| m.v(2.0 * PI * i as f64 / n as f64).norm()).fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let hi = sups.iter().copied().fold(0.0, f64::max);
    let lo = sups.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo - 1.0;
    Ok((
        spread <= 0.25,
        format!("sup|V| in [{lo:.4}, {hi:.4}], spread {:.1}% (max 25%)", 100.0 * spread),
        json!({"kappa": SWEEP_KAPPAS, "sup": sups, "spread": spread}),
    ))
}

fn fock_oracle() -> Result<Check> {
    let a = FockOracleConfig::with_contour(FockContour::near());
    let b = FockOracleConfig::with_contour(FockContour::near_alt());
    let mut contour = 0.0f64;
    for k in 0..50 {
        let t = -3.0 + 5.0 * k as f64 / 49.0;
        let (x, y) = (fock_psi(t, 0, &a)?, fock_psi(t, 0, &b)?);
        contour = contour.max((x - y).norm() / x.norm().max(1.0));
    }
    let cfg = FockOracleConfig::default();
    let w1 = fock_tail_fit(2, 15.0, 80.0, 66, &cfg)?;
    let w2 = fock_tail_fit(2, 20.0, 100.0, 81, &cfg)?;
    let a0_rel = (w1.coeffs[0] - w2.coeffs[0]).norm() / w1.coeffs[0].norm();
    let pts = (0..=40)
        .map(|k| {
            let t = -8.0 + 0.1 * k as f64;
            Ok((t, fock_psi(t, 0, &cfg)?.norm().ln()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (slope, _) = linear_fit(&pts);
    let nu1 = airy_rightmost_root();
    let want = nu1.abs() * 3f64.sqrt() / 2.0;
    let slope_rel = (slope - want).abs() / want;
    let ok = contour <= 1e-7 && a0_rel <= 5e-4 && slope_rel <= 0.1;
    Ok((
        ok,
        format!(
            "contours {contour:.1e}; a0 windows differ by {a0_rel:.1e}; decay slope {slope:.4} vs {want:.4} ({:.1}%)",
            100.0 * slope_rel
        ),
        json!({
            "contour_difference": contour,
            "a0": [[w1.coeffs[0].re, w1.coeffs[0].im], [w2.coeffs[0].re, w2.coeffs[0].im]],
            "a0_relative_change": a0_rel,
            "nu1": nu1,
            "slope": slope,
            "expected_slope": want,
        }),
    ))
}

fn robustness(opts: &VerifyOptions) -> Result<Check> {
    let fock_specs: Vec<BuildSpec> = SWEEP_KAPPAS
        .iter()
        .map(|&k| BuildSpec::new(Builder::Fock, 1e-1).with_kappa(k))
        .collect();
    let v_specs: Vec<BuildSpec> = SWEEP_KAPPAS
        .iter()
        .map(|&k| BuildSpec::new(Builder::VGeneric, 1e-1).with_kappa(k))
        .collect();
    // Fock networks are large, so they are built one at a time.
    let fock = summaries(&fock_specs, 1)?;
    let v = summaries(&v_specs, opts.jobs)?;
    let depth = |s: &[BuildSummary]| s.iter().map(|s| s.stats.depth as f64).collect::<Vec<_>>();
    let (fd, vd) = (depth(&fock), depth(&v));
    let certified = fock.iter().chain(&v).all(|s| s.certified);
    let cmp = compare_models(&SWEEP_KAPPAS, &fd, P_MIN);
    let v_cmp = compare_models(&SWEEP_KAPPAS, &vd, P_MIN);
    let v_power = fit_power(&SWEEP_KAPPAS, &vd, None).coeffs[1];
    let ok = certified && cmp.polylog_preferred && v_power >= P_MIN;
    Ok((
        ok,
        format!(
            "Fock depths {:?}: polylog rss {:.2e} vs power(p>={P_MIN}) rss {:.2e}; generic depths {:?}: free exponent {v_power:.3}",
            fd, cmp.polylog.rss_log, cmp.power_constrained.rss_log, vd
        ),
        json!({
            "kappa": SWEEP_KAPPAS,
            "fock_depth": fd,
            "fock_achieved": fock.iter().map(|s| s.achieved).collect::<Vec<_>>(),
            "fock_models": cmp,
            "generic_depth": vd,
            "generic_achieved": v.iter().map(|s| s.achieved).collect::<Vec<_>>(),
            "generic_models": v_cmp,
            "certified": certified,
        }),
    ))
}

fn trace() -> Result<Check> {
    let (kappa, eps) = (64.0, 1e-2);
    let curve = BoundaryCurve::circle(1.0);
    let cfg = ScatterConfig::new(kappa);
    let mie = MieDisk::from_config(&curve, &cfg)?;
    let v = mie.clone();
    let src = TraceVSource::Generic(VSource::oracle(move |s| v.v(s)));
    let t = build_trace_emulator(&curve, &cfg, &src, 2, eps)?;
    let net = EmulatorNet::Complex(t.net);
    let m = measure_error(&net, |s| Ok(mie.trace(s)), 0.0, 2.0 * PI, 2048)?;
    remember(BuildSummary {
        spec: BuildSpec::new(Builder::Trace, eps).with_kappa(kappa),
        stats: net.stats(),
        achieved: t.report.achieved,
        certified: t.report.certified,
        grid_points: t.report.grid_points,
        params: t.report.params.clone(),
    });
    let ratio = t.residual_zero / t.residual;
    let ok = t.report.certified
        && m.sup <= eps
        && t.far_field_gap <= t.far_field_bound
        && t.residual.is_finite()
        && ratio >= 1e3;
    Ok((
        ok,
        format!(
            "sup error {:.2e} (2048 points), far field {:.2e} <= {:.2e}, residual ratio {ratio:.1e}",
            m.sup, t.far_field_gap, t.far_field_bound
        ),
        json!({
            "sup_error": m.sup,
            "certified_error": t.report.achieved,
            "far_field_gap": t.far_field_gap,
            "far_field_bound": t.far_field_bound,
            "residual": t.residual,
            "residual_zero": t.residual_zero,
            "stats": net.stats(),
        }),
    ))
}

/// Nodes of the operator probe at wavenumber `κ`.
pub fn probe_nodes(kappa: f64) -> usize {
    let n = (64.0f64).max(4.0 * kappa) as usize;
    n + n % 2
}

fn probes(opts: &VerifyOptions) -> Result<Check> {
    let curve = BoundaryCurve::circle(1.0);
    let mut rows = Vec::new();
    let mut positive = true;
    let mut worst_drift = 0.0f64;
    let mut norms = Vec::new();
    for &kappa in &PROBE_KAPPAS {
        let cfg = ScatterConfig::new(kappa);
        let n = probe_nodes(kappa);
        let fine = (3 * n / 2 + 1) & !1;
        let a = coercivity_probe(&curve, &cfg, n, 16, opts.seed)?;
        let b = coercivity_probe(&curve, &cfg, fine, 16, opts.seed)?;
        let drift = ((a.min_eigenvalue - b.min_eigenvalue) / b.min_eigenvalue)
            .abs()
            .max(((a.operator_norm - b.operator_norm) / b.operator_norm).abs());
        positive &= a.min_eigenvalue > 0.0 && a.min_trial > 0.0 && b.min_eigenvalue > 0.0;
        worst_drift = worst_drift.max(drift);
        norms.push(b.operator_norm);
        rows.push(json!({"kappa": kappa, "coarse": a, "fine": b, "drift": drift}));
    }
    let slope = fit_power(&PROBE_KAPPAS, &norms, None).coeffs[1];
    let ok = positive && worst_drift <= 0.05 && slope <= 0.6;
    Ok((
        ok,
        format!(
            "coercive: {positive}, grid drift {:.2}% (max 5%), norm slope {slope:.3} (max 0.6)",
            100.0 * worst_drift
        ),
        json!({"rows": rows, "norm_slope": slope}),
    ))
}

fn determinism(opts: &VerifyOptions) -> Result<Check> {
    let sub = VerifyOptions {
        only: vec![1, 3, 5, 6],
        quick: true,
        ..opts.clone()
    };
    let saved = known_summaries();
    let run = || {
        clear_summaries();
        let (r, _) = run_criteria(&sub);
        let curve = BoundaryCurve::circle(1.0);
        let probe = coercivity_probe(&curve, &ScatterConfig::new(16.0), 64, 8, opts.seed)?;
        Ok::<_, crate::Error>(format!("{}\n{}", r.to_json(), serde_json::to_string(&probe).unwrap()))
    };
    let (first, second) = (run(), run());
    clear_summaries();
    saved.into_iter().for_each(remember);
    let (first, second) = (first?, second?);
    let same_report = first == second;
    let mut round_trip = true;
    for spec in [BuildSpec::new(Builder::Multiply, 1e-3), BuildSpec::new(Builder::Cos, 1e-2)] {
        let net = super::build(&spec)?.net.net().clone();
        let bytes = format::to_bytes(&net);
        let back = format::from_bytes(&bytes)?;
        let text = format::from_str(&format::to_string(&net))?;
        round_trip &= back == net && format::to_bytes(&back) == bytes && format::to_bytes(&text) == bytes;
    }
    Ok((
        same_report && round_trip,
        format!("repeated report identical: {same_report}; network files bit-exact: {round_trip}"),
        json!({"seed": opts.seed, "report_bytes": first.len()}),
    ))
}
