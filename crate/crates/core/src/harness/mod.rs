//! Error measurement, builder registry, sweeps with CSV/JSON reports, and
//! the acceptance criteria shared by the test suite and the command line.

pub mod criteria;
pub mod fit;
pub mod sweep;

pub use criteria::{
    all_passed, report_lines, run_criteria, run_criterion, CriterionResult, CriterionTiming, VerifyOptions, VerifyReport,
    ALL_CRITERIA, QUICK_CRITERIA,
};
pub use fit::{compare_models, eps_exponent, fit_polylog, fit_power, ModelComparison, ModelFit};
pub use sweep::{run_sweep, SweepConfig, SweepReport, SweepRow, SweepTimings, CSV_SCHEMA_VERSION};

use crate::blocks::{
    build_exp_decay, build_multiply, build_reciprocal, build_reciprocal_power, build_square, build_trig,
    multiply_probe_error, uniform_grid, Trig,
};
use crate::emulate::{
    build_fock_emulator, build_trace_emulator, build_v_emulator_asymptotic, build_v_emulator_generic, fock_oracle,
    EmulatorReport, ExpansionSpec, TraceVSource, VSource,
};
use crate::error::{invalid, Result};
use crate::network::{EmulatorNet, NetworkStats, ReluNetwork};
use crate::scattering::{BoundaryCurve, MieDisk, ScatterConfig};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

type C = Complex64;

/// Points of the error-measurement grid for elementary blocks.
pub const BLOCK_GRID: usize = 10_000;

/// Sup and `L²` errors on a uniform grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorMeasure {
    pub sup: f64,
    pub l2: f64,
    pub points: usize,
}

/// Errors of a scalar or complex network against `oracle` on `n` uniform
/// points of `[lo, hi]`; the `L²` norm uses the trapezoidal rule.
pub fn measure_error(
    net: &EmulatorNet,
    oracle: impl Fn(f64) -> Result<C>,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<ErrorMeasure> {
    if !(hi > lo) || n < 2 {
        return invalid(format!("bad measurement interval [{lo}, {hi}] with {n} points"));
    }
    let xs = uniform_grid(lo, hi, n);
    let ys = net.eval_many(&xs);
    let h = (hi - lo) / (n - 1) as f64;
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    for (i, (&x, y)) in xs.iter().zip(&ys).enumerate() {
        let e = (y - oracle(x)?).norm();
        sup = sup.max(e);
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        sq += w * e * e * h;
    }
    Ok(ErrorMeasure {
        sup,
        l2: sq.sqrt(),
        points: n,
    })
}

/// Known network builders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builder {
    Square,
    Multiply,
    ExpDecay,
    Cos,
    Sin,
    Reciprocal,
    ReciprocalPower,
    Fock,
    VGeneric,
    VAsymptotic,
    Trace,
}

impl Builder {
    pub const ALL: [Builder; 11] = [
        Builder::Square,
        Builder::Multiply,
        Builder::ExpDecay,
        Builder::Cos,
        Builder::Sin,
        Builder::Reciprocal,
        Builder::ReciprocalPower,
        Builder::Fock,
        Builder::VGeneric,
        Builder::VAsymptotic,
        Builder::Trace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builder::Square => "square",
            Builder::Multiply => "multiply",
            Builder::ExpDecay => "exp_decay",
            Builder::Cos => "cos",
            Builder::Sin => "sin",
            Builder::Reciprocal => "reciprocal",
            Builder::ReciprocalPower => "reciprocal_power",
            Builder::Fock => "fock",
            Builder::VGeneric => "v_generic",
            Builder::VAsymptotic => "v_asymptotic",
            Builder::Trace => "trace",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Builder::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .map_or_else(|| invalid(format!("unknown builder `{s}`")), Ok)
    }

    /// Width ceiling of the construction.
    pub fn width_ceiling(self) -> usize {
        match self {
            Builder::Square | Builder::Multiply => 5,
            Builder::ExpDecay | Builder::Cos | Builder::Sin => 9,
            Builder::Reciprocal | Builder::ReciprocalPower => 13,
            Builder::VGeneric => 15,
            Builder::Fock => 30,
            Builder::VAsymptotic => 38,
            Builder::Trace => 42,
        }
    }

    /// Whether the construction keeps every weight in `[-1, 1]`.
    pub fn unit_weights(self) -> bool {
        matches!(
            self,
            Builder::Square
                | Builder::Multiply
                | Builder::ExpDecay
                | Builder::Cos
                | Builder::Sin
                | Builder::Reciprocal
                | Builder::ReciprocalPower
        )
    }

    /// Whether the builder depends on a wavenumber.
    pub fn needs_kappa(self) -> bool {
        matches!(self, Builder::Fock | Builder::VGeneric | Builder::VAsymptotic | Builder::Trace)
    }
}

/// Parameters of one build. Unused fields are ignored by a builder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildSpec {
    pub builder: Builder,
    pub eps: f64,
    pub kappa: f64,
    /// Smoothness or expansion order.
    pub n: usize,
    /// Derivative order of the Fock emulator.
    pub ell: usize,
    /// Fock domain factor `A`.
    pub a: f64,
    pub curve: BoundaryCurve,
}

impl Default for BuildSpec {
    fn default() -> Self {
        BuildSpec {
            builder: Builder::Square,
            eps: 1e-2,
            kappa: 64.0,
            n: 2,
            ell: 0,
            a: 3.0,
            curve: BoundaryCurve::circle(1.0),
        }
    }
}

impl BuildSpec {
    pub fn new(builder: Builder, eps: f64) -> Self {
        BuildSpec {
            builder,
            eps,
            ..Default::default()
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    fn key(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

/// Domain parameters of the elementary blocks.
pub mod domains {
    pub const MULTIPLY_D: f64 = 4.0;
    pub const EXP_A: f64 = 8.0;
    pub const EXP_D: f64 = 4.0;
    pub const TRIG_A: f64 = 32.0;
    pub const TRIG_D: f64 = 2.0 * std::f64::consts::PI;
    pub const RECIPROCAL_D: f64 = 100.0;
    pub const POWER_N: u32 = 3;
    pub const POWER_D: f64 = 8.0;
}

/// A built network with its measured accuracy.
#[derive(Clone, Debug)]
pub struct BuildOutcome {
    pub net: EmulatorNet,
    pub summary: BuildSummary,
    pub report: Option<EmulatorReport>,
}

/// What sweeps and criteria keep of a build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub spec: BuildSpec,
    pub stats: NetworkStats,
    pub achieved: f64,
    pub certified: bool,
    pub grid_points: usize,
    pub params: std::collections::BTreeMap<String, f64>,
}

fn block_outcome(spec: &BuildSpec, net: ReluNetwork, f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<BuildOutcome> {
    let net = EmulatorNet::Real(net);
    let m = measure_error(&net, |x| Ok(C::new(f(x), 0.0)), lo, hi, BLOCK_GRID)?;
    Ok(outcome(spec, net, m.sup, m.points, None))
}

fn outcome(spec: &BuildSpec, net: EmulatorNet, achieved: f64, points: usize, report: Option<EmulatorReport>) -> BuildOutcome {
    let summary = BuildSummary {
        spec: spec.clone(),
        stats: net.stats(),
        achieved,
        certified: report.as_ref().map_or(achieved <= spec.eps, |r| r.certified && r.achieved <= spec.eps),
        grid_points: points,
        params: report.as_ref().map(|r| r.params.clone()).unwrap_or_default(),
    };
    BuildOutcome { net, summary, report }
}

/// Single-term expansion `κ^{-1/3} Ψ(κ^{1/3} sin s)` used by the
/// asymptotic builder.
pub fn sine_expansion() -> Result<ExpansionSpec> {
    ExpansionSpec::new(0, 0, vec![vec![Arc::new(|_| C::new(1.0, 0.0))]], Arc::new(f64::sin))
}

/// `V_κ` of a disk (the build's circle) for plane-wave
/// incidence along `+x`.
pub fn disk_v_source(curve: &BoundaryCurve, kappa: f64) -> Result<VSource> {
    let mie = MieDisk::from_config(curve, &ScatterConfig::new(kappa))?;
    Ok(VSource::oracle(move |s| mie.v(s)))
}

/// Builds one network and measures its error. Elementary blocks are
/// measured on 10⁴ points (a 100 × 100 grid for products); emulators are
/// certified by their own builders.
pub fn build(spec: &BuildSpec) -> Result<BuildOutcome> {
    use domains::*;
    let eps = spec.eps;
    match spec.builder {
        Builder::Square => block_outcome(spec, build_square(eps)?, |x| x * x, 0.0, 1.0),
        Builder::Multiply => {
            let net = build_multiply(MULTIPLY_D, eps)?;
            let sup = multiply_probe_error(&net, MULTIPLY_D, 100);
            Ok(outcome(spec, EmulatorNet::Real(net), sup, BLOCK_GRID, None))
        }
        Builder::ExpDecay => block_outcome(spec, build_exp_decay(EXP_A, EXP_D, eps)?, |x| (-EXP_A * x).exp(), 0.0, EXP_D),
        Builder::Cos => block_outcome(
            spec,
            build_trig(Trig::Cos, TRIG_A, TRIG_D, eps)?,
            |x| (TRIG_A * x).cos(),
            -TRIG_D,
            TRIG_D,
        ),
        Builder::Sin => block_outcome(
            spec,
            build_trig(Trig::Sin, TRIG_A, TRIG_D, eps)?,
            |x| (TRIG_A * x).sin(),
            -TRIG_D,
            TRIG_D,
        ),
        Builder::Reciprocal => block_outcome(spec, build_reciprocal(RECIPROCAL_D, eps)?, |x| 1.0 / x, 1.0, RECIPROCAL_D),
        Builder::ReciprocalPower => block_outcome(
            spec,
            build_reciprocal_power(POWER_N, POWER_D, eps)?,
            |x| x.powi(-(POWER_N as i32)),
            1.0,
            POWER_D,
        ),
        Builder::Fock => {
            let (net, r) = build_fock_emulator(spec.kappa, spec.n, spec.ell, eps, spec.a)?;
            Ok(outcome(spec, EmulatorNet::Complex(net), r.achieved, r.grid_points, Some(r)))
        }
        Builder::VGeneric => {
            let v = disk_v_source(&spec.curve, spec.kappa)?;
            let (net, r) = build_v_emulator_generic(&v, spec.kappa, spec.n, eps)?;
            Ok(outcome(spec, EmulatorNet::Complex(net), r.achieved, r.grid_points, Some(r)))
        }
        Builder::VAsymptotic => {
            let (net, r) = build_v_emulator_asymptotic(&sine_expansion()?, spec.kappa, spec.n, eps)?;
            Ok(outcome(spec, EmulatorNet::Complex(net), r.achieved, r.grid_points, Some(r)))
        }
        Builder::Trace => {
            let cfg = ScatterConfig::new(spec.kappa);
            let src = TraceVSource::Generic(disk_v_source(&spec.curve, spec.kappa)?);
            let t = build_trace_emulator(&spec.curve, &cfg, &src, spec.n, eps)?;
            Ok(outcome(spec, EmulatorNet::Complex(t.net), t.report.achieved, t.report.grid_points, Some(t.report)))
        }
    }
}

fn summaries() -> &'static Mutex<HashMap<String, BuildSummary>> {
    static CACHE: OnceLock<Mutex<HashMap<String, BuildSummary>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// [`build`] reduced to its summary, memoized per spec for the lifetime of
/// the process so criteria sharing a build run it once.
pub fn build_summary(spec: &BuildSpec) -> Result<BuildSummary> {
    let key = spec.key();
    if let Some(s) = summaries().lock().unwrap().get(&key) {
        return Ok(s.clone());
    }
    let s = build(spec)?.summary;
    summaries().lock().unwrap().insert(key, s.clone());
    Ok(s)
}

/// Records a summary built outside [`build_summary`].
pub fn remember(summary: BuildSummary) {
    summaries().lock().unwrap().insert(summary.spec.key(), summary);
}

/// Every memoized summary, in no particular order.
pub fn known_summaries() -> Vec<BuildSummary> {
    summaries().lock().unwrap().values().cloned().collect()
}

pub fn clear_summaries() {
    summaries().lock().unwrap().clear();
}

/// `Ψ^{(ℓ)}` on a uniform grid, for reference tables.
pub fn fock_table(lo: f64, hi: f64, n: usize, ell: usize) -> Result<Vec<(f64, C)>> {
    let xs = uniform_grid(lo, hi, n);
    let v = fock_oracle(&xs, ell)?;
    Ok(xs.into_iter().zip(v).collect())
}

/// Mie trace of the unit disk on `n` equispaced parameters.
pub fn mie_table(kappa: f64, radius: f64, n: usize) -> Result<Vec<(f64, C)>> {
    let m = MieDisk::new(kappa, radius, 0.0)?;
    Ok((0..n)
        .map(|i| {
            let s = 2.0 * PI * i as f64 / n as f64;
            (s, m.trace(s))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_primitive_measures_zero() {
        let net = EmulatorNet::Real(crate::network::p1());
        let m = measure_error(&net, |x| Ok(C::new(x, 0.0)), -1.0, 1.0, 101).unwrap();
        assert_eq!(m.sup, 0.0);
        assert_eq!(m.points, 101);
    }

    #[test]
    fn builder_names_round_trip() {
        for b in Builder::ALL {
            assert_eq!(Builder::parse(b.name()).unwrap(), b);
        }
        assert!(Builder::parse("nope").is_err());
    }

    #[test]
    fn multiply_within_target() {
        let o = build(&BuildSpec::new(Builder::Multiply, 1e-3)).unwrap();
        assert!(o.summary.certified && o.summary.achieved <= 1e-3);
    }

    #[test]
    fn grid_refinement_is_stable() {
        let o = build(&BuildSpec::new(Builder::ExpDecay, 1e-3)).unwrap();
        let f = |x: f64| Ok(C::new((-8.0 * x).exp(), 0.0));
        let a = measure_error(&o.net, f, 0.0, 4.0, 5001).unwrap();
        let b = measure_error(&o.net, f, 0.0, 4.0, 10001).unwrap();
        assert!(b.sup <= 2.0 * a.sup && a.sup <= 2.0 * b.sup);
    }
}
