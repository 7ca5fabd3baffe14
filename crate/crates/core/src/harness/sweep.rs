//! Parameter sweeps over `(κ, ε)` with CSV and JSON reports.

use super::{build, compare_models, eps_exponent, Builder, BuildSpec, ModelComparison};
use crate::error::{invalid, Error, Result};
use crate::network::NetworkStats;
use crate::scattering::BoundaryCurve;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

/// Version of the CSV column layout.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Exponent below which a power law is not considered algebraic growth.
pub const P_MIN: f64 = 0.2;

/// A sweep read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub id: String,
    pub builder: Builder,
    #[serde(default)]
    pub kappas: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub ell: usize,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_curve")]
    pub curve: BoundaryCurve,
    /// Report formats among `csv` and `json`.
    #[serde(default = "default_outputs")]
    pub outputs: Vec<String>,
}

fn default_n() -> usize {
    2
}

fn default_a() -> f64 {
    3.0
}

fn default_curve() -> BoundaryCurve {
    BoundaryCurve::circle(1.0)
}

fn default_outputs() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return invalid(format!("sweep id `{}` must be non-empty and use [A-Za-z0-9_-]", self.id));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
            return invalid("eps must be a non-empty list of values in (0, 1)");
        }
        if self.builder.needs_kappa() {
            if self.kappas.is_empty() || self.kappas.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
                return invalid(format!("builder `{}` needs a non-empty list of positive kappas", self.builder.name()));
            }
        } else if !self.kappas.is_empty() {
            return invalid(format!("builder `{}` takes no kappas", self.builder.name()));
        }
        if let Some(o) = self.outputs.iter().find(|o| *o != "csv" && *o != "json") {
            return invalid(format!("unknown output format `{o}`"));
        }
        self.curve.validate()
    }

    /// Build specs in row order: κ outer, ε inner.
    pub fn specs(&self) -> Vec<BuildSpec> {
        let kappas = if self.kappas.is_empty() { vec![0.0] } else { self.kappas.clone() };
        let mut out = Vec::new();
        for &kappa in &kappas {
            for &eps in &self.eps {
                out.push(BuildSpec {
                    builder: self.builder,
                    eps,
                    kappa,
                    n: self.n,
                    ell: self.ell,
                    a: self.a,
                    curve: self.curve.clone(),
                });
            }
        }
        out
    }
}

/// One build of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub eps: f64,
    pub stats: Option<NetworkStats>,
    pub achieved: Option<f64>,
    pub certified: bool,
    pub error: Option<String>,
}

/// Fits over a sweep axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFits {
    /// Depth against κ, one comparison per ε.
    pub kappa: Vec<(f64, ModelComparison)>,
    /// Exponent of an `ε^{-p}` factor in the depth, one per κ.
    pub eps: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub csv_schema: u32,
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub fits: SweepFits,
}

/// Wall-clock data, kept apart from the reproducible report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTimings {
    pub id: String,
    pub jobs: usize,
    pub row_seconds: Vec<f64>,
    pub total_seconds: f64,
}

impl SweepReport {
    pub fn all_certified(&self) -> bool {
        self.rows.iter().all(|r| r.certified)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::Io(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record([
            "schema", "id", "builder", "kappa", "eps", "depth", "width", "weight_bound", "achieved", "certified", "error",
        ])
        .map_err(io)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                CSV_SCHEMA_VERSION.to_string(),
                self.config.id.clone(),
                self.config.builder.name().to_string(),
                format!("{}", r.kappa),
                format!("{:e}", r.eps),
                opt(r.stats.map(|s| s.depth.to_string())),
                opt(r.stats.map(|s| s.width.to_string())),
                opt(r.stats.map(|s| format!("{:e}", s.weight_bound))),
                opt(r.achieved.map(|a| format!("{a:e}"))),
                r.certified.to_string(),
                opt(r.error.clone()),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the configured formats plus `<id>.meta.json` into `dir`.
    pub fn write(&self, dir: &Path, timings: &SweepTimings) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for o in &self.config.outputs {
            let p = dir.join(format!("{}.{o}", self.config.id));
            if o == "csv" {
                self.write_csv(&p)?;
            } else {
                std::fs::write(&p, self.to_json()?)?;
            }
            written.push(p);
        }
        let p = dir.join(format!("{}.meta.json", self.config.id));
        std::fs::write(&p, serde_json::to_string_pretty(timings).map_err(|e| Error::Io(e.to_string()))?)?;
        written.push(p);
        Ok(written)
    }
}

/// Runs `f` over `items` on `jobs` worker threads; results keep the input
/// order.
pub fn parallel_rows<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|r| r.expect("row computed")).collect()
}

/// Depth exponent against `log(1/ε)` expected of a builder.
pub fn log_power(builder: Builder) -> f64 {
    match builder {
        Builder::Square | Builder::Multiply => 1.0,
        Builder::ExpDecay | Builder::Cos | Builder::Sin => 2.0,
        _ => 4.0,
    }
}

fn fits(cfg: &SweepConfig, rows: &[SweepRow]) -> SweepFits {
    let usable = |r: &&SweepRow| r.certified && r.stats.is_some();
    let mut kappa = Vec::new();
    if cfg.kappas.len() >= 3 {
        for &eps in &cfg.eps {
            let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.eps == eps).filter(usable).collect();
            if pts.len() >= 3 {
                let k: Vec<f64> = pts.iter().map(|r| r.kappa).collect();
                let d: Vec<f64> = pts.iter().map(|r| r.stats.unwrap().depth as f64).collect();
                kappa.push((eps, compare_models(&k, &d, P_MIN)));
            }
        }
    }
    let mut eps_fits = Vec::new();
    if cfg.eps.len() >= 3 {
        let kappas = if cfg.kappas.is_empty() { vec![0.0] } else { cfg.kappas.clone() };
        for k in kappas {
            let pts: Vec<&SweepRow> = rows.iter().filter(|r| r.kappa == k).filter(usable).collect();
            if pts.len() >= 3 {
                let e: Vec<f64> = pts.iter().map(|r| r.eps).collect();
                let d: Vec<f64> = pts.iter().map(|r| r.stats.unwrap().depth as f64).collect();
                eps_fits.push((k, eps_exponent(&e, &d, log_power(cfg.builder))));
            }
        }
    }
    SweepFits { kappa, eps: eps_fits }
}

/// Builds every row, `jobs` at a time. A failed build is recorded in its
/// row and does not stop the sweep.
pub fn run_sweep(cfg: &SweepConfig, jobs: usize) -> Result<(SweepReport, SweepTimings)> {
    cfg.validate()?;
    let start = Instant::now();
    let specs = cfg.specs();
    let results = parallel_rows(&specs, jobs, |spec| {
        let t = Instant::now();
        let row = match build(spec) {
            Ok(o) => SweepRow {
                kappa: spec.kappa,
                eps: spec.eps,
                stats: Some(o.summary.stats),
                achieved: Some(o.summary.achieved),
                certified: o.summary.certified,
                error: None,
            },
            Err(e) => SweepRow {
                kappa: spec.kappa,
                eps: spec.eps,
                stats: None,
                achieved: None,
                certified: false,
                error: Some(e.to_string()),
            },
        };
        (row, t.elapsed().as_secs_f64())
    });
    let (rows, row_seconds): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let fits = fits(cfg, &rows);
    let report = SweepReport {
        csv_schema: CSV_SCHEMA_VERSION,
        config: cfg.clone(),
        rows,
        fits,
    };
    let timings = SweepTimings {
        id: cfg.id.clone(),
        jobs,
        row_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((report, timings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_configs() {
        let ok = r#"{"id":"sq","builder":"square","eps":[0.1,0.01]}"#;
        assert!(SweepConfig::from_json(ok).is_ok());
        for bad in [
            r#"{"id":"","builder":"square","eps":[0.1]}"#,
            r#"{"id":"a","builder":"square","eps":[2.0]}"#,
            r#"{"id":"a","builder":"fock","eps":[0.1]}"#,
            r#"{"id":"a","builder":"square","eps":[0.1],"kappas":[8]}"#,
            r#"{"id":"a","builder":"square","eps":[0.1],"outputs":["xml"]}"#,
            r#"{"id":"a","builder":"square","eps":[0.1],"typo":1}"#,
        ] {
            assert!(SweepConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parallel_rows_keep_order() {
        let v: Vec<usize> = (0..37).collect();
        assert_eq!(parallel_rows(&v, 4, |x| x * 2), v.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn square_sweep_certifies_and_writes() {
        let cfg = SweepConfig::from_json(r#"{"id":"sq","builder":"square","eps":[0.1,0.01,0.001]}"#).unwrap();
        let (r, t) = run_sweep(&cfg, 2).unwrap();
        assert!(r.all_certified());
        assert_eq!(r.fits.eps.len(), 1);
        let dir = std::env::temp_dir().join(format!("hfnet-sweep-{}", std::process::id()));
        let files = r.write(&dir, &t).unwrap();
        assert_eq!(files.len(), 3);
        let csv = std::fs::read_to_string(dir.join("sq.csv")).unwrap();
        assert!(csv.starts_with("schema,id,builder"));
        assert_eq!(csv.lines().count(), 4);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
