use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hfnet::harness::{self, BuildSpec, Builder, SweepConfig, VerifyOptions};
use hfnet::scattering::{cfie_solve, far_field, write_complex_csv, MieDisk, ProblemConfig};
use hfnet::special::{airy_ai, bessel, fock_psi, BesselKind, FockOracleConfig};
use hfnet::format;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hfnet", version, about = "ReLU network emulators for high-frequency scattering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a network, certify it and save it as `.relunet`.
    Build(BuildArgs),
    /// Evaluate a saved network on a grid or on points from a CSV file.
    Eval(EvalArgs),
    /// Run a parameter sweep from a JSON config.
    Sweep(SweepArgs),
    /// Solve the sound-soft scattering problem by the Nyström method.
    Solve(SolveArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
    /// Tabulate a reference function.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// JSON build spec; flags given explicitly override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    builder: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Smoothness or expansion order.
    #[arg(long)]
    n: Option<usize>,
    /// Fock derivative order.
    #[arg(long)]
    ell: Option<usize>,
    /// Output `.relunet` file.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON summary (and emulator report) of the build.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Network file.
    net: PathBuf,
    /// Uniform grid `lo:hi:n` (or `n` points on `[-1, 1]`), for networks
    /// with one input.
    #[arg(long)]
    grid: Option<String>,
    /// CSV file of input points, one per row, no header.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// JSON problem: curve, kappa, optional direction_angle, eta, n.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for `trace.csv` and `far_field.csv`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Number of equispaced far-field directions.
    #[arg(long, default_value_t = 256)]
    grid: usize,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run the fast subset only.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Comma-separated criterion ids.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// JSON report of the deterministic results.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    Fock,
    Airy,
    BesselJ,
    BesselY,
    Hankel,
    Mie,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(value_enum)]
    table: Table,
    /// `lo:hi:n` or `n` (on `[-3, 3]`); for `mie` only `n` is used and the
    /// angles cover `[0, 2π)`.
    #[arg(long, default_value = "61")]
    grid: String,
    /// Derivative order (`fock`) or Bessel order.
    #[arg(long, default_value_t = 0)]
    order: usize,
    #[arg(long, default_value_t = 8.0)]
    kappa: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str, default: (f64, f64)) -> Result<(f64, f64, usize)> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 1 {
        let n: usize = s.parse().with_context(|| format!("grid `{s}` is neither n nor lo:hi:n"))?;
        if n < 2 {
            bail!("grid needs at least 2 points");
        }
        return Ok((default.0, default.1, n));
    }
    if parts.len() != 3 {
        bail!("grid `{s}` is not of the form lo:hi:n");
    }
    let lo: f64 = parts[0].parse().context("grid lower bound")?;
    let hi: f64 = parts[1].parse().context("grid upper bound")?;
    let n: usize = parts[2].parse().context("grid size")?;
    if !(hi > lo) || n < 2 {
        bail!("grid `{s}` needs lo < hi and n >= 2");
    }
    Ok((lo, hi, n))
}

fn grid_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn build(a: BuildArgs) -> Result<ExitCode> {
    let mut spec = match &a.config {
        Some(p) => serde_json::from_str::<BuildSpec>(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => BuildSpec::default(),
    };
    if let Some(b) = &a.builder {
        spec.builder = Builder::parse(b)?;
    } else if a.config.is_none() {
        bail!("give --builder or --config");
    }
    if let Some(v) = a.eps {
        spec.eps = v;
    }
    if let Some(v) = a.kappa {
        spec.kappa = v;
    }
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = a.ell {
        spec.ell = v;
    }
    let o = harness::build(&spec)?;
    format::save(o.net.net(), &a.out)?;
    let s = &o.summary;
    eprintln!(
        "{}: depth {} width {} B {:.3e}, error {:.3e} (target {:.1e}) {}",
        spec.builder.name(),
        s.stats.depth,
        s.stats.width,
        s.stats.weight_bound,
        s.achieved,
        spec.eps,
        if s.certified { "certified" } else { "NOT certified" }
    );
    if let Some(p) = &a.report {
        let v = serde_json::json!({"summary": s, "report": o.report});
        std::fs::write(p, serde_json::to_string_pretty(&v)?)?;
    }
    Ok(if s.certified { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn eval(a: EvalArgs) -> Result<ExitCode> {
    let net = format::load(&a.net)?;
    let d = net.input_dim();
    let points: Vec<Vec<f64>> = match (&a.grid, &a.input) {
        (Some(g), None) => {
            if d != 1 {
                bail!("--grid needs a network with one input, this one has {d}");
            }
            let (lo, hi, n) = parse_grid(g, (-1.0, 1.0))?;
            grid_points(lo, hi, n).into_iter().map(|x| vec![x]).collect()
        }
        (None, Some(p)) => read(p)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.split(',')
                    .map(|v| v.trim().parse::<f64>().with_context(|| format!("line {}: bad number `{v}`", i + 1)))
                    .collect()
            })
            .collect::<Result<_>>()?,
        _ => bail!("give exactly one of --grid and --input"),
    };
    let ys = net.evaluate(&points)?;
    let mut w = sink(&a.out)?;
    let head: Vec<String> = (0..d)
        .map(|i| format!("x{i}"))
        .chain((0..net.output_dim()).map(|i| format!("y{i}")))
        .collect();
    writeln!(w, "{}", head.join(","))?;
    for (x, y) in points.iter().zip(&ys) {
        let row: Vec<String> = x.iter().chain(y).map(|v| format!("{v:e}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let cfg = SweepConfig::from_json(&read(&a.config)?)?;
    let (report, timings) = harness::run_sweep(&cfg, a.jobs)?;
    for p in report.write(&a.out, &timings)? {
        eprintln!("wrote {}", p.display());
    }
    let failed = report.rows.iter().filter(|r| !r.certified).count();
    eprintln!("{} rows, {failed} not certified, {:.1} s", report.rows.len(), timings.total_seconds);
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let p = ProblemConfig::from_json(&read(&a.config)?)?;
    let cfg = p.scatter();
    let trace = cfie_solve(&p.curve, &cfg, p.nodes())?;
    std::fs::create_dir_all(&a.out)?;
    write_complex_csv(&a.out.join("trace.csv"), "s", trace.params().into_iter().zip(trace.values.iter().copied()))?;
    let th: Vec<f64> = (0..a.grid).map(|k| 2.0 * PI * k as f64 / a.grid as f64).collect();
    let ff = far_field(&trace, &p.curve, &cfg, &th);
    if ff.under_resolved {
        eprintln!("warning: the trace grid under-resolves the far field");
    }
    ff.write_csv(&a.out.join("far_field.csv"))?;
    eprintln!("solved with {} nodes into {}", trace.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Result<ExitCode> {
    let opts = VerifyOptions {
        seed: a.seed,
        quick: a.quick,
        jobs: a.jobs,
        only: a.only,
    };
    let (report, timings) = harness::run_criteria(&opts);
    for l in harness::report_lines(&report, &timings) {
        println!("{l}");
    }
    if let Some(p) = &a.out {
        std::fs::write(p, report.to_json())?;
    }
    Ok(if harness::all_passed(&report, &timings) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn oracle(a: OracleArgs) -> Result<ExitCode> {
    let (lo, hi, n) = parse_grid(&a.grid, (-3.0, 3.0))?;
    let xs = grid_points(lo, hi, n);
    let real = |v: f64| Complex64::new(v, 0.0);
    let rows: Vec<(f64, Complex64)> = match a.table {
        Table::Fock => {
            let cfg = FockOracleConfig::default();
            xs.iter().map(|&t| Ok((t, fock_psi(t, a.order, &cfg)?))).collect::<Result<_>>()?
        }
        Table::Airy => xs.iter().map(|&x| Ok((x, airy_ai(real(x))?))).collect::<Result<_>>()?,
        Table::BesselJ | Table::BesselY | Table::Hankel => {
            let kind = match a.table {
                Table::BesselJ => BesselKind::J,
                Table::BesselY => BesselKind::Y,
                _ => BesselKind::H1,
            };
            xs.iter().map(|&x| Ok((x, bessel(kind, a.order, x)?))).collect::<Result<_>>()?
        }
        Table::Mie => {
            let m = MieDisk::new(a.kappa, 1.0, 0.0)?;
            (0..n)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / n as f64;
                    (t, m.trace(t))
                })
                .collect()
        }
    };
    let mut w = sink(&a.out)?;
    writeln!(w, "x,re,im")?;
    for (x, v) in rows {
        writeln!(w, "{x:e},{:e},{:e}", v.re, v.im)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Build(a) => build(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn main() -> ExitCode {
    run().unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3", (-1.0, 1.0)).unwrap(), (0.0, 1.0, 3));
        assert_eq!(parse_grid("5", (-1.0, 1.0)).unwrap(), (-1.0, 1.0, 5));
        assert!(parse_grid("1:0:3", (-1.0, 1.0)).is_err());
        assert!(parse_grid("0:1", (-1.0, 1.0)).is_err());
        assert!(parse_grid("1", (-1.0, 1.0)).is_err());
        assert_eq!(grid_points(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
