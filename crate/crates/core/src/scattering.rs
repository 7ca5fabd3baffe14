//! Sound-soft scattering by a smooth convex curve: the combined-field
//! integral equation `(½I + K'_κ - iηV_κ) φ = ∂_n u^i - iη u^i` for the
//! Neumann trace `φ = ∂_n u`, the Mie series for the disk, the far field
//! and operator probes.
//!
//! Mie trace. With `u^i = Σ i^m J_m(κr) e^{imψ}` and the scattered field
//! `-Σ i^m (J_m/H_m)(κa) H_m(κr) e^{imψ}`, `ψ = θ - θ_d`, the radial
//! derivative at `r = a` is `κ Σ i^m e^{imψ} (J'_m H_m - J_m H'_m)/H_m`.
//! The Wronskian `J_m Y'_m - J'_m Y_m = 2/(πκa)` turns the bracket into
//! `-2i/(πκa)`, so `∂_n u(θ) = -(2i/(πa)) Σ_m i^m e^{imψ} / H_m(κa)`.
//! Far field. `u^s ~ e^{iπ/4}/(2√(2π)) · e^{iκr}/√(κr) · F(x̂)` with
//! `F(x̂) = -∫_Γ e^{-iκ x̂·y} φ(y) ds_y`; for the disk the large-argument
//! form of `H_m(κr)` gives `F(θ) = 4i Σ_m (J_m/H_m)(κa) e^{imψ}`.

use crate::error::{Error, Result};
use crate::network::ComplexNet;
use crate::special::bessel::EULER_GAMMA;
use crate::special::{bessel_table, hankel01};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

type C = Complex64;

/// Smooth 2π-periodic parametrization, traversed counterclockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryCurve {
    Circle { radius: f64 },
    /// Semi-axes `a` (along x) and `b`, rotated by `angle`.
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
    },
}

impl BoundaryCurve {
    pub fn circle(radius: f64) -> Self {
        BoundaryCurve::Circle { radius }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        BoundaryCurve::Ellipse { a, b, angle: 0.0 }
    }

    fn axes(&self) -> (f64, f64, f64) {
        match *self {
            BoundaryCurve::Circle { radius } => (radius, radius, 0.0),
            BoundaryCurve::Ellipse { a, b, angle } => (a, b, angle),
        }
    }

    fn rotate(v: [f64; 2], angle: f64) -> [f64; 2] {
        let (s, c) = angle.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        let (a, b, r) = self.axes();
        Self::rotate([a * s.cos(), b * s.sin()], r)
    }

    pub fn deriv(&self, s: f64) -> [f64; 2] {
        let (a, b, r) = self.axes();
        Self::rotate([-a * s.sin(), b * s.cos()], r)
    }

    pub fn deriv2(&self, s: f64) -> [f64; 2] {
        let (a, b, r) = self.axes();
        Self::rotate([-a * s.cos(), -b * s.sin()], r)
    }

    /// `‖γ'(s)‖`.
    pub fn speed(&self, s: f64) -> f64 {
        let d = self.deriv(s);
        d[0].hypot(d[1])
    }

    /// Outward unit normal.
    pub fn normal(&self, s: f64) -> [f64; 2] {
        let d = self.deriv(s);
        let l = d[0].hypot(d[1]);
        [d[1] / l, -d[0] / l]
    }

    pub fn curvature(&self, s: f64) -> f64 {
        let d = self.deriv(s);
        let dd = self.deriv2(s);
        (d[0] * dd[1] - d[1] * dd[0]) / d[0].hypot(d[1]).powi(3)
    }

    /// Checks positivity of the axes, of `‖γ'‖` and of the curvature on a grid.
    pub fn validate(&self) -> Result<()> {
        let (a, b, r) = self.axes();
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("bad curve {self:?}")));
        }
        for k in 0..512 {
            let s = 2.0 * PI * k as f64 / 512.0;
            if !(self.speed(s) > 0.0 && self.curvature(s) > 0.0) {
                return Err(Error::InvalidParameter(format!("curve not smooth and convex at s = {s}")));
            }
        }
        Ok(())
    }

    pub fn diameter(&self) -> f64 {
        let (a, b, _) = self.axes();
        2.0 * a.max(b)
    }

    /// `sup ‖γ'‖`.
    pub fn max_speed(&self) -> f64 {
        let (a, b, _) = self.axes();
        a.max(b)
    }

    /// `sup ‖γ‖`.
    pub fn max_norm(&self) -> f64 {
        let (a, b, _) = self.axes();
        a.max(b)
    }
}

/// Wavenumber, incidence direction and coupling parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub kappa: f64,
    pub direction: [f64; 2],
    /// `None` means `η = κ`.
    #[serde(default)]
    pub eta: Option<f64>,
}

impl ScatterConfig {
    pub fn new(kappa: f64) -> Self {
        ScatterConfig {
            kappa,
            direction: [1.0, 0.0],
            eta: None,
        }
    }

    pub fn with_angle(kappa: f64, angle: f64) -> Self {
        ScatterConfig {
            kappa,
            direction: [angle.cos(), angle.sin()],
            eta: None,
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.kappa)
    }

    pub fn angle(&self) -> f64 {
        self.direction[1].atan2(self.direction[0])
    }

    pub fn validate(&self) -> Result<()> {
        let nd = self.direction[0].hypot(self.direction[1]);
        if !(self.kappa > 0.0 && self.kappa.is_finite()) || (nd - 1.0).abs() > 1e-12 || !(self.eta() > 0.0) {
            return Err(Error::InvalidParameter(format!("bad scattering configuration {self:?}")));
        }
        Ok(())
    }

    /// `γ(s)·d̂`.
    pub fn phase(&self, curve: &BoundaryCurve, s: f64) -> f64 {
        let p = curve.point(s);
        p[0] * self.direction[0] + p[1] * self.direction[1]
    }
}

/// Values at the equispaced parameters `s_i = 2πi/N`, `N` even.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceGrid {
    pub values: Vec<C>,
}

impl TraceGrid {
    pub fn new(values: Vec<C>) -> Result<Self> {
        if values.is_empty() || values.len() % 2 == 1 {
            return Err(Error::InvalidParameter(format!("trace grid size {} must be even", values.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical("non-finite trace value".into()));
        }
        Ok(TraceGrid { values })
    }

    /// Samples `f` on the grid of size `n`.
    pub fn sample(n: usize, f: impl Fn(f64) -> C) -> Result<Self> {
        Self::new(grid(n).into_iter().map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn params(&self) -> Vec<f64> {
        grid(self.len())
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Relative discrete L² distance `‖self - other‖ / ‖other‖`.
    pub fn rel_l2(&self, other: &TraceGrid) -> f64 {
        let num: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = other.values.iter().map(|b| b.norm_sqr()).sum();
        (num / den).sqrt()
    }

    /// Trigonometric interpolation at an arbitrary parameter.
    pub fn interpolate(&self, s: f64) -> C {
        let n = self.len();
        let h = 2.0 * PI / n as f64;
        let mut acc = C::new(0.0, 0.0);
        for (j, v) in self.values.iter().enumerate() {
            let d = s - j as f64 * h;
            let half = 0.5 * d;
            let sh = half.sin();
            // Dirichlet kernel for even N with the Nyquist mode split
            let w = if sh.abs() < 1e-14 {
                1.0
            } else {
                (0.5 * n as f64 * d).sin() * half.cos() / (n as f64 * sh)
            };
            acc += v * w;
        }
        acc
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.params().into_iter().zip(self.values.iter().copied());
        write_complex_csv(path, "s", rows)
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect()
}

/// Writes `(x, Re, Im)` rows with the given first-column header.
pub fn write_complex_csv(path: &Path, head: &str, rows: impl IntoIterator<Item = (f64, C)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    w.write_record([head, "re", "im"]).map_err(|e| Error::Io(e.to_string()))?;
    for (x, v) in rows {
        w.write_record([format!("{x:.17e}"), format!("{:.17e}", v.re), format!("{:.17e}", v.im)])
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Mie series data for the sound-soft disk of radius `a` centred at the
/// origin.
#[derive(Clone, Debug)]
pub struct MieDisk {
    pub kappa: f64,
    pub radius: f64,
    pub angle: f64,
    inv_h: Vec<C>,
    j_over_h: Vec<C>,
}

impl MieDisk {
    /// Truncates at `M = ⌈κa + 10(κa)^{1/3} + 20⌉` and checks the tail.
    pub fn new(kappa: f64, radius: f64, angle: f64) -> Result<Self> {
        let x = kappa * radius;
        if !(x > 0.0 && x <= 2e3) {
            return Err(Error::InvalidParameter(format!("κa = {x} outside (0, 2000]")));
        }
        let m = (x + 10.0 * x.cbrt() + 20.0).ceil() as usize;
        let t = bessel_table(m, x)?;
        let inv_h: Vec<C> = (0..=m).map(|k| t.h1(k).inv()).collect();
        let j_over_h: Vec<C> = (0..=m).map(|k| t.h1(k).inv() * t.j[k]).collect();
        let top = inv_h.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tail = inv_h[m].norm() + inv_h[m - 1].norm();
        if !(tail <= 1e-12 * top) || inv_h.iter().any(|v| !v.re.is_finite()) {
            return Err(Error::Numerical(format!("Mie series not converged: tail {tail:.2e}")));
        }
        Ok(MieDisk {
            kappa,
            radius,
            angle,
            inv_h,
            j_over_h,
        })
    }

    pub fn from_config(curve: &BoundaryCurve, cfg: &ScatterConfig) -> Result<Self> {
        match *curve {
            BoundaryCurve::Circle { radius } => Self::new(cfg.kappa, radius, cfg.angle()),
            _ => Err(Error::InvalidParameter("Mie series needs a circle".into())),
        }
    }

    pub fn terms(&self) -> usize {
        self.inv_h.len()
    }

    /// `Σ_{m∈ℤ} c_m i^{pm} e^{imψ}` for coefficients even in `m`.
    fn even_sum(c: &[C], psi: f64, with_i: bool) -> C {
        let rot = if with_i {
            C::from_polar(1.0, psi + PI / 2.0)
        } else {
            C::from_polar(1.0, psi)
        };
        let rot_m = if with_i {
            C::from_polar(1.0, -psi + PI / 2.0)
        } else {
            C::from_polar(1.0, -psi)
        };
        let mut p = C::new(1.0, 0.0);
        let mut q = C::new(1.0, 0.0);
        let mut acc = c[0];
        for v in &c[1..] {
            p *= rot;
            q *= rot_m;
            acc += v * (p + q);
        }
        acc
    }

    /// `∂_n u(θ) = -(2i/(πa)) Σ_m i^m e^{im(θ-θ_d)} / H_m(κa)`.
    pub fn trace(&self, theta: f64) -> C {
        let s = Self::even_sum(&self.inv_h, theta - self.angle, true);
        C::new(0.0, -2.0 / (PI * self.radius)) * s
    }

    /// The same sum accumulated from the highest order down.
    pub fn trace_reversed(&self, theta: f64) -> C {
        let psi = theta - self.angle;
        let mut acc = C::new(0.0, 0.0);
        for (m, v) in self.inv_h.iter().enumerate().rev() {
            let im = C::new(0.0, 1.0).powu(m as u32);
            let e = if m == 0 {
                C::new(1.0, 0.0)
            } else {
                C::from_polar(1.0, m as f64 * psi) + C::from_polar(1.0, -(m as f64) * psi)
            };
            acc += v * im * e;
        }
        C::new(0.0, -2.0 / (PI * self.radius)) * acc
    }

    pub fn trace_grid(&self, n: usize) -> Result<TraceGrid> {
        TraceGrid::sample(n, |s| self.trace(s))
    }

    /// `F(θ) = 4i Σ_m (J_m/H_m)(κa) e^{im(θ-θ_d)}`.
    pub fn far_field(&self, theta: f64) -> C {
        C::new(0.0, 4.0) * Self::even_sum(&self.j_over_h, theta - self.angle, false)
    }

    /// `V(θ) = κ^{-1} ∂_n u(θ) e^{-iκ a cos(θ-θ_d)}`.
    pub fn v(&self, theta: f64) -> C {
        let ph = self.kappa * self.radius * (theta - self.angle).cos();
        self.trace(theta) * C::from_polar(1.0 / self.kappa, -ph)
    }
}

/// `V(s_i) = φ(s_i) κ^{-1} e^{-iκ γ(s_i)·d̂}`.
pub fn neumann_to_v(trace: &TraceGrid, curve: &BoundaryCurve, cfg: &ScatterConfig) -> TraceGrid {
    let s = trace.params();
    TraceGrid {
        values: trace
            .values
            .iter()
            .zip(&s)
            .map(|(v, &t)| v * C::from_polar(1.0 / cfg.kappa, -cfg.kappa * cfg.phase(curve, t)))
            .collect(),
    }
}

/// Inverse of [`neumann_to_v`]: `φ = κ V e^{iκ γ·d̂}`.
pub fn v_to_neumann(v: &TraceGrid, curve: &BoundaryCurve, cfg: &ScatterConfig) -> TraceGrid {
    let s = v.params();
    TraceGrid {
        values: v
            .values
            .iter()
            .zip(&s)
            .map(|(x, &t)| x * C::from_polar(cfg.kappa, cfg.kappa * cfg.phase(curve, t)))
            .collect(),
    }
}

/// Far-field values with a resolution flag.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FarField {
    pub theta: Vec<f64>,
    pub values: Vec<C>,
    /// Set when `N < 6κ·diam`.
    pub under_resolved: bool,
}

impl FarField {
    pub fn sup_diff(&self, other: &FarField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_complex_csv(path, "theta", self.theta.iter().copied().zip(self.values.iter().copied()))
    }
}

/// `F(θ) = -∫_0^{2π} e^{-iκ x̂·γ(s)} φ(s) ‖γ'(s)‖ ds` by the periodic
/// trapezoidal rule.
pub fn far_field(trace: &TraceGrid, curve: &BoundaryCurve, cfg: &ScatterConfig, theta: &[f64]) -> FarField {
    let n = trace.len();
    let s = trace.params();
    let pts: Vec<[f64; 2]> = s.iter().map(|&t| curve.point(t)).collect();
    let w: Vec<C> = s
        .iter()
        .zip(&trace.values)
        .map(|(&t, v)| v * curve.speed(t) * (2.0 * PI / n as f64))
        .collect();
    let values = theta
        .iter()
        .map(|&th| {
            let (sn, cs) = th.sin_cos();
            -pts.iter()
                .zip(&w)
                .map(|(p, wv)| wv * C::from_polar(1.0, -cfg.kappa * (cs * p[0] + sn * p[1])))
                .sum::<C>()
        })
        .collect();
    FarField {
        theta: theta.to_vec(),
        values,
        under_resolved: (n as f64) < 6.0 * cfg.kappa * curve.diameter(),
    }
}

/// Far field of a complex network trace `s ↦ φ(s)` sampled on `n` points.
pub fn far_field_net(net: &ComplexNet, curve: &BoundaryCurve, cfg: &ScatterConfig, n: usize, theta: &[f64]) -> Result<FarField> {
    let tr = TraceGrid::new(net.eval_many(&grid(n)))?;
    Ok(far_field(&tr, curve, cfg, theta))
}

/// Dense Nyström system `A φ = f` at the nodes `s_i = 2πi/N`.
#[derive(Clone, Debug)]
pub struct CfieSystem {
    pub matrix: DMatrix<C>,
    pub rhs: DVector<C>,
    /// Quadrature weights `(2π/N) ‖γ'(s_i)‖` of the `L²(Γ)` inner product.
    pub weights: Vec<f64>,
}

/// Weights `R_j` of `∫ ln(4 sin²((t-τ)/2)) f(τ) dτ ≈ Σ R_{i-j} f(t_j)`.
fn log_weights(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes / 2;
    let nf = n as f64;
    (0..n_nodes)
        .map(|d| {
            let x = PI * d as f64 / nf;
            let s: f64 = (1..n).map(|m| (m as f64 * x).cos() / m as f64).sum();
            -2.0 * PI / nf * s - PI / (nf * nf) * if d % 2 == 0 { 1.0 } else { -1.0 }
        })
        .collect()
}

/// Assembles the CFIE with the logarithmic splitting of the kernels of
/// `K'` and `V`.
pub fn cfie_assemble(curve: &BoundaryCurve, cfg: &ScatterConfig, n: usize) -> Result<CfieSystem> {
    curve.validate()?;
    cfg.validate()?;
    if n < 8 || n % 2 == 1 {
        return Err(Error::InvalidParameter(format!("node count {n} must be even and ≥ 8")));
    }
    let k = cfg.kappa;
    let eta = cfg.eta();
    let s = grid(n);
    let x: Vec<[f64; 2]> = s.iter().map(|&t| curve.point(t)).collect();
    let nv: Vec<[f64; 2]> = s.iter().map(|&t| curve.normal(t)).collect();
    let sp: Vec<f64> = s.iter().map(|&t| curve.speed(t)).collect();
    let rw = log_weights(n);
    let h = PI / (n / 2) as f64;
    let iu = C::new(0.0, 1.0);
    let mut a = DMatrix::<C>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = (i + n - j) % n;
            let (l1, l2) = if i == j {
                let dd = curve.deriv2(s[i]);
                let l1 = iu * (eta / (4.0 * PI)) * sp[i];
                let sl = C::new(-EULER_GAMMA / (2.0 * PI) - (k * sp[i] / 2.0).ln() / (2.0 * PI), 0.25);
                let l2 = (nv[i][0] * dd[0] + nv[i][1] * dd[1]) / (4.0 * PI * sp[i]) - iu * eta * sl * sp[i];
                (l1, l2)
            } else {
                let dx = [x[j][0] - x[i][0], x[j][1] - x[i][1]];
                let r = dx[0].hypot(dx[1]);
                let nd = (nv[i][0] * dx[0] + nv[i][1] * dx[1]) / r;
                let (h0, h1) = hankel01(k * r);
                let kern = iu * (k / 4.0) * h1 * nd * sp[j] + h0 * (eta / 4.0) * sp[j];
                let l1 = C::new(-(k / (4.0 * PI)) * h1.re * nd * sp[j], eta / (4.0 * PI) * h0.re * sp[j]);
                let lg = (4.0 * (0.5 * (s[i] - s[j])).sin().powi(2)).ln();
                (l1, kern - l1 * lg)
            };
            a[(i, j)] = l1 * rw[d] + l2 * h;
        }
        a[(i, i)] += 0.5;
    }
    let rhs = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let nd = nv[i][0] * cfg.direction[0] + nv[i][1] * cfg.direction[1];
            let xd = x[i][0] * cfg.direction[0] + x[i][1] * cfg.direction[1];
            C::new(0.0, k * nd - eta) * C::from_polar(1.0, k * xd)
        }),
    );
    let weights = sp.iter().map(|v| v * 2.0 * PI / n as f64).collect();
    Ok(CfieSystem { matrix: a, rhs, weights })
}

impl CfieSystem {
    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    pub fn apply(&self, phi: &[C]) -> DVector<C> {
        &self.matrix * DVector::from_column_slice(phi)
    }

    /// Dense LU solve with a relative residual check of `1e-12`.
    pub fn solve(&self) -> Result<TraceGrid> {
        let lu = self.matrix.clone().lu();
        let x = lu
            .solve(&self.rhs)
            .ok_or_else(|| Error::Numerical("singular CFIE matrix".into()))?;
        let r = (&self.matrix * &x - &self.rhs).norm() / self.rhs.norm();
        if !(r <= 1e-12) {
            let u = lu.u();
            let d: Vec<f64> = (0..self.size()).map(|i| u[(i, i)].norm()).collect();
            let cond = d.iter().fold(0.0, |a: f64, &b| a.max(b)) / d.iter().fold(f64::INFINITY, |a: f64, &b| a.min(b));
            return Err(Error::Numerical(format!(
                "CFIE residual {r:.2e} exceeds 1e-12 (pivot ratio {cond:.2e})"
            )));
        }
        TraceGrid::new(x.iter().copied().collect())
    }

    /// `Σ_i w_i |f_i - (A φ)_i|²`.
    pub fn residual_loss(&self, phi: &[C]) -> f64 {
        let r = &self.rhs - self.apply(phi);
        r.iter().zip(&self.weights).map(|(v, w)| w * v.norm_sqr()).sum()
    }
}

/// Solves the CFIE on `n` nodes.
pub fn cfie_solve(curve: &BoundaryCurve, cfg: &ScatterConfig, n: usize) -> Result<TraceGrid> {
    cfie_assemble(curve, cfg, n)?.solve()
}

/// Discrete `L²(Γ)` CFIE residual of a network candidate on `n` nodes.
pub fn residual_loss(candidate: &ComplexNet, curve: &BoundaryCurve, cfg: &ScatterConfig, n: usize) -> Result<f64> {
    let sys = cfie_assemble(curve, cfg, n)?;
    Ok(sys.residual_loss(&candidate.eval_many(&grid(n))))
}

/// Coercivity and continuity estimates of the discrete operator in the
/// `L²(Γ)` inner product.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub kappa: f64,
    pub n: usize,
    /// `min Re⟨Aφ, φ⟩/‖φ‖²` over the random trials.
    pub min_trial: f64,
    /// Smallest eigenvalue of the Hermitian part.
    pub min_eigenvalue: f64,
    /// Largest singular value estimate.
    pub operator_norm: f64,
}

/// Rayleigh quotients of random densities plus the spectrum of the
/// Hermitian part of `W^{1/2} A W^{-1/2}`.
pub fn coercivity_probe(curve: &BoundaryCurve, cfg: &ScatterConfig, n: usize, trials: usize, seed: u64) -> Result<CoercivityReport> {
    let sys = cfie_assemble(curve, cfg, n)?;
    let sq: Vec<f64> = sys.weights.iter().map(|w| w.sqrt()).collect();
    let b = DMatrix::from_fn(n, n, |i, j| sys.matrix[(i, j)] * (sq[i] / sq[j]));
    let herm = (&b + b.adjoint()) * C::new(0.5, 0.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut min_trial = f64::INFINITY;
    for _ in 0..trials {
        let v = DVector::from_iterator(n, (0..n).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))));
        let q = (v.adjoint() * &herm * &v)[(0, 0)].re / v.norm_squared();
        min_trial = min_trial.min(q);
    }
    let eig = herm.symmetric_eigenvalues();
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let bh = b.adjoint();
    let mut v = DVector::from_iterator(n, (0..n).map(|_| C::new(rng.sample(StandardNormal), rng.sample(StandardNormal))));
    v /= C::new(v.norm(), 0.0);
    let mut sigma = 0.0;
    for _ in 0..1000 {
        let w = &bh * (&b * &v);
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        let next = nw.sqrt();
        v = w / C::new(nw, 0.0);
        if (next - sigma).abs() <= 1e-10 * next {
            sigma = next;
            break;
        }
        sigma = next;
    }
    Ok(CoercivityReport {
        kappa: cfg.kappa,
        n,
        min_trial,
        min_eigenvalue,
        operator_norm: sigma,
    })
}

/// Problem definition read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub curve: BoundaryCurve,
    pub kappa: f64,
    #[serde(default)]
    pub direction_angle: f64,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

impl ProblemConfig {
    pub fn scatter(&self) -> ScatterConfig {
        ScatterConfig {
            eta: self.eta,
            ..ScatterConfig::with_angle(self.kappa, self.direction_angle)
        }
    }

    /// `N` from the file or `max(64, 16κ·diam/2)` rounded up to even.
    pub fn nodes(&self) -> usize {
        let n = self
            .n
            .unwrap_or_else(|| (64.0f64).max(8.0 * self.kappa * self.curve.diameter()).ceil() as usize);
        n + n % 2
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ProblemConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        c.curve.validate()?;
        c.scatter().validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(kappa: f64) -> (BoundaryCurve, ScatterConfig) {
        (BoundaryCurve::circle(1.0), ScatterConfig::new(kappa))
    }

    #[test]
    fn mie_summation_order_and_symmetry() {
        let m = MieDisk::new(1.0, 1.0, 0.0).unwrap();
        let a = m.trace(PI);
        assert!((a - m.trace_reversed(PI)).norm() < 1e-13 * a.norm());
        for &t in &[0.3, 1.1, 2.9] {
            assert!((m.trace(t) - m.trace(-t)).norm() < 1e-13);
        }
    }

    #[test]
    fn mie_far_field_from_trace() {
        let (c, cfg) = disk(8.0);
        let m = MieDisk::new(8.0, 1.0, 0.0).unwrap();
        let th: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
        let f = far_field(&m.trace_grid(256).unwrap(), &c, &cfg, &th);
        let err = th.iter().zip(&f.values).map(|(&t, v)| (v - m.far_field(t)).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!(!f.under_resolved);
    }

    #[test]
    fn nystrom_matches_mie() {
        for (kappa, n, tol) in [(1.0, 64, 1e-8), (8.0, 128, 1e-8), (32.0, 512, 1e-6)] {
            let (c, cfg) = disk(kappa);
            let phi = cfie_solve(&c, &cfg, n).unwrap();
            let mie = MieDisk::new(kappa, 1.0, 0.0).unwrap().trace_grid(n).unwrap();
            let e = phi.rel_l2(&mie);
            assert!(e < tol, "κ={kappa}: {e:e}");
        }
    }

    #[test]
    fn nystrom_oblique_incidence() {
        let c = BoundaryCurve::circle(1.5);
        let cfg = ScatterConfig::with_angle(4.0, 0.7);
        let phi = cfie_solve(&c, &cfg, 128).unwrap();
        let mie = MieDisk::from_config(&c, &cfg).unwrap().trace_grid(128).unwrap();
        assert!(phi.rel_l2(&mie) < 1e-9);
    }

    #[test]
    fn ellipse_self_convergence() {
        let c = BoundaryCurve::ellipse(1.0, 0.5);
        let cfg = ScatterConfig::new(8.0);
        let a = cfie_solve(&c, &cfg, 128).unwrap();
        let b = cfie_solve(&c, &cfg, 256).unwrap();
        let sub = TraceGrid::new(b.values.iter().step_by(2).copied().collect()).unwrap();
        assert!(a.rel_l2(&sub) < 1e-8, "{}", a.rel_l2(&sub));
    }

    #[test]
    fn decomposition_round_trip() {
        let (c, cfg) = disk(32.0);
        let m = MieDisk::new(32.0, 1.0, 0.0).unwrap();
        let phi = m.trace_grid(256).unwrap();
        let v = neumann_to_v(&phi, &c, &cfg);
        let back = v_to_neumann(&v, &c, &cfg);
        assert!(back.rel_l2(&phi) < 1e-14);
        let s = v.params();
        assert!((v.values[7] - m.v(s[7])).norm() < 1e-13);
    }

    #[test]
    fn far_field_linear_and_stable() {
        let (c, cfg) = disk(8.0);
        let th: Vec<f64> = (0..16).map(|k| k as f64 * 0.4).collect();
        let z = TraceGrid::new(vec![C::new(0.0, 0.0); 64]).unwrap();
        assert!(far_field(&z, &c, &cfg, &th).values.iter().all(|v| v.norm() == 0.0));
        let p = TraceGrid::sample(64, |s| C::new(s.cos(), 1.0)).unwrap();
        let q = TraceGrid::sample(64, |s| C::new(0.0, (3.0 * s).sin())).unwrap();
        let (a, b) = (C::new(0.5, -2.0), C::new(1.5, 0.25));
        let mix = TraceGrid::new(p.values.iter().zip(&q.values).map(|(x, y)| a * x + b * y).collect()).unwrap();
        let fm = far_field(&mix, &c, &cfg, &th);
        let fp = far_field(&p, &c, &cfg, &th);
        let fq = far_field(&q, &c, &cfg, &th);
        for k in 0..th.len() {
            assert!((fm.values[k] - a * fp.values[k] - b * fq.values[k]).norm() < 1e-12);
        }
        let delta = 1e-3;
        let pert = TraceGrid::new(p.values.iter().map(|v| v + C::new(0.0, delta)).collect()).unwrap();
        let diff = far_field(&pert, &c, &cfg, &th).sup_diff(&fp);
        assert!(diff <= 2.0 * PI * c.max_speed() * delta * (1.0 + 1e-12));
        assert!(fp.under_resolved);
    }

    #[test]
    fn residual_loss_behaviour() {
        let (c, cfg) = disk(4.0);
        let sys = cfie_assemble(&c, &cfg, 64).unwrap();
        let phi = sys.solve().unwrap();
        assert!(sys.residual_loss(&phi.values) < 1e-20);
        let zero = vec![C::new(0.0, 0.0); 64];
        let f2: f64 = sys.rhs.iter().zip(&sys.weights).map(|(v, w)| w * v.norm_sqr()).sum();
        assert!((sys.residual_loss(&zero) - f2).abs() < 1e-12 * f2);
        let mut prev = f64::INFINITY;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let cand: Vec<C> = phi.values.iter().map(|v| v * t).collect();
            let l = sys.residual_loss(&cand);
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn coercivity_and_grid_stability() {
        let (c, cfg) = disk(16.0);
        let a = coercivity_probe(&c, &cfg, 128, 20, 1).unwrap();
        let b = coercivity_probe(&c, &cfg, 256, 20, 1).unwrap();
        assert!(a.min_eigenvalue > 0.0 && a.min_trial >= a.min_eigenvalue - 1e-12);
        assert!(((a.min_eigenvalue - b.min_eigenvalue) / b.min_eigenvalue).abs() < 0.05);
        assert!(((a.operator_norm - b.operator_norm) / b.operator_norm).abs() < 0.05);
    }

    #[test]
    fn curve_checks_and_config() {
        let e = BoundaryCurve::ellipse(2.0, 1.0);
        e.validate().unwrap();
        assert!((e.curvature(0.0) - 2.0).abs() < 1e-12);
        assert!(BoundaryCurve::circle(-1.0).validate().is_err());
        let p = ProblemConfig::from_json(r#"{"curve":{"kind":"ellipse","a":2,"b":1},"kappa":8}"#).unwrap();
        assert_eq!(p.scatter().eta(), 8.0);
        assert_eq!(p.nodes() % 2, 0);
        assert!(ProblemConfig::from_json(r#"{"curve":{"kind":"circle","radius":1},"kappa":-1}"#).is_err());
    }

    #[test]
    fn interpolation_reproduces_trig_polynomials() {
        let g = TraceGrid::sample(32, |s| C::new((3.0 * s).cos(), (5.0 * s).sin())).unwrap();
        for &t in &[0.1, 1.7, 4.0] {
            assert!((g.interpolate(t) - C::new((3.0 * t).cos(), (5.0 * t).sin())).norm() < 1e-13);
        }
    }
}
