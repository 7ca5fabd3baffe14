//! Least-squares fits of depth data and model comparison.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A fitted model with its residual in log-depth space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub model: String,
    pub coeffs: Vec<f64>,
    /// `Σ (ln y - ln ŷ)²`.
    pub rss_log: f64,
    /// `n ln(RSS/n) + 2k`.
    pub aic: f64,
}

/// Ordinary least squares for `y ≈ X c` with the columns of `X` given.
pub fn ols(columns: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let (n, k) = (y.len(), columns.len());
    let x = DMatrix::from_fn(n, k, |r, c| columns[c][r]);
    let b = DVector::from_column_slice(y);
    let svd = x.svd(true, true);
    let c = svd.solve(&b, 1e-14).expect("svd has both factors");
    c.iter().copied().collect()
}

fn aic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + 2.0 * k as f64
}

fn log_rss(y: &[f64], pred: impl Fn(usize) -> f64) -> f64 {
    y.iter()
        .enumerate()
        .map(|(i, &v)| {
            let p = pred(i);
            if p > 0.0 {
                (v.ln() - p.ln()).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

/// `y ≈ c₁ + c₂ (ln κ)²`, fitted by OLS.
pub fn fit_polylog(kappa: &[f64], y: &[f64]) -> ModelFit {
    let l2: Vec<f64> = kappa.iter().map(|k| k.ln().powi(2)).collect();
    let c = ols(&[vec![1.0; y.len()], l2.clone()], y);
    let rss = log_rss(y, |i| c[0] + c[1] * l2[i]);
    ModelFit {
        model: "c1 + c2 (ln kappa)^2".into(),
        coeffs: c,
        rss_log: rss,
        aic: aic(rss, y.len(), 2),
    }
}

/// `y ≈ c κ^p` fitted by OLS on `ln y`, with `p` constrained to
/// `p ≥ p_min` when given (the constrained optimum sits on the boundary
/// when the free slope is below it).
pub fn fit_power(kappa: &[f64], y: &[f64], p_min: Option<f64>) -> ModelFit {
    let lk: Vec<f64> = kappa.iter().map(|k| k.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mut c = ols(&[vec![1.0; y.len()], lk.clone()], &ly);
    let mut model = "c kappa^p".to_string();
    if let Some(pm) = p_min {
        if c[1] < pm {
            let shift = ly.iter().zip(&lk).map(|(a, b)| a - pm * b).sum::<f64>() / y.len() as f64;
            c = vec![shift, pm];
            model = format!("c kappa^p, p >= {pm}");
        }
    }
    let rss = log_rss(y, |i| (c[0] + c[1] * lk[i]).exp());
    ModelFit {
        model,
        coeffs: vec![c[0].exp(), c[1]],
        rss_log: rss,
        aic: aic(rss, y.len(), 2),
    }
}

/// Polylog model against the power law with `p ≥ p_min` and the free one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub polylog: ModelFit,
    pub power_constrained: ModelFit,
    pub power_free: ModelFit,
    /// Whether the polylog model has the smaller residual.
    pub polylog_preferred: bool,
}

pub fn compare_models(kappa: &[f64], y: &[f64], p_min: f64) -> ModelComparison {
    let polylog = fit_polylog(kappa, y);
    let power_constrained = fit_power(kappa, y, Some(p_min));
    let power_free = fit_power(kappa, y, None);
    let polylog_preferred = polylog.rss_log < power_constrained.rss_log;
    ModelComparison {
        polylog,
        power_constrained,
        power_free,
        polylog_preferred,
    }
}

/// Exponent `p` of a residual `ε^{-p}` factor after dividing the depths by
/// `(ln 1/ε)^m`: the slope of `ln(y / (ln 1/ε)^m)` against `ln(1/ε)`.
pub fn eps_exponent(eps: &[f64], y: &[f64], m: f64) -> f64 {
    let le: Vec<f64> = eps.iter().map(|e| (1.0 / e).ln()).collect();
    let z: Vec<f64> = y.iter().zip(&le).map(|(v, l)| v.ln() - m * l.ln()).collect();
    ols(&[vec![1.0; y.len()], le], &z)[1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let k = [32.0, 64.0, 128.0, 256.0, 512.0];
        let y: Vec<f64> = k.iter().map(|v: &f64| 3.0 * v.powf(0.5)).collect();
        let f = fit_power(&k, &y, None);
        assert!((f.coeffs[0] - 3.0).abs() < 1e-9 && (f.coeffs[1] - 0.5).abs() < 1e-12);
        assert!(!compare_models(&k, &y, 0.2).polylog_preferred);
    }

    #[test]
    fn recovers_polylog() {
        let k = [32.0, 64.0, 128.0, 256.0, 512.0];
        let y: Vec<f64> = k.iter().map(|v: &f64| 1000.0 + 20.0 * v.ln().powi(2)).collect();
        let f = fit_polylog(&k, &y);
        assert!((f.coeffs[0] - 1000.0).abs() < 1e-6 && (f.coeffs[1] - 20.0).abs() < 1e-9);
        let c = compare_models(&k, &y, 0.2);
        assert!(c.polylog_preferred, "{c:?}");
        assert_eq!(c.power_constrained.coeffs[1], 0.2);
    }

    #[test]
    fn log_depth_has_no_power() {
        let e = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];
        let y: Vec<f64> = e.iter().map(|v: &f64| 4.0 + 3.0 * (1.0 / v).ln()).collect();
        assert!(eps_exponent(&e, &y, 1.0) <= 0.05);
        let z: Vec<f64> = e.iter().map(|v: &f64| v.powf(-0.3)).collect();
        assert!(eps_exponent(&e, &z, 1.0) > 0.1);
    }
}
