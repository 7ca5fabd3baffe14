//! Adaptive Gauss–Kronrod (7, 15) quadrature of vector-valued complex
//! integrands on a real interval.

use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

struct Panel {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    err: Vec<f64>,
    l1: Vec<f64>,
}

fn panel<F: FnMut(f64, &mut [Complex64])>(f: &mut F, a: f64, b: f64, dim: usize) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let zero = Complex64::new(0.0, 0.0);
    let mut k = vec![zero; dim];
    let mut g = vec![zero; dim];
    let mut l1 = vec![0.0; dim];
    let mut buf = vec![zero; dim];
    for i in 0..8 {
        let xs: &[f64] = if i == 7 { &[0.0] } else { &[-1.0, 1.0] };
        for s in xs {
            f(c + s * h * XGK[i], &mut buf);
            for d in 0..dim {
                k[d] += buf[d] * WGK[i];
                l1[d] += buf[d].norm() * WGK[i] * h.abs();
                if i % 2 == 1 {
                    g[d] += buf[d] * WG[i / 2];
                }
            }
        }
    }
    let err = (0..dim)
        .map(|d| {
            k[d] *= h;
            g[d] *= h;
            (k[d] - g[d]).norm()
        })
        .collect();
    Panel { a, b, value: k, err, l1 }
}

/// Result of an adaptive integration, per component.
pub struct Quadrature {
    pub value: Vec<Complex64>,
    /// Summed Gauss–Kronrod error estimates.
    pub error: Vec<f64>,
    /// `∫ |f|`, the scale below which cancellation makes digits unattainable.
    pub l1: Vec<f64>,
    pub panels: usize,
}

/// Tolerances for [`integrate`]. Component `d` is accepted once its error
/// estimate is at most `max(abs, rel·|value_d|, floor·∫|f_d|)`.
#[derive(Clone, Copy, Debug)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
    pub floor: f64,
    pub init: usize,
    pub max_panels: usize,
}

impl Default for QuadTol {
    fn default() -> Self {
        QuadTol {
            abs: 1e-13,
            rel: 1e-12,
            floor: 1e-14,
            init: 4,
            max_panels: 4000,
        }
    }
}

/// Integrates the vector-valued `f` over `[a, b]`, bisecting the panel
/// with the largest error relative to the component allowances.
pub fn integrate<F: FnMut(f64, &mut [Complex64])>(mut f: F, a: f64, b: f64, dim: usize, tol: &QuadTol) -> Quadrature {
    let init = tol.init.max(1);
    let mut panels: Vec<Panel> = (0..init)
        .map(|i| {
            let lo = a + (b - a) * i as f64 / init as f64;
            let hi = a + (b - a) * (i + 1) as f64 / init as f64;
            panel(&mut f, lo, hi, dim)
        })
        .collect();
    loop {
        let mut value = vec![Complex64::new(0.0, 0.0); dim];
        let mut error = vec![0.0; dim];
        let mut l1 = vec![0.0; dim];
        for p in &panels {
            for d in 0..dim {
                value[d] += p.value[d];
                error[d] += p.err[d];
                l1[d] += p.l1[d];
            }
        }
        let allow: Vec<f64> = (0..dim)
            .map(|d| tol.abs.max(tol.rel * value[d].norm()).max(tol.floor * l1[d]))
            .collect();
        let done = (0..dim).all(|d| error[d] <= allow[d]);
        if done || panels.len() >= tol.max_panels {
            return Quadrature {
                value,
                error,
                l1,
                panels: panels.len(),
            };
        }
        let score = |p: &Panel| (0..dim).map(|d| p.err[d] / allow[d]).fold(0.0, f64::max);
        let worst = (0..panels.len())
            .max_by(|&x, &y| score(&panels[x]).total_cmp(&score(&panels[y])))
            .unwrap();
        let w = panels.swap_remove(worst);
        let m = 0.5 * (w.a + w.b);
        panels.push(panel(&mut f, w.a, m, dim));
        panels.push(panel(&mut f, m, w.b, dim));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_oscillatory() {
        let q = integrate(
            |x, out| {
                out[0] = Complex64::new(x * x, 0.0);
                out[1] = Complex64::new(0.0, x).exp();
            },
            0.0,
            3.0,
            2,
            &QuadTol { abs: 1e-14, rel: 0.0, floor: 0.0, init: 1, max_panels: 500 },
        );
        assert!((q.value[0].re - 9.0).abs() < 1e-13);
        let exact = (Complex64::new(0.0, 3.0).exp() - 1.0) / Complex64::new(0.0, 1.0);
        assert!((q.value[1] - exact).norm() < 1e-13);
    }

    #[test]
    fn sharp_gaussian() {
        let q = integrate(
            |x, out| out[0] = Complex64::new((-(x - 0.3) * (x - 0.3) * 1e4).exp(), 0.0),
            -5.0,
            5.0,
            1,
            &QuadTol { abs: 1e-13, rel: 0.0, floor: 0.0, init: 16, max_panels: 1000 },
        );
        let exact = std::f64::consts::PI.sqrt() / 100.0;
        assert!((q.value[0].re - exact).abs() < 1e-12, "{}", q.value[0].re);
    }
}
