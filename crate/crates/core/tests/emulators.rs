use hfnet::emulate::{
    build_fock_emulator, build_trace_emulator, build_v_emulator_generic, fock_kappa_floor, TraceVSource, VSource,
};
use hfnet::scattering::{cfie_solve, BoundaryCurve, MieDisk, ScatterConfig};
use hfnet::special::{fock_psi, FockOracleConfig};
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

fn fock_case(ell: usize) {
    let (kappa, eps, a) = (64.0, 1e-1, 3.0);
    let (net, r) = build_fock_emulator(kappa, 2, ell, eps, a).unwrap();
    assert!(r.certified && r.achieved <= eps);
    assert!(r.ledger_sound(), "{:?}", r.ledger);
    let s = net.stats();
    assert!(s.width <= 30, "{s:?}");
    let h = kappa.cbrt() * a;
    let cfg = FockOracleConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11 + ell as u64);
    let xs: Vec<f64> = (0..200).map(|_| rng.random_range(-h..h)).collect();
    let got = net.eval_many(&xs);
    for (x, y) in xs.iter().zip(&got) {
        let want = fock_psi(*x, ell, &cfg).unwrap();
        assert!((y - want).norm() <= eps, "tau {x}: {y} vs {want}");
    }
}

#[test]
fn fock_value_on_random_points() {
    fock_case(0);
}

#[test]
fn fock_derivative_on_random_points() {
    fock_case(1);
}

#[test]
fn fock_rejects_small_wavenumber() {
    let floor = fock_kappa_floor(2, 0, 1e-1, 3.0).unwrap();
    assert!(floor > 1.0);
    assert!(build_fock_emulator(floor * 0.5, 2, 0, 1e-1, 3.0).is_err());
    assert!(build_fock_emulator(64.0, 2, 5, 1e-1, 3.0).is_err());
}

#[test]
fn generic_envelope_against_series() {
    let kappa = 32.0;
    let mie = MieDisk::new(kappa, 1.0, 0.0).unwrap();
    let m = mie.clone();
    let v = VSource::oracle(move |s| m.v(s));
    let (net, r) = build_v_emulator_generic(&v, kappa, 2, 1e-2).unwrap();
    assert!(r.certified && net.stats().width <= 15);
    let xs: Vec<f64> = (0..997).map(|i| 2.0 * PI * (i as f64 + 0.37) / 997.0).collect();
    for (x, y) in xs.iter().zip(net.eval_many(&xs)) {
        assert!((y - mie.v(*x)).norm() <= 1e-2);
    }
}

#[test]
fn trace_on_ellipse_against_nystrom() {
    let kappa = 8.0;
    let curve = BoundaryCurve::Ellipse { a: 1.0, b: 0.6, angle: 0.3 };
    let cfg = ScatterConfig::new(kappa);
    let n = 256;
    let reference = cfie_solve(&curve, &cfg, n).unwrap();
    let v = hfnet::scattering::neumann_to_v(&reference, &curve, &cfg);
    let src = TraceVSource::Generic(VSource::Grid(v));
    let t = build_trace_emulator(&curve, &cfg, &src, 2, 5e-2).unwrap();
    assert!(t.report.certified && t.net.stats().width <= 42);
    assert!(t.far_field_gap <= t.far_field_bound);
    assert!(t.residual * 1e3 <= t.residual_zero);
    let xs: Vec<f64> = (0..301).map(|i| 2.0 * PI * (i as f64 + 0.5) / 301.0).collect();
    for (x, y) in xs.iter().zip(t.net.eval_many(&xs)) {
        assert!((y - reference.interpolate(*x)).norm() <= 5e-2);
    }
}
