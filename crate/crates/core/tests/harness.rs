use hfnet::harness::{
    build, measure_error, run_criterion, run_sweep, BuildSpec, Builder, SweepConfig, VerifyOptions,
};
use num_complex::Complex64 as C;

#[test]
fn kappa_sweep_reports_model_fits() {
    let cfg = SweepConfig::from_json(r#"{"id":"vg","builder":"v_generic","kappas":[8,16,32],"eps":[0.1]}"#).unwrap();
    let (r, t) = run_sweep(&cfg, 1).unwrap();
    assert!(r.all_certified(), "{:?}", r.rows);
    assert_eq!(r.fits.kappa.len(), 1);
    assert_eq!(t.row_seconds.len(), 3);
    assert!(r.rows.iter().all(|row| row.stats.unwrap().width <= 15));
}

#[test]
fn failed_rows_are_recorded() {
    let cfg = SweepConfig::from_json(r#"{"id":"f","builder":"fock","kappas":[1],"eps":[0.1]}"#).unwrap();
    let (r, _) = run_sweep(&cfg, 1).unwrap();
    assert!(!r.all_certified());
    assert!(r.rows[0].error.as_deref().unwrap().contains("floor"));
}

#[test]
fn measured_error_matches_builder() {
    let o = build(&BuildSpec::new(Builder::Reciprocal, 1e-3)).unwrap();
    let m = measure_error(&o.net, |x| Ok(C::new(1.0 / x, 0.0)), 1.0, 100.0, 10_000).unwrap();
    assert_eq!(m.sup, o.summary.achieved);
    assert!(m.l2 <= m.sup * 99f64.sqrt());
}

#[test]
fn verify_is_reproducible() {
    let opts = VerifyOptions::default();
    let a = run_criterion(6, &opts);
    let b = run_criterion(6, &opts);
    assert!(a.passed);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(!run_criterion(99, &opts).passed);
}
