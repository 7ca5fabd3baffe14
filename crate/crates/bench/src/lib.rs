//! Criterion benchmarks for network construction, evaluation and the
//! numerical oracles. Run with `cargo bench -p hfnet-bench`.

/// Uniform grid shared by the evaluation benchmarks.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
