//! Numerical oracles: Airy, Bessel and Hankel functions, and Fock's
//! integral with its derivatives and empirical tail coefficients.

mod airy;
pub(crate) mod bessel;
mod fock;
pub mod quad;

pub use airy::{airy_ai, airy_pair, airy_pair_continued, airy_rightmost_root, airy_roots, airy_series, log_airy, AI0, DAI0};
pub use bessel::{bessel, bessel_table, hankel01, BesselKind, BesselTable};
pub use fock::{
    fock_minus_constant, fock_minus_fit, fock_pole, fock_psi, fock_psi_all, fock_tail_coeffs, fock_tail_fit,
    linear_fit, FockContour, FockOracleConfig, FockTail, FockValues, TailFit, MAX_DERIVATIVE,
};
