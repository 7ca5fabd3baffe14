//! Constructive ReLU network emulators for high-frequency scattering.

pub mod blocks;
pub mod calculus;
pub mod chain;
pub mod cheb;
pub mod emulate;
pub mod error;
pub mod format;
pub mod harness;
pub mod network;
pub mod scattering;
pub mod special;

pub use error::{Error, Result};
pub use network::{
    bounded_affine, build_primitive, parallel, AffineLayer, CompiledNet, ComplexNet, EmulatorNet, NetworkStats,
    Primitive, ReluNetwork, Wiring,
};
