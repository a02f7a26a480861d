//! Simulation and numerical analysis of singularly perturbed hybrid
//! dynamical systems.
//!
//! The crate is generic over the scalar type (see [`Scalar`]); the `*F64`
//! and `*F32` aliases below name the common instantiations.

pub mod error;
pub mod analysis;
pub mod hybrid;
pub mod perturbation;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type HybridSystemF64 = hybrid::HybridSystem<f64>;
pub type HybridArcF64 = hybrid::HybridArc<f64>;
pub type SetDescriptorF64 = hybrid::SetDescriptor<f64>;
pub type SolverConfigF64 = hybrid::SolverConfig<f64>;

pub type HybridSystemF32 = hybrid::HybridSystem<f32>;
pub type HybridArcF32 = hybrid::HybridArc<f32>;
pub type SetDescriptorF32 = hybrid::SetDescriptor<f32>;
pub type SolverConfigF32 = hybrid::SolverConfig<f32>;
