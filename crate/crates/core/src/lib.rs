//! Learning the coefficients of damped, coupled second-order ODEs from
//! sampled trajectories.
//!
//! The central model replaces a residual block with a second-order
//! backward/central difference step whose coefficients are the physical
//! constants of the oscillator chain. Training a single step on observed
//! positions recovers those constants (up to a common scale), and the
//! trained step can then be iterated as a free forecast.
//!
//! When only the first oscillator of a two-mass chain is observed, a
//! stencil-based mapping reconstructs the hidden trajectory from the observed
//! one, sharing weights with the solver.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! finite-difference stencils can additionally be generated in exact rational
//! arithmetic. Concrete `f64` aliases live at the crate root.

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod mapping;
pub mod scalar;
pub mod simulator;
pub mod solver;
pub mod training;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use types::{
    canonical_to_combined, projection_from_canonical, CanonicalWeights, CombinedWeights, MappingParams, MappingWeights,
    Padding, Trajectory,
};

/// Default sampling step in seconds, shared by all reproduced experiments.
pub const DEFAULT_DELTA: f64 = 0.0667;

pub type Trajectory64 = types::Trajectory<f64>;
pub type CanonicalWeights64 = types::CanonicalWeights<f64>;
pub type CombinedWeights64 = types::CombinedWeights<f64>;
pub type MappingParams64 = types::MappingParams<f64>;
pub type Stencil64 = mapping::Stencil<f64>;
pub type ExactStencil = mapping::Stencil<num_rational::BigRational>;
pub type StencilBank64 = mapping::StencilBank<f64>;
pub type FitReport64 = training::FitReport<f64>;

pub type Trajectory32 = types::Trajectory<f32>;
pub type CanonicalWeights32 = types::CanonicalWeights<f32>;
