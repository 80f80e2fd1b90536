//! Spin-orbit-coupled quantum hydrodynamics.
//!
//! Two independent routes to the same physics live side by side:
//!
//! * [`bohmion`]: a finite ensemble of weighted computational particles, each
//!   carrying position, momentum and a spin vector, interacting through
//!   mollifier-regularized pair integrals ([`kernel`]).
//! * [`pauli`]: an exact spectral propagator for the planar Pauli equation with
//!   Rashba coupling, plus extraction of the gauge-invariant Madelung fields.
//!
//! [`diagnostics`] evaluates the hydrodynamic identities (spin current
//! decomposition, anomalous continuity, circulation balance, purity) on
//! spectral snapshots.

pub mod bohmion;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod params;
pub mod pauli;

pub use ensemble::{validate_ensemble, Bohmion, BohmionEnsemble, Violation};
pub use error::{Error, Result};
pub use grid::{Grid2, SpinorField};
pub use params::{PhysicalParams, PolyTerm, PotentialKind, PotentialSpec};

/// Three-component real vector. Planar quantities keep `z = 0`.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 real matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Relative density threshold below which Madelung variables are treated as
/// undefined (vacuum).
pub const SUPPORT_THRESHOLD: f64 = 1e-8;
