//! Kinetic-theory toolkit for the polyatomic ellipsoidal BGK model.
//!
//! The crate discretizes distributions f(v, I) on a truncated velocity
//! lattice times an internal-energy rule, extracts macroscopic fields and
//! equipartition temperatures, builds the anisotropic polyatomic Gaussian
//! relaxation target, evaluates the entropy production functional together
//! with its positive decomposition (a relative-entropy part plus a remainder
//! with a closed eigenvalue form), and integrates relaxation dynamics in
//! time, space-homogeneous or on a 1D periodic slab.
//!
//! Everything here is pure computation over `alloc`; IO, file formats, and
//! the command-line front end live in the companion `polykin-cli` crate.
//!
//! Units are dimensionless with the Boltzmann constant set to one.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod entropy;
pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod math;
pub mod moments;
pub mod quadrature;
pub mod relaxation;
pub mod sampler;

pub use error::{KineticError, Result};
pub use gaussian::Params;
pub use linalg::{Mat3, Vec3};
pub use moments::{Distribution, MacroState};
pub use quadrature::{Grid, GridSpec};
