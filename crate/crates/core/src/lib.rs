//! Parabolic nonlinear potential theory at desk scale.
//!
//! The crate evaluates Riesz, Wolff, maximal and kernel potentials of
//! space-time measures, estimates parabolic capacities, computes Lorentz and
//! Lorentz–Morrey norms, solves the heat equation with measure data and runs
//! the fixed-point schemes for Lane–Emden and Riccati type problems. Every
//! quantitative inequality of the theory is exposed as a check that returns a
//! [`report::VerificationReport`] with empirically fitted constants.

pub mod capacity;
pub mod error;
pub mod fixedpoint;
pub mod heat;
pub mod geometry;
pub mod grid;
pub mod measure;
pub mod overlap;
pub mod norms;
pub mod potentials;
pub mod report;

pub use error::{Error, Result};
pub use geometry::{parabolic_distance, CylinderVariant, ParabolicCylinder, SpaceTimePoint};
pub use grid::{GridFunction, GridSpec};
pub use measure::{cylinder_measure, decompose_signed, Atom, Density, DiscreteMeasure};
