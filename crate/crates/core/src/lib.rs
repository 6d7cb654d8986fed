//! Oriented kinetically constrained spin models on `{1..n}^d`.
//!
//! * [`lattice`]: geometry, constraint families, constraint-closed regions.
//! * [`measure`]: spin configurations, product measures, distances.
//! * [`dynamics`]: seeded graphical construction and trajectory functionals.
//! * [`exact`]: generators, spectral gaps, uniformization, mixing times.
//! * [`experiments`]: studies and result persistence.

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod lattice;
pub mod measure;
pub mod par;

pub use error::{KcmError, Result};
pub use lattice::{ConstraintFamily, Geometry, Model, Region, RegionLabel};
pub use measure::{Distribution, SpinConfig};
