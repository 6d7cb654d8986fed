//! Scripted studies over the simulation and exact layers, and their
//! persistence.

mod decay;
mod fk;
pub mod report;
mod schedule;
mod shape;
pub mod stats;
mod tau;
mod validation;

pub use decay::{diagonal_decay_study, diagonal_initial_law, DecayStudy};
pub use fk::{feynman_kac_study, legal_time_samples, FkMonteCarlo, FkStudy};
pub use report::{metadata, model_hash, write_report, StudyReport, Table, CODE_VERSION};
pub use schedule::{integral_of_log_cube, mixing_schedule, Schedule};
pub use shape::{
    front_profile, hausdorff, scaled_cells, shape_study, FrontProfile, ProfileSummary, ShapeOptions,
    ShapeStudy,
};
pub use tau::{tau_samples, tau_star_scaling, TauOptions, TauPoint, TauStudy, MAX_CAPPED_FRACTION};
pub use validation::{
    mc_exact_validation, mc_exact_validation_against, validation_tolerance, ValidationStudy,
};
