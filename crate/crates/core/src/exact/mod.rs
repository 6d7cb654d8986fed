//! Exact finite-state analysis over `{0,1}^region`.

mod evolve;
mod feynman_kac;
mod generator;
mod lsi;
mod mixing;
mod spectrum;

pub use evolve::{evolve_distribution, DEFAULT_TOLERANCE};
pub use feynman_kac::{
    analytic_c0, feynman_kac_beta, feynman_kac_beta_at, fk_expectation, C0Bound,
    FeynmanKacCheck, FeynmanKacResult, CHECK_TIMES,
};
pub use generator::{build_generator, Generator};
pub use lsi::{lsi_upper_bound, LsiBound};
pub use mixing::{mixing_time_exact, worst_case_distance, DistanceMode, MixingResult, MIXING_STATE_LIMIT};
pub use spectrum::{
    spectral_gap, spectral_gap_with, EigenMethod, SpectrumResult, DENSE_LIMIT, RESIDUAL_TOLERANCE,
};


use crate::measure::DEFAULT_STATE_CAP;

#[derive(Clone, Debug, PartialEq)]
pub struct ExactOptions {
    pub state_cap: usize,
    /// Uniformization truncation tolerance.
    pub tolerance: f64,
    /// Bisection tolerance in time for mixing times.
    pub time_tolerance: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            state_cap: DEFAULT_STATE_CAP,
            tolerance: DEFAULT_TOLERANCE,
            time_tolerance: 1e-4,
        }
    }
}
