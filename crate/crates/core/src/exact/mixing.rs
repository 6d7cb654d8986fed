//! Exact mixing times.
//!
//! The supremum over initial laws is taken over point masses: both total
//! variation and `Var_π(ν_t/π)` are convex in `ν`, so the worst initial law
//! is a vertex of the simplex. All `2^N` rows of `e^{tQ}` are carried along
//! and advanced incrementally between probe times.

use serde::Serialize;

use super::evolve::evolve_rows;
use super::generator::{build_generator, Generator};
use super::spectrum::spectral_gap;
use super::ExactOptions;
use crate::error::{KcmError, Result};
use crate::lattice::{Model, Region};
use crate::measure::{chi_square_slices, tv_slices};
use crate::par;

/// Largest state space for which all rows of `e^{tQ}` are held in memory.
pub const MIXING_STATE_LIMIT: usize = 1 << 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    /// `‖ν_t − π‖_TV`, giving `T_mix`.
    Tv,
    /// `Var_π(ν_t / π)`, giving `T_2`.
    Chi2,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixingResult {
    pub time: f64,
    pub mode: DistanceMode,
    pub threshold: f64,
    pub gap: f64,
    /// Initial bracket `[0, 20 N / gap]`, after any doubling.
    pub bracket: (f64, f64),
    /// Every `(t, worst-case distance)` evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

impl MixingResult {
    /// Worst-case distance is nonincreasing in `t` along the trace.
    pub fn trace_is_monotone(&self, slack: f64) -> bool {
        let mut sorted = self.trace.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        sorted.windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }
}

fn worst_distance(rows: &[Vec<f64>], pi: &[f64], mode: DistanceMode) -> f64 {
    let d = par::map_slice(rows, |row| match mode {
        DistanceMode::Tv => tv_slices(row, pi),
        DistanceMode::Chi2 => chi_square_slices(row, pi),
    });
    d.into_iter().fold(0.0, f64::max)
}

fn identity_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|s| {
            let mut r = vec![0.0; n];
            r[s] = 1.0;
            r
        })
        .collect()
}

/// Worst-case distance to `π` at time `t` over all point-mass initial states.
pub fn worst_case_distance(gen: &Generator, t: f64, mode: DistanceMode, tolerance: f64) -> Result<f64> {
    check_rows(gen)?;
    let mut rows = identity_rows(gen.num_states());
    evolve_rows(gen, &mut rows, t, tolerance)?;
    Ok(worst_distance(&rows, gen.stationary(), mode))
}

fn check_rows(gen: &Generator) -> Result<()> {
    if gen.num_states() > MIXING_STATE_LIMIT {
        return Err(KcmError::Capacity {
            states: gen.num_states() as u128,
            cap: MIXING_STATE_LIMIT,
        });
    }
    Ok(())
}

/// Smallest `t` (to `opts.time_tolerance`) with worst-case distance ≤ `threshold`.
pub fn mixing_time_exact(
    model: &Model,
    threshold: f64,
    mode: DistanceMode,
    opts: &ExactOptions,
) -> Result<MixingResult> {
    if !(threshold > 0.0) {
        return Err(KcmError::Range(format!("threshold must be positive, got {threshold}")));
    }
    let gen = build_generator(model, &Region::full(model), opts.state_cap)?;
    check_rows(&gen)?;
    let gap = spectral_gap(&gen)?.gap;
    let pi = gen.stationary().to_vec();
    let tol = opts.tolerance;

    let mut trace = Vec::new();
    let mut lo = 0.0;
    let mut rows_lo = identity_rows(gen.num_states());
    let d0 = worst_distance(&rows_lo, &pi, mode);
    trace.push((0.0, d0));
    let mut bracket_hi = 20.0 * model.num_sites() as f64 / gap;
    if d0 <= threshold {
        return Ok(MixingResult {
            time: 0.0,
            mode,
            threshold,
            gap,
            bracket: (0.0, bracket_hi),
            trace,
        });
    }

    // Gallop upward from t = 1/Λ_u (capped by the bracket) until the distance
    // falls below the threshold; rows are advanced from the last failing probe.
    let mut probe = (1.0 / gen.uniformization_rate()).min(bracket_hi);
    let hi = loop {
        let mut rows = rows_lo.clone();
        evolve_rows(&gen, &mut rows, probe - lo, tol)?;
        let d = worst_distance(&rows, &pi, mode);
        trace.push((probe, d));
        if d <= threshold {
            break probe;
        }
        lo = probe;
        rows_lo = rows;
        if probe >= bracket_hi {
            bracket_hi *= 2.0;
            log::info!("mixing-time bracket expanded to {bracket_hi}");
        }
        probe = (probe * 2.0).min(bracket_hi);
        if !probe.is_finite() || probe > 1e12 {
            return Err(KcmError::Convergence("mixing time bracket diverged".into()));
        }
    };

    let mut hi = hi;
    while hi - lo > opts.time_tolerance {
        let mid = 0.5 * (lo + hi);
        let mut rows = rows_lo.clone();
        evolve_rows(&gen, &mut rows, mid - lo, tol)?;
        let d = worst_distance(&rows, &pi, mode);
        trace.push((mid, d));
        if d <= threshold {
            hi = mid;
        } else {
            lo = mid;
            rows_lo = rows;
        }
    }
    Ok(MixingResult {
        time: hi,
        mode,
        threshold,
        gap,
        bracket: (0.0, bracket_hi),
        trace,
    })
}
