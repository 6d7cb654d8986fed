//! Relaxation of a single diagonal: start from `π` below `H_i` and all ones
//! on `H_i`, evolve on `U_i`, and compare with `2 i^d e^{−c_0 t}`.

use serde::Serialize;
use serde_json::json;

use super::report::{metadata, StudyReport, Table};
use super::stats::linear_fit;
use crate::error::{range, Result};
use crate::exact::{
    analytic_c0, build_generator, evolve_distribution, spectral_gap, C0Bound, ExactOptions,
};
use crate::lattice::{Model, Region};
use crate::measure::{product_distribution, tv_distance, Distribution};

/// Distances below this are treated as numerical noise when fitting.
const FIT_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct DecayStudy {
    pub level: usize,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Minus the slope of `ln TV` against `t` over grid points with `t ≥ fit_from`.
    pub fitted_rate: f64,
    pub fit_r_squared: f64,
    pub fit_from: f64,
    pub c0: C0Bound,
    /// `2 i^d`.
    pub prefactor: f64,
    /// `2 i^{d−1}`.
    pub prefactor_lower: f64,
    pub dominated: bool,
    pub dominated_lower: bool,
    pub nonincreasing: bool,
}

/// `ν = π^{(i−1)} ⊗ δ_1` on the states of `U_i`.
pub fn diagonal_initial_law(model: &Model, region: &Region, i: usize) -> Result<Distribution> {
    let g = model.geometry();
    let below: Vec<bool> = region.sites().iter().map(|&s| g.level(s) < i).collect();
    let len = below.len();
    let (p, q) = (model.p(), model.q());
    let weights = (0..1usize << len)
        .map(|s| {
            let mut w = 1.0;
            for (k, &b) in below.iter().enumerate() {
                let bit = s >> k & 1 == 1;
                w *= match (b, bit) {
                    (true, true) => p,
                    (true, false) => q,
                    (false, true) => 1.0,
                    (false, false) => 0.0,
                };
            }
            w
        })
        .collect();
    Distribution::new(region.sites().to_vec(), weights)
}

pub fn diagonal_decay_study(
    model: &Model,
    i: usize,
    grid: &[f64],
    fit_from: f64,
    opts: &ExactOptions,
) -> Result<DecayStudy> {
    let g = model.geometry();
    if i < g.min_level() || i > g.max_level() {
        return Err(range(format!(
            "level {i} outside [{}, {}]",
            g.min_level(),
            g.max_level()
        )));
    }
    if grid.is_empty() || grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(range("time grid must be nonempty, finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(range("time grid must be strictly increasing"));
    }
    let full = Region::full(model);
    let gap = spectral_gap(&build_generator(model, &full, opts.state_cap)?)?.gap;
    let c0 = analytic_c0(model.q(), g.dim(), gap)?;

    let region = Region::lower_set(model, i)?;
    let gen = build_generator(model, &region, opts.state_cap)?;
    let pi = product_distribution(model, &region, opts.state_cap)?;
    let mut nu = diagonal_initial_law(model, &region, i)?;
    let mut last = 0.0;
    let mut distances = Vec::with_capacity(grid.len());
    for &t in grid {
        nu = evolve_distribution(&gen, &nu, t - last, opts.tolerance)?;
        last = t;
        distances.push(tv_distance(&nu, &pi)?);
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(&distances)
        .filter(|(t, d)| **t >= fit_from && **d > FIT_FLOOR)
        .map(|(t, d)| (*t, d.ln()))
        .unzip();
    let fit = linear_fit(&xs, &ys);
    let d = g.dim() as i32;
    let prefactor = 2.0 * (i as f64).powi(d);
    let prefactor_lower = 2.0 * (i as f64).powi(d - 1);
    let dominated_by = |a: f64| {
        grid.iter()
            .zip(&distances)
            .filter(|(t, _)| **t >= fit_from)
            .all(|(t, dist)| *dist <= a * (-c0.c0 * t).exp())
    };
    Ok(DecayStudy {
        level: i,
        times: grid.to_vec(),
        nonincreasing: distances.windows(2).all(|w| w[1] <= w[0] + 1e-12),
        fitted_rate: fit.map_or(f64::NAN, |f| -f.slope),
        fit_r_squared: fit.map_or(f64::NAN, |f| f.r_squared),
        fit_from,
        dominated: dominated_by(prefactor),
        dominated_lower: dominated_by(prefactor_lower),
        distances,
        c0,
        prefactor,
        prefactor_lower,
    })
}

impl DecayStudy {
    pub fn to_report(&self, model: &Model, seed: u64) -> StudyReport {
        let meta = metadata(model, Some(seed), self.times.last().copied());
        let mut table = Table::new("decay", &["time", "tv", "bound_i_d", "bound_i_d_minus_1"]);
        let mut long = Table::new("plot_decay", &["time", "series", "value"]);
        for (t, d) in self.times.iter().zip(&self.distances) {
            let b = self.prefactor * (-self.c0.c0 * t).exp();
            let bl = self.prefactor_lower * (-self.c0.c0 * t).exp();
            table.push([t.to_string(), format!("{d:e}"), format!("{b:e}"), format!("{bl:e}")]);
            long.push([t.to_string(), "tv".into(), format!("{d:e}")]);
            long.push([t.to_string(), "bound_i_d".into(), format!("{b:e}")]);
            long.push([t.to_string(), "bound_i_d_minus_1".into(), format!("{bl:e}")]);
        }
        let mut r = StudyReport::new(
            "diagonal-decay",
            meta,
            json!({ "level": self.level, "grid": self.times, "fit_from": self.fit_from }),
            serde_json::to_value(self).expect("decay study serializes"),
        );
        r.tables.push(table);
        r.plot_tables.push(long);
        r
    }
}
