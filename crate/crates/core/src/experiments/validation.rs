//! Monte Carlo against uniformization: the empirical law of replica end
//! states at time `t` versus `δ_σ e^{tQ}`.

use serde::Serialize;
use serde_json::json;

use super::report::{metadata, StudyReport, Table};
use crate::dynamics::{RandomnessStream, Trajectory};
use crate::error::{dimension, range, Result};
use crate::exact::{build_generator, evolve_distribution, ExactOptions};
use crate::lattice::{Model, Region};
use crate::measure::{tv_distance, Distribution, SpinConfig};
use crate::par;

#[derive(Clone, Debug, Serialize)]
pub struct ValidationStudy {
    pub time: f64,
    pub replicas: usize,
    pub seed: u64,
    pub initial_state: u64,
    pub tv: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub empirical: Vec<f64>,
    pub exact: Vec<f64>,
}

/// `max(0.01, 5 √(2^N / replicas))`.
pub fn validation_tolerance(num_sites: usize, replicas: usize) -> f64 {
    (5.0 * (2f64.powi(num_sites as i32) / replicas as f64).sqrt()).max(0.01)
}

pub fn mc_exact_validation(
    model: &Model,
    t: f64,
    replicas: usize,
    seed: u64,
    initial: &SpinConfig,
    opts: &ExactOptions,
) -> Result<ValidationStudy> {
    mc_exact_validation_against(model, model, t, replicas, seed, initial, opts)
}

/// Simulates `sim_model` and compares with the exact law of `exact_model`.
/// Distinct models serve as a negative control.
pub fn mc_exact_validation_against(
    sim_model: &Model,
    exact_model: &Model,
    t: f64,
    replicas: usize,
    seed: u64,
    initial: &SpinConfig,
    opts: &ExactOptions,
) -> Result<ValidationStudy> {
    if sim_model.geometry() != exact_model.geometry() {
        return Err(dimension("simulated and exact models differ in geometry"));
    }
    if replicas == 0 {
        return Err(range("need at least one replica"));
    }
    let region = Region::full(exact_model);
    let gen = build_generator(exact_model, &region, opts.state_cap)?;
    if initial.len() != region.len() {
        return Err(dimension("initial configuration must cover the lattice"));
    }
    let start = initial.state_id().expect("state fits the exact capacity") as usize;
    let exact = evolve_distribution(
        &gen,
        &Distribution::point_mass(region.sites().to_vec(), start)?,
        t,
        opts.tolerance,
    )?;

    let base = RandomnessStream::new(seed);
    let ends = par::map_indexed(replicas, |r| -> Result<usize> {
        let mut traj = Trajectory::new(sim_model, &region, initial, &base.replica(r as u64))?;
        while traj.step_until(t).is_some() {}
        Ok(traj.config().state_id().expect("state id fits") as usize)
    });
    let mut counts = vec![0.0; gen.num_states()];
    for e in ends {
        counts[e?] += 1.0;
    }
    counts.iter_mut().for_each(|c| *c /= replicas as f64);
    let empirical = Distribution::new(region.sites().to_vec(), counts)?;
    let tv = tv_distance(&empirical, &exact)?;
    let tolerance = validation_tolerance(region.len(), replicas);
    Ok(ValidationStudy {
        time: t,
        replicas,
        seed,
        initial_state: start as u64,
        tv,
        tolerance,
        pass: tv <= tolerance,
        empirical: empirical.weights().to_vec(),
        exact: exact.weights().to_vec(),
    })
}

impl ValidationStudy {
    pub fn to_report(&self, model: &Model) -> StudyReport {
        let meta = metadata(model, Some(self.seed), Some(self.time));
        let mut table = Table::new("laws", &["state_id", "empirical", "exact"]);
        let mut long = Table::new("plot_laws", &["state_id", "source", "probability"]);
        for (s, (e, x)) in self.empirical.iter().zip(&self.exact).enumerate() {
            table.push([s.to_string(), format!("{e:e}"), format!("{x:e}")]);
            long.push([s.to_string(), "empirical".into(), format!("{e:e}")]);
            long.push([s.to_string(), "exact".into(), format!("{x:e}")]);
        }
        let mut r = StudyReport::new(
            "validate-mc",
            meta,
            json!({ "time": self.time, "replicas": self.replicas, "initial_state": self.initial_state }),
            json!({ "tv": self.tv, "tolerance": self.tolerance, "pass": self.pass }),
        );
        r.tables.push(table);
        r.plot_tables.push(long);
        r
    }
}
