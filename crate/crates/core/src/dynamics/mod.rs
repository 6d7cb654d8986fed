//! Graphical-construction dynamics: seeded per-site Poisson clocks,
//! event-driven trajectories on the lattice or on any constraint-closed
//! region, and the trajectory functionals built on top (hitting time of the
//! far corner, legal-time measure, influence region).

mod engine;
mod stream;
mod sweep;

use std::io::Write;

use rand::Rng;
use serde_json::Value;

pub use engine::{Event, Trajectory};
use sweep::Sweep;

pub use stream::{mix, site_stream_id, RandomnessStream, SiteClock, SiteKeying};

use crate::error::{dimension, range, Result};
use crate::experiments::report::write_metadata_line;
use crate::lattice::{Geometry, Model, Region};
use crate::measure::SpinConfig;

/// Largest accepted simulation horizon (2^40).
pub const MAX_HORIZON: f64 = 1_099_511_627_776.0;

fn check_horizon(horizon: f64) -> Result<()> {
    if !(0.0..=MAX_HORIZON).contains(&horizon) {
        return Err(range(format!("horizon {horizon} outside [0, 2^40]")));
    }
    Ok(())
}

/// Realized trajectory of one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub region_sites: Vec<usize>,
    pub initial: SpinConfig,
    pub events: Vec<Event>,
    pub final_config: SpinConfig,
    pub horizon: f64,
}

impl EventLog {
    /// Replays the applied events on the initial configuration.
    pub fn replay(&self) -> SpinConfig {
        let mut config = self.initial.clone();
        for e in self.events.iter().filter(|e| e.applied) {
            let k = self
                .region_sites
                .binary_search(&e.site)
                .expect("event site lies in region");
            config.set(k, e.coin);
        }
        config
    }

    /// Events at sites of `region`, in order.
    pub fn restricted_to(&self, region: &Region) -> Vec<Event> {
        self.events
            .iter()
            .filter(|e| region.contains(e.site))
            .copied()
            .collect()
    }

    /// CSV `time,site_x1..site_xd,constraint,coin,applied` under a JSON metadata line.
    pub fn write_csv<W: Write>(
        &self,
        geometry: &Geometry,
        metadata: &Value,
        mut out: W,
    ) -> std::io::Result<()> {
        write_metadata_line(&mut out, metadata)?;
        let coords: Vec<String> = (1..=geometry.dim()).map(|j| format!("site_x{j}")).collect();
        writeln!(out, "time,{},constraint,coin,applied", coords.join(","))?;
        for e in &self.events {
            let x: Vec<String> = geometry.coords(e.site).iter().map(|c| c.to_string()).collect();
            writeln!(
                out,
                "{},{},{},{},{}",
                e.time,
                x.join(","),
                e.constraint as u8,
                e.coin as u8,
                e.applied as u8
            )?;
        }
        Ok(())
    }
}

/// Runs the graphical construction on `region` from `initial` (region-local
/// order) and records every ring with time at most `horizon`.
pub fn simulate(
    model: &Model,
    region: &Region,
    initial: &SpinConfig,
    horizon: f64,
    stream: &RandomnessStream,
) -> Result<EventLog> {
    check_horizon(horizon)?;
    let mut traj = Trajectory::new(model, region, initial, stream)?;
    let mut events = Vec::new();
    while let Some(e) = traj.step_until(horizon) {
        events.push(e);
    }
    Ok(EventLog {
        region_sites: region.sites().to_vec(),
        initial: initial.clone(),
        events,
        final_config: traj.config(),
        horizon,
    })
}

/// Simulates on the whole lattice and on `U_i` with the same stream and
/// compares the two logs on `U_i`, event by event.
pub fn restricted_consistency_check(
    model: &Model,
    i: usize,
    initial: &SpinConfig,
    horizon: f64,
    stream: &RandomnessStream,
) -> Result<bool> {
    let full = Region::full(model);
    let lower = Region::lower_set(model, i)?;
    let restricted_initial = initial.restrict(&full, &lower)?;
    let big = simulate(model, &full, initial, horizon, stream)?;
    let small = simulate(model, &lower, &restricted_initial, horizon, stream)?;
    Ok(big.restricted_to(&lower) == small.events
        && big.final_config.restrict(&full, &lower)? == small.final_config)
}

/// Samples a configuration on `region` from the product measure.
pub fn sample_pi<R: Rng>(model: &Model, region: &Region, rng: &mut R) -> SpinConfig {
    let bools: Vec<bool> = (0..region.len()).map(|_| rng.random::<f64>() < model.p()).collect();
    SpinConfig::from_bools(&bools)
}

/// `τ*`: first time the far corner `(n,...,n)` holds a 0, starting from all ones.
/// `None` if not reached by `cap`.
pub fn hitting_time_tau_star(model: &Model, stream: &RandomnessStream, cap: f64) -> Result<Option<f64>> {
    hitting_time_from(model, &SpinConfig::ones(model.num_sites()), stream, cap)
}

/// First time the far corner holds a 0, from a full-lattice configuration.
pub fn hitting_time_from(
    model: &Model,
    initial: &SpinConfig,
    stream: &RandomnessStream,
    cap: f64,
) -> Result<Option<f64>> {
    check_horizon(cap)?;
    let target = model.geometry().far_corner();
    if initial.len() != model.num_sites() {
        return Err(dimension("initial configuration must cover the lattice"));
    }
    if !initial.get(target) {
        return Ok(Some(0.0));
    }
    let region = Region::closure_of(model, &[target])?;
    let local = initial.restrict(&Region::full(model), &region)?;
    let k = region.position(target).expect("target is in its closure");
    let mut sweep = Sweep::new(model, &region, &local, stream)?;
    // paths are extended over doubling windows until the target flips
    let mut t = (model.geometry().side() as f64).min(cap);
    loop {
        sweep.extend(t);
        if let Some(&hit) = sweep.changes(k).first() {
            return Ok(Some(hit));
        }
        if t >= cap {
            return Ok(None);
        }
        t = (2.0 * t).min(cap);
    }
}

/// `|G(y, horizon)| = ∫_0^horizon c_y(σ(s)) ds`, starting from a full-lattice
/// configuration. Only the constraint closure of `y` is simulated; by the
/// oriented structure this is the same path as on the whole lattice.
pub fn legal_time_measure(
    model: &Model,
    y: usize,
    horizon: f64,
    initial: &SpinConfig,
    stream: &RandomnessStream,
) -> Result<f64> {
    check_horizon(horizon)?;
    if initial.len() != model.num_sites() {
        return Err(dimension("initial configuration must cover the lattice"));
    }
    let region = Region::closure_of(model, &[y])?;
    let local = initial.restrict(&Region::full(model), &region)?;
    let mut traj = Trajectory::new(model, &region, &local, stream)?;
    let mut legal = traj.constraint(y);
    let mut last = 0.0;
    let mut total = 0.0;
    while let Some(e) = traj.step_until(horizon) {
        if legal {
            total += e.time - last;
        }
        last = e.time;
        if e.changed && model.neighborhood(y).contains(&e.site) {
            legal = traj.constraint(y);
        }
    }
    if legal {
        total += horizon - last;
    }
    Ok(total)
}

/// What counts as a site having "flipped" for the influence region.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlipRule {
    /// A legal ring that changed the spin value.
    ValueChange,
    /// Any legal ring, even one rewriting the same value.
    LegalRing,
}

/// First-flip time of every site, `∞` if it never flipped before the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceRegion {
    pub first_flip: Vec<f64>,
    pub horizon: f64,
    pub rule: FlipRule,
}

impl InfluenceRegion {
    /// Sites of `R_t`: those with a first flip at or before `t`.
    pub fn sites_at(&self, t: f64) -> Vec<usize> {
        self.first_flip
            .iter()
            .enumerate()
            .filter(|(_, &f)| f <= t)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn write_csv<W: Write>(
        &self,
        geometry: &Geometry,
        metadata: &Value,
        mut out: W,
    ) -> std::io::Result<()> {
        write_metadata_line(&mut out, metadata)?;
        let coords: Vec<String> = (1..=geometry.dim()).map(|j| format!("site_x{j}")).collect();
        writeln!(out, "{},first_flip_time", coords.join(","))?;
        for (s, f) in self.first_flip.iter().enumerate() {
            let x: Vec<String> = geometry.coords(s).iter().map(|c| c.to_string()).collect();
            writeln!(out, "{},{}", x.join(","), f)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceSnapshot {
    pub time: f64,
    pub sites: Vec<usize>,
}

/// Runs from all ones up to `horizon`, recording first-flip times, and
/// extracts `R_t` at each snapshot time.
pub fn influence_region(
    model: &Model,
    stream: &RandomnessStream,
    horizon: f64,
    snapshots: &[f64],
    rule: FlipRule,
) -> Result<(InfluenceRegion, Vec<InfluenceSnapshot>)> {
    check_horizon(horizon)?;
    if let Some(&t) = snapshots.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
        return Err(range(format!("snapshot time {t} outside [0, {horizon}]")));
    }
    let region = Region::full(model);
    let ones = SpinConfig::ones(model.num_sites());
    let mut traj = Trajectory::new(model, &region, &ones, stream)?;
    let mut first_flip = vec![f64::INFINITY; model.num_sites()];
    let mut remaining = model.num_sites();
    while remaining > 0 {
        let Some(e) = traj.step_until(horizon) else {
            break;
        };
        let flipped = match rule {
            FlipRule::ValueChange => e.changed,
            FlipRule::LegalRing => e.applied,
        };
        if flipped && first_flip[e.site].is_infinite() {
            first_flip[e.site] = e.time;
            remaining -= 1;
        }
    }
    let infl = InfluenceRegion {
        first_flip,
        horizon,
        rule,
    };
    let snaps = snapshots
        .iter()
        .map(|&t| InfluenceSnapshot {
            time: t,
            sites: infl.sites_at(t),
        })
        .collect();
    Ok((infl, snaps))
}
