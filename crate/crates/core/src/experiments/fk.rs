//! Feynman–Kac exponent: exact `β_y` next to a Monte Carlo estimate of
//! `E_π[e^{−|G(y,t)|}]` from π-distributed starts.

use serde::Serialize;
use serde_json::json;

use super::report::{metadata, StudyReport, Table};
use super::stats::mean_and_se;
use crate::dynamics::{legal_time_measure, sample_pi, RandomnessStream};
use crate::error::{range, Result};
use crate::exact::{feynman_kac_beta_at, ExactOptions, FeynmanKacResult};
use crate::lattice::{Model, Region};
use crate::par;

#[derive(Clone, Debug, Serialize)]
pub struct FkMonteCarlo {
    pub time: f64,
    pub replicas: usize,
    pub mean: f64,
    pub std_error: f64,
    /// `e^{t β_y}`.
    pub bound: f64,
    /// `mean ≤ bound + 3·std_error`.
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FkStudy {
    pub exact: FeynmanKacResult,
    pub monte_carlo: Vec<FkMonteCarlo>,
    pub seed: u64,
}

impl FkStudy {
    pub fn passes(&self) -> bool {
        self.exact.beta < 0.0
            && self.exact.satisfies_c0()
            && self.exact.checks.iter().all(|c| c.holds)
            && self.monte_carlo.iter().all(|m| m.holds)
    }
}

/// Samples of `e^{−|G(y,t)|}` with `σ(0) ~ π`, one per replica.
pub fn legal_time_samples(
    model: &Model,
    site: usize,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let full = Region::full(model);
    let base = RandomnessStream::new(seed);
    par::map_indexed(replicas, |r| {
        let stream = base.replica(r as u64);
        let initial = sample_pi(model, &full, &mut stream.initial_rng());
        legal_time_measure(model, site, t, &initial, &stream).map(|g| (-g).exp())
    })
    .into_iter()
    .collect()
}

pub fn feynman_kac_study(
    model: &Model,
    site: usize,
    times: &[f64],
    replicas: usize,
    seed: u64,
    opts: &ExactOptions,
) -> Result<FkStudy> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(range("times must be nonnegative"));
    }
    let exact = feynman_kac_beta_at(model, site, times, opts)?;
    let mut monte_carlo = Vec::new();
    if replicas > 0 {
        for (k, &t) in times.iter().enumerate() {
            let samples = legal_time_samples(model, site, t, replicas, seed ^ k as u64)?;
            let (mean, std_error) = mean_and_se(&samples);
            let bound = (t * exact.beta).exp();
            monte_carlo.push(FkMonteCarlo {
                time: t,
                replicas,
                mean,
                std_error,
                bound,
                holds: mean <= bound + 3.0 * std_error.max(0.0),
            });
        }
    }
    Ok(FkStudy {
        exact,
        monte_carlo,
        seed,
    })
}

impl FkStudy {
    pub fn to_report(&self, model: &Model) -> StudyReport {
        let meta = metadata(model, Some(self.seed), None);
        let mut table = Table::new("feynman_kac", &["time", "exact_expectation", "bound", "mc_mean", "mc_std_error"]);
        for (k, c) in self.exact.checks.iter().enumerate() {
            let mc = self.monte_carlo.get(k);
            table.push([
                c.time.to_string(),
                format!("{:e}", c.expectation),
                format!("{:e}", c.bound),
                mc.map_or_else(|| "NaN".into(), |m| format!("{:e}", m.mean)),
                mc.map_or_else(|| "NaN".into(), |m| format!("{:e}", m.std_error)),
            ]);
        }
        let mut r = StudyReport::new(
            "fk-bound",
            meta,
            json!({
                "site": self.exact.site,
                "times": self.exact.checks.iter().map(|c| c.time).collect::<Vec<_>>(),
            }),
            serde_json::to_value(self).expect("fk study serializes"),
        );
        r.tables.push(table);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monte_carlo_matches_exact_expectation() {
        let m = Model::north_east(2, 2, 0.3).unwrap();
        let far = m.geometry().far_corner();
        let s = feynman_kac_study(&m, far, &[2.0], 20_000, 4, &ExactOptions::default()).unwrap();
        let mc = &s.monte_carlo[0];
        let exact = s.exact.checks[0].expectation;
        assert!((mc.mean - exact).abs() < 4.0 * mc.std_error, "{} vs {exact}", mc.mean);
        assert!(s.passes());
    }
}
