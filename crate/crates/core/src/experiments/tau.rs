//! Monte Carlo scaling of `τ*`, the first time the far corner holds a 0
//! when started from all ones.

use serde::Serialize;
use serde_json::json;

use super::report::{metadata, StudyReport, Table};
use super::stats::{bootstrap_mean_ci, linear_fit, mean_and_se, LinearFit};
use crate::dynamics::{hitting_time_tau_star, RandomnessStream};
use crate::error::{range, KcmError, Result};
use crate::lattice::{ConstraintFamily, Geometry, Model};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct TauOptions {
    pub replicas: usize,
    pub seed: u64,
    /// Per-replica cap is `cap_factor · n` time units.
    pub cap_factor: f64,
    pub bootstrap: usize,
}

impl Default for TauOptions {
    fn default() -> Self {
        Self {
            replicas: 1000,
            seed: 0,
            cap_factor: 50.0,
            bootstrap: 1000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TauPoint {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub p_at_least_half_n: f64,
    pub capped: usize,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TauStudy {
    pub d: usize,
    pub family: String,
    pub p: f64,
    pub replicas: usize,
    pub seed: u64,
    pub points: Vec<TauPoint>,
    /// `E[τ*] ≈ slope·n + intercept`; absent with fewer than two sizes.
    pub fit: Option<LinearFit>,
    pub tail_nondecreasing: bool,
}

/// Fraction of capped replicas above which a size is rejected.
pub const MAX_CAPPED_FRACTION: f64 = 0.01;

pub fn tau_samples(model: &Model, opts: &TauOptions) -> Result<(Vec<f64>, usize)> {
    let n = model.geometry().side();
    let cap = opts.cap_factor * n as f64;
    let base = RandomnessStream::new(opts.seed).child(n as u64);
    let hits = par::map_indexed(opts.replicas, |r| {
        hitting_time_tau_star(model, &base.replica(r as u64), cap)
    });
    let mut samples = Vec::with_capacity(opts.replicas);
    let mut capped = 0;
    for h in hits {
        match h? {
            Some(t) => samples.push(t),
            None => capped += 1,
        }
    }
    Ok((samples, capped))
}

pub fn tau_star_scaling(
    d: usize,
    family: &ConstraintFamily,
    p: f64,
    sizes: &[usize],
    opts: &TauOptions,
) -> Result<TauStudy> {
    if matches!(family, ConstraintFamily::Custom(_)) {
        return Err(range("size scans need a built-in constraint family"));
    }
    if sizes.is_empty() || opts.replicas == 0 {
        return Err(range("need at least one size and one replica"));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let model = Model::new(Geometry::new(d, n)?, family.clone(), p)?;
        let (samples, capped) = tau_samples(&model, opts)?;
        if capped as f64 > MAX_CAPPED_FRACTION * opts.replicas as f64 {
            return Err(KcmError::Study(format!(
                "n = {n}: {capped} of {} replicas exceeded the cap {}",
                opts.replicas,
                opts.cap_factor * n as f64
            )));
        }
        let (mean, std_error) = mean_and_se(&samples);
        let half = n as f64 / 2.0;
        points.push(TauPoint {
            n,
            mean,
            std_error,
            ci95: bootstrap_mean_ci(&samples, opts.bootstrap, opts.seed ^ n as u64),
            // capped replicas have τ* above the cap, hence above n/2
            p_at_least_half_n: (samples.iter().filter(|&&t| t >= half).count() + capped) as f64
                / opts.replicas as f64,
            capped,
            samples,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
    Ok(TauStudy {
        d,
        family: family.name().to_string(),
        p,
        replicas: opts.replicas,
        seed: opts.seed,
        fit: linear_fit(&xs, &ys),
        tail_nondecreasing: points
            .windows(2)
            .all(|w| w[1].p_at_least_half_n >= w[0].p_at_least_half_n),
        points,
    })
}

impl TauStudy {
    /// `model` is the largest instance, used for metadata.
    pub fn to_report(&self, model: &Model) -> StudyReport {
        let meta = metadata(model, Some(self.seed), None);
        let mut table = Table::new(
            "tau_star",
            &["n", "mean", "std_error", "ci_low", "ci_high", "p_at_least_half_n", "capped"],
        );
        let mut samples = Table::new("plot_tau_samples", &["n", "replica", "tau_star"]);
        for p in &self.points {
            table.push([
                p.n.to_string(),
                p.mean.to_string(),
                p.std_error.to_string(),
                p.ci95.0.to_string(),
                p.ci95.1.to_string(),
                p.p_at_least_half_n.to_string(),
                p.capped.to_string(),
            ]);
            for (r, t) in p.samples.iter().enumerate() {
                samples.push([p.n.to_string(), r.to_string(), t.to_string()]);
            }
        }
        let mut r = StudyReport::new(
            "tau-scaling",
            meta,
            json!({
                "sizes": self.points.iter().map(|p| p.n).collect::<Vec<_>>(),
                "replicas": self.replicas,
                "seed": self.seed,
            }),
            serde_json::to_value(self).expect("tau study serializes"),
        );
        r.tables.push(table);
        r.plot_tables.push(samples);
        r
    }
}
