//! Influence-region diagnostics in two dimensions: per-replica front
//! profiles of `R_t / t` and Hausdorff distances between snapshots.

use serde::Serialize;
use serde_json::json;

use super::report::{metadata, StudyReport, Table};
use super::stats::{bootstrap_mean_ci, mean_and_se};
use crate::dynamics::{influence_region, FlipRule, RandomnessStream};
use crate::error::{range, Result};
use crate::lattice::{Geometry, Model};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeOptions {
    pub snapshots: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub rule: FlipRule,
    pub bootstrap: usize,
}

/// Rightmost occupied column in each row, 0 for an empty row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontProfile {
    pub time: f64,
    pub fronts: Vec<usize>,
    pub cells: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSummary {
    pub time: f64,
    /// `(row / t, mean front / t, std of front / t)` per row.
    pub rows: Vec<(f64, f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeStudy {
    pub n: usize,
    pub snapshots: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    #[serde(skip)]
    pub profiles: Vec<Vec<FrontProfile>>,
    pub mean_profiles: Vec<ProfileSummary>,
    /// Per replica, distance between consecutive scaled snapshots; `None`
    /// when either region is empty.
    pub hausdorff: Vec<Vec<Option<f64>>>,
    pub hausdorff_mean: Vec<Option<f64>>,
    pub hausdorff_ci95: Vec<Option<(f64, f64)>>,
    /// Every profile stays inside `[0, n/t]²`.
    pub within_box: bool,
    /// `R_s ⊆ R_t` for consecutive snapshots, in every replica.
    pub monotone: bool,
}

/// Centres of the unit squares of `sites`, divided by `t`.
pub fn scaled_cells(geometry: &Geometry, sites: &[usize], t: f64) -> Vec<[f64; 2]> {
    sites
        .iter()
        .map(|&s| {
            let x = geometry.coords(s);
            [(f64::from(x[0]) - 0.5) / t, (f64::from(x[1]) - 0.5) / t]
        })
        .collect()
}

/// Hausdorff distance between finite planar point sets.
pub fn hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let directed = |from: &[[f64; 2]], to: &[[f64; 2]]| {
        par::map_slice(from, |p| {
            to.iter()
                .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .into_iter()
        .fold(0.0, f64::max)
    };
    Some(directed(a, b).max(directed(b, a)))
}

pub fn front_profile(geometry: &Geometry, sites: &[usize], t: f64) -> FrontProfile {
    let mut fronts = vec![0usize; geometry.side()];
    for &s in sites {
        let x = geometry.coords(s);
        let row = x[1] as usize - 1;
        fronts[row] = fronts[row].max(x[0] as usize);
    }
    FrontProfile {
        time: t,
        fronts,
        cells: sites.len(),
    }
}

pub fn shape_study(model: &Model, opts: &ShapeOptions) -> Result<ShapeStudy> {
    let g = model.geometry();
    if g.dim() != 2 {
        return Err(range("the shape study is defined for d = 2"));
    }
    if opts.snapshots.is_empty() || opts.snapshots.iter().any(|t| !(*t > 0.0)) {
        return Err(range("snapshot times must be positive"));
    }
    if opts.snapshots.windows(2).any(|w| w[1] <= w[0]) {
        return Err(range("snapshot times must be strictly increasing"));
    }
    if opts.replicas == 0 {
        return Err(range("need at least one replica"));
    }
    let horizon = *opts.snapshots.last().expect("nonempty");
    let base = RandomnessStream::new(opts.seed);
    let runs = par::map_indexed(opts.replicas, |r| {
        influence_region(model, &base.replica(r as u64), horizon, &opts.snapshots, opts.rule)
    });

    let n = g.side();
    let mut profiles = Vec::with_capacity(opts.replicas);
    let mut hausdorff_rows = Vec::with_capacity(opts.replicas);
    let mut monotone = true;
    for run in runs {
        let (_, snaps) = run?;
        profiles.push(
            snaps
                .iter()
                .map(|s| front_profile(g, &s.sites, s.time))
                .collect::<Vec<_>>(),
        );
        let mut row = Vec::new();
        for w in snaps.windows(2) {
            monotone &= w[0].sites.iter().all(|s| w[1].sites.binary_search(s).is_ok());
            row.push(hausdorff(
                &scaled_cells(g, &w[0].sites, w[0].time),
                &scaled_cells(g, &w[1].sites, w[1].time),
            ));
        }
        hausdorff_rows.push(row);
    }
    let within_box = profiles.iter().flatten().all(|p| {
        p.fronts.iter().all(|&f| f as f64 / p.time <= n as f64 / p.time)
    });

    let mean_profiles = opts
        .snapshots
        .iter()
        .enumerate()
        .map(|(k, &t)| ProfileSummary {
            time: t,
            rows: (0..n)
                .map(|row| {
                    let vals: Vec<f64> = profiles.iter().map(|p| p[k].fronts[row] as f64 / t).collect();
                    let (mean, se) = mean_and_se(&vals);
                    let sd = if vals.len() > 1 { se * (vals.len() as f64).sqrt() } else { 0.0 };
                    ((row + 1) as f64 / t, mean, sd)
                })
                .collect(),
        })
        .collect();

    let pairs = opts.snapshots.len().saturating_sub(1);
    let mut hausdorff_mean = Vec::with_capacity(pairs);
    let mut hausdorff_ci95 = Vec::with_capacity(pairs);
    for k in 0..pairs {
        let vals: Vec<f64> = hausdorff_rows.iter().filter_map(|r| r[k]).collect();
        if vals.is_empty() {
            hausdorff_mean.push(None);
            hausdorff_ci95.push(None);
        } else {
            hausdorff_mean.push(Some(mean_and_se(&vals).0));
            hausdorff_ci95.push(Some(bootstrap_mean_ci(&vals, opts.bootstrap, opts.seed ^ k as u64)));
        }
    }
    Ok(ShapeStudy {
        n,
        snapshots: opts.snapshots.clone(),
        replicas: opts.replicas,
        seed: opts.seed,
        profiles,
        mean_profiles,
        hausdorff: hausdorff_rows,
        hausdorff_mean,
        hausdorff_ci95,
        within_box,
        monotone,
    })
}

impl ShapeStudy {
    pub fn to_report(&self, model: &Model) -> StudyReport {
        let meta = metadata(model, Some(self.seed), self.snapshots.last().copied());
        let mut mean = Table::new("mean_profile", &["time", "row_scaled", "front_mean", "front_sd"]);
        for s in &self.mean_profiles {
            for (y, m, sd) in &s.rows {
                mean.push([s.time.to_string(), y.to_string(), m.to_string(), sd.to_string()]);
            }
        }
        let mut haus = Table::new("hausdorff", &["replica", "time_from", "time_to", "distance"]);
        for (r, row) in self.hausdorff.iter().enumerate() {
            for (k, h) in row.iter().enumerate() {
                haus.push([
                    r.to_string(),
                    self.snapshots[k].to_string(),
                    self.snapshots[k + 1].to_string(),
                    h.map_or_else(|| "NaN".to_string(), |v| v.to_string()),
                ]);
            }
        }
        let mut long = Table::new("plot_profiles", &["replica", "time", "row", "front", "row_scaled", "front_scaled"]);
        for (r, ps) in self.profiles.iter().enumerate() {
            for p in ps {
                for (row, f) in p.fronts.iter().enumerate() {
                    long.push([
                        r.to_string(),
                        p.time.to_string(),
                        (row + 1).to_string(),
                        f.to_string(),
                        ((row + 1) as f64 / p.time).to_string(),
                        (*f as f64 / p.time).to_string(),
                    ]);
                }
            }
        }
        let mut rep = StudyReport::new(
            "shape",
            meta,
            json!({ "snapshots": self.snapshots, "replicas": self.replicas, "seed": self.seed }),
            serde_json::to_value(self).expect("shape study serializes"),
        );
        rep.tables.push(mean);
        rep.tables.push(haus);
        rep.plot_tables.push(long);
        rep
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hausdorff_basics() {
        let a = [[0.0, 0.0], [1.0, 0.0]];
        let b = [[0.0, 0.0]];
        assert_eq!(hausdorff(&a, &b), Some(1.0));
        assert_eq!(hausdorff(&a, &a), Some(0.0));
        assert_eq!(hausdorff(&a, &[]), None);
    }

    #[test]
    fn small_study_is_consistent() {
        let m = Model::north_east(2, 12, 0.3).unwrap();
        let opts = ShapeOptions {
            snapshots: vec![4.0, 8.0],
            replicas: 6,
            seed: 9,
            rule: FlipRule::ValueChange,
            bootstrap: 200,
        };
        let s = shape_study(&m, &opts).unwrap();
        assert!(s.within_box && s.monotone);
        assert_eq!(s.profiles.len(), 6);
        assert_eq!(s.hausdorff_mean.len(), 1);
        let again = shape_study(&m, &opts).unwrap();
        assert_eq!(s.profiles, again.profiles);
    }

    #[test]
    fn rejects_three_dimensions() {
        let m = Model::north_east(3, 2, 0.3).unwrap();
        let opts = ShapeOptions {
            snapshots: vec![1.0],
            replicas: 1,
            seed: 0,
            rule: FlipRule::ValueChange,
            bootstrap: 10,
        };
        assert!(shape_study(&m, &opts).is_err());
    }
}
