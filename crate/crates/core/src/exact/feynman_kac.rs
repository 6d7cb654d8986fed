//! Feynman–Kac operator `H = Q − V` with `V = c_y`, its top eigenvalue `β_y`,
//! and the analytic rate `c_0(q)` that bounds `β_y ≤ −c_0`.
//!
//! For a unit `φ = α·1 + g` with `g ⟂ 1` and `δ = 1 − α²`, two estimates hold:
//! `⟨φ,Hφ⟩ ≤ −δλ` and `⟨φ,Hφ⟩ ≤ (δ−1)q^d + 2(δ q^d (1−q^d))^{1/2}`. The second is
//! at most `−q^d/2` once `δ ≤ δ₀ = (2(1−√(1−q^d)) − q^d) / (4q^d)`, and otherwise
//! the first is at most `−δ₀λ`. Hence `β_y ≤ −min(δ₀λ, q^d/2)`.
//!
//! The `q^d` factor is `π(V = 1)` when `|C_y| = d` (the north-east case at
//! interior sites); for other constraint sets `π(V = 1) = q^{|C_y|}`.

use serde::Serialize;

use super::evolve::poisson_series;
use super::generator::{build_generator, Generator};
use super::spectrum::{
    dense_top, lanczos_top, residual_norm, spectral_gap, EigenMethod, LanczosOptions,
    RESIDUAL_TOLERANCE,
};
use super::ExactOptions;
use crate::error::{range, KcmError, Result};
use crate::lattice::{Model, Region};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct C0Bound {
    pub q: f64,
    pub d: usize,
    pub gap: f64,
    pub delta0: f64,
    pub c0: f64,
}

/// `c_0 = min(δ₀ λ, q^d / 2)` with `δ₀` clipped to `(0, 1]`.
pub fn analytic_c0(q: f64, d: usize, gap: f64) -> Result<C0Bound> {
    if !(q > 0.0 && q < 1.0) {
        return Err(range(format!("q must lie in (0, 1), got {q}")));
    }
    if !(gap > 0.0) {
        return Err(range(format!("gap must be positive, got {gap}")));
    }
    if d == 0 {
        return Err(range("d must be at least 1"));
    }
    let qd = q.powi(d as i32);
    let delta0 = ((2.0 * (1.0 - (1.0 - qd).sqrt()) - qd) / (4.0 * qd)).min(1.0);
    Ok(C0Bound {
        q,
        d,
        gap,
        delta0,
        c0: (delta0 * gap).min(qd / 2.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeynmanKacCheck {
    pub time: f64,
    /// `⟨1, e^{tH} 1⟩_π = E_π[e^{−|G(y,t)|}]`.
    pub expectation: f64,
    /// `e^{t β_y}`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct FeynmanKacResult {
    pub site: Vec<usize>,
    pub beta: f64,
    pub method: EigenMethod,
    pub residual: f64,
    pub c0: C0Bound,
    pub checks: Vec<FeynmanKacCheck>,
}

impl FeynmanKacResult {
    pub fn satisfies_c0(&self) -> bool {
        self.beta <= -self.c0.c0 + 1e-9
    }
}

/// Default times at which `⟨1, e^{tH}1⟩_π ≤ e^{tβ}` is verified.
pub const CHECK_TIMES: [f64; 3] = [1.0, 2.0, 5.0];

pub fn feynman_kac_beta(model: &Model, site: usize, opts: &ExactOptions) -> Result<FeynmanKacResult> {
    feynman_kac_beta_at(model, site, &CHECK_TIMES, opts)
}

pub fn feynman_kac_beta_at(
    model: &Model,
    site: usize,
    times: &[f64],
    opts: &ExactOptions,
) -> Result<FeynmanKacResult> {
    if site >= model.num_sites() {
        return Err(range(format!("site index {site} outside the lattice")));
    }
    let region = Region::full(model);
    let gen = build_generator(model, &region, opts.state_cap)?;
    let gap = spectral_gap(&gen)?.gap;
    let potential = potential(&gen, site);
    let method = EigenMethod::for_size(gen.num_states());
    let apply = |v: &[f64], out: &mut [f64]| {
        gen.apply_symmetrized(v, out);
        out.iter_mut()
            .zip(v)
            .zip(&potential)
            .for_each(|((o, x), w)| *o -= w * x);
    };
    let (beta, vector) = match method {
        EigenMethod::Dense => {
            let mut h = gen.dense_symmetrized();
            for (s, w) in potential.iter().enumerate() {
                h[(s, s)] -= w;
            }
            dense_top(h)
        }
        EigenMethod::Lanczos => {
            let top = lanczos_top(gen.num_states(), apply, None, &LanczosOptions::default())?;
            (top.value, top.vector)
        }
    };
    let residual = residual_norm(apply, &vector, beta);
    if residual > RESIDUAL_TOLERANCE {
        return Err(KcmError::Convergence(format!(
            "Feynman–Kac eigenpair residual {residual:e}"
        )));
    }
    let checks = times
        .iter()
        .map(|&t| {
            let expectation = fk_expectation(&gen, &potential, t, opts.tolerance)?;
            let bound = (t * beta).exp();
            Ok(FeynmanKacCheck {
                time: t,
                expectation,
                bound,
                holds: expectation <= bound * (1.0 + 1e-8),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(c) = checks.iter().find(|c| !c.holds) {
        log::error!(
            "Feynman–Kac bound violated at t = {}: {} > {}",
            c.time,
            c.expectation,
            c.bound
        );
    }
    Ok(FeynmanKacResult {
        site: model.geometry().coords_vec(site),
        beta,
        method,
        residual,
        c0: analytic_c0(model.q(), model.geometry().dim(), gap)?,
        checks,
    })
}

/// `V(σ) = c_y(σ)` over the generator's states.
pub(crate) fn potential(gen: &Generator, site: usize) -> Vec<f64> {
    let k = gen
        .sites()
        .binary_search(&site)
        .expect("site is in the generator's region");
    (0..gen.num_states())
        .map(|s| f64::from(u8::from(gen.constraint(s, k))))
        .collect()
}

/// `⟨1, e^{t(Q − V)} 1⟩_π` by uniformization of the sub-Markovian semigroup.
pub fn fk_expectation(gen: &Generator, potential: &[f64], t: f64, tolerance: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(range(format!("time must be nonnegative, got {t}")));
    }
    let diag: Vec<f64> = gen.diagonal().iter().zip(potential).map(|(d, v)| d - v).collect();
    let rate = diag.iter().fold(0.0f64, |m, d| m.max(-d)).max(f64::MIN_POSITIVE);
    let step = |v: &[f64], out: &mut [f64]| {
        gen.apply_right(v, out);
        out.iter_mut()
            .zip(v)
            .zip(potential)
            .for_each(|((o, x), w)| *o = x + (*o - w * x) / rate);
    };
    let ones = vec![1.0; gen.num_states()];
    let u = poisson_series(step, &ones, rate * t, tolerance)?;
    Ok(gen.stationary().iter().zip(&u).map(|(p, x)| p * x).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn c0_arithmetic() {
        let b = analytic_c0(0.7, 2, 1.0).unwrap();
        assert_relative_eq!(b.delta0, 0.0416910, epsilon = 1e-7);
        assert_relative_eq!(b.c0, 0.0416910, epsilon = 1e-7);
        let b = analytic_c0(0.7, 2, 0.5).unwrap();
        assert_relative_eq!(b.c0, 0.5 * 0.0416910, epsilon = 1e-7);
    }

    #[test]
    fn c0_positive_and_capped() {
        for d in 1..=4 {
            for i in 1..100 {
                let q = i as f64 / 100.0;
                for gap in [1e-3, 0.3, 1.0, 50.0] {
                    let b = analytic_c0(q, d, gap).unwrap();
                    assert!(b.delta0 > 0.0 && b.delta0 <= 1.0);
                    assert!(b.c0 > 0.0);
                    assert!(b.c0 <= q.powi(d as i32) / 2.0);
                }
            }
        }
        assert!(analytic_c0(1.0, 2, 1.0).is_err());
        assert!(analytic_c0(0.5, 2, 0.0).is_err());
    }

    #[test]
    fn unconstrained_site_shifts_by_one() {
        let m = Model::north_east(2, 2, 0.3).unwrap();
        let r = feynman_kac_beta(&m, 0, &ExactOptions::default()).unwrap();
        assert_relative_eq!(r.beta, -1.0, epsilon = 1e-10);
        for c in &r.checks {
            assert_relative_eq!(c.expectation, (-c.time).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn corner_beta_negative_and_bounded() {
        let m = Model::north_east(2, 2, 0.3).unwrap();
        let r = feynman_kac_beta(&m, 3, &ExactOptions::default()).unwrap();
        assert!(r.beta < 0.0);
        assert!(r.satisfies_c0());
        assert!(r.checks.iter().all(|c| c.holds));
    }
}
