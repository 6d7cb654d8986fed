//! Uniformization: `ν e^{tQ} = Σ_k Pois(Λt; k) · ν P^k` with `P = I + Q/Λ`.
//!
//! The time interval is split into chunks with `Λ Δt ≤ 256` so the Poisson
//! weights never underflow; each chunk is truncated once the remaining
//! Poisson mass drops below its share of the tolerance.

use super::generator::Generator;
use crate::error::{dimension, range, KcmError, Result};
use crate::measure::Distribution;
use crate::par;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

const MAX_CHUNK_RATE: f64 = 256.0;

/// Applies `e^{a (P − I)}` to `v` where `step(v, out)` computes `out = v P`.
/// `P` must be (sub)stochastic in the direction it is applied.
pub(crate) fn poisson_series(
    step: impl Fn(&[f64], &mut [f64]),
    v: &[f64],
    a: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    if !(tolerance > 0.0) {
        return Err(range(format!("tolerance must be positive, got {tolerance}")));
    }
    if tolerance < 4.0 * f64::EPSILON {
        return Err(KcmError::Convergence(format!(
            "tolerance {tolerance:e} is below double-precision resolution"
        )));
    }
    let mut current = v.to_vec();
    if a == 0.0 {
        return Ok(current);
    }
    let chunks = (a / MAX_CHUNK_RATE).ceil().max(1.0);
    let ac = a / chunks;
    let tol = tolerance / chunks;
    let cap = (ac + 40.0 * ac.sqrt() + 200.0).ceil() as usize;
    let mut term = vec![0.0; v.len()];
    let mut next = vec![0.0; v.len()];
    for _ in 0..chunks as usize {
        let mut weight = (-ac).exp();
        let mut mass = weight;
        let mut acc: Vec<f64> = current.iter().map(|x| weight * x).collect();
        term.copy_from_slice(&current);
        let mut k = 0usize;
        while 1.0 - mass > tol {
            k += 1;
            if k > cap {
                return Err(KcmError::Convergence(format!(
                    "uniformization tail {:e} above {tol:e} after {cap} terms",
                    1.0 - mass
                )));
            }
            step(&term, &mut next);
            std::mem::swap(&mut term, &mut next);
            weight *= ac / k as f64;
            mass += weight;
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += weight * t);
        }
        current = acc;
    }
    Ok(current)
}

/// One step of the uniformized chain acting on a row vector: `out = v (I + Q/Λ)`.
pub(crate) fn left_step<'g>(gen: &'g Generator) -> impl Fn(&[f64], &mut [f64]) + 'g {
    let rate = gen.uniformization_rate().max(f64::MIN_POSITIVE);
    move |v, out| {
        gen.apply_left(v, out);
        out.iter_mut().zip(v).for_each(|(o, x)| *o = x + *o / rate);
    }
}

pub(crate) fn evolve_vector(gen: &Generator, v: &[f64], t: f64, tolerance: f64) -> Result<Vec<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(range(format!("time must be finite and nonnegative, got {t}")));
    }
    poisson_series(left_step(gen), v, gen.uniformization_rate() * t, tolerance)
}

/// `ν_t = ν e^{tQ}`, renormalized.
pub fn evolve_distribution(
    gen: &Generator,
    dist: &Distribution,
    t: f64,
    tolerance: f64,
) -> Result<Distribution> {
    if dist.sites() != gen.sites() {
        return Err(dimension("distribution and generator live on different regions"));
    }
    let out = evolve_vector(gen, dist.weights(), t, tolerance)?;
    Ok(Distribution::renormalized(
        gen.sites().to_vec(),
        out,
        "uniformization",
    ))
}

/// Evolves many row vectors by the same time, in parallel over rows.
pub(crate) fn evolve_rows(gen: &Generator, rows: &mut [Vec<f64>], t: f64, tolerance: f64) -> Result<()> {
    let results = par::map_slice(rows, |row| evolve_vector(gen, row, t, tolerance));
    for (row, r) in rows.iter_mut().zip(results) {
        *row = r?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::generator::build_generator;
    use crate::lattice::{Model, Region};
    use crate::measure::{product_distribution, tv_distance, DEFAULT_STATE_CAP};
    use approx::assert_relative_eq;

    #[test]
    fn zero_time_is_identity() {
        let m = Model::north_east(2, 2, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let d = Distribution::point_mass(g.sites().to_vec(), 5).unwrap();
        assert_eq!(evolve_distribution(&g, &d, 0.0, DEFAULT_TOLERANCE).unwrap(), d);
    }

    #[test]
    fn stationary_is_invariant() {
        let m = Model::north_east(2, 3, 0.3).unwrap();
        let r = Region::full(&m);
        let g = build_generator(&m, &r, DEFAULT_STATE_CAP).unwrap();
        let pi = product_distribution(&m, &r, DEFAULT_STATE_CAP).unwrap();
        for t in [0.5, 3.0, 40.0, 700.0] {
            let e = evolve_distribution(&g, &pi, t, DEFAULT_TOLERANCE).unwrap();
            assert!(tv_distance(&e, &pi).unwrap() < 1e-10);
        }
    }

    #[test]
    fn single_site_closed_form() {
        let m = Model::north_east(1, 1, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let d = Distribution::point_mass(vec![0], 1).unwrap();
        for t in [0.1, 2.0, 9.0] {
            let e = evolve_distribution(&g, &d, t, DEFAULT_TOLERANCE).unwrap();
            assert_relative_eq!(e.weight(1), 0.3 + 0.7 * (-t).exp(), epsilon = 1e-10);
        }
        let e = evolve_distribution(&g, &d, 2.0, DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(e.weight(1), 0.39474, epsilon = 1e-5);
    }

    #[test]
    fn long_times_chunk() {
        let m = Model::north_east(1, 1, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let d = Distribution::point_mass(vec![0], 0).unwrap();
        let e = evolve_distribution(&g, &d, 5000.0, DEFAULT_TOLERANCE).unwrap();
        assert_relative_eq!(e.weight(1), 0.3, epsilon = 1e-9);
    }

    #[test]
    fn errors() {
        let m = Model::north_east(1, 1, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let d = Distribution::point_mass(vec![0], 0).unwrap();
        assert!(matches!(
            evolve_distribution(&g, &d, 1.0, 1e-30),
            Err(KcmError::Convergence(_))
        ));
        assert!(evolve_distribution(&g, &d, -1.0, 1e-10).is_err());
        let other = Distribution::point_mass(vec![1], 0).unwrap();
        assert!(evolve_distribution(&g, &other, 1.0, 1e-10).is_err());
    }
}
