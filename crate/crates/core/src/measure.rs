//! Spin configurations, the product Bernoulli measure and dense probability
//! vectors over exact state spaces.
//!
//! A state id over a site list `sites` (sorted by global index) has bit `k`
//! equal to the spin at `sites[k]`. Over the full lattice this is simply the
//! lattice index order.

use std::io::Write;

use bitvec::prelude::*;

use crate::error::{dimension, validation, KcmError, Result};
use crate::lattice::{Geometry, Model, Region};
use crate::par;

/// Default ceiling on exact state spaces (2^24 states).
pub const DEFAULT_STATE_CAP: usize = 1 << 24;

/// Allowed normalization drift before a renormalization is reported.
pub const DRIFT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    bits: BitVec<u64, Lsb0>,
}

impl SpinConfig {
    pub fn zeros(len: usize) -> Self {
        Self {
            bits: bitvec![u64, Lsb0; 0; len],
        }
    }

    pub fn ones(len: usize) -> Self {
        Self {
            bits: bitvec![u64, Lsb0; 1; len],
        }
    }

    pub fn from_bools(spins: &[bool]) -> Self {
        Self {
            bits: spins.iter().copied().collect(),
        }
    }

    pub fn from_state_id(id: u64, len: usize) -> Result<Self> {
        if len > 64 || (len < 64 && id >> len != 0) {
            return Err(dimension(format!("state id {id} does not fit {len} sites")));
        }
        let mut bits = bitvec![u64, Lsb0; 0; len];
        for k in 0..len {
            bits.set(k, id >> k & 1 == 1);
        }
        Ok(Self { bits })
    }

    /// Integer state id, available when the configuration has at most 64 sites.
    pub fn state_id(&self) -> Option<u64> {
        if self.bits.len() > 64 {
            return None;
        }
        Some(
            self.bits
                .iter_ones()
                .fold(0u64, |acc, k| acc | (1u64 << k)),
        )
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, k: usize) -> bool {
        self.bits[k]
    }

    pub fn set(&mut self, k: usize, value: bool) {
        self.bits.set(k, value);
    }

    /// `σ^x`: copy with spin `k` flipped.
    pub fn flipped(&self, k: usize) -> Self {
        let mut out = self.clone();
        let v = out.bits[k];
        out.bits.set(k, !v);
        out
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().by_vals()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Restriction of a configuration on `from` to the sub-region `to`.
    pub fn restrict(&self, from: &Region, to: &Region) -> Result<Self> {
        if self.len() != from.len() {
            return Err(dimension("configuration length does not match its region"));
        }
        let mut out = Self::zeros(to.len());
        for (k, &s) in to.sites().iter().enumerate() {
            let pos = from
                .position(s)
                .ok_or_else(|| dimension("target region is not contained in the source region"))?;
            out.set(k, self.get(pos));
        }
        Ok(out)
    }
}

/// `π(σ) = p^{#ones} q^{#zeros}`.
pub fn pi_weight(model: &Model, config: &SpinConfig) -> f64 {
    let ones = config.count_ones() as i32;
    let zeros = config.len() as i32 - ones;
    model.p().powi(ones) * model.q().powi(zeros)
}

pub(crate) fn pi_weight_of_id(p: f64, q: f64, id: usize, len: usize) -> f64 {
    let ones = id.count_ones() as i32;
    p.powi(ones) * q.powi(len as i32 - ones)
}

/// Number of states for `num_sites` spins, or a capacity error.
pub fn state_space_size(num_sites: usize, cap: usize) -> Result<usize> {
    let states = 1u128.checked_shl(num_sites as u32).unwrap_or(u128::MAX);
    if num_sites >= 64 || states > cap as u128 {
        return Err(KcmError::Capacity { states, cap });
    }
    Ok(states as usize)
}

/// Dense probability vector over the states of a site list.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    sites: Vec<usize>,
    weights: Vec<f64>,
}

impl Distribution {
    /// Validates nonnegativity and normalization (within [`DRIFT_TOLERANCE`]),
    /// then renormalizes exactly.
    pub fn new(sites: Vec<usize>, mut weights: Vec<f64>) -> Result<Self> {
        check_len(&sites, weights.len())?;
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(validation(format!("negative or NaN weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > DRIFT_TOLERANCE {
            return Err(validation(format!("weights sum to {total}, not 1")));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { sites, weights })
    }

    /// Renormalizes whatever mass is present, logging drift beyond tolerance.
    pub(crate) fn renormalized(sites: Vec<usize>, mut weights: Vec<f64>, context: &str) -> Self {
        debug_assert_eq!(weights.len(), 1usize << sites.len());
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        let drift = (total - 1.0).abs();
        if drift > DRIFT_TOLERANCE {
            log::warn!("{context}: normalization drift {drift:.3e} corrected");
        } else if drift > 0.0 {
            log::debug!("{context}: normalization drift {drift:.3e} corrected");
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self { sites, weights }
    }

    pub fn point_mass(sites: Vec<usize>, state: usize) -> Result<Self> {
        let len = 1usize
            .checked_shl(sites.len() as u32)
            .filter(|_| sites.len() < usize::BITS as usize)
            .ok_or_else(|| dimension("site list too long for a dense distribution"))?;
        if state >= len {
            return Err(dimension(format!("state {state} outside a space of {len} states")));
        }
        let mut weights = vec![0.0; len];
        weights[state] = 1.0;
        Ok(Self { sites, weights })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_states(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, state: usize) -> f64 {
        self.weights[state]
    }

    /// CSV with a `state_id,weight` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "state_id,weight")?;
        for (s, w) in self.weights.iter().enumerate() {
            writeln!(out, "{s},{w:e}")?;
        }
        Ok(())
    }
}

fn check_len(sites: &[usize], len: usize) -> Result<()> {
    if sites.len() >= usize::BITS as usize || 1usize << sites.len() != len {
        return Err(dimension(format!(
            "{len} weights for {} sites",
            sites.len()
        )));
    }
    Ok(())
}

/// The product measure restricted to `region`'s state space.
pub fn product_distribution(model: &Model, region: &Region, cap: usize) -> Result<Distribution> {
    let states = state_space_size(region.len(), cap)?;
    let (p, q, len) = (model.p(), model.q(), region.len());
    let weights = par::map_indexed(states, |s| pi_weight_of_id(p, q, s, len));
    Ok(Distribution::renormalized(
        region.sites().to_vec(),
        weights,
        "product distribution",
    ))
}

/// Marginal on `U_i`.
pub fn marginal_on(dist: &Distribution, geometry: &Geometry, i: usize) -> Result<Distribution> {
    let target = geometry.lower_set(i)?;
    marginal_on_sites(dist, &target)
}

/// Marginal on an arbitrary sorted site list contained in the distribution's sites.
pub fn marginal_on_sites(dist: &Distribution, target: &[usize]) -> Result<Distribution> {
    let positions: Vec<usize> = target
        .iter()
        .map(|s| {
            dist.sites
                .binary_search(s)
                .map_err(|_| dimension(format!("site {s} is not in the distribution's region")))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; 1usize << target.len()];
    for (state, &w) in dist.weights.iter().enumerate() {
        let mut t = 0usize;
        for (k, &pos) in positions.iter().enumerate() {
            t |= (state >> pos & 1) << k;
        }
        out[t] += w;
    }
    Ok(Distribution::renormalized(target.to_vec(), out, "marginal"))
}

/// `½ Σ |a_s − b_s|`.
pub fn tv_distance(a: &Distribution, b: &Distribution) -> Result<f64> {
    if a.sites != b.sites || a.weights.len() != b.weights.len() {
        return Err(dimension("distributions live on different state spaces"));
    }
    Ok(tv_slices(&a.weights, &b.weights))
}

pub(crate) fn tv_slices(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `Var_π(ν/π) = Σ ν_s² / π_s − 1`.
pub fn chi_square_distance(dist: &Distribution, model: &Model) -> Result<f64> {
    let pi: Vec<f64> = (0..dist.num_states())
        .map(|s| pi_weight_of_id(model.p(), model.q(), s, dist.sites.len()))
        .collect();
    Ok(chi_square_slices(&dist.weights, &pi))
}

pub(crate) fn chi_square_slices(nu: &[f64], pi: &[f64]) -> f64 {
    nu.iter().zip(pi).map(|(n, p)| n * n / p).sum::<f64>() - 1.0
}
