use nalgebra::DMatrix;

use crate::error::Result;
use crate::lattice::{Model, Region};
use crate::measure::{pi_weight_of_id, state_space_size};
use crate::par;

const PAR_MIN_LEN: usize = 4096;

/// Sparse rate matrix of the dynamics on a region's state space.
///
/// State ids are region-local bit patterns. The off-diagonal entry
/// `Q[σ, σ^x] = c_x(σ) · (p if σ_x = 0 else q)`; the diagonal makes rows
/// sum to zero. Since `c_x` does not read `σ_x`, the sparsity pattern is
/// symmetric and `Q` is reversible with respect to the product measure.
#[derive(Clone, Debug)]
pub struct Generator {
    sites: Vec<usize>,
    p: f64,
    q: f64,
    masks: Vec<usize>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    diag: Vec<f64>,
    pi: Vec<f64>,
    unif_rate: f64,
}

pub fn build_generator(model: &Model, region: &Region, cap: usize) -> Result<Generator> {
    let states = state_space_size(region.len(), cap)?;
    let masks: Vec<usize> = region
        .sites()
        .iter()
        .map(|&x| {
            model.neighborhood(x).iter().fold(0usize, |m, &y| {
                m | 1 << region.position(y).expect("region is constraint-closed")
            })
        })
        .collect();
    let (p, q) = (model.p(), model.q());
    let mut row_ptr = Vec::with_capacity(states + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut diag = Vec::with_capacity(states);
    row_ptr.push(0);
    for s in 0..states {
        let mut out = 0.0;
        for (k, &mask) in masks.iter().enumerate() {
            if s & mask == 0 {
                let rate = if s >> k & 1 == 0 { p } else { q };
                cols.push((s ^ (1 << k)) as u32);
                rates.push(rate);
                out += rate;
            }
        }
        diag.push(-out);
        row_ptr.push(cols.len());
    }
    let len = region.len();
    let pi = par::map_indexed(states, |s| pi_weight_of_id(p, q, s, len));
    let unif_rate = diag.iter().fold(0.0f64, |m, d| m.max(-d));
    Ok(Generator {
        sites: region.sites().to_vec(),
        p,
        q,
        masks,
        row_ptr,
        cols,
        rates,
        diag,
        pi,
        unif_rate,
    })
}

impl Generator {
    pub fn num_states(&self) -> usize {
        self.diag.len()
    }

    /// Global site indices of the state bits.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Constraint bitmask of the site at local position `k`.
    pub fn constraint_mask(&self, k: usize) -> usize {
        self.masks[k]
    }

    /// `c_k(σ)` for the site at local position `k`.
    pub fn constraint(&self, state: usize, k: usize) -> bool {
        state & self.masks[k] == 0
    }

    pub fn num_off_diagonal(&self) -> usize {
        self.cols.len()
    }

    /// Off-diagonal entries of row `s`.
    pub fn row(&self, s: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[s]..self.row_ptr[s + 1];
        self.cols[r.clone()]
            .iter()
            .zip(&self.rates[r])
            .map(|(&c, &w)| (c as usize, w))
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return self.diag[from];
        }
        self.row(from)
            .find(|&(c, _)| c == to)
            .map_or(0.0, |(_, w)| w)
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `Λ_u = max_σ |Q[σ,σ]|`.
    pub fn uniformization_rate(&self) -> f64 {
        self.unif_rate
    }

    /// Product measure on the state space.
    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    fn incoming_rate(&self, to: usize, from: usize) -> f64 {
        let k = (to ^ from).trailing_zeros();
        if to >> k & 1 == 1 {
            self.p
        } else {
            self.q
        }
    }

    /// `out = v Q` (row vector action).
    pub fn apply_left(&self, v: &[f64], out: &mut [f64]) {
        par::for_each_mut_min(out, PAR_MIN_LEN, |eta, o| {
            let mut acc = v[eta] * self.diag[eta];
            for (sigma, _) in self.row(eta) {
                acc += v[sigma] * self.incoming_rate(eta, sigma);
            }
            *o = acc;
        });
    }

    /// `out = Q v` (column vector action).
    pub fn apply_right(&self, v: &[f64], out: &mut [f64]) {
        par::for_each_mut_min(out, PAR_MIN_LEN, |s, o| {
            let mut acc = v[s] * self.diag[s];
            for (t, w) in self.row(s) {
                acc += w * v[t];
            }
            *o = acc;
        });
    }

    /// `out = S v` with `S = D^{1/2} Q D^{-1/2}`, `D = diag(π)`. Off-diagonal
    /// entries of `S` are all `sqrt(pq)`.
    pub fn apply_symmetrized(&self, v: &[f64], out: &mut [f64]) {
        let off = (self.p * self.q).sqrt();
        par::for_each_mut_min(out, PAR_MIN_LEN, |s, o| {
            let r = self.row_ptr[s]..self.row_ptr[s + 1];
            let sum: f64 = self.cols[r].iter().map(|&c| v[c as usize]).sum();
            *o = self.diag[s] * v[s] + off * sum;
        });
    }

    pub fn dense_symmetrized(&self) -> DMatrix<f64> {
        let n = self.num_states();
        let off = (self.p * self.q).sqrt();
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            m[(s, s)] = self.diag[s];
            for (t, _) in self.row(s) {
                m[(s, t)] = off;
            }
        }
        m
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.num_states();
        let mut m = DMatrix::zeros(n, n);
        for s in 0..n {
            m[(s, s)] = self.diag[s];
            for (t, w) in self.row(s) {
                m[(s, t)] = w;
            }
        }
        m
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.num_states())
            .map(|s| (self.diag[s] + self.row(s).map(|(_, w)| w).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative violation of `π(σ)Q[σ,η] = π(η)Q[η,σ]`.
    pub fn max_detailed_balance_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for s in 0..self.num_states() {
            for (t, w) in self.row(s) {
                let a = self.pi[s] * w;
                let b = self.pi[t] * self.rate(t, s);
                worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
            }
        }
        worst
    }

    /// `𝒟(f) = ½ Σ_{σ,η} π(σ) Q[σ,η] (f(η) − f(σ))²`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        let terms = par::map_indexed(self.num_states(), |s| {
            self.row(s)
                .map(|(t, w)| w * (f[t] - f[s]).powi(2))
                .sum::<f64>()
                * self.pi[s]
        });
        0.5 * terms.iter().sum::<f64>()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mean: f64 = self.pi.iter().zip(f).map(|(p, x)| p * x).sum();
        self.pi
            .iter()
            .zip(f)
            .map(|(p, x)| p * (x - mean).powi(2))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::DEFAULT_STATE_CAP;
    use approx::assert_relative_eq;

    fn full(model: &Model) -> Generator {
        build_generator(model, &Region::full(model), DEFAULT_STATE_CAP).unwrap()
    }

    #[test]
    fn single_site_matrix() {
        let m = Model::north_east(1, 1, 0.3).unwrap();
        let g = full(&m);
        let q = g.dense();
        assert_relative_eq!(q[(0, 0)], -0.3);
        assert_relative_eq!(q[(0, 1)], 0.3);
        assert_relative_eq!(q[(1, 0)], 0.7);
        assert_relative_eq!(q[(1, 1)], -0.7);
        assert_relative_eq!(g.uniformization_rate(), 0.7);
    }

    #[test]
    fn rows_and_balance() {
        for m in [
            Model::north_east(2, 3, 0.3).unwrap(),
            Model::maximal(2, 3, 0.3).unwrap(),
            Model::north_east(3, 2, 0.6).unwrap(),
        ] {
            let g = full(&m);
            assert!(g.max_row_sum() < 1e-12);
            assert!(g.max_detailed_balance_error() < 1e-12);
            for s in 0..g.num_states() {
                assert!(g.row(s).count() <= m.num_sites());
                assert!(g.row(s).all(|(_, w)| w > 0.0));
            }
        }
    }

    #[test]
    fn actions_agree_with_dense() {
        let m = Model::maximal(2, 2, 0.35).unwrap();
        let g = full(&m);
        let v: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
        let q = g.dense();
        let dv = nalgebra::DVector::from_vec(v.clone());
        let mut out = vec![0.0; 16];
        g.apply_right(&v, &mut out);
        let expect = &q * &dv;
        for i in 0..16 {
            assert_relative_eq!(out[i], expect[i], epsilon = 1e-14);
        }
        g.apply_left(&v, &mut out);
        let expect = q.transpose() * &dv;
        for i in 0..16 {
            assert_relative_eq!(out[i], expect[i], epsilon = 1e-14);
        }
        g.apply_symmetrized(&v, &mut out);
        let expect = g.dense_symmetrized() * &dv;
        for i in 0..16 {
            assert_relative_eq!(out[i], expect[i], epsilon = 1e-14);
        }
        let s = g.dense_symmetrized();
        assert_relative_eq!(s.clone(), s.transpose(), epsilon = 1e-15);
    }

    #[test]
    fn corner_indicator_certifies_unit_rate() {
        let m = Model::north_east(2, 3, 0.3).unwrap();
        let g = full(&m);
        let f: Vec<f64> = (0..g.num_states()).map(|s| (s & 1) as f64).collect();
        assert_relative_eq!(g.dirichlet_form(&f) / g.variance(&f), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lower_set_generator() {
        let m = Model::north_east(2, 3, 0.3).unwrap();
        let u = Region::lower_set(&m, 3).unwrap();
        let g = build_generator(&m, &u, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(g.num_states(), 8);
        assert_eq!(g.sites(), u.sites());
        assert!(build_generator(&m, &Region::full(&m), 256).is_err());
    }
}
