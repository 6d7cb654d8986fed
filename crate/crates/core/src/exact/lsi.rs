use serde::Serialize;

use super::generator::build_generator;
use super::ExactOptions;
use crate::error::Result;
use crate::lattice::{Model, Region};

/// `𝒟(f) / Ent_π(f²)` for `f` the indicator of the all-ones configuration,
/// an upper bound on the log-Sobolev constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LsiBound {
    pub dirichlet: f64,
    pub entropy: f64,
    pub bound: f64,
    pub num_sites: usize,
}

pub fn lsi_upper_bound(model: &Model, opts: &ExactOptions) -> Result<LsiBound> {
    let gen = build_generator(model, &Region::full(model), opts.state_cap)?;
    let n = gen.num_states();
    let mut f = vec![0.0; n];
    f[n - 1] = 1.0;
    let dirichlet = gen.dirichlet_form(&f);
    let pi = gen.stationary();
    // Ent_π(g) = π(g ln g) − π(g) ln π(g), with 0 ln 0 = 0; here g = f² = f.
    let mean: f64 = pi.iter().zip(&f).map(|(p, g)| p * g).sum();
    let g_ln_g: f64 = pi
        .iter()
        .zip(&f)
        .filter(|(_, &g)| g > 0.0)
        .map(|(p, &g)| p * g * g.ln())
        .sum();
    let entropy = g_ln_g - mean * mean.ln();
    Ok(LsiBound {
        dirichlet,
        entropy,
        bound: dirichlet / entropy,
        num_sites: model.num_sites(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_site() {
        let m = Model::maximal(1, 1, 0.3).unwrap();
        let b = lsi_upper_bound(&m, &ExactOptions::default()).unwrap();
        assert_relative_eq!(b.dirichlet, 0.21, epsilon = 1e-15);
        assert_relative_eq!(b.entropy, 0.361192, epsilon = 1e-6);
        assert_relative_eq!(b.bound, 0.21 / (-0.3 * 0.3f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn closed_form_for_oriented_families() {
        // only the corner is unconstrained in the all-ones state
        for m in [
            Model::maximal(2, 3, 0.3).unwrap(),
            Model::north_east(2, 3, 0.6).unwrap(),
            Model::maximal(3, 2, 0.2).unwrap(),
        ] {
            let b = lsi_upper_bound(&m, &ExactOptions::default()).unwrap();
            let n = m.num_sites() as f64;
            assert!(b.bound > 0.0);
            assert_relative_eq!(b.bound, m.q() / (n * (1.0 / m.p()).ln()), max_relative = 1e-12);
        }
    }
}
