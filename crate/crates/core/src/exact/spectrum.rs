//! Extremal eigenvalues of symmetrized generators.
//!
//! Small state spaces use a dense symmetric eigendecomposition. Larger ones
//! use Lanczos with full reorthogonalization and explicit restarts from the
//! current Ritz vector; a known eigenvector (here `√π`) can be deflated.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::generator::Generator;
use crate::error::{KcmError, Result};

/// Largest state space handled by the dense path.
pub const DENSE_LIMIT: usize = 1 << 11;

/// Required residual of reported eigenpairs.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

impl EigenMethod {
    pub fn for_size(states: usize) -> Self {
        if states <= DENSE_LIMIT {
            EigenMethod::Dense
        } else {
            EigenMethod::Lanczos
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumResult {
    /// `λ = −(largest nonzero eigenvalue of Q)`.
    pub gap: f64,
    pub method: EigenMethod,
    /// `‖S v − (−λ) v‖` for the returned unit eigenvector.
    pub residual: f64,
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
}

pub fn spectral_gap(generator: &Generator) -> Result<SpectrumResult> {
    spectral_gap_with(generator, EigenMethod::for_size(generator.num_states()))
}

pub fn spectral_gap_with(generator: &Generator, method: EigenMethod) -> Result<SpectrumResult> {
    let n = generator.num_states();
    if n < 2 {
        return Err(KcmError::Validation("state space has a single state".into()));
    }
    let scale = generator.uniformization_rate().max(1.0);
    let (value, vector, residual) = match method {
        EigenMethod::Dense => {
            let eig = SymmetricEigen::new(generator.dense_symmetrized());
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let top = eig.eigenvalues[order[0]];
            if top.abs() > 1e-9 * scale {
                return Err(KcmError::Convergence(format!(
                    "top eigenvalue {top:e} of a generator is not zero"
                )));
            }
            let k = order[1];
            let vector: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            let value = eig.eigenvalues[k];
            let residual = residual_norm(|v, o| generator.apply_symmetrized(v, o), &vector, value);
            (value, vector, residual)
        }
        EigenMethod::Lanczos => {
            let sqrt_pi: Vec<f64> = generator.stationary().iter().map(|p| p.sqrt()).collect();
            let top = lanczos_top(
                n,
                |v, o| generator.apply_symmetrized(v, o),
                Some(&sqrt_pi),
                &LanczosOptions::default(),
            )?;
            (top.value, top.vector, top.residual)
        }
    };
    if value >= -1e-9 * scale {
        return Err(KcmError::Irreducible(format!(
            "zero eigenvalue is not simple (next eigenvalue {value:e})"
        )));
    }
    if residual > RESIDUAL_TOLERANCE {
        return Err(KcmError::Convergence(format!(
            "gap eigenpair residual {residual:e} above {RESIDUAL_TOLERANCE:e}"
        )));
    }
    Ok(SpectrumResult {
        gap: -value,
        method,
        residual,
        eigenvector: vector,
    })
}

/// Largest eigenvalue of a dense symmetric matrix with its residual.
pub(crate) fn dense_top(m: DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(m);
    let k = eig.eigenvalues.imax();
    (
        eig.eigenvalues[k],
        eig.eigenvectors.column(k).iter().copied().collect(),
    )
}

pub(crate) fn residual_norm(apply: impl Fn(&[f64], &mut [f64]), v: &[f64], value: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    apply(v, &mut av);
    av.iter()
        .zip(v)
        .map(|(a, x)| (a - value * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug)]
pub(crate) struct LanczosOptions {
    pub basis: usize,
    pub restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            basis: 80,
            restarts: 200,
            tolerance: 1e-10,
            seed: 0x1a2c_705e,
        }
    }
}

pub(crate) struct TopEigen {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Largest eigenpair of a symmetric operator, optionally restricted to the
/// orthogonal complement of `deflate` (which must be an eigenvector).
pub(crate) fn lanczos_top(
    dim: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    deflate: Option<&[f64]>,
    opts: &LanczosOptions,
) -> Result<TopEigen> {
    let unit_deflate: Option<Vec<f64>> = deflate.map(|d| {
        let mut d = d.to_vec();
        normalize(&mut d);
        d
    });
    let project = |v: &mut [f64]| {
        if let Some(d) = &unit_deflate {
            let c = dot(v, d);
            axpy(-c, d, v);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut start);
    normalize(&mut start);

    let basis = opts.basis.min(dim.saturating_sub(usize::from(deflate.is_some()))).max(1);
    let mut best = TopEigen {
        value: f64::NAN,
        vector: start.clone(),
        residual: f64::INFINITY,
    };
    for _ in 0..opts.restarts {
        let mut vs: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; dim];
        for j in 0..basis {
            apply(&vs[j], &mut w);
            let a = dot(&w, &vs[j]);
            alpha.push(a);
            for _ in 0..2 {
                for v in &vs {
                    let c = dot(&w, v);
                    axpy(-c, v, &mut w);
                }
                project(&mut w);
            }
            if j + 1 == basis {
                break;
            }
            let b = normalize(&mut w);
            if b < 1e-13 {
                break;
            }
            beta.push(b);
            vs.push(w.clone());
        }
        let k = alpha.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (_, y) = dense_top(t);
        let mut x = vec![0.0; dim];
        for (yi, v) in y.iter().zip(&vs) {
            axpy(*yi, v, &mut x);
        }
        project(&mut x);
        normalize(&mut x);
        let value = {
            apply(&x, &mut w);
            dot(&w, &x)
        };
        let residual = residual_norm(&apply, &x, value);
        if residual < best.residual {
            best = TopEigen {
                value,
                vector: x.clone(),
                residual,
            };
        }
        if residual <= opts.tolerance || k == dim {
            return Ok(best);
        }
        start = x;
    }
    if best.residual <= RESIDUAL_TOLERANCE {
        return Ok(best);
    }
    Err(KcmError::Convergence(format!(
        "Lanczos stalled at residual {:e}",
        best.residual
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::generator::build_generator;
    use crate::lattice::{Model, Region};
    use crate::measure::DEFAULT_STATE_CAP;
    use approx::assert_relative_eq;

    #[test]
    fn single_site_gap_is_one() {
        let m = Model::north_east(1, 1, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let s = spectral_gap(&g).unwrap();
        assert_relative_eq!(s.gap, 1.0, epsilon = 1e-14);
        assert_eq!(s.method, EigenMethod::Dense);
    }

    #[test]
    fn dense_and_lanczos_agree() {
        for m in [
            Model::north_east(2, 3, 0.3).unwrap(),
            Model::maximal(2, 3, 0.45).unwrap(),
            Model::north_east(3, 2, 0.3).unwrap(),
        ] {
            let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
            let d = spectral_gap_with(&g, EigenMethod::Dense).unwrap();
            let l = spectral_gap_with(&g, EigenMethod::Lanczos).unwrap();
            assert_relative_eq!(d.gap, l.gap, epsilon = 1e-9);
            assert!(d.residual <= RESIDUAL_TOLERANCE && l.residual <= RESIDUAL_TOLERANCE);
        }
    }

    #[test]
    fn gap_at_most_one() {
        for m in [
            Model::north_east(2, 2, 0.1).unwrap(),
            Model::north_east(2, 2, 0.9).unwrap(),
            Model::maximal(2, 3, 0.5).unwrap(),
            Model::north_east(1, 5, 0.3).unwrap(),
        ] {
            let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
            let s = spectral_gap(&g).unwrap();
            assert!(s.gap > 0.0 && s.gap <= 1.0 + 1e-10, "gap {}", s.gap);
        }
    }

    #[test]
    fn lanczos_on_diagonal_operator() {
        let diag: Vec<f64> = (0..300).map(|i| -(i as f64) / 7.0).collect();
        let top = lanczos_top(
            300,
            |v, o| {
                for i in 0..300 {
                    o[i] = diag[i] * v[i];
                }
            },
            None,
            &LanczosOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(top.value, 0.0, epsilon = 1e-10);
        let mut e0 = vec![0.0; 300];
        e0[0] = 1.0;
        let defl = lanczos_top(
            300,
            |v, o| {
                for i in 0..300 {
                    o[i] = diag[i] * v[i];
                }
            },
            Some(&e0),
            &LanczosOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(defl.value, -1.0 / 7.0, epsilon = 1e-9);
    }
}
