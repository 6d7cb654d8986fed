//! Exact analysis against an independent dense construction of the
//! generator, plus values frozen from a separate dense-matrix computation.

use approx::assert_relative_eq;
use kcm::exact::{
    build_generator, evolve_distribution, feynman_kac_beta, lsi_upper_bound, mixing_time_exact,
    spectral_gap, spectral_gap_with, DistanceMode, EigenMethod, ExactOptions,
};
use kcm::experiments::diagonal_decay_study;
use kcm::measure::{Distribution, DEFAULT_STATE_CAP};
use kcm::{Model, Region};
use nalgebra::{DMatrix, SymmetricEigen};

/// Dense `Q` built from coordinates alone: a site may flip iff every
/// neighbour one step down in some coordinate is 0.
fn north_east_dense(d: usize, n: usize, p: f64) -> (DMatrix<f64>, Vec<f64>) {
    let coords: Vec<Vec<usize>> = (0..n.pow(d as u32))
        .map(|mut s| {
            let mut x = vec![0; d];
            for j in (0..d).rev() {
                x[j] = s % n + 1;
                s /= n;
            }
            x
        })
        .collect();
    let index = |x: &[usize]| x.iter().fold(0, |acc, &c| acc * n + (c - 1));
    let sites = coords.len();
    let states = 1usize << sites;
    let q = 1.0 - p;
    let mut m = DMatrix::zeros(states, states);
    for s in 0..states {
        for (k, x) in coords.iter().enumerate() {
            let free = (0..d).filter(|&j| x[j] > 1).all(|j| {
                let mut y = x.clone();
                y[j] -= 1;
                s >> index(&y) & 1 == 0
            });
            if free {
                m[(s, s ^ (1 << k))] = if s >> k & 1 == 0 { p } else { q };
            }
        }
        let row: f64 = m.row(s).sum();
        m[(s, s)] = -row;
    }
    let pi = (0..states)
        .map(|s| (0..sites).map(|k| if s >> k & 1 == 1 { p } else { q }).product())
        .collect();
    (m, pi)
}

fn dense_gap(m: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = pi.len();
    let s = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * (pi[i] / pi[j]).sqrt());
    let sym = (&s + s.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    -ev[1]
}

#[test]
fn generator_matches_independent_construction() {
    for (d, n) in [(2, 2), (2, 3), (3, 2)] {
        let m = Model::north_east(d, n, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let (dense, pi) = north_east_dense(d, n, 0.3);
        let built = g.dense();
        assert_eq!(built.shape(), dense.shape());
        for (a, b) in built.iter().zip(dense.iter()) {
            assert!((a - b).abs() <= 1e-14, "d={d} n={n}: {a} vs {b}");
        }
        for (a, b) in g.stationary().iter().zip(&pi) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }
}

#[test]
fn nonzero_count_matches_brute_force() {
    let m = Model::north_east(2, 2, 0.3).unwrap();
    let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
    let (dense, _) = north_east_dense(2, 2, 0.3);
    let brute = (0..16)
        .flat_map(|i| (0..16).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && dense[(i, j)] > 0.0)
        .count();
    assert_eq!(brute, 36);
    assert_eq!(g.num_off_diagonal(), brute);
}

#[test]
fn gaps_pinned() {
    // frozen from an independent dense eigendecomposition
    let golden = [
        (2, 2, 0.208_042_993_487_781_77),
        (2, 3, 0.099_330_550_078_192_55),
        (3, 2, 0.092_061_261_858_507_49),
    ];
    for (d, n, gap) in golden {
        let m = Model::north_east(d, n, 0.3).unwrap();
        let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
        let (dense, pi) = north_east_dense(d, n, 0.3);
        assert_relative_eq!(dense_gap(&dense, &pi), gap, epsilon = 1e-10);
        assert_relative_eq!(spectral_gap(&g).unwrap().gap, gap, epsilon = 1e-10);
        assert_relative_eq!(
            spectral_gap_with(&g, EigenMethod::Lanczos).unwrap().gap,
            gap,
            epsilon = 1e-9
        );
    }
}

#[test]
fn evolution_matches_matrix_exponential() {
    let m = Model::north_east(2, 2, 0.3).unwrap();
    let g = build_generator(&m, &Region::full(&m), DEFAULT_STATE_CAP).unwrap();
    let (dense, _) = north_east_dense(2, 2, 0.3);
    for t in [0.3, 2.0, 7.5] {
        let e = (&dense * t).exp();
        for start in [0usize, 6, 15] {
            let d = Distribution::point_mass(g.sites().to_vec(), start).unwrap();
            let out = evolve_distribution(&g, &d, t, 1e-12).unwrap();
            for s in 0..16 {
                assert_relative_eq!(out.weight(s), e[(start, s)], epsilon = 1e-10);
            }
        }
    }
}

#[test]
fn mixing_times_pinned() {
    let opts = ExactOptions::default();
    let two = mixing_time_exact(&Model::north_east(2, 2, 0.3).unwrap(), 0.25, DistanceMode::Tv, &opts)
        .unwrap();
    let three = mixing_time_exact(&Model::north_east(2, 3, 0.3).unwrap(), 0.25, DistanceMode::Tv, &opts)
        .unwrap();
    assert!((two.time - 7.593_025_914).abs() <= 1e-4, "{}", two.time);
    assert!((three.time - 20.505_806_649).abs() <= 1e-4, "{}", three.time);
    assert!(two.trace_is_monotone(1e-12) && three.trace_is_monotone(1e-12));
}

#[test]
fn feynman_kac_top_corner_pinned() {
    let opts = ExactOptions::default();
    for (n, beta) in [(2, -0.208_042_993_487_782_52), (3, -0.099_330_550_078_183)] {
        let m = Model::north_east(2, n, 0.3).unwrap();
        let far = m.geometry().far_corner();
        let r = feynman_kac_beta(&m, far, &opts).unwrap();
        assert_relative_eq!(r.beta, beta, epsilon = 1e-9);
        assert!(r.satisfies_c0());
    }
}

#[test]
fn lsi_pinned() {
    let m = Model::maximal(2, 2, 0.3).unwrap();
    let b = lsi_upper_bound(&m, &ExactOptions::default()).unwrap();
    assert_relative_eq!(b.bound, 0.145_352_120_389_444, epsilon = 1e-12);
}

#[test]
fn diagonal_decay_pinned() {
    let m = Model::north_east(2, 3, 0.3).unwrap();
    let grid = [0.0, 1.0, 5.0, 20.0];
    let s = diagonal_decay_study(&m, 4, &grid, 1.0, &ExactOptions::default()).unwrap();
    let golden = [0.973, 0.600_450_729_415_223, 0.185_449_442_805_734, 0.007_920_379_234_751];
    for (a, b) in s.distances.iter().zip(golden) {
        assert_relative_eq!(*a, b, epsilon = 1e-9);
    }
}
