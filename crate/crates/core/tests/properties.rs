use kcm::dynamics::{restricted_consistency_check, simulate, RandomnessStream};
use kcm::measure::{
    chi_square_distance, marginal_on, marginal_on_sites, product_distribution, tv_distance,
    Distribution, SpinConfig, DEFAULT_STATE_CAP,
};
use kcm::{Model, Region};
use proptest::prelude::*;

fn small_model() -> impl Strategy<Value = Model> {
    (1usize..=3, 1usize..=4, 0.05f64..0.95, any::<bool>()).prop_map(|(d, n, p, max)| {
        let n = if d == 3 { n.min(3) } else { n };
        if max {
            Model::maximal(d, n, p).unwrap()
        } else {
            Model::north_east(d, n, p).unwrap()
        }
    })
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1 << len).prop_filter_map("nonzero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constraint_ignores_own_spin(model in small_model(), seed in any::<u64>()) {
        let n = model.num_sites();
        let spins: Vec<bool> = (0..n).map(|k| (seed >> (k % 64)) & 1 == 1).collect();
        for x in 0..n {
            let a = model.constraint_with(x, |y| spins[y]);
            let b = model.constraint_with(x, |y| if y == x { !spins[y] } else { spins[y] });
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn neighbourhoods_point_down(model in small_model()) {
        let g = model.geometry();
        for x in 0..model.num_sites() {
            for &y in model.neighborhood(x) {
                prop_assert!(g.level(y) < g.level(x));
                prop_assert!(g.coords(y).iter().zip(g.coords(x)).all(|(a, b)| a <= b));
            }
        }
        prop_assert!(model.neighborhood(g.corner()).is_empty());
    }

    #[test]
    fn north_east_within_maximal(d in 1usize..=3, n in 1usize..=4) {
        let ne = Model::north_east(d, n, 0.3).unwrap();
        let mx = Model::maximal(d, n, 0.3).unwrap();
        for x in 0..ne.num_sites() {
            prop_assert!(ne.neighborhood(x).iter().all(|y| mx.neighborhood(x).contains(y)));
        }
    }

    #[test]
    fn state_id_round_trip(len in 1usize..=20, id in any::<u64>()) {
        let id = id & ((1u64 << len) - 1);
        let c = SpinConfig::from_state_id(id, len).unwrap();
        prop_assert_eq!(c.state_id(), Some(id));
        prop_assert_eq!(SpinConfig::from_bools(&c.to_bools()), c);
    }

    #[test]
    fn tv_is_a_metric(a in distribution(3), b in distribution(3), c in distribution(3)) {
        let sites: Vec<usize> = (0..3).collect();
        let a = Distribution::new(sites.clone(), a).unwrap();
        let b = Distribution::new(sites.clone(), b).unwrap();
        let c = Distribution::new(sites, c).unwrap();
        let ab = tv_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!((ab - tv_distance(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(tv_distance(&a, &a).unwrap() == 0.0);
        prop_assert!(ab <= tv_distance(&a, &c).unwrap() + tv_distance(&c, &b).unwrap() + 1e-12);
    }

    #[test]
    fn chi_square_dominates_tv(w in distribution(4)) {
        let model = Model::north_east(2, 2, 0.3).unwrap();
        let full = Region::full(&model);
        let nu = Distribution::new(full.sites().to_vec(), w).unwrap();
        let pi = product_distribution(&model, &full, DEFAULT_STATE_CAP).unwrap();
        let tv = tv_distance(&nu, &pi).unwrap();
        prop_assert!(chi_square_distance(&nu, &model).unwrap() >= 4.0 * tv * tv - 1e-12);
    }

    #[test]
    fn marginals_compose(w in distribution(9), i in 2usize..=5) {
        let model = Model::north_east(2, 3, 0.3).unwrap();
        let g = model.geometry();
        let nu = Distribution::new(Region::full(&model).sites().to_vec(), w).unwrap();
        let direct = marginal_on(&nu, g, i).unwrap();
        let via = marginal_on(&marginal_on(&nu, g, i + 1).unwrap(), g, i).unwrap();
        prop_assert!(tv_distance(&direct, &via).unwrap() < 1e-12);
        let again = marginal_on_sites(&nu, direct.sites()).unwrap();
        prop_assert!(tv_distance(&direct, &again).unwrap() < 1e-12);
    }

    #[test]
    fn simulation_deterministic_and_replayable(seed in any::<u64>(), init in any::<u16>()) {
        let model = Model::north_east(2, 4, 0.3).unwrap();
        let full = Region::full(&model);
        let initial = SpinConfig::from_state_id(u64::from(init), 16).unwrap();
        let s = RandomnessStream::new(seed);
        let a = simulate(&model, &full, &initial, 5.0, &s).unwrap();
        let b = simulate(&model, &full, &initial, 5.0, &s).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.replay(), a.final_config.clone());
        prop_assert!(a.events.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn restricted_dynamics_agree(seed in any::<u64>(), i in 2usize..=7, init in any::<u16>()) {
        let model = Model::north_east(2, 4, 0.3).unwrap();
        let initial = SpinConfig::from_state_id(u64::from(init), 16).unwrap();
        let s = RandomnessStream::new(seed);
        prop_assert!(restricted_consistency_check(&model, i, &initial, 10.0, &s).unwrap());
    }
}
