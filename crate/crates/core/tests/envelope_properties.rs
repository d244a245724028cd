use markedshapes::curves::{curve_to_srv, Vec2};
use markedshapes::envelopes::{global_erl_p, permutation_statistics, pointwise_envelope, EnvelopeOptions};
use markedshapes::pointprocess::{r_grid, MarkedPattern, Window};
use markedshapes::registration::SymmetryGroup;
use markedshapes::simulate::fourier_shape;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_pattern(seed: u64, n: usize) -> MarkedPattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let locs = (0..n)
        .map(|_| Vec2::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)))
        .collect();
    let marks = (0..n)
        .map(|_| {
            let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            curve_to_srv(&fourier_shape(&c, 96).unwrap().scaled(rng.random_range(0.2..1.2)), 24).unwrap()
        })
        .collect();
    MarkedPattern::new(Window::square(4.0), locs, marks).unwrap()
}

fn opts(s: usize, seed: u64) -> EnvelopeOptions {
    EnvelopeOptions {
        permutations: s,
        seed,
        ..EnvelopeOptions::default()
    }
}

#[test]
fn five_point_pattern_is_reproducible() {
    let p = small_pattern(51, 5);
    let grid = r_grid(1.0, 8).unwrap();
    for g in SymmetryGroup::ALL {
        let a = permutation_statistics(&p, g, &grid, &opts(19, 3)).unwrap();
        let b = permutation_statistics(&p, g, &grid, &opts(19, 3)).unwrap();
        assert_eq!(a.t_permuted.len(), 19);
        assert_eq!(a, b);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.t_observed), bits(&b.t_observed));
    }
}

#[test]
fn too_few_permutations_are_rejected() {
    let p = small_pattern(52, 5);
    let grid = r_grid(1.0, 8).unwrap();
    assert!(permutation_statistics(&p, SymmetryGroup::Shape, &grid, &opts(18, 0)).is_err());
}

#[test]
fn result_is_independent_of_worker_count() {
    let p = small_pattern(53, 30);
    let grid = r_grid(1.0, 10).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| permutation_statistics(&p, SymmetryGroup::SizeShape, &grid, &opts(39, 9)).unwrap())
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn result_invariants_hold() {
    let p = small_pattern(54, 40);
    let grid = r_grid(1.0, 12).unwrap();
    for g in SymmetryGroup::ALL {
        let res = permutation_statistics(&p, g, &grid, &opts(99, 1)).unwrap();
        assert!(res.erl_p >= 1.0 / 100.0 && res.erl_p <= 1.0);
        assert!((0.0..=1.0).contains(&res.deviation_proportion));
        assert!(res.pointwise_lo.iter().zip(&res.pointwise_hi).all(|(l, h)| l <= h));
        assert!(res.k_lo.iter().zip(&res.k_hi).all(|(l, h)| l <= h));
        assert_eq!(res.global_p().unwrap(), res.erl_p);
    }
}

fn ensemble(rng: &mut ChaCha8Rng, s: usize, nr: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    // few distinct levels so ties are common
    let mut draw = || (0..nr).map(|_| rng.random_range(0..5) as f64).collect::<Vec<f64>>();
    let obs = draw();
    (obs, (0..s).map(|_| draw()).collect())
}

proptest! {
    #[test]
    fn p_value_ignores_the_order_of_permutation_curves(seed in any::<u64>(), s in 1usize..12, nr in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (obs, mut perm) = ensemble(&mut rng, s, nr);
        let p = global_erl_p(&obs, &perm).unwrap();
        perm.shuffle(&mut rng);
        prop_assert_eq!(p, global_erl_p(&obs, &perm).unwrap());
    }

    #[test]
    fn deviation_proportion_ignores_the_order_of_radii(seed in any::<u64>(), s in 19usize..40, nr in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (obs, perm) = ensemble(&mut rng, s, nr);
        let mut order: Vec<usize> = (0..nr).collect();
        order.shuffle(&mut rng);
        let pick = |c: &[f64]| order.iter().map(|&i| c[i]).collect::<Vec<f64>>();
        let a = pointwise_envelope(&obs, &perm, 0.05).unwrap();
        let b = pointwise_envelope(&pick(&obs), &perm.iter().map(|c| pick(c)).collect::<Vec<_>>(), 0.05).unwrap();
        prop_assert_eq!(a.deviation_proportion, b.deviation_proportion);
        prop_assert_eq!(pick(&a.lo), b.lo);
        prop_assert_eq!(pick(&a.hi), b.hi);
        prop_assert_eq!(global_erl_p(&obs, &perm).unwrap(), global_erl_p(&pick(&obs), &perm.iter().map(|c| pick(c)).collect::<Vec<_>>()).unwrap());
    }
}
