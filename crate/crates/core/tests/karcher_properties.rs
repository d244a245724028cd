use std::f64::consts::TAU;

use markedshapes::curves::{to_srv, Curve, SrvCurve, Vec2};
use markedshapes::karcher::{karcher_mean, karcher_mean_with, KarcherOptions};
use markedshapes::registration::{apply_alignment, Alignment, SymmetryGroup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 64;

fn random_star(rng: &mut ChaCha8Rng) -> SrvCurve {
    let c: [f64; 6] = std::array::from_fn(|_| rng.random_range(-0.25..0.25));
    let pts = (0..N)
        .map(|k| {
            let t = TAU * k as f64 / N as f64;
            let r = 1.0
                + c[0] * t.cos()
                + c[1] * t.sin()
                + c[2] * (2.0 * t).cos()
                + c[3] * (2.0 * t).sin()
                + c[4] * (3.0 * t).cos()
                + c[5] * (3.0 * t).sin();
            Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    to_srv(&Curve::new(pts).unwrap()).unwrap()
}

/// Rotated, rescaled and cyclically shifted copy of `q`.
fn transformed_copy(q: &SrvCurve, rng: &mut ChaCha8Rng) -> SrvCurve {
    let a = Alignment {
        theta: rng.random_range(-3.0..3.0),
        gamma: Alignment::identity(N).gamma,
        seed: rng.random_range(0..N),
        applied_scale: false,
    };
    apply_alignment(q, &a).unwrap().scaled(rng.random_range(0.5..2.0))
}

#[test]
fn transformed_copies_collapse_under_shape_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let q = random_star(&mut rng);
    let copies: Vec<SrvCurve> = (0..8).map(|_| transformed_copy(&q, &mut rng)).collect();
    let res = karcher_mean(&copies, SymmetryGroup::Shape).unwrap();
    assert!(res.dispersion < 1e-3, "dispersion {}", res.dispersion);
}

#[test]
fn objective_trace_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for group in SymmetryGroup::ALL {
        let sample: Vec<SrvCurve> = (0..10)
            .map(|_| random_star(&mut rng).scaled(rng.random_range(0.5..2.0)))
            .collect();
        let res = karcher_mean(&sample, group).unwrap();
        assert!(!res.objective_trace.is_empty());
        assert!(
            res.objective_trace.windows(2).all(|w| w[1] <= w[0]),
            "{group}: {:?}",
            res.objective_trace
        );
        assert_eq!(res.alignments.len(), sample.len());
    }
}

#[test]
fn common_rotation_leaves_the_objective_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for group in SymmetryGroup::ALL {
        let sample: Vec<SrvCurve> = (0..8).map(|_| random_star(&mut rng)).collect();
        let angle = rng.random_range(0.0..TAU);
        let rotated: Vec<SrvCurve> = sample.iter().map(|q| q.rotated(angle)).collect();
        let a = karcher_mean(&sample, group).unwrap();
        let b = karcher_mean(&rotated, group).unwrap();
        let (fa, fb) = (*a.objective_trace.last().unwrap(), *b.objective_trace.last().unwrap());
        assert!((fa - fb).abs() <= 1e-6 * fa.max(fb), "{group}: {fa} vs {fb}");
    }
}

#[test]
fn size_shape_mean_norm_is_within_the_input_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    for _ in 0..5 {
        let sample: Vec<SrvCurve> = (0..8)
            .map(|_| random_star(&mut rng).scaled(rng.random_range(0.3..3.0)))
            .collect();
        let res = karcher_mean(&sample, SymmetryGroup::SizeShape).unwrap();
        let norms: Vec<f64> = sample.iter().map(|q| q.norm()).collect();
        let lo = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = norms.iter().copied().fold(0.0, f64::max);
        let m = res.mean.norm();
        assert!(lo <= m && m <= hi, "{m} not in [{lo}, {hi}]");
    }
}

#[test]
fn iteration_cap_is_respected() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let sample: Vec<SrvCurve> = (0..6).map(|_| random_star(&mut rng)).collect();
    let opts = KarcherOptions {
        max_iterations: 2,
        ..KarcherOptions::default()
    };
    let res = karcher_mean_with(&sample, SymmetryGroup::Shape, &opts).unwrap();
    assert!(res.objective_trace.len() <= 2);
}
