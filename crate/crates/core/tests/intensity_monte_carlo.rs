use std::f64::consts::PI;

use markedshapes::curves::Vec2;
use markedshapes::pointprocess::{
    kernel_intensity, select_bandwidth, EdgeCorrection, KOptions, SpatialContext, Window,
};
use markedshapes::simulate::sample_poisson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

fn poisson(rng: &mut ChaCha8Rng, w: &Window, rho: f64) -> Vec<Vec2> {
    sample_poisson(w, rho, rng).unwrap()
}

/// Thomas process: Poisson parents, Poisson(`mu`) offspring each with Gaussian
/// displacement `sigma`, periodically wrapped so the intensity stays `kappa·mu`.
fn thomas(rng: &mut ChaCha8Rng, w: &Window, kappa: f64, mu: f64, sigma: f64) -> Vec<Vec2> {
    let parents = sample_poisson(w, kappa, rng).unwrap();
    let count = Poisson::new(mu).unwrap();
    let jitter = Normal::new(0.0, sigma).unwrap();
    let mut pts = Vec::new();
    for p in parents {
        for _ in 0..count.sample(rng) as usize {
            let x = (p.x + jitter.sample(rng) - w.xmin).rem_euclid(w.width()) + w.xmin;
            let y = (p.y + jitter.sample(rng) - w.ymin).rem_euclid(w.height()) + w.ymin;
            pts.push(Vec2::new(x, y));
        }
    }
    pts
}

#[test]
fn poisson_intensity_is_recovered_on_average() {
    let w = Window::square(4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut means = Vec::new();
    for _ in 0..50 {
        let pts = poisson(&mut rng, &w, 8.0);
        let h = select_bandwidth(&pts, &w).unwrap();
        let rho = kernel_intensity(&pts, &w, h).unwrap();
        means.push(rho.iter().sum::<f64>() / rho.len() as f64);
    }
    let mean = means.iter().sum::<f64>() / means.len() as f64;
    assert!((mean - 8.0).abs() < 0.15 * 8.0, "mean intensity {mean}");
}

#[test]
fn selected_bandwidth_balances_the_inverse_intensity_sum() {
    let w = Window::square(4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..20 {
        let pts = poisson(&mut rng, &w, 8.0);
        let h = select_bandwidth(&pts, &w).unwrap();
        let s: f64 = kernel_intensity(&pts, &w, h).unwrap().iter().map(|r| 1.0 / r).sum();
        assert!((s - w.area()).abs() < 0.1 * w.area(), "sum {s} at h={h}");
    }
}

#[test]
fn clustering_selects_smaller_bandwidths() {
    let w = Window::square(4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let (mut clustered, mut uniform) = (0.0, 0.0);
    for _ in 0..20 {
        let c = thomas(&mut rng, &w, 1.0, 8.0, 0.15);
        if c.len() >= 2 {
            clustered += select_bandwidth(&c, &w).unwrap();
        }
        uniform += select_bandwidth(&poisson(&mut rng, &w, 8.0), &w).unwrap();
    }
    assert!(clustered < uniform, "clustered {clustered} vs poisson {uniform}");
}

fn mean_ground_k(rng: &mut ChaCha8Rng, grid: &[f64], opts: &KOptions, reps: usize) -> Vec<f64> {
    let w = Window::square(4.0);
    let mut acc = vec![0.0; grid.len()];
    for _ in 0..reps {
        let pts = poisson(rng, &w, 8.0);
        let k = SpatialContext::new(&pts, &w, grid, opts).unwrap().ground_k();
        for (a, v) in acc.iter_mut().zip(&k.k_values) {
            *a += v / reps as f64;
        }
    }
    acc
}

#[test]
fn ground_k_is_close_to_pi_r_squared_for_poisson() {
    let grid = [0.4, 0.7, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let k = mean_ground_k(&mut rng, &grid, &KOptions::default(), 100);
    for (r, k) in grid.iter().zip(&k) {
        let target = PI * r * r;
        assert!((k - target).abs() < 0.05 * target, "r={r}: {k} vs {target}");
    }
}

#[test]
fn every_correction_is_unbiased_at_known_intensity() {
    let grid = [0.4, 0.7, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for correction in EdgeCorrection::ALL {
        // a flat kernel gives ρ̂ = (N − 1)/|X|
        let opts = KOptions {
            correction,
            bandwidth: Some(1e4),
        };
        let k = mean_ground_k(&mut rng, &grid, &opts, 100);
        for (r, k) in grid.iter().zip(&k) {
            let target = PI * r * r;
            assert!(
                (k - target).abs() < 0.05 * target,
                "{correction} r={r}: {k} vs {target}"
            );
        }
    }
}

#[test]
fn intensity_is_positive_for_any_bandwidth() {
    let w = Window::square(4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let pts = poisson(&mut rng, &w, 8.0);
    for _ in 0..10 {
        let h = rng.random_range(0.001..10.0);
        assert!(kernel_intensity(&pts, &w, h).unwrap().iter().all(|&r| r > 0.0));
    }
}
