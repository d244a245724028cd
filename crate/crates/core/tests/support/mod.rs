//! Oracles shared by the integration suites.
#![allow(dead_code)]

use std::f64::consts::TAU;

use markedshapes::curves::{to_srv, Curve, SrvCurve, Vec2};
use markedshapes::pointprocess::{edge_weight, EdgeCorrection, Window};
use rand::Rng;

/// Midpoint-rule value of `∫_X I{x + r ∈ X} w(x, x + r) dx` on a `cells × cells` grid.
pub fn edge_identity_integral(kind: EdgeCorrection, window: &Window, r: Vec2, cells: usize) -> f64 {
    let (dx, dy) = (window.width() / cells as f64, window.height() / cells as f64);
    let mut total = 0.0;
    for a in 0..cells {
        let x = window.xmin + (a as f64 + 0.5) * dx;
        let mut row = 0.0;
        for b in 0..cells {
            let p = Vec2::new(x, window.ymin + (b as f64 + 0.5) * dy);
            let q = p + r;
            if window.contains(q) {
                row += edge_weight(kind, p, q, window).unwrap_or(0.0);
            }
        }
        total += row;
    }
    total * dx * dy
}

/// The same integral averaged over `directions` equally spaced directions of length `radius`.
pub fn edge_identity_isotropic_average(
    kind: EdgeCorrection,
    window: &Window,
    radius: f64,
    directions: usize,
    cells: usize,
) -> f64 {
    (0..directions)
        .map(|k| {
            let a = TAU * (k as f64 + 0.5) / directions as f64;
            edge_identity_integral(kind, window, Vec2::new(a.cos(), a.sin()) * radius, cells)
        })
        .sum::<f64>()
        / directions as f64
}

/// Radial Fourier coefficients of a random star-shaped outline.
pub fn random_coefficients(rng: &mut impl Rng) -> [f64; 6] {
    std::array::from_fn(|_| rng.random_range(-0.25..0.25))
}

pub fn star_point(c: &[f64; 6], t: f64) -> Vec2 {
    let r = 1.0
        + c[0] * t.cos()
        + c[1] * t.sin()
        + c[2] * (2.0 * t).cos()
        + c[3] * (2.0 * t).sin()
        + c[4] * (3.0 * t).cos()
        + c[5] * (3.0 * t).sin();
    Vec2::new(r * t.cos(), r * t.sin())
}

/// SRV of the outline sampled at parameters `ts`.
pub fn sampled_star(c: &[f64; 6], ts: &[f64]) -> SrvCurve {
    to_srv(&Curve::new(ts.iter().map(|&t| star_point(c, t)).collect()).unwrap()).unwrap()
}

pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

pub fn random_star(rng: &mut impl Rng, n: usize) -> SrvCurve {
    sampled_star(&random_coefficients(rng), &uniform_grid(n))
}

pub const ALL_PAIRS: [(usize, usize); 5] = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4)];

/// Random lattice warp built from `(1,1)` steps and mirrored step pairs.
pub fn random_lattice_warp(rng: &mut impl Rng, n: usize, pairs: &[(usize, usize)]) -> Vec<f64> {
    let mut steps = Vec::new();
    let mut used = 0;
    while used < n {
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        if rng.random_bool(0.5) && used + a + b <= n {
            steps.push((a, b));
            steps.push((b, a));
            used += a + b;
        } else {
            steps.push((1, 1));
            used += 1;
        }
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut warp = vec![0.0; n];
    for (a, b) in steps {
        for m in 0..a {
            warp[i + m] = j as f64 + (m * b) as f64 / a as f64;
        }
        i += a;
        j += b;
    }
    warp.iter().map(|w| TAU * w / n as f64).collect()
}

/// Every step sequence from `(0, 0)` to `(n, n)` using `steps`.
pub fn all_lattice_paths(n: usize, steps: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    fn walk(
        i: usize,
        j: usize,
        n: usize,
        steps: &[(usize, usize)],
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if i == n && j == n {
            out.push(cur.clone());
            return;
        }
        for &(a, b) in steps {
            if i + a <= n && j + b <= n {
                cur.push((a, b));
                walk(i + a, j + b, n, steps, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(0, 0, n, steps, &mut Vec::new(), &mut out);
    out
}

/// Point at parameter `s` (cell units, any lap) on the polygon `Σ q_c|q_c|`.
fn polygon_point(q: &[Vec2], s: f64) -> Vec2 {
    let n = q.len();
    let lap: Vec2 = q.iter().map(|v| v * v.norm()).sum();
    let laps = (s / n as f64).floor();
    let rest = s - laps * n as f64;
    let c = (rest.floor() as usize).min(n - 1);
    let before: Vec2 = q[..c].iter().map(|v| v * v.norm()).sum();
    lap * laps + before + q[c] * q[c].norm() * (rest - c as f64)
}

/// `(2π/n) Σ_k |q1_k − v_k|²`, where `v_k` is the SRV of the chord of `q2`'s
/// polygon between the warped end points of cell `k`.
pub fn path_energy(q1: &SrvCurve, q2: &SrvCurve, seed: usize, path: &[(usize, usize)]) -> f64 {
    let (a1, a2) = (q1.values(), q2.values());
    let n = a1.len();
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    for &(a, b) in path {
        for m in 0..a {
            let s0 = (seed + j) as f64 + (m * b) as f64 / a as f64;
            let s1 = (seed + j) as f64 + ((m + 1) * b) as f64 / a as f64;
            let d = polygon_point(a2, s1) - polygon_point(a2, s0);
            let len = d.norm();
            let v = if len > 0.0 { d / len.sqrt() } else { Vec2::zeros() };
            total += (a1[i + m] - v).norm_squared();
        }
        i += a;
        j += b;
    }
    total * TAU / n as f64
}
