//! Edge-corrected Gaussian kernel intensity at the data points and
//! Cronie–van Lieshout bandwidth selection.

use std::f64::consts::TAU;

use statrs::function::erf::erf;

use super::Window;
use crate::curves::Vec2;
use crate::error::{Error, Result};

/// Number of candidate bandwidths in the selection grid.
pub const BANDWIDTH_GRID_SIZE: usize = 32;

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Mass of the isotropic Gaussian kernel centred at `x` that falls inside the window.
pub fn kernel_mass_inside(x: Vec2, bandwidth: f64, window: &Window) -> f64 {
    let h = bandwidth;
    let px = normal_cdf((window.xmax - x.x) / h) - normal_cdf((window.xmin - x.x) / h);
    let py = normal_cdf((window.ymax - x.y) / h) - normal_cdf((window.ymin - x.y) / h);
    px * py
}

/// Leave-one-out estimate `ρ̂(x_i) = Σ_{j≠i} k_h(x_i − x_j) / e_h(x_j)`, floored
/// at `1e−8 · N/|X|`.
pub fn kernel_intensity(locations: &[Vec2], window: &Window, bandwidth: f64) -> Result<Vec<f64>> {
    let n = locations.len();
    if n < 2 {
        return Err(Error::InvalidPattern(format!(
            "intensity estimation needs at least 2 points, got {n}"
        )));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let h2 = bandwidth * bandwidth;
    let norm = 1.0 / (TAU * h2);
    let inv_mass: Vec<f64> = locations
        .iter()
        .map(|&x| 1.0 / kernel_mass_inside(x, bandwidth, window).max(f64::MIN_POSITIVE))
        .collect();
    let floor = 1e-8 * n as f64 / window.area();
    Ok((0..n)
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    let d2 = (locations[i] - locations[j]).norm_squared();
                    acc += (-0.5 * d2 / h2).exp() * norm * inv_mass[j];
                }
            }
            acc.max(floor)
        })
        .collect())
}

/// Candidate bandwidths: log-spaced on `[diam/200, diam/4]`.
pub fn bandwidth_grid(window: &Window) -> Vec<f64> {
    let diam = window.diameter();
    let lo = (diam / 200.0).ln();
    let hi = (diam / 4.0).ln();
    (0..BANDWIDTH_GRID_SIZE)
        .map(|k| (lo + (hi - lo) * k as f64 / (BANDWIDTH_GRID_SIZE - 1) as f64).exp())
        .collect()
}

/// The Cronie–van Lieshout criterion `(Σ_i 1/ρ̂_h(x_i) − |X|)²`.
pub fn cvl_criterion(locations: &[Vec2], window: &Window, bandwidth: f64) -> Result<f64> {
    let rho = kernel_intensity(locations, window, bandwidth)?;
    let s: f64 = rho.iter().map(|r| 1.0 / r).sum();
    Ok((s - window.area()).powi(2))
}

/// Bandwidth minimizing the Cronie–van Lieshout criterion on [`bandwidth_grid`];
/// ties go to the smallest bandwidth.
pub fn select_bandwidth(locations: &[Vec2], window: &Window) -> Result<f64> {
    let mut best = (f64::INFINITY, 0.0);
    for h in bandwidth_grid(window) {
        let c = cvl_criterion(locations, window, h)?;
        if c < best.0 {
            best = (c, h);
        }
    }
    if best.1 == 0.0 {
        // every criterion value was non-finite
        return Ok(bandwidth_grid(window)[0]);
    }
    Ok(best.1)
}
