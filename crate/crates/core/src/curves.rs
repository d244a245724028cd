//! Closed planar curves and their square-root velocity (SRV) representation.
//!
//! A [`Curve`] is an ordered vertex list with implicit closure. Velocities are
//! estimated with forward differences on the uniform circular grid
//! `t_k = 2πk/n`, so the SRV of a closed polygon integrates exactly back to
//! that polygon and its closure defect telescopes to zero.

use std::f64::consts::TAU;

use nalgebra::{Rotation2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Grid size used when none is given.
pub const DEFAULT_GRID_SIZE: usize = 100;

/// Smallest grid accepted for resampling and SRV representations.
pub const MIN_GRID_SIZE: usize = 8;

/// Relative closure tolerance: `|∫ q|q|| ≤ CLOSURE_TOLERANCE · ‖q‖²`.
pub const CLOSURE_TOLERANCE: f64 = 1e-8;

/// A closed polygon. The segment from the last vertex back to the first is implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Curve {
    points: Vec<Vec2>,
}

impl Curve {
    pub fn new(points: Vec<Vec2>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidCurve(format!(
                "need at least 3 vertices, got {}",
                points.len()
            )));
        }
        if let Some(k) = points.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::InvalidCurve(format!("vertex {k} is not finite")));
        }
        let n = points.len();
        for k in 0..n {
            if points[k] == points[(k + 1) % n] {
                return Err(Error::DegenerateCurve(format!(
                    "vertices {k} and {} coincide",
                    (k + 1) % n
                )));
            }
        }
        Ok(Self { points })
    }

    /// Builds a curve from raw outline coordinates, dropping repeated
    /// consecutive vertices (including a closing vertex equal to the first).
    pub fn from_outline(coords: &[[f64; 2]]) -> Result<Self> {
        let mut points: Vec<Vec2> = Vec::with_capacity(coords.len());
        for c in coords {
            let p = Vec2::new(c[0], c[1]);
            if points.last() != Some(&p) {
                points.push(p);
            }
        }
        while points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        Self::new(points)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Length of the closed polygon.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        (0..n).map(|k| (self.points[(k + 1) % n] - self.points[k]).norm()).sum()
    }

    pub fn centroid(&self) -> Vec2 {
        self.points.iter().sum::<Vec2>() / self.points.len() as f64
    }

    pub fn translated(&self, offset: Vec2) -> Self {
        Self {
            points: self.points.iter().map(|p| p + offset).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| p * factor).collect(),
        }
    }

    pub fn rotated(&self, theta: f64) -> Self {
        let rot = Rotation2::new(theta);
        Self {
            points: self.points.iter().map(|p| rot * p).collect(),
        }
    }

    pub fn to_coords(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p.x, p.y]).collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for Curve {
    type Error = Error;

    fn try_from(coords: Vec<[f64; 2]>) -> Result<Self> {
        Curve::from_outline(&coords)
    }
}

impl From<Curve> for Vec<[f64; 2]> {
    fn from(curve: Curve) -> Self {
        curve.to_coords()
    }
}

/// Resamples a closed polygon to `n` vertices equally spaced in arc length,
/// starting at the first vertex.
pub fn resample_closed(curve: &Curve, n: usize) -> Result<Curve> {
    if n < MIN_GRID_SIZE {
        return Err(Error::InvalidArgument(format!(
            "grid size {n} is below the minimum of {MIN_GRID_SIZE}"
        )));
    }
    let pts = curve.points();
    let m = pts.len();
    let mut cumulative = Vec::with_capacity(m + 1);
    cumulative.push(0.0);
    for k in 0..m {
        let seg = (pts[(k + 1) % m] - pts[k]).norm();
        cumulative.push(cumulative[k] + seg);
    }
    let perimeter = cumulative[m];
    if !(perimeter > 0.0) {
        return Err(Error::DegenerateCurve("zero perimeter".into()));
    }

    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let target = perimeter * k as f64 / n as f64;
        while seg + 1 < m && cumulative[seg + 1] <= target {
            seg += 1;
        }
        let len = cumulative[seg + 1] - cumulative[seg];
        let frac = ((target - cumulative[seg]) / len).clamp(0.0, 1.0);
        let a = pts[seg];
        let b = pts[(seg + 1) % m];
        out.push(if frac == 0.0 { a } else { a + (b - a) * frac });
    }
    Curve::new(out)
}

/// Square-root velocity function sampled at `t_k = 2πk/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrvCurve {
    values: Vec<Vec2>,
}

impl SrvCurve {
    /// Validates grid size, finiteness, positive norm and the closure constraint.
    pub fn new(values: Vec<Vec2>) -> Result<Self> {
        let srv = Self::from_values_unchecked(values);
        srv.validate()?;
        Ok(srv)
    }

    /// Wraps SRV samples without checking the closure constraint. Used for
    /// averages, geodesic interpolants and reparameterized curves, which leave
    /// the closed-curve manifold by a discretization-sized amount.
    pub fn from_values_unchecked(values: Vec<Vec2>) -> Self {
        Self { values }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.values.len();
        if n < MIN_GRID_SIZE {
            return Err(Error::InvalidSrv(format!(
                "grid size {n} is below the minimum of {MIN_GRID_SIZE}"
            )));
        }
        if self.values.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidSrv("non-finite sample".into()));
        }
        let norm_sq = self.norm_sq();
        if !(norm_sq > 0.0) {
            return Err(Error::InvalidSrv("zero norm".into()));
        }
        let defect = closure_defect(self).norm();
        if defect > CLOSURE_TOLERANCE * norm_sq {
            return Err(Error::InvalidSrv(format!(
                "closure defect {defect:.3e} exceeds tolerance {:.3e}",
                CLOSURE_TOLERANCE * norm_sq
            )));
        }
        Ok(())
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn grid_size(&self) -> usize {
        self.values.len()
    }

    /// Quadrature spacing `2π/n`.
    pub fn spacing(&self) -> f64 {
        TAU / self.values.len() as f64
    }

    pub fn norm_sq(&self) -> f64 {
        self.spacing() * self.values.iter().map(|v| v.norm_squared()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// L² inner product. Panics on grid mismatch; callers check grids first.
    pub fn inner(&self, other: &SrvCurve) -> f64 {
        assert_eq!(self.grid_size(), other.grid_size(), "grid mismatch");
        self.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.dot(b))
                .sum::<f64>()
    }

    /// Squared L² distance.
    pub fn dist_sq(&self, other: &SrvCurve) -> f64 {
        assert_eq!(self.grid_size(), other.grid_size(), "grid mismatch");
        self.spacing()
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b).norm_squared())
                .sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Rescaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidSrv("cannot normalize a zero SRV".into()));
        }
        Ok(self.scaled(1.0 / norm))
    }

    pub fn rotated(&self, theta: f64) -> Self {
        if theta == 0.0 {
            return self.clone();
        }
        let rot = Rotation2::new(theta);
        Self {
            values: self.values.iter().map(|v| rot * v).collect(),
        }
    }

    /// `(1 − τ)·self + τ·other`.
    pub fn lerp(&self, other: &SrvCurve, tau: f64) -> Self {
        assert_eq!(self.grid_size(), other.grid_size(), "grid mismatch");
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * (1.0 - tau) + b * tau)
                .collect(),
        }
    }

    /// Pointwise mean of a non-empty set of SRVs on a common grid.
    pub fn mean(curves: &[SrvCurve]) -> Result<Self> {
        let first = curves
            .first()
            .ok_or_else(|| Error::InvalidArgument("mean of an empty set".into()))?;
        let n = first.grid_size();
        let mut acc = vec![Vec2::zeros(); n];
        for c in curves {
            check_grid(n, c)?;
            for (a, v) in acc.iter_mut().zip(&c.values) {
                *a += v;
            }
        }
        let inv = 1.0 / curves.len() as f64;
        Ok(Self {
            values: acc.into_iter().map(|a| a * inv).collect(),
        })
    }

    /// Cyclic shift: `out[k] = self[(k + shift) mod n]`.
    pub fn shifted(&self, shift: usize) -> Self {
        let n = self.values.len();
        Self {
            values: (0..n).map(|k| self.values[(k + shift) % n]).collect(),
        }
    }
}

pub(crate) fn check_grid(expected: usize, q: &SrvCurve) -> Result<()> {
    if q.grid_size() != expected {
        return Err(Error::GridMismatch {
            expected,
            found: q.grid_size(),
        });
    }
    Ok(())
}

/// SRV transform of a curve assumed to be uniformly resampled.
///
/// `d_k = (p_{k+1} − p_k)·n/2π` and `q_k = d_k/√|d_k|`; zero velocities map to zero.
pub fn to_srv(curve: &Curve) -> Result<SrvCurve> {
    let pts = curve.points();
    let n = pts.len();
    if n < MIN_GRID_SIZE {
        return Err(Error::InvalidArgument(format!(
            "grid size {n} is below the minimum of {MIN_GRID_SIZE}"
        )));
    }
    let scale = n as f64 / TAU;
    let values = (0..n)
        .map(|k| {
            let d = (pts[(k + 1) % n] - pts[k]) * scale;
            let speed = d.norm();
            if speed > 0.0 {
                d / speed.sqrt()
            } else {
                Vec2::zeros()
            }
        })
        .collect();
    Ok(SrvCurve::from_values_unchecked(values))
}

/// Resamples to `n` points and applies the SRV transform.
pub fn curve_to_srv(curve: &Curve, n: usize) -> Result<SrvCurve> {
    to_srv(&resample_closed(curve, n)?)
}

/// Cumulative integral of `q|q|` starting at `basepoint`; the exact inverse of [`to_srv`].
pub fn integrate_srv(srv: &SrvCurve, basepoint: Vec2) -> Vec<Vec2> {
    let h = srv.spacing();
    let mut p = basepoint;
    srv.values()
        .iter()
        .map(|q| {
            let current = p;
            p += q * (q.norm() * h);
            current
        })
        .collect()
}

/// Reconstructs the curve with `β(0) = basepoint`. A zero SRV integrates to a
/// constant curve and is reported as degenerate.
pub fn from_srv(srv: &SrvCurve, basepoint: Vec2) -> Result<Curve> {
    if !(srv.norm_sq() > 0.0) {
        return Err(Error::DegenerateCurve("zero SRV integrates to a constant curve".into()));
    }
    Curve::new(integrate_srv(srv, basepoint))
}

/// Riemann-sum value of `∫ q(t)|q(t)| dt`, zero for closed curves.
pub fn closure_defect(srv: &SrvCurve) -> Vec2 {
    let h = srv.spacing();
    srv.values().iter().map(|q| q * q.norm()).sum::<Vec2>() * h
}
