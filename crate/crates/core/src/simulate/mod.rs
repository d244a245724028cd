//! Synthetic marked patterns: a Poisson ground process carrying Fourier-basis
//! star-shaped curves whose shape, orientation and size are each either
//! spatially dependent (Matérn Gaussian fields) or independent.
//!
//! Every random field draws from its own stream keyed by
//! `(seed, replicate, field)`, and the scenario toggles only choose how a
//! field's standard normals are transformed. Scenarios with the same seed and
//! replicate therefore share locations and all untouched fields bit for bit.

mod study;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::curves::{resample_closed, to_srv, Curve, Vec2, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::pointprocess::intensity::normal_cdf;
use crate::pointprocess::{MarkedPattern, Window};
use crate::rng::{self, StreamRng};

pub use study::{
    run_replicate, run_study, GroupOutcome, GroupSummary, ReplicateOutcome, StudyOptions, StudyRow, StudyTable,
};

/// Number of Fourier coefficients per shape.
pub const FOURIER_TERMS: usize = 6;

/// Stream identifiers below the replicate level.
mod field {
    pub const LOCATIONS: u64 = 0;
    pub const SHAPE: u64 = 1; // 1..=6, one per basis function
    pub const ORIENTATION_U: u64 = 10;
    pub const ORIENTATION_V: u64 = 11;
    pub const SCALE: u64 = 12;
}

/// Raw samples per curve before arc-length resampling.
const RAW_OVERSAMPLE: usize = 4;

/// Attempts at drawing a pattern with at least two points.
const MAX_PATTERN_ATTEMPTS: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaternParams {
    /// Marginal variance.
    pub scale: f64,
    /// Smoothness ν; 0.5, 1.5 and 2.5 are supported.
    pub smoothness: f64,
    pub range: f64,
}

impl Default for MaternParams {
    fn default() -> Self {
        Self {
            scale: 0.5,
            smoothness: 0.5,
            range: 2.0,
        }
    }
}

impl MaternParams {
    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.range > 0.0) || !self.scale.is_finite() || !self.range.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Matérn scale and range must be positive, got scale={} range={}",
                self.scale, self.range
            )));
        }
        if ![0.5, 1.5, 2.5].contains(&self.smoothness) {
            return Err(Error::InvalidArgument(format!(
                "Matérn smoothness {} is not supported (use 0.5, 1.5 or 2.5)",
                self.smoothness
            )));
        }
        Ok(())
    }

    /// Covariance at distance `d`.
    pub fn covariance(&self, d: f64) -> f64 {
        let u = (2.0 * self.smoothness).sqrt() * d / self.range;
        let poly = if self.smoothness == 0.5 {
            1.0
        } else if self.smoothness == 1.5 {
            1.0 + u
        } else {
            1.0 + u + u * u / 3.0
        };
        self.scale * poly * (-u).exp()
    }
}

/// Covariance `diag·I + common·J` of the independent-shape coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndependentShapeCov {
    pub diag: f64,
    pub common: f64,
}

impl Default for IndependentShapeCov {
    fn default() -> Self {
        Self { diag: 0.1, common: 0.9 }
    }
}

/// Which mark components are spatially dependent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Scenario {
    pub shape: bool,
    pub orientation: bool,
    pub size: bool,
}

impl Scenario {
    /// The eight scenarios in table order.
    pub const ALL: [Scenario; 8] = [
        Scenario::new(false, false, false),
        Scenario::new(true, false, false),
        Scenario::new(false, true, false),
        Scenario::new(false, false, true),
        Scenario::new(true, true, false),
        Scenario::new(true, false, true),
        Scenario::new(false, true, true),
        Scenario::new(true, true, true),
    ];

    pub const fn new(shape: bool, orientation: bool, size: bool) -> Self {
        Self {
            shape,
            orientation,
            size,
        }
    }

    /// Three-digit code such as `"101"`.
    pub fn code(&self) -> String {
        [self.shape, self.orientation, self.size]
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<char> = s.chars().collect();
        if bits.len() != 3 || bits.iter().any(|c| *c != '0' && *c != '1') {
            return Err(Error::InvalidArgument(format!(
                "scenario '{s}' must be three 0/1 digits (shape, orientation, size), e.g. 101"
            )));
        }
        Ok(Scenario::new(bits[0] == '1', bits[1] == '1', bits[2] == '1'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub window: Window,
    /// Intensity of the ground Poisson process.
    pub intensity: f64,
    pub dep_shape: bool,
    pub dep_orientation: bool,
    pub dep_size: bool,
    pub matern: MaternParams,
    pub indep_shape_cov: IndependentShapeCov,
    pub scale_interval: [f64; 2],
    pub grid_size: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            window: Window::square(4.0),
            intensity: 8.0,
            dep_shape: false,
            dep_orientation: false,
            dep_size: false,
            matern: MaternParams::default(),
            indep_shape_cov: IndependentShapeCov::default(),
            scale_interval: [0.2, 1.2],
            grid_size: DEFAULT_GRID_SIZE,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_scenario(mut self, s: Scenario) -> Self {
        self.dep_shape = s.shape;
        self.dep_orientation = s.orientation;
        self.dep_size = s.size;
        self
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(self.dep_shape, self.dep_orientation, self.dep_size)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0) || !self.intensity.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "intensity must be positive, got {}",
                self.intensity
            )));
        }
        let [lo, hi] = self.scale_interval;
        if !(lo > 0.0 && hi > lo) || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "scale interval [{lo}, {hi}] must be positive and ordered"
            )));
        }
        let c = self.indep_shape_cov;
        if !(c.diag > 0.0 && c.common >= 0.0) || !c.diag.is_finite() || !c.common.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "independent shape covariance needs diag > 0 and common >= 0, got {} and {}",
                c.diag, c.common
            )));
        }
        if self.grid_size < crate::curves::MIN_GRID_SIZE {
            return Err(Error::InvalidArgument(format!(
                "grid size must be at least {}, got {}",
                crate::curves::MIN_GRID_SIZE,
                self.grid_size
            )));
        }
        self.matern.validate()
    }
}

/// Homogeneous Poisson process on the window.
pub fn sample_poisson<R: Rng + ?Sized>(window: &Window, intensity: f64, rng: &mut R) -> Result<Vec<Vec2>> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "intensity must be positive, got {intensity}"
        )));
    }
    let mean = intensity * window.area();
    let count = Poisson::new(mean)
        .map_err(|e| Error::InvalidArgument(format!("Poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    Ok((0..count)
        .map(|_| {
            Vec2::new(
                window.xmin + window.width() * rng.random::<f64>(),
                window.ymin + window.height() * rng.random::<f64>(),
            )
        })
        .collect())
}

/// Matérn covariance matrix of the locations.
pub fn matern_cov(locations: &[Vec2], params: &MaternParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = locations.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        params.covariance((locations[i] - locations[j]).norm())
    }))
}

/// Draws `mean + L z` for a lower-triangular factor `L` of a covariance.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    /// Cholesky factorization, adding jitter `ε·mean(diag)·I` with `ε` escalating
    /// from 1e−10 to 1e−6 if the matrix is not numerically positive definite.
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if cov.ncols() != n {
            return Err(Error::InvalidArgument("covariance must be square".into()));
        }
        if n == 0 {
            return Ok(Self {
                factor: DMatrix::zeros(0, 0),
            });
        }
        let level = (cov.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
        if let Some(c) = cov.clone().cholesky() {
            return Ok(Self { factor: c.l() });
        }
        for exp in [-10, -9, -8, -7, -6] {
            let jitter = 10f64.powi(exp) * level;
            let m = cov + DMatrix::identity(n, n) * jitter;
            if let Some(c) = m.cholesky() {
                debug!("covariance factorized with jitter {jitter:e}");
                return Ok(Self { factor: c.l() });
            }
        }
        Err(Error::Numerical(
            "covariance is not positive definite even with jitter 1e-6".into(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `mean + L z` for given standard normals `z`.
    pub fn transform(&self, mean: f64, z: &[f64]) -> Vec<f64> {
        let v = &self.factor * DVector::from_column_slice(z);
        v.iter().map(|x| x + mean).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> Vec<f64> {
        let z = standard_normals(self.dim(), rng);
        self.transform(mean, &z)
    }
}

/// One draw from `N(mean·1, cov)`.
pub fn sample_gaussian_field<R: Rng + ?Sized>(cov: &DMatrix<f64>, mean: f64, rng: &mut R) -> Result<Vec<f64>> {
    Ok(GaussianSampler::new(cov)?.sample(mean, rng))
}

fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Star-shaped curve with adjusted radial function
/// `Γ′ = Γ + |min Γ| + |max Γ|`, `Γ = Σ c_j b_j`, basis ordered
/// `cos 0t, sin 0t, cos t, sin t, cos 2t, sin 2t`, sampled at `t_k = −π + 2πk/n`.
pub fn fourier_shape(coeffs: &[f64; FOURIER_TERMS], n: usize) -> Result<Curve> {
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidArgument("Fourier coefficients must be finite".into()));
    }
    let ts: Vec<f64> = (0..n).map(|k| -PI + TAU * k as f64 / n as f64).collect();
    let gamma: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let mut g = 0.0;
            for (l, pair) in coeffs.chunks(2).enumerate() {
                let lt = l as f64 * t;
                g += pair[0] * lt.cos() + pair[1] * lt.sin();
            }
            g
        })
        .collect();
    let min = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let max = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = min.abs() + max.abs();
    let radii: Vec<f64> = gamma.iter().map(|g| g + shift).collect();
    if radii.iter().any(|&r| r <= 0.0) {
        return Err(Error::DegenerateCurve(
            "adjusted radial function is not positive (all-zero coefficients?)".into(),
        ));
    }
    Curve::new(
        ts.iter()
            .zip(&radii)
            .map(|(&t, &r)| Vec2::new(r * t.cos(), r * t.sin()))
            .collect(),
    )
}

/// Per-point mark parameters before they are turned into curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkFields {
    /// `coefficients[i]` are the six Fourier coefficients of point `i`.
    pub coefficients: Vec<[f64; FOURIER_TERMS]>,
    /// Rotation angle in radians.
    pub orientation: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Samples the coefficient, orientation and scale fields at the locations.
pub fn sample_fields(locations: &[Vec2], config: &ScenarioConfig, replicate: u64) -> Result<MarkFields> {
    config.validate()?;
    let n = locations.len();
    let stream = |f: u64| rng::stream(config.seed, &[replicate, f]);
    let cmat = matern_cov(locations, &config.matern)?;
    let matern = GaussianSampler::new(&cmat)?;

    let shape_sampler = if config.dep_shape {
        matern.clone()
    } else {
        let c = config.indep_shape_cov;
        let cov = DMatrix::from_fn(n, n, |i, j| c.common + if i == j { c.diag } else { 0.0 });
        GaussianSampler::new(&cov)?
    };
    let mut coefficients = vec![[0.0; FOURIER_TERMS]; n];
    for j in 0..FOURIER_TERMS {
        let z = standard_normals(n, &mut stream(field::SHAPE + j as u64));
        for (c, v) in coefficients.iter_mut().zip(shape_sampler.transform(0.0, &z)) {
            c[j] = v;
        }
    }

    let orientation = if config.dep_orientation {
        let u = matern.sample(0.0, &mut stream(field::ORIENTATION_U));
        let v = matern.sample(0.0, &mut stream(field::ORIENTATION_V));
        u.iter().zip(&v).map(|(a, b)| b.atan2(*a)).collect()
    } else {
        let mut r = stream(field::ORIENTATION_U);
        (0..n).map(|_| r.random_range(0.0..TAU)).collect()
    };

    let z = standard_normals(n, &mut stream(field::SCALE));
    let (y, var) = if config.dep_size {
        (matern.transform(1.0, &z), config.matern.scale)
    } else {
        (z.iter().map(|v| 1.0 + v).collect(), 1.0)
    };
    let [lo, hi] = config.scale_interval;
    let scale = y
        .iter()
        .map(|v| (lo + (hi - lo) * normal_cdf((v - 1.0) / var.sqrt())).clamp(lo, hi))
        .collect();

    Ok(MarkFields {
        coefficients,
        orientation,
        scale,
    })
}

/// Builds the mark curves: `σ_i · O_{φ_i} · fourier_shape(c_i)`, sampled on
/// `4·grid_size` raw points.
pub fn marks_from_fields(fields: &MarkFields, grid_size: usize) -> Result<Vec<Curve>> {
    let raw = RAW_OVERSAMPLE * grid_size;
    fields
        .coefficients
        .iter()
        .zip(&fields.orientation)
        .zip(&fields.scale)
        .map(|((c, &phi), &sigma)| Ok(fourier_shape(c, raw)?.rotated(phi).scaled(sigma)))
        .collect()
}

pub fn sample_marks(locations: &[Vec2], config: &ScenarioConfig, replicate: u64) -> Result<Vec<Curve>> {
    marks_from_fields(&sample_fields(locations, config, replicate)?, config.grid_size)
}

/// A generated pattern with the mark outlines it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPattern {
    pub pattern: MarkedPattern,
    /// Mark outlines resampled to the grid, centred at the origin.
    pub curves: Vec<Curve>,
    pub fields: MarkFields,
}

fn sample_locations(config: &ScenarioConfig, replicate: u64) -> Result<Vec<Vec2>> {
    for attempt in 0..MAX_PATTERN_ATTEMPTS {
        let mut r: StreamRng = rng::stream(config.seed, &[replicate, field::LOCATIONS, attempt]);
        let pts = sample_poisson(&config.window, config.intensity, &mut r)?;
        if pts.len() >= 2 {
            return Ok(pts);
        }
        debug!("replicate {replicate}: {} points drawn, regenerating", pts.len());
    }
    Err(Error::Numerical(format!(
        "no pattern with at least 2 points after {MAX_PATTERN_ATTEMPTS} attempts"
    )))
}

/// Full pipeline for one replicate: locations, fields, curves, SRV marks.
pub fn generate_pattern(config: &ScenarioConfig, replicate: u64) -> Result<SimulatedPattern> {
    config.validate()?;
    let locations = sample_locations(config, replicate)?;
    let fields = sample_fields(&locations, config, replicate)?;
    let curves: Vec<Curve> = marks_from_fields(&fields, config.grid_size)?
        .iter()
        .map(|c| resample_closed(c, config.grid_size))
        .collect::<Result<_>>()?;
    let marks = curves.iter().map(to_srv).collect::<Result<_>>()?;
    Ok(SimulatedPattern {
        pattern: MarkedPattern::new(config.window, locations, marks)?,
        curves,
        fields,
    })
}
