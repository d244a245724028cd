//! Marked point patterns and the mark-weighted K function.
//!
//! Estimation is split in two halves so the permutation tests can reuse them:
//! [`SpatialContext`] holds everything that depends only on the locations
//! (intensity, edge weights, radius bins of every close pair), and
//! [`MarkContext`] holds the template alignment and the matrix of pairwise
//! test-function values. A permutation of marks only re-indexes the latter.

pub mod edge;
pub mod intensity;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::{check_grid, SrvCurve, Vec2};
use crate::error::{Error, Result};
use crate::karcher::{karcher_mean_with, KarcherOptions, KarcherResult};
use crate::registration::SymmetryGroup;

pub use edge::{edge_weight, EdgeCorrection};
pub use intensity::{bandwidth_grid, kernel_intensity, select_bandwidth};

/// Number of radii in the default grid.
pub const DEFAULT_R_STEPS: usize = 50;

/// Axis-aligned rectangular observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Window {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let finite = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite());
        if !finite || xmax <= xmin || ymax <= ymin {
            return Err(Error::InvalidWindow(format!(
                "window [{xmin}, {xmax}] x [{ymin}, {ymax}] must have positive, finite extent"
            )));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    pub fn unit() -> Self {
        Self::square(1.0)
    }

    /// `[0, side]²`.
    pub fn square(side: f64) -> Self {
        Self::new(0.0, side, 0.0, side).expect("positive side")
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn min_side(&self) -> f64 {
        self.width().min(self.height())
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    /// The window with every coordinate multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(s * self.xmin, s * self.xmax, s * self.ymin, s * self.ymax)
    }
}

impl TryFrom<[f64; 4]> for Window {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Window::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Window> for [f64; 4] {
    fn from(w: Window) -> Self {
        [w.xmin, w.xmax, w.ymin, w.ymax]
    }
}

/// Locations in a window, each carrying an SRV mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedPattern {
    window: Window,
    locations: Vec<Vec2>,
    marks: Vec<SrvCurve>,
}

impl MarkedPattern {
    pub fn new(window: Window, locations: Vec<Vec2>, marks: Vec<SrvCurve>) -> Result<Self> {
        if locations.len() != marks.len() {
            return Err(Error::InvalidPattern(format!(
                "{} locations but {} marks",
                locations.len(),
                marks.len()
            )));
        }
        for (i, p) in locations.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() || !window.contains(*p) {
                return Err(Error::InvalidPattern(format!(
                    "location {i} at ({}, {}) lies outside the window",
                    p.x, p.y
                )));
            }
        }
        if let Some(first) = marks.first() {
            let n = first.grid_size();
            for q in &marks {
                check_grid(n, q)?;
            }
        }
        Ok(Self {
            window,
            locations,
            marks,
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn locations(&self) -> &[Vec2] {
        &self.locations
    }

    pub fn marks(&self) -> &[SrvCurve] {
        &self.marks
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Reorders points and marks together: point `k` of the result is point `order[k]`.
    pub fn reordered(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.len())?;
        Ok(Self {
            window: self.window,
            locations: order.iter().map(|&i| self.locations[i]).collect(),
            marks: order.iter().map(|&i| self.marks[i].clone()).collect(),
        })
    }

    /// Scales locations and window by `s`, leaving marks untouched.
    pub fn scaled_locations(&self, s: f64) -> Result<Self> {
        MarkedPattern::new(
            self.window.scaled(s)?,
            self.locations.iter().map(|p| p * s).collect(),
            self.marks.clone(),
        )
    }

    fn require_pairs(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::InvalidPattern(format!(
                "second-order analysis needs at least 2 points, got {}",
                self.len()
            )));
        }
        Ok(())
    }
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::InvalidArgument(format!(
            "permutation has length {}, expected {n}",
            order.len()
        )));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    Ok(())
}

/// Which pair weighting the K function uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    /// `f ≡ 1`, `c_f = 1`: the inhomogeneous K function of the ground process.
    Ground,
    /// Half the squared elastic distance between template-aligned marks.
    Elastic(SymmetryGroup),
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [
        TestFunction::Elastic(SymmetryGroup::Shape),
        TestFunction::Elastic(SymmetryGroup::OrientationShape),
        TestFunction::Elastic(SymmetryGroup::SizeShape),
        TestFunction::Ground,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestFunction::Ground => "ground",
            TestFunction::Elastic(g) => g.as_str(),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ground" {
            Ok(TestFunction::Ground)
        } else {
            s.parse().map(TestFunction::Elastic)
        }
    }
}

impl From<SymmetryGroup> for TestFunction {
    fn from(g: SymmetryGroup) -> Self {
        TestFunction::Elastic(g)
    }
}

/// Estimated K and L functions on a radius grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub r_grid: Vec<f64>,
    pub k_values: Vec<f64>,
    pub l_values: Vec<f64>,
    pub c_f: f64,
    pub correction: EdgeCorrection,
    pub test_function: TestFunction,
    pub bandwidth: f64,
}

/// `steps` equally spaced radii from 0 to `rmax`.
pub fn r_grid(rmax: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(rmax > 0.0) || !rmax.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "radius grid needs rmax > 0 and at least one step (rmax={rmax}, steps={steps})"
        )));
    }
    if steps == 1 {
        return Ok(vec![rmax]);
    }
    Ok((0..steps).map(|k| rmax * k as f64 / (steps - 1) as f64).collect())
}

/// 50 radii from 0 to a quarter of the shorter window side.
pub fn default_r_grid(window: &Window) -> Vec<f64> {
    r_grid(window.min_side() / 4.0, DEFAULT_R_STEPS).expect("positive window")
}

fn check_r_grid(r: &[f64], window: &Window) -> Result<()> {
    let Some(&last) = r.last() else {
        return Err(Error::InvalidArgument("empty radius grid".into()));
    };
    if r.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidArgument("radii must be finite and non-negative".into()));
    }
    if r.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("radius grid must be strictly increasing".into()));
    }
    if last > window.min_side() / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "largest radius {last} exceeds half the shorter window side {}",
            window.min_side() / 2.0
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KOptions {
    pub correction: EdgeCorrection,
    /// Kernel bandwidth; selected by the Cronie–van Lieshout criterion when absent.
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PairTerm {
    i: u32,
    j: u32,
    bin: u32,
    /// `w(x_i, x_j) / (ρ̂_i ρ̂_j)`.
    weight: f64,
}

/// Location-only ingredients of the K estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialContext {
    window: Window,
    n: usize,
    r_grid: Vec<f64>,
    correction: EdgeCorrection,
    bandwidth: f64,
    intensity: Vec<f64>,
    pairs: Vec<PairTerm>,
}

impl SpatialContext {
    pub fn new(locations: &[Vec2], window: &Window, r_grid: &[f64], opts: &KOptions) -> Result<Self> {
        let n = locations.len();
        if n < 2 {
            return Err(Error::InvalidPattern(format!(
                "second-order analysis needs at least 2 points, got {n}"
            )));
        }
        check_r_grid(r_grid, window)?;
        let bandwidth = match opts.bandwidth {
            Some(h) => h,
            None => select_bandwidth(locations, window)?,
        };
        let intensity = kernel_intensity(locations, window, bandwidth)?;
        let rmax = *r_grid.last().expect("checked non-empty");
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = (locations[j] - locations[i]).norm();
                if d > rmax {
                    continue;
                }
                let Some(w) = edge_weight(opts.correction, locations[i], locations[j], window) else {
                    continue;
                };
                if w == 0.0 {
                    continue;
                }
                let bin = r_grid.partition_point(|&r| r < d);
                pairs.push(PairTerm {
                    i: i as u32,
                    j: j as u32,
                    bin: bin as u32,
                    weight: w / (intensity[i] * intensity[j]),
                });
            }
        }
        Ok(Self {
            window: *window,
            n,
            r_grid: r_grid.to_vec(),
            correction: opts.correction,
            bandwidth,
            intensity,
            pairs,
        })
    }

    pub fn for_pattern(pattern: &MarkedPattern, r_grid: &[f64], opts: &KOptions) -> Result<Self> {
        pattern.require_pairs()?;
        Self::new(pattern.locations(), pattern.window(), r_grid, opts)
    }

    pub fn r_grid(&self) -> &[f64] {
        &self.r_grid
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn correction(&self) -> EdgeCorrection {
        self.correction
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of ordered pairs within the largest radius with a positive edge weight.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// `K(r) = Σ_{pairs, |x_i−x_j| ≤ r} weight · f(i, j) / (|X| c_f)`.
    pub fn k_values(&self, f: impl Fn(usize, usize) -> f64, c_f: f64) -> Vec<f64> {
        let mut bins = vec![0.0; self.r_grid.len()];
        for p in &self.pairs {
            bins[p.bin as usize] += p.weight * f(p.i as usize, p.j as usize);
        }
        let denom = self.window.area() * c_f;
        let mut acc = 0.0;
        bins.iter()
            .map(|b| {
                acc += b;
                acc / denom
            })
            .collect()
    }

    fn estimate(&self, k_values: Vec<f64>, c_f: f64, test_function: TestFunction) -> KEstimate {
        let l_values = k_values.iter().map(|k| (k / std::f64::consts::PI).sqrt()).collect();
        KEstimate {
            r_grid: self.r_grid.clone(),
            k_values,
            l_values,
            c_f,
            correction: self.correction,
            test_function,
            bandwidth: self.bandwidth,
        }
    }

    /// The ground K function (`f ≡ 1`, `c_f = 1`).
    pub fn ground_k(&self) -> KEstimate {
        let k = self.k_values(|_, _| 1.0, 1.0);
        self.estimate(k, 1.0, TestFunction::Ground)
    }

    /// Mark-weighted K with marks attached as given.
    pub fn mark_weighted_k(&self, marks: &MarkContext) -> Result<KEstimate> {
        self.check_marks(marks)?;
        let k = self.k_values(|i, j| marks.f(i, j), marks.c_f);
        Ok(self.estimate(k, marks.c_f, TestFunction::Elastic(marks.group)))
    }

    /// Mark-weighted K with location `i` carrying mark `perm[i]`.
    pub fn permuted_k(&self, marks: &MarkContext, perm: &[usize]) -> Result<KEstimate> {
        self.check_marks(marks)?;
        check_permutation(perm, self.n)?;
        let k = self.k_values(|i, j| marks.f(perm[i], perm[j]), marks.c_f);
        Ok(self.estimate(k, marks.c_f, TestFunction::Elastic(marks.group)))
    }

    fn check_marks(&self, marks: &MarkContext) -> Result<()> {
        if marks.len() != self.n {
            return Err(Error::InvalidPattern(format!(
                "{} marks for {} locations",
                marks.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// Template alignment of the marks and their pairwise test-function values.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkContext {
    group: SymmetryGroup,
    template: KarcherResult,
    c_f: f64,
    n: usize,
    /// Row-major `½‖a_i − a_j‖²`.
    fmat: Vec<f64>,
}

impl MarkContext {
    /// Fits the template (unless given) and tabulates `f` for all pairs.
    pub fn new(
        marks: &[SrvCurve],
        group: SymmetryGroup,
        template: Option<KarcherResult>,
        opts: &KarcherOptions,
    ) -> Result<Self> {
        let template = match template {
            Some(t) => {
                if t.group != group || t.len() != marks.len() {
                    return Err(Error::InvalidArgument(format!(
                        "template fitted for {} marks under {}, need {} under {group}",
                        t.len(),
                        t.group,
                        marks.len()
                    )));
                }
                t
            }
            None => karcher_mean_with(marks, group, opts)?,
        };
        Self::from_template(template)
    }

    pub fn from_template(template: KarcherResult) -> Result<Self> {
        let c_f = template.dispersion;
        let scale = template.aligned.iter().map(|a| a.norm_sq()).sum::<f64>() / template.len() as f64;
        if !(c_f > 1e-12 * scale) || !c_f.is_finite() {
            return Err(Error::ZeroDispersion(format!(
                "mark dispersion is {c_f}; the marks are identical under {}",
                template.group
            )));
        }
        let n = template.len();
        let mut fmat = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * template.aligned[i].dist_sq(&template.aligned[j]);
                fmat[i * n + j] = v;
                fmat[j * n + i] = v;
            }
        }
        Ok(Self {
            group: template.group,
            template,
            c_f,
            n,
            fmat,
        })
    }

    pub fn group(&self) -> SymmetryGroup {
        self.group
    }

    pub fn template(&self) -> &KarcherResult {
        &self.template
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `f(i, j) = ½‖a_i − a_j‖²`.
    pub fn f(&self, i: usize, j: usize) -> f64 {
        self.fmat[i * self.n + j]
    }
}

/// Mark-weighted K function of a pattern under `group`.
pub fn mark_weighted_k(
    pattern: &MarkedPattern,
    group: SymmetryGroup,
    r_grid: &[f64],
    opts: &KOptions,
    template: Option<KarcherResult>,
) -> Result<KEstimate> {
    let spatial = SpatialContext::for_pattern(pattern, r_grid, opts)?;
    let marks = MarkContext::new(pattern.marks(), group, template, &KarcherOptions::default())?;
    spatial.mark_weighted_k(&marks)
}

/// Ground-process K function (`f ≡ 1`, `c_f = 1`).
pub fn ground_k(pattern: &MarkedPattern, r_grid: &[f64], opts: &KOptions) -> Result<KEstimate> {
    Ok(SpatialContext::for_pattern(pattern, r_grid, opts)?.ground_k())
}

/// K estimate for any test function.
pub fn estimate_k(
    pattern: &MarkedPattern,
    test_function: TestFunction,
    r_grid: &[f64],
    opts: &KOptions,
) -> Result<KEstimate> {
    match test_function {
        TestFunction::Ground => ground_k(pattern, r_grid, opts),
        TestFunction::Elastic(g) => mark_weighted_k(pattern, g, r_grid, opts, None),
    }
}
