//! Elastic registration of SRV curves under the three symmetry groups.
//!
//! Rotations are solved in closed form (planar Procrustes), reparameterizations
//! by dynamic programming over lattice paths with a search over cyclic seeds,
//! and the two are alternated until the objective stalls.

mod dp;

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curves::{check_grid, from_srv, Curve, SrvCurve, Vec2};
use crate::error::{Error, Result};

pub use dp::NEIGHBORS;

/// Which transformations are treated as nuisance. Translation is always
/// removed by the SRV representation; reparameterization is always a symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryGroup {
    /// Rotation, scale and reparameterization.
    Shape,
    /// Rotation and reparameterization; size is kept.
    SizeShape,
    /// Scale and reparameterization; orientation is kept.
    OrientationShape,
}

impl SymmetryGroup {
    pub const ALL: [SymmetryGroup; 3] = [
        SymmetryGroup::Shape,
        SymmetryGroup::OrientationShape,
        SymmetryGroup::SizeShape,
    ];

    pub fn removes_scale(self) -> bool {
        matches!(self, SymmetryGroup::Shape | SymmetryGroup::OrientationShape)
    }

    pub fn removes_rotation(self) -> bool {
        matches!(self, SymmetryGroup::Shape | SymmetryGroup::SizeShape)
    }

    /// The group-appropriate representative: unit norm when scale is a symmetry.
    pub fn prepare(self, q: &SrvCurve) -> Result<SrvCurve> {
        if self.removes_scale() {
            q.normalized()
        } else {
            Ok(q.clone())
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SymmetryGroup::Shape => "shape",
            SymmetryGroup::SizeShape => "size-shape",
            SymmetryGroup::OrientationShape => "orientation-shape",
        }
    }
}

impl fmt::Display for SymmetryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SymmetryGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shape" => Ok(SymmetryGroup::Shape),
            "size-shape" => Ok(SymmetryGroup::SizeShape),
            "orientation-shape" => Ok(SymmetryGroup::OrientationShape),
            other => Err(Error::InvalidArgument(format!(
                "unknown symmetry group '{other}' (expected shape, size-shape or orientation-shape)"
            ))),
        }
    }
}

/// One element of a symmetry group acting on an SRV curve sampled on `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// Rotation angle in radians.
    pub theta: f64,
    /// Warp values `γ(t_k) ∈ [0, 2π]`, non-decreasing; `γ(t_n) = γ(t_0) + 2π` is implied.
    pub gamma: Vec<f64>,
    /// Cyclic starting index; the warp is read relative to `t_seed`.
    pub seed: usize,
    /// Whether the aligned inputs were rescaled to unit SRV norm.
    pub applied_scale: bool,
}

impl Alignment {
    pub fn identity(n: usize) -> Self {
        Self {
            theta: 0.0,
            gamma: (0..n).map(|k| TAU * k as f64 / n as f64).collect(),
            seed: 0,
            applied_scale: false,
        }
    }

    pub fn grid_size(&self) -> usize {
        self.gamma.len()
    }

    fn from_warp(theta: f64, warp: &[f64], seed: usize, applied_scale: bool) -> Self {
        let n = warp.len();
        Self {
            theta,
            gamma: warp.iter().map(|w| TAU * w / n as f64).collect(),
            seed,
            applied_scale,
        }
    }

    /// Warp in grid-index units, snapped to integers where it sits on the lattice.
    fn warp_indices(&self) -> Vec<f64> {
        let n = self.gamma.len() as f64;
        self.gamma
            .iter()
            .map(|g| {
                let w = g * n / TAU;
                let r = w.round();
                if (w - r).abs() < 1e-9 {
                    r
                } else {
                    w
                }
            })
            .collect()
    }

    fn is_identity_warp(&self) -> bool {
        self.warp_indices().iter().enumerate().all(|(k, &w)| w == k as f64)
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.gamma.len() != n {
            return Err(Error::GridMismatch {
                expected: n,
                found: self.gamma.len(),
            });
        }
        if self.seed >= n {
            return Err(Error::InvalidAlignment(format!("seed {} outside 0..{n}", self.seed)));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidAlignment("rotation is not finite".into()));
        }
        let first = self.gamma[0];
        if !(0.0..=TAU).contains(&first) {
            return Err(Error::InvalidAlignment(format!(
                "gamma starts at {first}, outside [0, 2π]"
            )));
        }
        let tol = 1e-12 * TAU;
        for k in 0..n {
            let next = if k + 1 < n { self.gamma[k + 1] } else { first + TAU };
            if !self.gamma[k].is_finite() || next < self.gamma[k] - tol {
                return Err(Error::InvalidAlignment(format!("gamma decreases at sample {k}")));
            }
        }
        Ok(())
    }
}

/// Applies `O_θ · (q ∘ γ_seed) · √γ̇`. On each cell the result is the SRV of the
/// piece of the polygon traced by `q` that the warp maps onto it.
pub fn apply_alignment(q: &SrvCurve, a: &Alignment) -> Result<SrvCurve> {
    let n = q.grid_size();
    a.validate(n)?;
    let values = q.values();
    if a.is_identity_warp() {
        let shifted = if a.seed == 0 { q.clone() } else { q.shifted(a.seed) };
        return Ok(shifted.rotated(a.theta));
    }
    let warp = a.warp_indices();
    let nf = n as f64;
    let poly = dp::Polygon::new(values);
    let base = a.seed as f64 + (warp[0] / nf).floor() * -nf;
    let out = (0..n)
        .map(|k| {
            let next = if k + 1 < n { warp[k + 1] } else { warp[0] + nf };
            poly.piece(base + warp[k], base + next.max(warp[k]))
        })
        .collect();
    Ok(SrvCurve::from_values_unchecked(out).rotated(a.theta))
}

/// Angle `θ` maximizing `⟨⟨q1, O_θ q2⟩⟩` over SO(2). Returns 0 when the
/// functional is flat.
pub fn optimal_rotation(q1: &SrvCurve, q2: &SrvCurve) -> Result<f64> {
    check_grid(q1.grid_size(), q2)?;
    Ok(procrustes_angle(q1.values(), q2.values()))
}

fn procrustes_angle(q1: &[Vec2], q2: &[Vec2]) -> f64 {
    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut scale = 0.0;
    for (a, b) in q1.iter().zip(q2) {
        dot += a.x * b.x + a.y * b.y;
        cross += a.y * b.x - a.x * b.y;
        scale += a.norm() * b.norm();
    }
    angle_from_sums(dot, cross, scale)
}

fn angle_from_sums(dot: f64, cross: f64, scale: f64) -> f64 {
    if dot.hypot(cross) <= 1e-12 * scale {
        return 0.0;
    }
    cross.atan2(dot)
}

/// Optimal warp for a fixed seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparam {
    pub alignment: Alignment,
    /// `‖q1 − (q2, γ)‖²` at the optimum.
    pub energy: f64,
}

/// Minimizes `‖q1 − (q2 ∘ γ)√γ̇‖²` over lattice warps starting at `seed`.
pub fn optimal_reparam(q1: &SrvCurve, q2: &SrvCurve, seed: usize) -> Result<Reparam> {
    let n = q1.grid_size();
    check_grid(n, q2)?;
    if seed >= n {
        return Err(Error::InvalidArgument(format!("seed {seed} outside 0..{n}")));
    }
    let shifted = q2.shifted(seed);
    let sol = dp::solve(q1.values(), shifted.values(), true);
    let warp = dp::path_to_warp(&sol.path, n);
    Ok(Reparam {
        alignment: Alignment::from_warp(0.0, &warp, seed, false),
        energy: sol.cost * q1.spacing(),
    })
}

/// Tuning of the alternating rotation/reparameterization search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignOptions {
    pub max_iterations: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tolerance: f64,
    /// Coarse seed-search grid is `n / coarse_factor` points.
    pub coarse_factor: usize,
    /// Number of best coarse seeds re-solved at full resolution.
    pub refine_seeds: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10,
            tolerance: 1e-6,
            coarse_factor: 4,
            refine_seeds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignOutcome {
    pub alignment: Alignment,
    pub distance: f64,
    /// Objective `‖q̃1 − q̃2∗g‖²` after every rotation or reparameterization step.
    pub trace: Vec<f64>,
}

/// Aligns `q2` to `q1` under `group` and returns the optimal symmetry with the elastic distance.
pub fn align(q1: &SrvCurve, q2: &SrvCurve, group: SymmetryGroup) -> Result<(Alignment, f64)> {
    let out = align_with(q1, q2, group, &AlignOptions::default())?;
    Ok((out.alignment, out.distance))
}

pub fn align_with(q1: &SrvCurve, q2: &SrvCurve, group: SymmetryGroup, opts: &AlignOptions) -> Result<AlignOutcome> {
    let n = q1.grid_size();
    check_grid(n, q2)?;
    let p1 = group.prepare(q1)?;
    let p2 = group.prepare(q2)?;
    Ok(align_prepared(&p1, &p2, group, opts, None))
}

fn objective(q1: &SrvCurve, q2: &SrvCurve, a: &Alignment) -> f64 {
    // Alignments built here are always valid for the grid.
    q1.dist_sq(&apply_alignment(q2, a).expect("internal alignment is valid"))
}

/// Alignment of already group-prepared curves. `start` seeds the search with a
/// previous alignment, which is kept if nothing better is found.
pub(crate) fn align_prepared(
    q1: &SrvCurve,
    q2: &SrvCurve,
    group: SymmetryGroup,
    opts: &AlignOptions,
    start: Option<&Alignment>,
) -> AlignOutcome {
    let n = q1.grid_size();
    let applied_scale = group.removes_scale();
    let mut best = Alignment::identity(n);
    best.applied_scale = applied_scale;
    let mut best_obj = objective(q1, q2, &best);
    if let Some(s) = start {
        let mut s = s.clone();
        if !group.removes_rotation() {
            s.theta = 0.0;
        }
        let obj = objective(q1, q2, &s);
        if obj < best_obj {
            best = s;
            best_obj = obj;
        }
    }
    let (seed, theta, obj) = seed_rotation_start(q1, q2, group.removes_rotation());
    if obj < best_obj {
        best = Alignment {
            theta,
            seed,
            ..Alignment::identity(n)
        };
        best.applied_scale = applied_scale;
        best_obj = objective(q1, q2, &best);
    }
    let mut trace = vec![best_obj];

    for _ in 0..opts.max_iterations.max(1) {
        let before = best_obj;
        if group.removes_rotation() {
            let unrotated = Alignment {
                theta: 0.0,
                ..best.clone()
            };
            let warped = apply_alignment(q2, &unrotated).expect("valid");
            let theta = procrustes_angle(q1.values(), warped.values());
            let cand = Alignment { theta, ..best.clone() };
            let obj = objective(q1, q2, &cand);
            if obj <= best_obj {
                best = cand;
                best_obj = obj;
            }
            trace.push(best_obj);
        }

        let rotated = q2.rotated(best.theta);
        let (seed, warp) = seed_search(q1, &rotated, best.seed, opts);
        let cand = Alignment::from_warp(best.theta, &warp, seed, applied_scale);
        let obj = objective(q1, q2, &cand);
        if obj <= best_obj {
            best = cand;
            best_obj = obj;
        }
        trace.push(best_obj);

        if !group.removes_rotation() || before - best_obj <= opts.tolerance * before {
            break;
        }
    }

    if group.removes_rotation() {
        let unrotated = Alignment {
            theta: 0.0,
            ..best.clone()
        };
        let warped = apply_alignment(q2, &unrotated).expect("valid");
        let theta = procrustes_angle(q1.values(), warped.values());
        let cand = Alignment { theta, ..best.clone() };
        let obj = objective(q1, q2, &cand);
        if obj < best_obj {
            best = cand;
            best_obj = obj;
            trace.push(best_obj);
        }
    }

    AlignOutcome {
        alignment: best,
        distance: best_obj.max(0.0).sqrt(),
        trace,
    }
}

/// Best cyclic seed under the identity warp, with its optimal rotation when
/// rotation is a symmetry. Returns `(seed, theta, objective)`.
fn seed_rotation_start(q1: &SrvCurve, q2: &SrvCurve, rotate: bool) -> (usize, f64, f64) {
    let n = q1.grid_size();
    let a = q1.values();
    let b = q2.values();
    let base = q1.norm_sq() + q2.norm_sq();
    let mut best = (0, 0.0, f64::INFINITY);
    for s in 0..n {
        let mut dot = 0.0;
        let mut cross = 0.0;
        let mut scale = 0.0;
        for k in 0..n {
            let u = a[k];
            let v = b[(k + s) % n];
            dot += u.x * v.x + u.y * v.y;
            cross += u.y * v.x - u.x * v.y;
            scale += u.norm() * v.norm();
        }
        let (theta, gain) = if rotate {
            let theta = angle_from_sums(dot, cross, scale);
            (theta, dot * theta.cos() + cross * theta.sin())
        } else {
            (0.0, dot)
        };
        let obj = base - 2.0 * q1.spacing() * gain;
        if obj < best.2 {
            best = (s, theta, obj);
        }
    }
    best
}

/// Two-stage seed search: rank all cyclic seeds on a coarse grid, then solve
/// the best few (plus `keep`) at full resolution.
fn seed_search(q1: &SrvCurve, q2: &SrvCurve, keep: usize, opts: &AlignOptions) -> (usize, Vec<f64>) {
    let n = q1.grid_size();
    let m = n / opts.coarse_factor.max(1);
    let mut candidates = vec![keep];
    if m < 8 {
        candidates.extend((0..n).filter(|&s| s != keep));
    } else {
        let q1c = dp::downsample(q1.values(), m);
        let mut ranked: Vec<(f64, usize)> = (0..n)
            .map(|s| {
                let q2c = dp::downsample(q2.shifted(s).values(), m);
                (dp::solve(&q1c, &q2c, false).cost, s)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.extend(
            ranked
                .iter()
                .map(|&(_, s)| s)
                .filter(|&s| s != keep)
                .take(opts.refine_seeds),
        );
    }

    let mut best: Option<(f64, usize, Vec<(usize, usize)>)> = None;
    for s in candidates {
        let sol = dp::solve(q1.values(), q2.shifted(s).values(), true);
        if best.as_ref().is_none_or(|b| sol.cost < b.0) {
            best = Some((sol.cost, s, sol.path));
        }
    }
    let (_, seed, path) = best.expect("at least one candidate seed");
    (seed, dp::path_to_warp(&path, n))
}

/// SRVs along the chordal geodesic `(1−τ)q̃1 + τ(q̃2∗ĝ)` at `τ = j/(steps−1)`.
pub fn geodesic_srv(q1: &SrvCurve, q2: &SrvCurve, group: SymmetryGroup, steps: usize) -> Result<Vec<SrvCurve>> {
    if steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "geodesic needs at least 2 steps, got {steps}"
        )));
    }
    let p1 = group.prepare(q1)?;
    let p2 = group.prepare(q2)?;
    check_grid(p1.grid_size(), &p2)?;
    let out = align_prepared(&p1, &p2, group, &AlignOptions::default(), None);
    let target = apply_alignment(&p2, &out.alignment)?;
    Ok((0..steps)
        .map(|j| {
            let tau = j as f64 / (steps - 1) as f64;
            p1.lerp(&target, tau)
        })
        .collect())
}

/// Curves along the geodesic, each integrated from the origin.
pub fn geodesic(q1: &SrvCurve, q2: &SrvCurve, group: SymmetryGroup, steps: usize) -> Result<Vec<Curve>> {
    geodesic_srv(q1, q2, group, steps)?
        .iter()
        .map(|q| from_srv(q, Vec2::zeros()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::{curve_to_srv, Curve};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn blob(n_raw: usize, phase: f64, bump: f64) -> Curve {
        let pts = (0..n_raw)
            .map(|k| {
                let t = TAU * k as f64 / n_raw as f64;
                let r = 1.0 + bump * (2.0 * t + phase).cos() + 0.15 * (3.0 * t).sin();
                Vec2::new(1.3 * r * t.cos(), r * t.sin())
            })
            .collect();
        Curve::new(pts).unwrap()
    }

    fn srv(c: &Curve, n: usize) -> SrvCurve {
        curve_to_srv(c, n).unwrap()
    }

    #[test]
    fn identity_alignment_is_bitwise_noop() {
        let q = srv(&blob(400, 0.3, 0.2), 64);
        let out = apply_alignment(&q, &Alignment::identity(64)).unwrap();
        assert_eq!(out, q);
    }

    #[test]
    fn quarter_turn_rotates_every_sample() {
        let q = srv(&blob(400, 0.3, 0.2), 64);
        let a = Alignment {
            theta: FRAC_PI_2,
            ..Alignment::identity(64)
        };
        let out = apply_alignment(&q, &a).unwrap();
        for (o, v) in out.values().iter().zip(q.values()) {
            assert!((o - Vec2::new(-v.y, v.x)).norm() < 1e-15);
        }
        assert!((out.norm() - q.norm()).abs() < 1e-14);
    }

    #[test]
    fn seed_shifts_cyclically() {
        let q = srv(&blob(400, 0.3, 0.2), 32);
        let a = Alignment {
            seed: 5,
            ..Alignment::identity(32)
        };
        let out = apply_alignment(&q, &a).unwrap();
        for k in 0..32 {
            assert_eq!(out.values()[k], q.values()[(k + 5) % 32]);
        }
    }

    #[test]
    fn non_monotone_gamma_is_rejected() {
        let q = srv(&blob(400, 0.3, 0.2), 16);
        let mut a = Alignment::identity(16);
        a.gamma.swap(3, 4);
        assert!(matches!(apply_alignment(&q, &a), Err(Error::InvalidAlignment(_))));
        let mut short = Alignment::identity(16);
        short.gamma.pop();
        assert!(apply_alignment(&q, &short).is_err());
    }

    #[test]
    fn rotation_recovered_exactly() {
        let q1 = srv(&blob(400, 0.3, 0.2), 64);
        let alpha = 1.1;
        let q2 = q1.rotated(-alpha);
        let theta = optimal_rotation(&q1, &q2).unwrap();
        assert!((theta - alpha).abs() < 1e-12);
        assert!(q1.dist_sq(&q2.rotated(theta)).sqrt() < 1e-10);
    }

    #[test]
    fn flat_rotation_functional_returns_zero() {
        // q2 vanishes wherever q1 does not, so both functionals are zero.
        let n = 16;
        let q1: Vec<Vec2> = (0..n)
            .map(|k| if k < n / 2 { Vec2::new(1.0, 0.5) } else { Vec2::zeros() })
            .collect();
        let q2: Vec<Vec2> = (0..n)
            .map(|k| {
                if k >= n / 2 {
                    Vec2::new(-0.3, 2.0)
                } else {
                    Vec2::zeros()
                }
            })
            .collect();
        let theta = optimal_rotation(
            &SrvCurve::from_values_unchecked(q1),
            &SrvCurve::from_values_unchecked(q2),
        )
        .unwrap();
        assert_eq!(theta, 0.0);
    }

    #[test]
    fn reparam_of_identical_curves_is_identity() {
        let q = srv(&blob(400, 0.3, 0.2), 50);
        let r = optimal_reparam(&q, &q, 0).unwrap();
        assert!(r.energy < 1e-10);
        assert_eq!(r.alignment.gamma, Alignment::identity(50).gamma);
    }

    #[test]
    fn dp_energy_matches_direct_evaluation() {
        let q1 = srv(&blob(400, 0.3, 0.2), 40);
        let q2 = srv(&blob(400, 1.9, 0.35), 40);
        for seed in [0, 7, 23] {
            let r = optimal_reparam(&q1, &q2, seed).unwrap();
            let direct = q1.dist_sq(&apply_alignment(&q2, &r.alignment).unwrap());
            assert!((direct - r.energy).abs() < 1e-12 * (1.0 + direct));
        }
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let q1 = srv(&blob(400, 0.3, 0.2), 40);
        let q2 = srv(&blob(400, 0.3, 0.2), 48);
        assert!(matches!(optimal_reparam(&q1, &q2, 0), Err(Error::GridMismatch { .. })));
        assert!(align(&q1, &q2, SymmetryGroup::Shape).is_err());
    }

    #[test]
    fn identical_curves_have_zero_distance_in_every_group() {
        let q = srv(&blob(400, 0.3, 0.2), 60);
        for g in SymmetryGroup::ALL {
            let (a, d) = align(&q, &q, g).unwrap();
            assert!(d <= 1e-8, "{g}: {d}");
            assert_eq!(a.theta, 0.0);
            assert_eq!(a.seed, 0);
            assert_eq!(a.gamma, Alignment::identity(60).gamma);
        }
    }

    #[test]
    fn alternation_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let q1 = srv(&blob(300, rng.random_range(0.0..TAU), 0.25), 48);
            let q2 = srv(
                &blob(300, rng.random_range(0.0..TAU), 0.1).rotated(rng.random_range(-PI..PI)),
                48,
            );
            for g in SymmetryGroup::ALL {
                let out = align_with(&q1, &q2, g, &AlignOptions::default()).unwrap();
                assert!(out.trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", out.trace);
                let unaligned = g.prepare(&q1).unwrap().dist_sq(&g.prepare(&q2).unwrap()).sqrt();
                assert!(out.distance <= unaligned + 1e-12);
            }
        }
    }

    #[test]
    fn geodesic_endpoints_and_step_count() {
        let q1 = srv(&blob(400, 0.3, 0.2), 50);
        let q2 = srv(&blob(400, 2.0, 0.3), 50);
        assert!(geodesic(&q1, &q2, SymmetryGroup::Shape, 1).is_err());
        let path = geodesic_srv(&q1, &q2, SymmetryGroup::SizeShape, 2).unwrap();
        assert_eq!(path.len(), 2);
        assert_eq!(path[0], q1);
        let curves = geodesic(&q1, &q2, SymmetryGroup::Shape, 5).unwrap();
        assert_eq!(curves.len(), 5);
        let start = crate::curves::to_srv(&curves[0]).unwrap();
        assert!(start.dist_sq(&q1.normalized().unwrap()).sqrt() < 1e-12);
    }

    #[test]
    fn geodesic_between_identical_curves_is_constant() {
        let q = srv(&blob(400, 0.3, 0.2), 50);
        let path = geodesic_srv(&q, &q, SymmetryGroup::SizeShape, 4).unwrap();
        for p in path {
            assert!(p.dist_sq(&q).sqrt() < 1e-12);
        }
    }

    #[test]
    fn group_names_round_trip() {
        for g in SymmetryGroup::ALL {
            assert_eq!(g.as_str().parse::<SymmetryGroup>().unwrap(), g);
        }
        assert!("affine".parse::<SymmetryGroup>().is_err());
    }
}
