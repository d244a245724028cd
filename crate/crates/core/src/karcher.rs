//! Karcher means under a symmetry group, with joint alignment of the sample.
//!
//! The mean is updated as the extrinsic average of the aligned curves
//! (projected back to the unit sphere when scale is a symmetry), which is the
//! exact minimizer for fixed alignments. Each realignment keeps the previous
//! alignment when the search does not beat it, so the objective trace never
//! increases.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{check_grid, SrvCurve};
use crate::error::{Error, Result};
use crate::registration::{align_prepared, apply_alignment, AlignOptions, Alignment, SymmetryGroup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KarcherOptions {
    pub max_iterations: usize,
    /// Relative objective decrease below which iteration stops.
    pub tolerance: f64,
    pub align: AlignOptions,
}

impl Default for KarcherOptions {
    fn default() -> Self {
        Self {
            max_iterations: 15,
            tolerance: 1e-4,
            align: AlignOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KarcherResult {
    pub group: SymmetryGroup,
    /// Template estimate.
    pub mean: SrvCurve,
    /// Alignment of each (group-prepared) input to the mean.
    pub alignments: Vec<Alignment>,
    /// Inputs after alignment.
    pub aligned: Vec<SrvCurve>,
    /// `Σ d(mean, q_i)²` at every iteration.
    pub objective_trace: Vec<f64>,
    /// `(1/N) Σ ‖aligned_i − mean‖²`.
    pub dispersion: f64,
}

impl KarcherResult {
    pub fn len(&self) -> usize {
        self.aligned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aligned.is_empty()
    }
}

pub fn karcher_mean(curves: &[SrvCurve], group: SymmetryGroup) -> Result<KarcherResult> {
    karcher_mean_with(curves, group, &KarcherOptions::default())
}

pub fn karcher_mean_with(curves: &[SrvCurve], group: SymmetryGroup, opts: &KarcherOptions) -> Result<KarcherResult> {
    let first = curves
        .first()
        .ok_or_else(|| Error::InvalidArgument("Karcher mean of an empty sample".into()))?;
    let n = first.grid_size();
    for q in curves {
        check_grid(n, q)?;
    }
    let prepared: Vec<SrvCurve> = curves.iter().map(|q| group.prepare(q)).collect::<Result<_>>()?;

    let mut mean = prepared[initial_index(&prepared)?].clone();
    let mut alignments: Vec<Option<Alignment>> = vec![None; prepared.len()];
    let mut trace: Vec<f64> = Vec::new();
    let mut aligned: Vec<SrvCurve>;

    let mut iteration = 0;
    loop {
        iteration += 1;
        let outcomes: Vec<_> = prepared
            .par_iter()
            .zip(alignments.par_iter())
            .map(|(q, prev)| align_prepared(&mean, q, group, &opts.align, prev.as_ref()))
            .collect();
        let objective: f64 = outcomes.iter().map(|o| o.distance * o.distance).sum();
        aligned = prepared
            .iter()
            .zip(&outcomes)
            .map(|(q, o)| apply_alignment(q, &o.alignment))
            .collect::<Result<_>>()?;
        alignments = outcomes.into_iter().map(|o| Some(o.alignment)).collect();

        let previous = trace.last().copied();
        trace.push(objective);
        mean = update_mean(&aligned, group)?;

        let converged = match previous {
            Some(prev) => prev - objective <= opts.tolerance * prev,
            None => objective == 0.0,
        };
        if converged || iteration >= opts.max_iterations.max(1) {
            break;
        }
    }

    let dispersion = mean_squared_residual(&aligned, &mean);
    Ok(KarcherResult {
        group,
        mean,
        alignments: alignments.into_iter().map(|a| a.expect("aligned")).collect(),
        aligned,
        objective_trace: trace,
        dispersion,
    })
}

/// The input closest (in the ambient norm) to the coordinatewise average; ties
/// go to the lowest index.
fn initial_index(prepared: &[SrvCurve]) -> Result<usize> {
    let avg = SrvCurve::mean(prepared)?;
    let dists: Vec<f64> = prepared.iter().map(|q| q.dist_sq(&avg)).collect();
    let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * min.max(f64::MIN_POSITIVE);
    Ok(dists.iter().position(|&d| d <= min + tol).unwrap_or(0))
}

fn update_mean(aligned: &[SrvCurve], group: SymmetryGroup) -> Result<SrvCurve> {
    let avg = SrvCurve::mean(aligned)?;
    if group.removes_scale() {
        avg.normalized()
    } else {
        Ok(avg)
    }
}

fn mean_squared_residual(aligned: &[SrvCurve], mean: &SrvCurve) -> f64 {
    aligned.iter().map(|a| a.dist_sq(mean)).sum::<f64>() / aligned.len() as f64
}

/// Mean squared SRV residual of the aligned sample around its template.
pub fn dispersion(result: &KarcherResult) -> f64 {
    mean_squared_residual(&result.aligned, &result.mean)
}
