//! Replicated simulation study: generate, estimate and test each scenario,
//! then summarise global p-values and pointwise deviation proportions.

use std::fmt::Write as _;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_pattern, Scenario, ScenarioConfig};
use crate::envelopes::{envelope_test, EnvelopeOptions};
use crate::error::{Error, Result};
use crate::karcher::KarcherOptions;
use crate::pointprocess::{r_grid, EdgeCorrection, KOptions, MarkContext, SpatialContext, DEFAULT_R_STEPS};
use crate::registration::SymmetryGroup;
use crate::rng;

/// Stream identifier of the permutation seed, below the replicate level.
const PERMUTATION_FIELD: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyOptions {
    pub replicates: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub groups: Vec<SymmetryGroup>,
    pub correction: EdgeCorrection,
    /// Largest radius; a quarter of the shorter window side when absent.
    pub rmax: Option<f64>,
    pub r_steps: usize,
    pub karcher: KarcherOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            replicates: 50,
            permutations: 2499,
            alpha: 0.05,
            groups: SymmetryGroup::ALL.to_vec(),
            correction: EdgeCorrection::default(),
            rmax: None,
            r_steps: DEFAULT_R_STEPS,
            karcher: KarcherOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub group: SymmetryGroup,
    pub p_value: f64,
    pub deviation_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub scenario: Scenario,
    pub replicate: u64,
    pub points: usize,
    pub groups: Vec<GroupOutcome>,
}

/// Generates replicate `replicate` of `config` and runs the envelope test for each group.
/// The spatial ingredients are shared across groups.
pub fn run_replicate(config: &ScenarioConfig, replicate: u64, opts: &StudyOptions) -> Result<ReplicateOutcome> {
    let sim = generate_pattern(config, replicate)?;
    let pattern = &sim.pattern;
    let rmax = opts.rmax.unwrap_or(config.window.min_side() / 4.0);
    let grid = r_grid(rmax, opts.r_steps)?;
    let k_opts = KOptions {
        correction: opts.correction,
        bandwidth: None,
    };
    let spatial = SpatialContext::for_pattern(pattern, &grid, &k_opts)?;
    let env_opts = EnvelopeOptions {
        permutations: opts.permutations,
        alpha: opts.alpha,
        seed: rng::derive_seed(config.seed, &[replicate, PERMUTATION_FIELD]),
        k: k_opts,
        karcher: opts.karcher.clone(),
    };
    let groups = opts
        .groups
        .iter()
        .map(|&g| {
            let marks = MarkContext::new(pattern.marks(), g, None, &opts.karcher)?;
            let res = envelope_test(&spatial, &marks, &env_opts)?;
            Ok(GroupOutcome {
                group: g,
                p_value: res.erl_p,
                deviation_proportion: res.deviation_proportion,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ReplicateOutcome {
        scenario: config.scenario(),
        replicate,
        points: pattern.len(),
        groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: SymmetryGroup,
    pub mean_p: f64,
    pub sd_p: f64,
    pub mean_proportion: f64,
    pub sd_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub scenario: Scenario,
    pub config: ScenarioConfig,
    pub completed: usize,
    pub failed: usize,
    pub groups: Vec<GroupSummary>,
}

impl StudyRow {
    pub fn group(&self, g: SymmetryGroup) -> Option<&GroupSummary> {
        self.groups.iter().find(|s| s.group == g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub groups: Vec<SymmetryGroup>,
    pub rows: Vec<StudyRow>,
    pub outcomes: Vec<ReplicateOutcome>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Runs every configuration for `opts.replicates` replicates. Failed replicates
/// are logged and counted, not fatal.
pub fn run_study(configs: &[ScenarioConfig], opts: &StudyOptions) -> Result<StudyTable> {
    if opts.replicates < 2 {
        return Err(Error::InvalidArgument(format!(
            "a study needs at least 2 replicates, got {}",
            opts.replicates
        )));
    }
    let tasks: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| (0..opts.replicates as u64).map(move |r| (c, r)))
        .collect();
    let results: Vec<(usize, Result<ReplicateOutcome>)> = tasks
        .par_iter()
        .map(|&(c, r)| {
            let out = run_replicate(&configs[c], r, opts);
            match &out {
                Ok(o) => info!("scenario {} replicate {r}: {} points", o.scenario, o.points),
                Err(e) => warn!("scenario {} replicate {r} failed: {e}", configs[c].scenario()),
            }
            (c, out)
        })
        .collect();

    let mut rows = Vec::with_capacity(configs.len());
    let mut outcomes = Vec::new();
    for (c, config) in configs.iter().enumerate() {
        let mut ok = Vec::new();
        let mut failed = 0;
        for (idx, res) in results.iter().filter(|(i, _)| *i == c) {
            debug_assert_eq!(*idx, c);
            match res {
                Ok(o) => ok.push(o.clone()),
                Err(_) => failed += 1,
            }
        }
        let groups = opts
            .groups
            .iter()
            .map(|&g| {
                let pick = |f: fn(&GroupOutcome) -> f64| -> Vec<f64> {
                    ok.iter()
                        .filter_map(|o| o.groups.iter().find(|x| x.group == g).map(f))
                        .collect()
                };
                let (mean_p, sd_p) = mean_sd(&pick(|x| x.p_value));
                let (mean_proportion, sd_proportion) = mean_sd(&pick(|x| x.deviation_proportion));
                GroupSummary {
                    group: g,
                    mean_p,
                    sd_p,
                    mean_proportion,
                    sd_proportion,
                }
            })
            .collect();
        rows.push(StudyRow {
            scenario: config.scenario(),
            config: config.clone(),
            completed: ok.len(),
            failed,
            groups,
        });
        outcomes.extend(ok);
    }
    Ok(StudyTable {
        groups: opts.groups.clone(),
        rows,
        outcomes,
    })
}

impl StudyTable {
    /// One row per configuration: dependence flags, replicate counts, then mean
    /// and sd of the global p-value for every group, then the same for the
    /// deviation proportion.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("shape,orientation,size,completed,failed");
        for g in &self.groups {
            let _ = write!(out, ",p_{g},p_{g}_sd");
        }
        for g in &self.groups {
            let _ = write!(out, ",prop_{g},prop_{g}_sd");
        }
        out.push('\n');
        for row in &self.rows {
            let s = row.scenario;
            let _ = write!(
                out,
                "{},{},{},{},{}",
                s.shape as u8, s.orientation as u8, s.size as u8, row.completed, row.failed
            );
            for g in &row.groups {
                let _ = write!(out, ",{:.4},{:.4}", g.mean_p, g.sd_p);
            }
            for g in &row.groups {
                let _ = write!(out, ",{:.4},{:.4}", g.mean_proportion, g.sd_proportion);
            }
            out.push('\n');
        }
        out
    }
}
