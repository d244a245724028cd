use std::path::{Path, PathBuf};

use log::info;
use markedshapes::curves::{curve_to_srv, from_srv, Curve, SrvCurve, Vec2};
use markedshapes::envelopes::{permutation_statistics, EnvelopeOptions};
use markedshapes::karcher::karcher_mean;
use markedshapes::pointprocess::{estimate_k as estimate, r_grid, KOptions, Window};
use markedshapes::registration::{align, geodesic as geodesic_curves, Alignment, SymmetryGroup};
use markedshapes::simulate::{generate_pattern, run_study, Scenario, ScenarioConfig, StudyOptions};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{
    curve_files, ensure_dir, read_curve, read_pattern, read_text, write_csv, write_json, write_text, PatternFile,
};
use crate::manifest::Recorder;
use crate::{DistanceArgs, EstimateKArgs, GeodesicArgs, MeanArgs, PairArgs, RadiusArgs, SimulateArgs, TestArgs};

fn load_pair(args: &PairArgs, rec: &mut Recorder) -> CliResult<(SrvCurve, SrvCurve)> {
    let mut load = |p: &Path| -> CliResult<SrvCurve> {
        rec.input(p);
        curve_to_srv(&read_curve(p)?, args.n).map_err(|e| CliError::io(p, e))
    };
    let q1 = load(&args.a)?;
    let q2 = load(&args.b)?;
    Ok((q1, q2))
}

/// Directory holding `file`, `.` for a bare file name.
fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn radii(args: &RadiusArgs, window: &Window) -> CliResult<Vec<f64>> {
    Ok(r_grid(args.rmax.unwrap_or(window.min_side() / 4.0), args.rsteps)?)
}

fn k_options(args: &RadiusArgs) -> KOptions {
    KOptions {
        correction: args.correction,
        bandwidth: args.bandwidth,
    }
}

#[derive(Serialize)]
struct DistanceOutput<'a> {
    group: SymmetryGroup,
    distance: f64,
    alignment: &'a Alignment,
}

pub fn distance(args: &DistanceArgs) -> CliResult<()> {
    let mut rec = Recorder::new("distance", args, None);
    let (q1, q2) = load_pair(&args.pair, &mut rec)?;
    rec.stage("read");
    let (alignment, d) = align(&q1, &q2, args.pair.group)?;
    rec.stage("align");
    println!("{d}");
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        let path = dir.join("alignment.json");
        write_json(
            &path,
            &DistanceOutput {
                group: args.pair.group,
                distance: d,
                alignment: &alignment,
            },
        )?;
        rec.output(&path);
        rec.finish(dir)?;
    }
    Ok(())
}

pub fn geodesic(args: &GeodesicArgs) -> CliResult<()> {
    let mut rec = Recorder::new("geodesic", args, None);
    let (q1, q2) = load_pair(&args.pair, &mut rec)?;
    rec.stage("read");
    let curves = geodesic_curves(&q1, &q2, args.pair.group, args.steps)?;
    rec.stage("geodesic");
    ensure_dir(&args.out_dir)?;
    let json = args.out_dir.join("geodesic.json");
    let coords: Vec<Vec<[f64; 2]>> = curves.iter().map(Curve::to_coords).collect();
    write_json(&json, &coords)?;
    let csv = args.out_dir.join("geodesic.csv");
    let last = (args.steps - 1) as f64;
    write_csv(
        &csv,
        &["step", "tau", "x", "y"],
        curves.iter().enumerate().flat_map(|(j, c)| {
            c.points()
                .iter()
                .map(move |p| vec![j as f64, j as f64 / last, p.x, p.y])
        }),
    )?;
    rec.output(&json);
    rec.output(&csv);
    rec.finish(&args.out_dir)
}

#[derive(Serialize)]
struct MeanSummary {
    group: SymmetryGroup,
    files: Vec<PathBuf>,
    dispersion: f64,
    objective_trace: Vec<f64>,
}

pub fn mean(args: &MeanArgs) -> CliResult<()> {
    let mut rec = Recorder::new("mean", args, None);
    let files = curve_files(&args.dir)?;
    let srvs = files
        .iter()
        .map(|p| {
            rec.input(p);
            curve_to_srv(&read_curve(p)?, args.n).map_err(|e| CliError::io(p, e))
        })
        .collect::<CliResult<Vec<_>>>()?;
    rec.stage("read");
    let res = karcher_mean(&srvs, args.group)?;
    rec.stage("karcher mean");
    info!("{} curves, {} iterations", srvs.len(), res.objective_trace.len());
    println!("{}", res.dispersion);

    ensure_dir(&args.out_dir)?;
    let to_coords = |q: &SrvCurve| -> CliResult<Vec<[f64; 2]>> { Ok(from_srv(q, Vec2::zeros())?.to_coords()) };
    let outputs = [
        ("mean.json", serde_json::to_value(to_coords(&res.mean)?)),
        (
            "aligned.json",
            serde_json::to_value(res.aligned.iter().map(to_coords).collect::<CliResult<Vec<_>>>()?),
        ),
        ("alignments.json", serde_json::to_value(&res.alignments)),
        (
            "summary.json",
            serde_json::to_value(MeanSummary {
                group: args.group,
                files: files.clone(),
                dispersion: res.dispersion,
                objective_trace: res.objective_trace.clone(),
            }),
        ),
    ];
    for (name, value) in outputs {
        let path = args.out_dir.join(name);
        write_json(&path, &value.map_err(|e| CliError::io(&path, e))?)?;
        rec.output(&path);
    }
    rec.finish(&args.out_dir)
}

pub fn estimate_k(args: &EstimateKArgs) -> CliResult<()> {
    let mut rec = Recorder::new("estimate-k", args, None);
    rec.input(&args.pattern);
    let pattern = read_pattern(&args.pattern, args.radius.n)?;
    rec.stage("read");
    let grid = radii(&args.radius, pattern.window())?;
    let k = estimate(&pattern, args.group, &grid, &k_options(&args.radius))?;
    rec.stage("estimate");
    info!(
        "{} points, bandwidth {:.4}, c_f {:.6}",
        pattern.len(),
        k.bandwidth,
        k.c_f
    );
    let dir = parent_dir(&args.out);
    ensure_dir(&dir)?;
    write_csv(
        &args.out,
        &["r", "K", "L"],
        (0..grid.len()).map(|i| vec![k.r_grid[i], k.k_values[i], k.l_values[i]]),
    )?;
    rec.output(&args.out);
    rec.finish(&dir)
}

#[derive(Serialize)]
struct TestSummary {
    erl_p: f64,
    deviation_proportion: f64,
}

pub fn test(args: &TestArgs) -> CliResult<()> {
    let mut rec = Recorder::new("test", args, Some(args.seed));
    rec.input(&args.pattern);
    let pattern = read_pattern(&args.pattern, args.radius.n)?;
    rec.stage("read");
    let grid = radii(&args.radius, pattern.window())?;
    let opts = EnvelopeOptions {
        permutations: args.s,
        alpha: args.alpha,
        seed: args.seed,
        k: k_options(&args.radius),
        ..EnvelopeOptions::default()
    };
    let res = permutation_statistics(&pattern, args.group, &grid, &opts)?;
    rec.stage("envelope test");
    let summary = TestSummary {
        erl_p: res.erl_p,
        deviation_proportion: res.deviation_proportion,
    };
    println!("{}", serde_json::to_string(&summary).expect("plain numbers serialize"));

    ensure_dir(&args.out_dir)?;
    let json = args.out_dir.join("envelope.json");
    write_json(&json, &res)?;
    let csv = args.out_dir.join("envelope.csv");
    write_csv(
        &csv,
        &["r", "T_obs", "lo", "hi", "K_obs", "K_lo", "K_hi"],
        (0..res.r_grid.len()).map(|i| {
            vec![
                res.r_grid[i],
                res.t_observed[i],
                res.pointwise_lo[i],
                res.pointwise_hi[i],
                res.k_observed[i],
                res.k_lo[i],
                res.k_hi[i],
            ]
        }),
    )?;
    rec.output(&json);
    rec.output(&csv);
    rec.finish(&args.out_dir)
}

fn scenarios(code: &str) -> CliResult<Vec<Scenario>> {
    if code == "all" {
        Ok(Scenario::ALL.to_vec())
    } else {
        Ok(vec![code.parse()?])
    }
}

fn load_config(path: &Path) -> CliResult<ScenarioConfig> {
    let text = read_text(path)?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let config: ScenarioConfig = if is_toml {
        toml::from_str(&text).map_err(|e| CliError::io(path, e))?
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::io(path, e))?
    };
    config.validate().map_err(|e| CliError::io(path, e))?;
    Ok(config)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let mut base = match &args.config {
        Some(p) => load_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    if let Some(n) = args.n {
        base.grid_size = n;
    }
    let mut rec = Recorder::new("simulate", args, Some(base.seed));
    if let Some(p) = &args.config {
        rec.input(p);
    }
    let configs: Vec<ScenarioConfig> = scenarios(&args.scenario)?
        .into_iter()
        .map(|s| base.clone().with_scenario(s))
        .collect();

    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        for cfg in &configs {
            for r in 0..args.replicates as u64 {
                let sim = generate_pattern(cfg, r)?;
                let file = PatternFile::new(sim.pattern.window(), sim.pattern.locations(), &sim.curves);
                let path = dir.join(format!("pattern_{}_{r:03}.json", cfg.scenario()));
                write_json(&path, &file)?;
                rec.output(&path);
            }
        }
        rec.stage("generate");
    }

    if let Some(table) = &args.table {
        let opts = StudyOptions {
            replicates: args.replicates,
            permutations: args.s,
            alpha: args.alpha,
            correction: args.correction,
            r_steps: args.rsteps,
            ..StudyOptions::default()
        };
        let result = run_study(&configs, &opts)?;
        rec.stage("study");
        let dir = parent_dir(table);
        ensure_dir(&dir)?;
        write_text(table, &result.to_csv())?;
        rec.output(table);
        for row in &result.rows {
            if row.failed > 0 {
                log::warn!("scenario {}: {} replicates failed", row.scenario, row.failed);
            }
        }
    }

    let dir = match (&args.out_dir, &args.table) {
        (Some(d), _) => d.clone(),
        (None, Some(t)) => parent_dir(t),
        (None, None) => unreachable!("the argument parser requires an output"),
    };
    rec.finish(&dir)
}
