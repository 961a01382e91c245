//! One function per subcommand.

use hawkes_core::cls::{hawkes_estimator_with, EstimatorOptions, HawkesFit};
use hawkes_core::diagnostics::{
    diagnose as run_diagnostics, DiagnosticsOptions, DEFAULT_TOLERANCE,
};
use hawkes_core::grid::lag_count;
use hawkes_core::hawkes_model::{branching_from_fit, stability_check, BranchingMatrix};
use hawkes_core::io;
use hawkes_core::selection::{aic_curve, default_delta0, AicScan};
use hawkes_core::{
    bin_counts, box_smooth, replicate as run_replication, select_bin_size,
    select_support as aic_select, simulate_hawkes, EventStream, HawkesError, HawkesSimOptions,
    HawkesSpec, IntensityModel, RandomSource, ReplicationConfig, Result, SmoothedExcitement,
    Window,
};
use serde::Serialize;

use crate::output::{read_input, InputDigest, OutDir};
use crate::{
    DiagnoseArgs, EventInput, FitArgs, ReplicateArgs, SelectBinsizeArgs, SelectSupportArgs,
    SimulateArgs, SmoothArgs,
};

fn load_events(input: &EventInput, inputs: &mut Vec<InputDigest>) -> Result<EventStream> {
    let window = match (input.window_start, input.window_end) {
        (None, None) => None,
        (start, Some(end)) => Some(Window::new(start.unwrap_or(0.0), end)?),
        (Some(_), None) => {
            return Err(HawkesError::InvalidParameter(
                "--window-start needs --window-end".into(),
            ))
        }
    };
    let data = read_input(&input.events, inputs)?;
    io::read_events_csv(data.as_slice(), window, input.dim)
}

fn load_json<T: serde::de::DeserializeOwned>(
    path: &std::path::Path,
    inputs: &mut Vec<InputDigest>,
) -> Result<T> {
    let data = read_input(path, inputs)?;
    serde_json::from_slice(&data)
        .map_err(|e| HawkesError::Parse(format!("{}: {e}", path.display())))
}

fn load_spec(path: &std::path::Path, inputs: &mut Vec<InputDigest>) -> Result<HawkesSpec> {
    let spec: HawkesSpec = load_json(path, inputs)?;
    spec.validate()?;
    Ok(spec)
}

fn load_fit(path: &std::path::Path, inputs: &mut Vec<InputDigest>) -> Result<HawkesFit> {
    load_json(path, inputs)
}

/// `0, step, 2 step, ...` up to `end`.
fn grid(end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(HawkesError::InvalidParameter(format!(
            "grid step must be positive, got {step}"
        )));
    }
    let n = (end / step * (1.0 + 1e-12)).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * step).collect())
}

fn write_smoothed(out: &mut OutDir, smoothed: &SmoothedExcitement, step: f64) -> Result<()> {
    let points = grid(smoothed.support(), step)?;
    out.write("smoothed.csv", |w| {
        io::write_smoothed_csv(w, smoothed, &points)
    })
}

fn write_scan(out: &mut OutDir, scan: &AicScan) -> Result<()> {
    out.write("aic.csv", |w| io::write_aic_csv(w, scan))
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    spec: &'a HawkesSpec,
    horizon: f64,
    seed: u64,
    burn_in: Option<f64>,
    rng: &'static str,
    events: Vec<usize>,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let spec = load_spec(&args.spec, &mut inputs)?;
    let rng = RandomSource::new(args.seed);
    let stream = simulate_hawkes(
        &spec,
        args.horizon,
        HawkesSimOptions {
            burn_in: args.burn_in,
        },
        &rng,
    )?;
    let mut out = OutDir::create(&args.out)?;
    out.write("events.csv", |w| io::write_events_csv(w, &stream))?;
    out.write_json(
        "simulation.json",
        &SimulationRecord {
            spec: &spec,
            horizon: args.horizon,
            seed: args.seed,
            burn_in: args.burn_in,
            rng: rng.algorithm(),
            events: stream.components().iter().map(Vec::len).collect(),
        },
    )?;
    println!(
        "simulated {} events on (0, {}]",
        stream.total_events(),
        args.horizon
    );
    out.finish("simulate", args, &inputs)
}

#[derive(Serialize)]
struct BranchingReport {
    matrix: Vec<Vec<f64>>,
    half_widths: Vec<Vec<f64>>,
    spectral_radius: f64,
    stable: bool,
}

#[derive(Serialize)]
struct FitSummary {
    delta: f64,
    support: f64,
    p: usize,
    n: usize,
    level: f64,
    selected_support: Option<AicScan>,
    branching: BranchingReport,
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let stream = load_events(&args.input, &mut inputs)?;
    let mut out = OutDir::create(&args.out)?;
    let scan = match args.s_max {
        Some(s_max) => {
            let delta0 = match args.delta0 {
                Some(d) => d,
                None => default_delta0(&stream)?,
            };
            let scan = aic_select(&bin_counts(&stream, delta0)?, s_max)?;
            write_scan(&mut out, &scan)?;
            Some(scan)
        }
        None => None,
    };
    let support = match (&scan, args.support) {
        (Some(scan), _) => scan.s_hat,
        (None, Some(s)) => s,
        (None, None) => unreachable!("clap requires --support or --s-max"),
    };
    let bc = bin_counts(&stream, args.delta)?;
    let options = EstimatorOptions {
        storage: args.storage.into(),
        covariance: true,
    };
    let fit = hawkes_estimator_with(&bc, support, &options)?;
    let branching = branching_from_fit(&fit)?;
    let stable = stability_check(&BranchingMatrix::from_matrix(branching.matrix.clone()));

    out.write_json("fit.json", &fit)?;
    out.write("estimates.csv", |w| {
        io::write_estimates_csv(w, &fit, args.level)
    })?;
    out.write("baseline.csv", |w| {
        io::write_baseline_csv(w, &fit, args.level)
    })?;
    if args.emit_smoothed {
        let tau = args.tau.expect("clap requires --tau with --emit-smoothed");
        let smoothed = box_smooth(&fit, tau)?;
        write_smoothed(
            &mut out,
            &smoothed,
            args.grid_step.unwrap_or(fit.delta() / 4.0),
        )?;
    }
    let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    };
    out.write_json(
        "summary.json",
        &FitSummary {
            delta: fit.delta(),
            support: fit.support(),
            p: fit.p(),
            n: fit.n(),
            level: args.level,
            selected_support: scan,
            branching: BranchingReport {
                matrix: rows(&branching.matrix),
                half_widths: rows(&branching.half_widths),
                spectral_radius: branching.spectral_radius,
                stable,
            },
        },
    )?;
    println!(
        "p = {}, n = {}, eta = {:?}",
        fit.p(),
        fit.n(),
        fit.baseline()
    );
    println!("branching matrix (±1.96 se):");
    for row in branching.display_rows() {
        println!("  {row}");
    }
    println!("spectral radius {:.4}", branching.spectral_radius);
    out.finish("fit", args, &inputs)
}

pub fn select_support(args: &SelectSupportArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let stream = load_events(&args.input, &mut inputs)?;
    let delta0 = match args.delta0 {
        Some(d) => d,
        None => default_delta0(&stream)?,
    };
    let bc = bin_counts(&stream, delta0)?;
    let mut out = OutDir::create(&args.out)?;
    match aic_select(&bc, args.s_max) {
        Ok(scan) => {
            write_scan(&mut out, &scan)?;
            out.write_json("support.json", &scan)?;
            println!(
                "delta0 = {delta0}, p_hat = {}, s_hat = {}",
                scan.p_hat, scan.s_hat
            );
            out.finish("select-support", args, &inputs)
        }
        Err(e @ HawkesError::SelectionFailed(_)) => {
            let (candidates, aic) = aic_curve(&bc, args.s_max)?;
            out.write("aic.csv", |w| {
                io::write_aic_rows(w, delta0, &candidates, &aic)
            })?;
            out.finish("select-support", args, &inputs)?;
            Err(e)
        }
        Err(e) => Err(e),
    }
}

pub fn select_binsize(args: &SelectBinsizeArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let stream = load_events(&args.input, &mut inputs)?;
    let scan = select_bin_size(&stream, args.support, &args.deltas, args.level)?;
    let mut out = OutDir::create(&args.out)?;
    out.write("binsize.csv", |w| io::write_binsize_csv(w, &scan))?;
    out.write_json("binsize.json", &scan)?;
    match scan.recommended_delta() {
        Some(d) => println!("recommended delta = {d}"),
        None => println!("no stabilisation among the candidates"),
    }
    out.finish("select-binsize", args, &inputs)
}

pub fn smooth(args: &SmoothArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let fit = load_fit(&args.fit, &mut inputs)?;
    let smoothed = box_smooth(&fit, args.tau)?;
    let mut out = OutDir::create(&args.out)?;
    write_smoothed(
        &mut out,
        &smoothed,
        args.grid_step.unwrap_or(fit.delta() / 4.0),
    )?;
    out.finish("smooth", args, &inputs)
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let stream = load_events(&args.input, &mut inputs)?;
    let model = match (&args.fit, &args.spec) {
        (Some(path), _) => {
            let fit = load_fit(path, &mut inputs)?;
            match args.tau {
                Some(tau) => {
                    IntensityModel::from_smoothed(fit.baseline(), &box_smooth(&fit, tau)?)?
                }
                None => IntensityModel::from_fit_grid(&fit)?,
            }
        }
        (None, Some(path)) => IntensityModel::from_spec(&load_spec(path, &mut inputs)?)?,
        (None, None) => unreachable!("clap requires --fit or --spec"),
    };
    let options = DiagnosticsOptions {
        burn_in: args.burn_in,
        lags: args.lags,
        tolerance: DEFAULT_TOLERANCE,
        chunk: args.chunk,
    };
    let report = run_diagnostics(&stream, &model, &options)?;
    let mut out = OutDir::create(&args.out)?;
    out.write_json("diagnostics.json", &report)?;
    out.write("qq.csv", |w| io::write_qq_csv(w, &report))?;
    for c in &report.components {
        println!(
            "component {}: {} residuals, KS p = {:.4}, Ljung-Box p = {:.4}",
            c.component,
            c.residuals.len(),
            c.ks.p_value,
            c.ljung_box.p_value
        );
    }
    out.finish("diagnose", args, &inputs)
}

#[derive(Serialize)]
struct ReplicationRecord<'a> {
    config: &'a ReplicationConfig,
    replications: usize,
    summaries: &'a [hawkes_core::experiment::TargetSummary],
}

pub fn replicate(args: &ReplicateArgs) -> Result<()> {
    let mut inputs = Vec::new();
    let mut config: ReplicationConfig = load_json(&args.config, &mut inputs)?;
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let report = run_replication(&config)?;
    let d = config.spec.dim();
    let p = lag_count(config.support, config.delta).max(1);
    let mut out = OutDir::create(&args.out)?;
    out.write_json(
        "replication.json",
        &ReplicationRecord {
            config: &config,
            replications: report.replications,
            summaries: &report.summaries,
        },
    )?;
    out.write("samples.csv", |w| {
        io::write_replication_csv(w, &report, d, p)
    })?;
    for s in &report.summaries {
        println!(
            "{:?}: truth {}, mean {:.5}, coverage {:.3}, variance ratio {:.3}",
            s.target,
            s.truth,
            s.mean_estimate,
            s.coverage,
            s.variance_ratio()
        );
    }
    out.finish("replicate", args, &inputs)
}
