use std::fs::File;

use anyhow::Context;
use ddeperiod_core::io::{to_json_string, write_tx_csv};
use ddeperiod_core::smooth::DEFAULT_DELTAS;
use ddeperiod_core::{
    analysis::read_table_rows, convergence_study, integrate, is_slowly_oscillating, solve_exact,
    sweep as run_sweep, table1_rows, verify_table as run_verify, Axis, History, IntegratorConfig,
    Interpolation, MapReport, Params, SmoothingConfig, SweepSpec,
};
use serde::Serialize;

use crate::config::{FileConfig, IntegratorSection, ParamsSection};
use crate::output::write_all;
use crate::{IntegratorArgs, ParamArgs, SmoothArgs, SolveArgs, SweepArgs, UsageError, VerifyArgs};

const DEFAULT_SAMPLE_STEP: f64 = 0.01;
/// Base point of a sweep for parameters given neither as flag, config nor axis.
const SWEEP_BASE: [f64; 4] = [1.0, 0.25, 2.5, 1.5];

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn merged(flags: &ParamArgs, file: &ParamsSection) -> [Option<f64>; 4] {
    [
        flags.a1.or(file.a1),
        flags.a2.or(file.a2),
        flags.p1.or(file.p1),
        flags.p2.or(file.p2),
    ]
}

fn resolve_params(flags: &ParamArgs, file: &ParamsSection) -> anyhow::Result<Params> {
    let v = merged(flags, file);
    let names = ["a1", "a2", "p1", "p2"];
    let mut out = [0.0; 4];
    for (i, x) in v.iter().enumerate() {
        out[i] = x.ok_or_else(|| usage(format!("missing --{}", names[i])))?;
    }
    Ok(Params::new(out[0], out[1], out[2], out[3])?)
}

fn parse_interpolation(s: &str) -> anyhow::Result<Interpolation> {
    match s.to_ascii_lowercase().as_str() {
        "cubic" => Ok(Interpolation::Cubic),
        "linear" => Ok(Interpolation::Linear),
        other => Err(usage(format!(
            "unknown interpolation '{other}' (expected cubic or linear)"
        ))),
    }
}

fn resolve_integrator(
    flags: &IntegratorArgs,
    file: &IntegratorSection,
) -> anyhow::Result<(Option<f64>, Interpolation)> {
    let interpolation = match flags
        .interpolation
        .as_deref()
        .or(file.interpolation.as_deref())
    {
        Some(s) => parse_interpolation(s)?,
        None => Interpolation::default(),
    };
    Ok((flags.step.or(file.step), interpolation))
}

fn positive(name: &str, x: f64) -> anyhow::Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(usage(format!(
            "{name} must be positive and finite, got {x}"
        )))
    }
}

#[derive(Serialize)]
struct SolveSummary {
    solver: &'static str,
    a1: f64,
    a2: f64,
    p1: f64,
    p2: f64,
    h: f64,
    horizon: f64,
    delta: f64,
    step: Option<f64>,
    zeros: Vec<f64>,
    slowly_oscillating: bool,
    #[serde(rename = "x_at_T")]
    x_at_t: Option<f64>,
    /// Largest gap to the exact solution on the integration grid.
    max_deviation_from_exact: Option<f64>,
}

pub fn solve(a: &SolveArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let params = resolve_params(&a.params, &file.params)?;
    let h = a.h.or(file.solve.h).ok_or_else(|| usage("missing --h"))?;
    if !h.is_finite() || h == 0.0 {
        return Err(usage(format!("--h must be nonzero and finite, got {h}")));
    }
    let horizon = a
        .horizon
        .or(file.solve.horizon)
        .ok_or_else(|| usage("missing --horizon"))?;
    let horizon = positive("--horizon", horizon)?;
    let sample_step = positive(
        "--sample-step",
        a.sample_step
            .or(file.solve.sample_step)
            .unwrap_or(DEFAULT_SAMPLE_STEP),
    )?;
    let delta = a.delta.or(file.smoothing.delta).unwrap_or(0.0);
    let period = params.period();
    let x_at = |x: Option<f64>| if horizon >= period { x } else { None };

    let mut summary = SolveSummary {
        solver: "exact",
        a1: params.a1(),
        a2: params.a2(),
        p1: params.p1(),
        p2: params.p2(),
        h,
        horizon,
        delta,
        step: None,
        zeros: Vec::new(),
        slowly_oscillating: false,
        x_at_t: None,
        max_deviation_from_exact: None,
    };
    let exact = solve_exact(&params, h, horizon)?;
    let samples = if delta == 0.0 {
        summary.zeros = exact.zero_crossings().to_vec();
        summary.x_at_t = x_at(Some(exact.eval(period.min(horizon))?));
        exact.samples(sample_step)?
    } else {
        let smoothing = SmoothingConfig::new(delta)?;
        let (step, interpolation) = resolve_integrator(&a.integrator, &file.integrator)?;
        let icfg = match step {
            Some(s) => IntegratorConfig::new(s, interpolation),
            None => IntegratorConfig::new(IntegratorConfig::for_delta(delta).step, interpolation),
        };
        let traj = integrate(&params, &smoothing, &icfg, &History::Constant(h), horizon)?;
        summary.solver = "smoothed";
        summary.step = Some(icfg.step);
        summary.zeros = traj.zero_crossings();
        summary.x_at_t = x_at(Some(traj.eval(period.min(horizon))?));
        let mut dev: f64 = 0.0;
        for (t, x) in traj.nodes().filter(|(t, _)| *t <= horizon) {
            dev = dev.max((x - exact.eval(t)?).abs());
        }
        summary.max_deviation_from_exact = Some(dev);
        traj.samples(sample_step)?
    };
    summary.slowly_oscillating = is_slowly_oscillating(&summary.zeros, 1.0);

    let mut csv = Vec::new();
    write_tx_csv(&mut csv, &samples)?;
    let json = to_json_string(&summary)?;
    write_all(
        &a.out_dir,
        &[
            ("trajectory.csv", csv),
            ("summary.json", json.clone().into_bytes()),
        ],
    )?;
    print!("{json}");
    Ok(0)
}

pub fn map(a: &ParamArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let params = resolve_params(a, &file.params)?;
    let report = MapReport::new(&params)?;
    print!("{}", to_json_string(&report)?);
    Ok(0)
}

pub fn verify_table(a: &VerifyArgs) -> anyhow::Result<u8> {
    let rows = match &a.rows {
        Some(path) => {
            let f = File::open(path)
                .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
            read_table_rows(f).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => table1_rows(),
    };
    let report = run_verify(&rows);
    let json = to_json_string(&report)?;
    write_all(
        &a.out_dir,
        &[("table_report.json", json.clone().into_bytes())],
    )?;
    for r in &report.rows {
        let verdict = if r.pass { "PASS" } else { "FAIL" };
        eprintln!("row {}: {verdict} {}", r.row, r.failures.join("; "));
    }
    print!("{json}");
    Ok(if report.all_pass { 0 } else { 1 })
}

pub fn sweep(a: &SweepArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let given = merged(&a.params, &file.params);
    let mut base = SWEEP_BASE;
    for (b, g) in base.iter_mut().zip(given) {
        if let Some(g) = g {
            *b = g;
        }
    }
    let axes: Vec<Axis> = if a.axes.is_empty() {
        file.sweep
            .axes
            .iter()
            .map(|s| {
                s.parse::<Axis>()
                    .map_err(|e| usage(format!("axis '{s}': {e}")))
            })
            .collect::<anyhow::Result<_>>()?
    } else {
        a.axes.clone()
    };
    let jobs = a.jobs.or(file.sweep.jobs).unwrap_or(0);
    let spec = SweepSpec::new(base, axes)?;
    let report = run_sweep(&spec, jobs)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let json = to_json_string(&report)?;
    let written = write_all(
        &a.out_dir,
        &[("sweep.csv", csv), ("sweep.json", json.into_bytes())],
    )
    .context("writing sweep output")?;
    println!(
        "{} cells, {} passing; wrote {}",
        report.cells.len(),
        report.passing().count(),
        written
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(0)
}

pub fn smooth(a: &SmoothArgs, file: &FileConfig) -> anyhow::Result<u8> {
    let params = resolve_params(&a.params, &file.params)?;
    let deltas = a
        .deltas
        .clone()
        .or_else(|| file.smoothing.deltas.clone())
        .unwrap_or_else(|| DEFAULT_DELTAS.to_vec());
    if deltas.is_empty() {
        return Err(usage("--deltas must not be empty"));
    }
    let (step, interpolation) = resolve_integrator(&a.integrator, &file.integrator)?;
    if let Some(s) = step {
        IntegratorConfig::new(s, interpolation).steps_per_delay()?;
    }
    let jobs = a.jobs.unwrap_or(0);
    let report = convergence_study(&params, &deltas, step, interpolation, jobs)?;
    let json = to_json_string(&report)?;
    write_all(
        &a.out_dir,
        &[("convergence.json", json.clone().into_bytes())],
    )?;
    for (d, e) in report.delta.iter().zip(&report.errors) {
        if let Some(e) = e {
            eprintln!("delta {d}: {e}");
        }
    }
    print!("{json}");
    Ok(if report.successes() == 0 { 1 } else { 0 })
}
