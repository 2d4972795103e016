use std::collections::BTreeMap;
use std::time::Instant;

use bmnn_core::{with_threads, SolverReport, Status};
use serde::Serialize;
use serde_json::json;

use crate::args::{Axis, SolverKind, SweepArgs};
use crate::error::{CliError, CliResult};
use crate::output::{
    hash_inputs, iteration_fields, write_manifest, RunManifest, RunSummary, ITERATION_COLUMNS,
};
use crate::problem::{
    build_mask, ensure_out_dir, load_input, normalization_scale, solve_scaled, SolverSetup,
};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct SweepRun {
    solver: &'static str,
    value: f64,
    config: SolverSetup,
    observed: usize,
    #[serde(flatten)]
    summary: RunSummary,
}

#[derive(Serialize)]
struct SweepConfig<'a> {
    axis: &'static str,
    values: &'a [f64],
    solvers: Vec<&'static str>,
    mask_rate: Option<f64>,
    mask: Option<String>,
    normalize: bool,
}

/// Runs every (solver, value) pair on the same instance. The input tensor is
/// also the reference for the relative error.
pub fn cmd_sweep(args: &SweepArgs, command: Vec<String>) -> CliResult<()> {
    let start = Instant::now();
    let p = &args.problem;
    if args.axis == Axis::SampleRate && (p.mask_rate.is_some() || p.mask.is_some()) {
        return Err(CliError::Usage(
            "a sample_rate sweep draws its own masks; drop --mask-rate and --mask".into(),
        ));
    }
    if args.values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage("sweep values must be finite".into()));
    }
    let mut solvers: Vec<SolverKind> = Vec::new();
    for s in &args.solvers {
        if !solvers.contains(s) {
            solvers.push(*s);
        }
    }

    // Resolve every configuration before any solving.
    let mut plan = Vec::new();
    for &kind in &solvers {
        for (idx, &value) in args.values.iter().enumerate() {
            let mut params = args.params.clone();
            match args.axis {
                Axis::Lambda => params.lambda = Some(value),
                Axis::Mu0 => params.mu0 = Some(value),
                Axis::Rho => params.rho = Some(value),
                Axis::SampleRate => {}
            }
            plan.push((
                kind,
                idx,
                value,
                SolverSetup::resolve(kind, &params, p.seed)?,
            ));
        }
    }

    let input = load_input(&p.input)?;
    let truth = &input.tensor;
    let fixed_mask = match args.axis {
        Axis::SampleRate => None,
        _ => Some(build_mask(p, truth, p.mask_rate)?),
    };
    let out = ensure_out_dir(&p.out)?;

    let mut long = csv::Writer::from_path(out.join(SWEEP_FILE))?;
    let mut header = vec!["solver", "axis", "value"];
    header.extend(ITERATION_COLUMNS);
    long.write_record(&header)?;

    let mut runs = Vec::new();
    let mut finals: BTreeMap<(usize, SolverKind), SolverReport> = BTreeMap::new();
    for (kind, idx, value, setup) in plan {
        let mask = match &fixed_mask {
            Some(m) => m.clone(),
            None => build_mask(p, truth, Some(value))?,
        };
        let scale = if p.normalize {
            normalization_scale(&mask)
        } else {
            1.0
        };
        let (_, report) = with_threads(p.threads, || {
            solve_scaled(&setup, &mask, Some(truth), scale)
        })??;
        for r in &report.records {
            let mut row = vec![
                kind.name().to_string(),
                args.axis.name().to_string(),
                value.to_string(),
            ];
            row.extend(iteration_fields(r));
            long.write_record(&row)?;
        }
        println!(
            "{} {}={value}: {} after {} iterations, RE {:.6}",
            kind.name(),
            args.axis.name(),
            report.status,
            report.iterations(),
            report.final_re().unwrap_or(f64::NAN)
        );
        runs.push(SweepRun {
            solver: kind.name(),
            value,
            config: setup,
            observed: mask.observed_count(),
            summary: RunSummary::of(&report),
        });
        finals.insert((idx, kind), report);
    }
    long.flush()?;

    write_summary(&out.join(SUMMARY_FILE), args, &solvers, &finals)?;

    let mut hashes = BTreeMap::new();
    hash_inputs(&p.input, &mut hashes)?;
    if let Some(m) = &p.mask {
        hash_inputs(m, &mut hashes)?;
    }
    let diverged = runs
        .iter()
        .filter(|r| r.summary.status == Status::Diverged.to_string())
        .count();
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: p.seed,
        threads: p.threads,
        config: SweepConfig {
            axis: args.axis.name(),
            values: &args.values,
            solvers: solvers.iter().map(|s| s.name()).collect(),
            mask_rate: p.mask_rate,
            mask: p.mask.as_ref().map(|m| m.display().to_string()),
            normalize: p.normalize,
        },
        input_sha256: hashes,
        outputs: BTreeMap::from([
            (
                "sweep".to_string(),
                out.join(SWEEP_FILE).display().to_string(),
            ),
            (
                "summary".to_string(),
                out.join(SUMMARY_FILE).display().to_string(),
            ),
        ]),
        results: json!({ "runs": runs }),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&out.join(MANIFEST_FILE), &manifest)?;

    if diverged > 0 {
        return Err(CliError::Diverged(format!(
            "{diverged} sweep runs diverged"
        )));
    }
    Ok(())
}

/// One row per axis value with `<solver>_final_re`, `<solver>_iterations` and
/// `<solver>_status` columns side by side.
fn write_summary(
    path: &std::path::Path,
    args: &SweepArgs,
    solvers: &[SolverKind],
    finals: &BTreeMap<(usize, SolverKind), SolverReport>,
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![args.axis.name().to_string()];
    for s in solvers {
        for col in ["final_re", "iterations", "status"] {
            header.push(format!("{}_{col}", s.name()));
        }
    }
    w.write_record(&header)?;
    for (idx, value) in args.values.iter().enumerate() {
        let mut row = vec![value.to_string()];
        for s in solvers {
            match finals.get(&(idx, *s)) {
                Some(r) => {
                    row.push(r.final_re().unwrap_or(f64::NAN).to_string());
                    row.push(r.iterations().to_string());
                    row.push(r.status.to_string());
                }
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
