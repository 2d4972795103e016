use std::collections::BTreeMap;
use std::time::Instant;

use bmnn_core::io::{export_frames, write_tensor};
use bmnn_core::{with_threads, Status};
use serde::Serialize;
use serde_json::json;

use crate::args::CompleteArgs;
use crate::error::{CliError, CliResult};
use crate::output::{hash_inputs, write_iterations, write_manifest, RunManifest, RunSummary};
use crate::problem::{
    build_mask, ensure_out_dir, load_input, load_tensor, normalization_scale, solve_scaled,
    SolverSetup, Source,
};

pub const COMPLETED_FILE: &str = "completed.bmt";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const FRAMES_DIR: &str = "frames";

#[derive(Serialize)]
struct CompleteConfig<'a> {
    #[serde(flatten)]
    setup: &'a SolverSetup,
    mask_rate: Option<f64>,
    mask: Option<String>,
    normalize: bool,
    normalization_scale: f64,
}

pub fn cmd_complete(args: &CompleteArgs, command: Vec<String>) -> CliResult<()> {
    let start = Instant::now();
    let p = &args.problem;
    let setup = SolverSetup::resolve(args.solver, &args.params, p.seed)?;
    let input = load_input(&p.input)?;
    let gt = args.ground_truth.as_deref().map(load_tensor).transpose()?;
    if let Some(g) = &gt {
        if g.dims() != input.tensor.dims() {
            return Err(CliError::Usage(format!(
                "ground truth dims {:?} do not match input dims {:?}",
                g.dims(),
                input.tensor.dims()
            )));
        }
    }
    let mask = build_mask(p, &input.tensor, p.mask_rate)?;
    let scale = if p.normalize {
        normalization_scale(&mask)
    } else {
        1.0
    };
    let out = ensure_out_dir(&p.out)?;

    let (x, report) = with_threads(p.threads, || {
        solve_scaled(&setup, &mask, gt.as_ref(), scale)
    })??;

    let completed = out.join(COMPLETED_FILE);
    let csv = out.join(ITERATIONS_FILE);
    write_tensor(&completed, &x)?;
    write_iterations(&csv, &report)?;
    let mut outputs = BTreeMap::from([
        ("completed".to_string(), completed.display().to_string()),
        ("iterations".to_string(), csv.display().to_string()),
    ]);
    if let Source::Frames { maxval } = input.source {
        let frames = out.join(FRAMES_DIR);
        export_frames(&x, &frames, maxval)?;
        outputs.insert("frames".into(), frames.display().to_string());
    }

    let mut hashes = BTreeMap::new();
    hash_inputs(&p.input, &mut hashes)?;
    for path in [&p.mask, &args.ground_truth].into_iter().flatten() {
        hash_inputs(path, &mut hashes)?;
    }
    let summary = RunSummary::of(&report);
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: p.seed,
        threads: p.threads,
        config: CompleteConfig {
            setup: &setup,
            mask_rate: p.mask_rate,
            mask: p.mask.as_ref().map(|m| m.display().to_string()),
            normalize: p.normalize,
            normalization_scale: scale,
        },
        input_sha256: hashes,
        outputs,
        results: json!({ "observed": mask.observed_count(), "run": summary }),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&out.join(MANIFEST_FILE), &manifest)?;

    println!(
        "{}: {} after {} iterations{}",
        args.solver.name(),
        report.status,
        report.iterations(),
        report
            .final_re()
            .map(|re| format!(", RE {re:.6}"))
            .unwrap_or_default()
    );
    if report.status == Status::Diverged {
        return Err(CliError::Diverged(format!(
            "non-finite iterate at iteration {}",
            report.iterations()
        )));
    }
    Ok(())
}
