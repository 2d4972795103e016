use std::collections::BTreeMap;
use std::time::Instant;

use bmnn_core::io::{write_mask, write_tensor};
use bmnn_core::{gen_mask, gen_synthetic, relative_error, MaskSpec};
use serde::Serialize;
use serde_json::json;

use crate::args::SynthArgs;
use crate::error::{CliError, CliResult};
use crate::output::{sha256_file, write_manifest, RunManifest};
use crate::problem::ensure_out_dir;

pub const TRUTH_FILE: &str = "truth.bmt";
pub const MASK_FILE: &str = "mask.bmt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Serialize)]
struct SynthConfig {
    dims: [usize; 3],
    bm_rank: usize,
    slice_rank: usize,
    sample_rate: f64,
    mask_seed: u64,
}

pub fn cmd_synth(args: &SynthArgs, command: Vec<String>) -> CliResult<()> {
    let start = Instant::now();
    let dims = <[usize; 3]>::try_from(args.dims.as_slice()).map_err(|_| {
        CliError::Usage(format!(
            "--dims needs three values, got {}",
            args.dims.len()
        ))
    })?;
    let (truth, factors) = gen_synthetic(dims, args.rank, args.slice_rank, args.seed)?;
    let mask_seed = args.seed.wrapping_add(1);
    let mask = gen_mask(
        &MaskSpec {
            sample_rate: args.rate,
            seed: mask_seed,
            dims,
        },
        &truth,
    )?;
    let factor_re = relative_error(&factors.product(), &truth)?;

    let out = ensure_out_dir(&args.out)?;
    let (truth_path, mask_path) = (out.join(TRUTH_FILE), out.join(MASK_FILE));
    write_tensor(&truth_path, &truth)?;
    write_mask(&mask_path, &mask)?;

    let mut outputs = BTreeMap::new();
    for (name, path) in [("truth", &truth_path), ("mask", &mask_path)] {
        outputs.insert(name.to_string(), path.display().to_string());
        outputs.insert(format!("{name}_sha256"), sha256_file(path)?);
    }
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed: args.seed,
        threads: 1,
        config: SynthConfig {
            dims,
            bm_rank: args.rank,
            slice_rank: args.slice_rank,
            sample_rate: args.rate,
            mask_seed,
        },
        input_sha256: BTreeMap::new(),
        outputs,
        results: json!({ "observed": mask.observed_count(), "factor_fit_re": factor_re }),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    write_manifest(&out.join(MANIFEST_FILE), &manifest)?;
    println!(
        "wrote {dims:?} tensor with {} observed entries to {}",
        mask.observed_count(),
        out.display()
    );
    Ok(())
}
