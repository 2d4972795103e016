//! Loading inputs and dispatching to a solver.

use std::path::{Path, PathBuf};

use bmnn_core::io::{import_frames, read_mask_flags, read_tensor};
use bmnn_core::{
    gen_mask, halrtc_run, run, HalrtcConfig, MaskSpec, ObservationMask, SolverConfig, SolverReport,
    Tensor3,
};
use serde::Serialize;

use crate::args::{ProblemArgs, SolverArgs, SolverKind};
use crate::error::{CliError, CliResult};

/// Where the input tensor came from.
pub enum Source {
    Tensor,
    Frames { maxval: u16 },
}

pub struct Input {
    pub tensor: Tensor3,
    pub source: Source,
}

pub fn load_input(path: &Path) -> CliResult<Input> {
    if !path.exists() {
        return Err(CliError::Io(format!("{} does not exist", path.display())));
    }
    if path.is_dir() {
        let (tensor, maxval) = import_frames(path)?;
        Ok(Input {
            tensor,
            source: Source::Frames { maxval },
        })
    } else {
        Ok(Input {
            tensor: read_tensor(path)?,
            source: Source::Tensor,
        })
    }
}

pub fn load_tensor(path: &Path) -> CliResult<Tensor3> {
    if !path.is_file() {
        return Err(CliError::Io(format!("{} is not a file", path.display())));
    }
    Ok(read_tensor(path)?)
}

/// Builds Ω from `--mask` or from `rate` and `--seed`.
pub fn build_mask(
    problem: &ProblemArgs,
    t: &Tensor3,
    rate: Option<f64>,
) -> CliResult<ObservationMask> {
    match (&problem.mask, rate) {
        (Some(path), None) => {
            if !path.is_file() {
                return Err(CliError::Io(format!("{} is not a file", path.display())));
            }
            let (dims, flags) = read_mask_flags(path)?;
            if dims != t.dims() {
                return Err(CliError::Usage(format!(
                    "mask dims {dims:?} do not match input dims {:?}",
                    t.dims()
                )));
            }
            Ok(ObservationMask::from_tensor(t, flags)?)
        }
        (None, Some(sample_rate)) => {
            let spec = MaskSpec {
                sample_rate,
                seed: problem.seed,
                dims: t.dims(),
            };
            Ok(gen_mask(&spec, t)?)
        }
        (Some(_), Some(_)) => Err(CliError::Usage(
            "--mask conflicts with a sample rate".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "one of --mask-rate or --mask is required".into(),
        )),
    }
}

/// Largest observed magnitude, or 1 when nothing nonzero is observed.
pub fn normalization_scale(mask: &ObservationMask) -> f64 {
    let m = mask.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// A fully resolved solver configuration.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverSetup {
    Bmnn(SolverConfig),
    Halrtc(HalrtcConfig),
}

impl SolverSetup {
    pub fn resolve(kind: SolverKind, a: &SolverArgs, seed: u64) -> CliResult<SolverSetup> {
        let alphas = match &a.alphas {
            Some(v) => Some(<[f64; 3]>::try_from(v.as_slice()).map_err(|_| {
                CliError::Usage(format!("--alphas needs three values, got {}", v.len()))
            })?),
            None => None,
        };
        let setup = match kind {
            SolverKind::Bmnn => {
                let d = SolverConfig::default();
                SolverSetup::Bmnn(SolverConfig {
                    lambda: a.lambda.unwrap_or(d.lambda),
                    mu0: a.mu0.unwrap_or(d.mu0),
                    rho: a.rho.unwrap_or(d.rho),
                    mu_max: a.mu_max.unwrap_or(d.mu_max),
                    alphas: alphas.unwrap_or(d.alphas),
                    bm_rank: a.rank.unwrap_or(d.bm_rank),
                    max_iters: a.max_iters.unwrap_or(d.max_iters),
                    tol: a.tol.unwrap_or(d.tol),
                    rals_sweeps: a.rals_sweeps.unwrap_or(d.rals_sweeps),
                    seed,
                })
            }
            SolverKind::Halrtc => {
                for (flag, set) in [
                    ("--rank", a.rank.is_some()),
                    ("--lambda", a.lambda.is_some()),
                    ("--mu-max", a.mu_max.is_some()),
                    ("--rals-sweeps", a.rals_sweeps.is_some()),
                ] {
                    if set {
                        return Err(CliError::Usage(format!("{flag} does not apply to halrtc")));
                    }
                }
                let d = HalrtcConfig::default();
                SolverSetup::Halrtc(HalrtcConfig {
                    rho_penalty: a.mu0.unwrap_or(d.rho_penalty),
                    rho_growth: a.rho.unwrap_or(d.rho_growth),
                    alphas: alphas.unwrap_or(d.alphas),
                    max_iters: a.max_iters.unwrap_or(d.max_iters),
                    tol: a.tol.unwrap_or(d.tol),
                })
            }
        };
        setup.validate()?;
        Ok(setup)
    }

    pub fn validate(&self) -> CliResult<()> {
        match self {
            SolverSetup::Bmnn(c) => c.validate()?,
            SolverSetup::Halrtc(c) => c.validate()?,
        }
        Ok(())
    }

    pub fn solve(
        &self,
        mask: &ObservationMask,
        gt: Option<&Tensor3>,
    ) -> CliResult<(Tensor3, SolverReport)> {
        Ok(match self {
            SolverSetup::Bmnn(cfg) => {
                let out = run(mask, cfg, gt)?;
                (out.x, out.report)
            }
            SolverSetup::Halrtc(cfg) => halrtc_run(mask, cfg, gt)?,
        })
    }
}

/// Solves on `mask`, optionally in normalized units, and reports in the
/// original units.
pub fn solve_scaled(
    setup: &SolverSetup,
    mask: &ObservationMask,
    gt: Option<&Tensor3>,
    scale: f64,
) -> CliResult<(Tensor3, SolverReport)> {
    if scale == 1.0 {
        return setup.solve(mask, gt);
    }
    let inv = 1.0 / scale;
    let values = mask.values().iter().map(|v| v * inv).collect();
    let scaled = ObservationMask::new(mask.dims(), mask.flags().to_vec(), values)?;
    let gt_scaled = gt.map(|g| g.scaled(inv));
    let (x, report) = setup.solve(&scaled, gt_scaled.as_ref())?;
    let mut x = x.scaled(scale);
    // exact observed values survive the round trip
    mask.project_in_place(&mut x)?;
    Ok((x, report))
}

pub fn ensure_out_dir(dir: &Path) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}
