//! HaLRTC baseline: ADMM over the nuclear norms of the three mode-n
//! unfoldings (Liu, Musialski, Wonka and Ye, 2013).
//!
//! Unfolding column order is cyclic in the remaining modes: mode 1 has columns
//! `(j, k)`, mode 2 has columns `(k, i)` and mode 3 has columns `(i, j)`, the
//! first of each pair being the slower index. With that convention the mode-n
//! unfolding is the row-major buffer of the `(n−1)`-times cyclically
//! transposed tensor.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{svt, Matrix};
use crate::solver::{IterationRecord, SolverReport, Status, REL_CHANGE_FLOOR};
use crate::tensor::{relative_error, Dims, ObservationMask, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalrtcConfig {
    /// Initial ADMM penalty.
    pub rho_penalty: f64,
    /// Per-iteration penalty growth; 1 keeps it fixed.
    pub rho_growth: f64,
    pub alphas: [f64; 3],
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for HalrtcConfig {
    fn default() -> Self {
        HalrtcConfig {
            rho_penalty: 1e-6,
            rho_growth: 1.05,
            alphas: [1.0 / 3.0; 3],
            max_iters: 500,
            tol: 1e-6,
        }
    }
}

impl HalrtcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_penalty > 0.0) || !self.rho_penalty.is_finite() {
            return Err(Error::config(format!(
                "rho_penalty must be positive, got {}",
                self.rho_penalty
            )));
        }
        if !(self.rho_growth >= 1.0) || !self.rho_growth.is_finite() {
            return Err(Error::config(format!(
                "rho_growth must be at least 1, got {}",
                self.rho_growth
            )));
        }
        if self.alphas.iter().any(|a| !(*a >= 0.0))
            || (self.alphas.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(Error::config(format!(
                "alphas must be nonnegative and sum to 1, got {:?}",
                self.alphas
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::config(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

fn check_mode(mode: usize) -> Result<()> {
    if (1..=3).contains(&mode) {
        Ok(())
    } else {
        Err(Error::dim(format!(
            "unfolding mode must be 1, 2 or 3, got {mode}"
        )))
    }
}

/// Mode-`mode` unfolding (`mode` in `1..=3`).
pub fn unfold(x: &Tensor3, mode: usize) -> Result<Matrix> {
    check_mode(mode)?;
    let rotated = x.transpose_cycle_n(mode - 1);
    let [rows, a, b] = rotated.dims();
    Matrix::from_vec(rows, a * b, rotated.into_vec())
}

/// Inverse of [`unfold`] for a tensor of `dims`.
pub fn fold(m: &Matrix, mode: usize, dims: Dims) -> Result<Tensor3> {
    check_mode(mode)?;
    let [n1, n2, n3] = dims;
    let rotated_dims = match mode {
        1 => [n1, n2, n3],
        2 => [n2, n3, n1],
        _ => [n3, n1, n2],
    };
    if m.shape() != (rotated_dims[0], rotated_dims[1] * rotated_dims[2]) {
        return Err(Error::dim(format!(
            "{:?} matrix is not a mode-{mode} unfolding of {dims:?}",
            m.shape()
        )));
    }
    let rotated = Tensor3::from_vec(rotated_dims, m.as_slice().to_vec())?;
    // Undo the mode − 1 forward rotations.
    Ok(rotated.transpose_cycle_n((4 - mode) % 3))
}

/// Runs HaLRTC from `X⁰ = T` on Ω and the observed mean elsewhere.
///
/// Iteration:
/// `M_i = fold_i(SVT_{α_i/ρ}(unfold_i(X + Y_i/ρ)))`,
/// `X = P_Ω(avg_i(M_i − Y_i/ρ))`,
/// `Y_i ← Y_i − ρ (M_i − X)`, `ρ ← growth · ρ`.
///
/// Records use the BMNN schema; `fit_term` holds `sqrt(Σ_i ‖M_i − X‖_F²)` and
/// `mu` the penalty `ρ`.
pub fn halrtc_run(
    mask: &ObservationMask,
    cfg: &HalrtcConfig,
    ground_truth: Option<&Tensor3>,
) -> Result<(Tensor3, SolverReport)> {
    halrtc_run_observed(mask, cfg, ground_truth, |_, _| {})
}

/// [`halrtc_run`] with a callback that sees every record and its iterate.
pub fn halrtc_run_observed(
    mask: &ObservationMask,
    cfg: &HalrtcConfig,
    ground_truth: Option<&Tensor3>,
    mut observe: impl FnMut(&IterationRecord, &Tensor3),
) -> Result<(Tensor3, SolverReport)> {
    cfg.validate()?;
    let dims = mask.dims();
    if let Some(gt) = ground_truth {
        if gt.dims() != dims {
            return Err(Error::dim(format!(
                "ground truth {:?} vs observations {dims:?}",
                gt.dims()
            )));
        }
        gt.ensure_finite("ground truth")?;
    }

    let start = Instant::now();
    let mut x = Tensor3::filled(dims, mask.observed_mean());
    mask.project_in_place(&mut x)?;
    let mut y = [
        Tensor3::zeros(dims),
        Tensor3::zeros(dims),
        Tensor3::zeros(dims),
    ];
    let mut rho = cfg.rho_penalty;
    let mut records = Vec::new();
    let mut status = Status::MaxIters;

    for k in 0..cfg.max_iters {
        let inv_rho = 1.0 / rho;
        let step: Result<Vec<Tensor3>> = (0..3)
            .into_par_iter()
            .map(|w| {
                let shifted = x.add_scaled(&y[w], inv_rho);
                let m = svt(&unfold(&shifted, w + 1)?, cfg.alphas[w] * inv_rho)?;
                fold(&m, w + 1, dims)
            })
            .collect();
        let ms = match step {
            Ok(ms) => ms,
            Err(Error::Domain(_)) => {
                records.push(IterationRecord {
                    iter: k + 1,
                    re: None,
                    rel_change: f64::NAN,
                    fit_term: f64::NAN,
                    mu: rho,
                    seconds: start.elapsed().as_secs_f64(),
                });
                status = Status::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };

        let mut next = Tensor3::zeros(dims);
        for (w, m) in ms.iter().enumerate() {
            for ((o, mv), yv) in next
                .as_mut_slice()
                .iter_mut()
                .zip(m.as_slice())
                .zip(y[w].as_slice())
            {
                *o += mv - inv_rho * yv;
            }
        }
        for v in next.as_mut_slice() {
            *v /= 3.0;
        }
        mask.project_in_place(&mut next)?;

        let mut residual = 0.0;
        for (w, m) in ms.iter().enumerate() {
            for ((yv, mv), xv) in y[w]
                .as_mut_slice()
                .iter_mut()
                .zip(m.as_slice())
                .zip(next.as_slice())
            {
                let d = mv - xv;
                residual += d * d;
                *yv -= rho * d;
            }
        }

        let rel_change = next.distance(&x) / x.frobenius_norm().max(REL_CHANGE_FLOOR);
        x = next;
        let re = match ground_truth {
            Some(gt) if x.is_finite() => Some(relative_error(&x, gt)?),
            Some(_) => Some(f64::NAN),
            None => None,
        };
        let fit_term = residual.sqrt();
        records.push(IterationRecord {
            iter: k + 1,
            re,
            rel_change,
            fit_term,
            mu: rho,
            seconds: start.elapsed().as_secs_f64(),
        });
        observe(&records[k], &x);
        rho *= cfg.rho_growth;

        if !fit_term.is_finite() || !x.is_finite() {
            status = Status::Diverged;
            break;
        }
        if re.unwrap_or(rel_change) < cfg.tol {
            status = Status::Converged;
            break;
        }
    }

    Ok((x, SolverReport { records, status }))
}
