//! ADMM solver for BM-factor slicewise nuclear norm minimization (BMNN).
//!
//! The model is
//!
//! ```text
//! min  Σ_i α_i Σ_t ‖slice_t(A_i)‖_*  +  (λ/2) ‖X − bmp(A1, A2, A3)‖_F²   s.t.  X_Ω = T_Ω
//! ```
//!
//! where the slices are the lateral slices of `A1`, the frontal slices of `A2`
//! and the horizontal slices of `A3`. Splitting `A_i = H_i` with multipliers
//! `Y_i` and penalty `μ`, one outer iteration runs
//!
//! 1. `H_i ← SVT_{α_i/μ}(A_i − Y_i/μ)` slice by slice,
//! 2. regularized ALS sweeps updating `A2`, `A3`, `A1` in that order, each one
//!    a set of independent ridge problems over tubes (the `A3` and `A1` steps
//!    reuse the `A2` machinery on cyclically transposed operands),
//! 3. `X ← T` on Ω and `bmp(A)` elsewhere,
//! 4. `Y_i ← Y_i + μ (H_i − A_i)` and `μ ← min(ρ μ, μ_max)`.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm::{mat_blocks, BmFactors};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve_in_place, nuclear_norm, svt, Matrix};
use crate::rng::SeededRng;
use crate::tensor::{relative_error, ObservationMask, SliceOrientation, Tensor3};

/// Floor for the denominator of the relative iterate change.
pub const REL_CHANGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Weight of the fit term.
    pub lambda: f64,
    /// Initial penalty.
    pub mu0: f64,
    /// Penalty growth factor, strictly greater than one.
    pub rho: f64,
    pub mu_max: f64,
    /// Slicewise nuclear norm weights for `A1`, `A2`, `A3`.
    pub alphas: [f64; 3],
    pub bm_rank: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Inner ALS passes per outer iteration.
    pub rals_sweeps: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.2,
            mu0: 0.01,
            rho: 1.05,
            mu_max: 1e10,
            alphas: [1.0 / 3.0; 3],
            bm_rank: 3,
            max_iters: 500,
            tol: 1e-6,
            rals_sweeps: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lambda) {
            return Err(Error::config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !positive(self.mu0) || !positive(self.mu_max) {
            return Err(Error::config("mu0 and mu_max must be positive"));
        }
        if self.mu0 > self.mu_max {
            return Err(Error::config(format!(
                "mu0 ({}) exceeds mu_max ({})",
                self.mu0, self.mu_max
            )));
        }
        if !(self.rho > 1.0) || !self.rho.is_finite() {
            return Err(Error::config(format!(
                "rho must exceed 1, got {}",
                self.rho
            )));
        }
        if self.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite())
            || !(self.alphas.iter().sum::<f64>() > 0.0)
        {
            return Err(Error::config(format!(
                "alphas must be nonnegative with a positive sum, got {:?}",
                self.alphas
            )));
        }
        if self.bm_rank == 0 {
            return Err(Error::config("bm_rank must be at least 1"));
        }
        if self.max_iters == 0 || self.rals_sweeps == 0 {
            return Err(Error::config("max_iters and rals_sweeps must be positive"));
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

/// Slice orientation carrying the nuclear norm penalty of factor `A_{which+1}`.
pub const FACTOR_SLICES: [SliceOrientation; 3] = [
    SliceOrientation::Lateral,
    SliceOrientation::Frontal,
    SliceOrientation::Horizontal,
];

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Tensor3,
    pub factors: BmFactors,
    /// Auxiliary copies of the factors that carry the nuclear norms.
    pub h: [Tensor3; 3],
    pub y: [Tensor3; 3],
    pub mu: f64,
    pub iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIters => "max_iters",
            Status::Diverged => "diverged",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iter: usize,
    /// Relative error against the ground truth, when one was supplied.
    pub re: Option<f64>,
    pub rel_change: f64,
    /// `‖X − bmp(A)‖_F` for BMNN; the splitting residual for HaLRTC.
    pub fit_term: f64,
    /// Penalty used during this iteration.
    pub mu: f64,
    /// Wall time since the start of the run.
    pub seconds: f64,
}

impl IterationRecord {
    /// Equality ignoring wall-clock time.
    pub fn same_numerics(&self, other: &IterationRecord) -> bool {
        let bits = |v: Option<f64>| v.map(f64::to_bits);
        self.iter == other.iter
            && bits(self.re) == bits(other.re)
            && self.rel_change.to_bits() == other.rel_change.to_bits()
            && self.fit_term.to_bits() == other.fit_term.to_bits()
            && self.mu.to_bits() == other.mu.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

impl SolverReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_re(&self) -> Option<f64> {
        self.last().and_then(|r| r.re)
    }

    /// Equality of everything but timings.
    pub fn same_numerics(&self, other: &SolverReport) -> bool {
        self.status == other.status
            && self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.same_numerics(b))
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub x: Tensor3,
    pub factors: BmFactors,
    pub report: SolverReport,
}

impl SolverState {
    /// Uniform(0, 1) factors from the configured seed, `H_i = A_i`, `Y_i = 0`,
    /// and `X` equal to the observations on Ω and `bmp(A)` elsewhere.
    pub fn init(mask: &ObservationMask, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = SeededRng::new(cfg.seed);
        let factors = BmFactors::random_uniform(mask.dims(), cfg.bm_rank, &mut rng);
        let mut x = factors.product();
        mask.project_in_place(&mut x)?;
        let h = [factors.a1.clone(), factors.a2.clone(), factors.a3.clone()];
        let y = [
            Tensor3::zeros(factors.a1.dims()),
            Tensor3::zeros(factors.a2.dims()),
            Tensor3::zeros(factors.a3.dims()),
        ];
        Ok(SolverState {
            x,
            factors,
            h,
            y,
            mu: cfg.mu0,
            iter: 0,
        })
    }

    fn factor(&self, which: usize) -> &Tensor3 {
        self.factors.get(which + 1)
    }

    /// `H_i ← SVT_{α_i/μ}(A_i − Y_i/μ)` on every penalized slice.
    pub fn update_h(&mut self, cfg: &SolverConfig) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::domain(format!(
                "penalty must be positive, got {}",
                self.mu
            )));
        }
        let inv_mu = 1.0 / self.mu;
        let shifted: Vec<Tensor3> = (0..3)
            .map(|w| self.factor(w).add_scaled(&self.y[w], -inv_mu))
            .collect();
        let l = self.factors.bm_rank();
        let jobs: Vec<(usize, usize)> = (0..3).flat_map(|w| (0..l).map(move |t| (w, t))).collect();
        let slices: Vec<Matrix> = jobs
            .par_iter()
            .map(|&(w, t)| {
                let m = shifted[w].slice(FACTOR_SLICES[w], t)?.squeeze();
                svt(&m, cfg.alphas[w] * inv_mu)
            })
            .collect::<Result<_>>()?;
        for (&(w, t), m) in jobs.iter().zip(&slices) {
            self.h[w].set_slice(FACTOR_SLICES[w], t, m)?;
        }
        Ok(())
    }

    /// `H_i + Y_i / μ`, the proximal center of the factor subproblems.
    fn prox_center(&self, which: usize) -> Tensor3 {
        self.h[which].add_scaled(&self.y[which], 1.0 / self.mu)
    }

    /// One or more regularized ALS passes over `A2`, `A3`, `A1`.
    pub fn rals_sweep(&mut self, cfg: &SolverConfig) -> Result<()> {
        if !(cfg.lambda > 0.0) || !(self.mu > 0.0) {
            return Err(Error::domain("RALS needs positive lambda and mu"));
        }
        let ratio = self.mu / cfg.lambda;
        for _ in 0..cfg.rals_sweeps {
            self.factors.a2 = self.solve_a2(ratio)?;
            self.factors.a3 = self.solve_a3(ratio)?;
            self.factors.a1 = self.solve_a1(ratio)?;
        }
        Ok(())
    }

    fn solve_a2(&self, ratio: f64) -> Result<Tensor3> {
        solve_middle_factor(
            &self.factors.a1,
            &self.factors.a3,
            &self.x,
            &self.prox_center(1),
            ratio,
        )
    }

    // bmp(A2ᵀ, A3ᵀ, A1ᵀ) = Xᵀ puts A3ᵀ in the middle slot.
    fn solve_a3(&self, ratio: f64) -> Result<Tensor3> {
        let a3t = solve_middle_factor(
            &self.factors.a2.transpose_cycle(),
            &self.factors.a1.transpose_cycle(),
            &self.x.transpose_cycle(),
            &self.prox_center(2).transpose_cycle(),
            ratio,
        )?;
        Ok(a3t.transpose_cycle_n(2))
    }

    // bmp(A3ᵀ², A1ᵀ², A2ᵀ²) = Xᵀ² puts A1ᵀ² in the middle slot.
    fn solve_a1(&self, ratio: f64) -> Result<Tensor3> {
        let a1tt = solve_middle_factor(
            &self.factors.a3.transpose_cycle_n(2),
            &self.factors.a2.transpose_cycle_n(2),
            &self.x.transpose_cycle_n(2),
            &self.prox_center(0).transpose_cycle_n(2),
            ratio,
        )?;
        Ok(a1tt.transpose_cycle())
    }

    /// `X ← T` on Ω and `bmp(A)` elsewhere. Returns `bmp(A)`.
    pub fn update_x(&mut self, mask: &ObservationMask) -> Result<Tensor3> {
        let product = self.factors.product();
        let mut x = product.clone();
        mask.project_in_place(&mut x)?;
        self.x = x;
        Ok(product)
    }

    /// `Y_i ← Y_i + μ (H_i − A_i)`, then `μ ← min(ρ μ, μ_max)`.
    pub fn update_duals_and_mu(&mut self, cfg: &SolverConfig) {
        let mu = self.mu;
        for w in 0..3 {
            let a = self.factors.get(w + 1);
            let h = &self.h[w];
            for ((yv, hv), av) in self.y[w]
                .as_mut_slice()
                .iter_mut()
                .zip(h.as_slice())
                .zip(a.as_slice())
            {
                *yv += mu * (hv - av);
            }
        }
        self.mu = (cfg.rho * self.mu).min(cfg.mu_max);
    }

    /// `Σ_i α_i Σ_t ‖slice_t(A_i)‖_* + (λ/2)‖X − bmp(A)‖_F²`.
    pub fn objective_value(&self, cfg: &SolverConfig) -> Result<f64> {
        let mut total = 0.0;
        for w in 0..3 {
            if cfg.alphas[w] == 0.0 {
                continue;
            }
            let a = self.factor(w);
            let mut nuc = 0.0;
            for t in 0..self.factors.bm_rank() {
                nuc += nuclear_norm(&a.slice(FACTOR_SLICES[w], t)?.squeeze())?;
            }
            total += cfg.alphas[w] * nuc;
        }
        let fit = self.x.distance(&self.factors.product());
        Ok(total + 0.5 * cfg.lambda * fit * fit)
    }
}

/// Blockwise ridge solve for the middle factor of `bmp(first, ·, third) ≈ target`.
///
/// `first` is `m×ℓ×p`, `third` is `ℓ×n×p`, `target` is `m×n×p` and `prox` is
/// `m×n×ℓ`. Tube `(i, j)` of the result minimizes
/// `½‖H⁽ⁱʲ⁾ a − target(i,j,:)‖² + (ratio/2)‖a − prox(i,j,:)‖²` with
/// `H⁽ⁱʲ⁾ = Mat(first, third)` block `(i, j)`.
pub fn solve_middle_factor(
    first: &Tensor3,
    third: &Tensor3,
    target: &Tensor3,
    prox: &Tensor3,
    ratio: f64,
) -> Result<Tensor3> {
    let mat = mat_blocks(first, third)?;
    let (m, n) = mat.grid();
    let (p, l) = mat.block_shape();
    if target.dims() != [m, n, p] || prox.dims() != [m, n, l] {
        return Err(Error::dim(format!(
            "ridge targets {:?} / {:?} do not match a {m}x{n} grid of {p}x{l} blocks",
            target.dims(),
            prox.dims()
        )));
    }
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::domain(format!(
            "ridge ratio must be positive, got {ratio}"
        )));
    }
    let mut out = Tensor3::zeros([m, n, l]);
    out.as_mut_slice()
        .par_chunks_mut(l)
        .enumerate()
        .try_for_each_init(
            || (vec![0.0; p * l], vec![0.0; l * l]),
            |(block, gram), (idx, a)| {
                let (i, j) = (idx / n, idx % n);
                mat.fill_block(i, j, block);
                let x = target.tube(i, j);
                let v = prox.tube(i, j);
                gram.fill(0.0);
                for s in 0..l {
                    a[s] = ratio * v[s];
                }
                for k in 0..p {
                    let row = &block[k * l..(k + 1) * l];
                    for s in 0..l {
                        a[s] += row[s] * x[k];
                        for t in 0..=s {
                            gram[s * l + t] += row[s] * row[t];
                        }
                    }
                }
                for s in 0..l {
                    gram[s * l + s] += ratio;
                }
                cholesky_solve_in_place(gram, a, l)
            },
        )?;
    Ok(out)
}

/// Runs the full ADMM iteration.
///
/// Stops at `max_iters`, or when the relative error against `ground_truth`
/// drops below `tol`, or (without ground truth) when the relative iterate
/// change `‖Xᵏ⁺¹ − Xᵏ‖_F / max(‖Xᵏ‖_F, 1e-12)` drops below `tol`. A non-finite
/// fit term ends the run with [`Status::Diverged`].
pub fn run(
    mask: &ObservationMask,
    cfg: &SolverConfig,
    ground_truth: Option<&Tensor3>,
) -> Result<Completion> {
    run_observed(mask, cfg, ground_truth, |_, _| {})
}

/// [`run`] with a callback that sees every record and the state it describes.
pub fn run_observed(
    mask: &ObservationMask,
    cfg: &SolverConfig,
    ground_truth: Option<&Tensor3>,
    mut observe: impl FnMut(&IterationRecord, &SolverState),
) -> Result<Completion> {
    cfg.validate()?;
    if let Some(gt) = ground_truth {
        if gt.dims() != mask.dims() {
            return Err(Error::dim(format!(
                "ground truth {:?} vs observations {:?}",
                gt.dims(),
                mask.dims()
            )));
        }
        gt.ensure_finite("ground truth")?;
    }

    let start = Instant::now();
    let mut state = SolverState::init(mask, cfg)?;
    let mut records = Vec::with_capacity(cfg.max_iters.min(10_000));
    let mut status = Status::MaxIters;

    for k in 0..cfg.max_iters {
        let prev_norm = state.x.frobenius_norm();
        let prev_x = state.x.clone();
        let mu = state.mu;

        let step = (|| -> Result<Tensor3> {
            state.update_h(cfg)?;
            state.rals_sweep(cfg)?;
            let product = state.update_x(mask)?;
            state.update_duals_and_mu(cfg);
            Ok(product)
        })();
        state.iter = k + 1;

        // Domain errors mid-run come from non-finite iterates.
        let fit_term = match step {
            Ok(product) => state.x.distance(&product),
            Err(Error::Domain(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        let rel_change = state.x.distance(&prev_x) / prev_norm.max(REL_CHANGE_FLOOR);
        let re = match ground_truth {
            Some(gt) => Some(relative_error(&state.x, gt)?),
            None => None,
        };
        records.push(IterationRecord {
            iter: k + 1,
            re,
            rel_change,
            fit_term,
            mu,
            seconds: start.elapsed().as_secs_f64(),
        });
        observe(&records[k], &state);

        if !fit_term.is_finite() || !state.x.is_finite() {
            status = Status::Diverged;
            break;
        }
        let criterion = re.unwrap_or(rel_change);
        if criterion < cfg.tol {
            status = Status::Converged;
            break;
        }
    }

    Ok(Completion {
        x: state.x,
        factors: state.factors,
        report: SolverReport { records, status },
    })
}
