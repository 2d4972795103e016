//! Third-order tensor completion with BM-factor slicewise nuclear norm
//! minimization (BMNN).
//!
//! The crate provides the BM-product algebra ([`bm`]), the dense kernels the
//! solver needs ([`linalg`]), the ADMM solver itself ([`solver`]), an HaLRTC
//! baseline ([`halrtc`]), and data handling ([`io`], [`synth`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bm;
pub mod error;
pub mod halrtc;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod solver;
pub mod synth;
pub mod tensor;

pub use bm::{
    bm_outer, bmp, bmp3, bmp_transpose_identity_check, mat_blocks, BlockDiagLS, BmFactors,
};
pub use error::{Error, Result};
pub use halrtc::{fold, halrtc_run, halrtc_run_observed, unfold, HalrtcConfig};
pub use linalg::{ridge_block_solve, svt, thin_svd, Matrix, SvdResult};
pub use rng::SeededRng;
pub use solver::{
    run, run_observed, solve_middle_factor, Completion, IterationRecord, SolverConfig,
    SolverReport, SolverState, Status,
};
pub use synth::{gen_mask, gen_synthetic, MaskSpec, SYNTHETIC_RMS};
pub use tensor::{
    project_observed, relative_error, Dims, ObservationMask, SliceOrientation, SliceRef, Tensor3,
};

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
