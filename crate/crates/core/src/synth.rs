//! Seeded observation masks and synthetic low-BM-rank instances.

use serde::{Deserialize, Serialize};

use crate::bm::BmFactors;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{check_dims, Dims, ObservationMask, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub sample_rate: f64,
    pub seed: u64,
    pub dims: Dims,
}

impl MaskSpec {
    /// `round(sample_rate · n1·n2·n3)`.
    pub fn observed_count(&self) -> Result<usize> {
        if !(0.0..=1.0).contains(&self.sample_rate) {
            return Err(Error::domain(format!(
                "sample rate must lie in [0, 1], got {}",
                self.sample_rate
            )));
        }
        let n = check_dims(self.dims)?;
        Ok(((self.sample_rate * n as f64).round() as usize).min(n))
    }
}

/// Observes exactly `round(rate · N)` entries of `t`, chosen uniformly without
/// replacement by a seeded partial shuffle of the offsets.
pub fn gen_mask(spec: &MaskSpec, t: &Tensor3) -> Result<ObservationMask> {
    if spec.dims != t.dims() {
        return Err(Error::dim(format!(
            "mask spec dims {:?} vs tensor dims {:?}",
            spec.dims,
            t.dims()
        )));
    }
    let count = spec.observed_count()?;
    let mut rng = SeededRng::new(spec.seed);
    let mut flags = vec![false; t.len()];
    for off in rng.sample_indices(t.len(), count) {
        flags[off] = true;
    }
    ObservationMask::from_tensor(t, flags)
}

/// Entry RMS of every generated ground truth.
pub const SYNTHETIC_RMS: f64 = 1.5;

/// Sum of `rank` outer products `u vᵀ` with uniform(0, 1) entries. All `u`
/// are drawn before the `v`.
fn low_rank(rows: usize, cols: usize, rank: usize, rng: &mut SeededRng) -> Vec<f64> {
    let us: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..rows).map(|_| rng.uniform()).collect())
        .collect();
    let vs: Vec<Vec<f64>> = (0..rank)
        .map(|_| (0..cols).map(|_| rng.uniform()).collect())
        .collect();
    let mut out = vec![0.0; rows * cols];
    for (u, v) in us.iter().zip(&vs) {
        for r in 0..rows {
            for c in 0..cols {
                out[r * cols + c] += u[r] * v[c];
            }
        }
    }
    out
}

/// Ground truth `X = bmp(A1, A2, A3)` where every lateral slice of `A1` and
/// every horizontal slice of `A3` has rank at most `slice_rank`, and `A2` is
/// unconstrained.
///
/// Slice factors and `A2` are drawn from uniform(0, 1) in that order (`A1`,
/// `A2`, `A3`); `A2` is then rescaled so that `X` has entry RMS
/// [`SYNTHETIC_RMS`]. The returned factors reproduce `X` exactly.
pub fn gen_synthetic(
    dims: Dims,
    bm_rank: usize,
    slice_rank: usize,
    seed: u64,
) -> Result<(Tensor3, BmFactors)> {
    check_dims(dims)?;
    let [n1, n2, n3] = dims;
    if bm_rank == 0 {
        return Err(Error::config("BM-rank must be at least 1"));
    }
    let max_rank = n1.min(n3).min(n2);
    if slice_rank == 0 || slice_rank > max_rank {
        return Err(Error::config(format!(
            "slice rank {slice_rank} infeasible for dims {dims:?} (must be in 1..={max_rank})"
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut f = BmFactors::zeros(dims, bm_rank);
    for t in 0..bm_rank {
        // lateral slice t of A1 is n1 × n3
        let m = low_rank(n1, n3, slice_rank, &mut rng);
        for i in 0..n1 {
            for k in 0..n3 {
                f.a1.set(i, t, k, m[i * n3 + k]);
            }
        }
    }
    for v in f.a2.as_mut_slice() {
        *v = rng.uniform();
    }
    for t in 0..bm_rank {
        // horizontal slice t of A3 is n2 × n3 and contiguous
        let m = low_rank(n2, n3, slice_rank, &mut rng);
        let start = t * n2 * n3;
        f.a3.as_mut_slice()[start..start + n2 * n3].copy_from_slice(&m);
    }
    let raw = f.product();
    let rms = raw.frobenius_norm() / (raw.len() as f64).sqrt();
    if !(rms > 0.0) {
        return Err(Error::domain("synthetic draw produced a zero tensor"));
    }
    f.a2 = f.a2.scaled(SYNTHETIC_RMS / rms);
    Ok((f.product(), f))
}
