//! BM-product algebra for third-order tensors.
//!
//! For a conformable triplet `A (m×ℓ×p)`, `B (m×n×ℓ)`, `C (ℓ×n×p)` the
//! BM-product is the `m×n×p` tensor with entries
//! `Σ_t A(i,t,k) · B(i,j,t) · C(t,j,k)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::SeededRng;
use crate::tensor::{Dims, SliceOrientation, SliceRef, Tensor3};

/// Relative Frobenius tolerance used by the transpose self-test.
pub const TRANSPOSE_IDENTITY_TOL: f64 = 1e-12;

/// A conformable factor triplet `(A1, A2, A3)` of BM-rank `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmFactors {
    pub a1: Tensor3,
    pub a2: Tensor3,
    pub a3: Tensor3,
    bm_rank: usize,
}

/// Returns `(m, n, p, ℓ)` for a conformable triplet.
fn conformable_dims(
    a1: &Tensor3,
    a2: &Tensor3,
    a3: &Tensor3,
) -> Result<(usize, usize, usize, usize)> {
    let [m, l, p] = a1.dims();
    let [m2, n, l2] = a2.dims();
    let [l3, n3, p3] = a3.dims();
    if m != m2 || l != l2 || l != l3 || n != n3 || p != p3 {
        return Err(Error::dim(format!(
            "non-conformable BM triplet {:?}, {:?}, {:?}",
            a1.dims(),
            a2.dims(),
            a3.dims()
        )));
    }
    Ok((m, n, p, l))
}

impl BmFactors {
    pub fn new(a1: Tensor3, a2: Tensor3, a3: Tensor3) -> Result<Self> {
        let (_, _, _, bm_rank) = conformable_dims(&a1, &a2, &a3)?;
        Ok(BmFactors {
            a1,
            a2,
            a3,
            bm_rank,
        })
    }

    pub fn zeros(dims: Dims, bm_rank: usize) -> Self {
        let [n1, n2, n3] = dims;
        BmFactors {
            a1: Tensor3::zeros([n1, bm_rank, n3]),
            a2: Tensor3::zeros([n1, n2, bm_rank]),
            a3: Tensor3::zeros([bm_rank, n2, n3]),
            bm_rank,
        }
    }

    /// Factors with i.i.d. uniform(0, 1) entries, drawn A1, A2, A3 in order.
    pub fn random_uniform(dims: Dims, bm_rank: usize, rng: &mut SeededRng) -> Self {
        let mut f = BmFactors::zeros(dims, bm_rank);
        for a in [&mut f.a1, &mut f.a2, &mut f.a3] {
            for v in a.as_mut_slice() {
                *v = rng.uniform_open();
            }
        }
        f
    }

    pub fn bm_rank(&self) -> usize {
        self.bm_rank
    }

    /// Dims `(n1, n2, n3)` of the product.
    pub fn output_dims(&self) -> Dims {
        [self.a1.dims()[0], self.a2.dims()[1], self.a3.dims()[2]]
    }

    pub fn get(&self, which: usize) -> &Tensor3 {
        match which {
            1 => &self.a1,
            2 => &self.a2,
            3 => &self.a3,
            _ => panic!("factor index {which} out of 1..=3"),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a1.is_finite() && self.a2.is_finite() && self.a3.is_finite()
    }

    pub fn product(&self) -> Tensor3 {
        bmp_unchecked(&self.a1, &self.a2, &self.a3)
    }
}

/// BM-product of a factor triplet.
pub fn bmp(f: &BmFactors) -> Tensor3 {
    f.product()
}

/// BM-product of three loose tensors, checking conformability.
pub fn bmp3(a1: &Tensor3, a2: &Tensor3, a3: &Tensor3) -> Result<Tensor3> {
    conformable_dims(a1, a2, a3)?;
    Ok(bmp_unchecked(a1, a2, a3))
}

fn bmp_unchecked(a1: &Tensor3, a2: &Tensor3, a3: &Tensor3) -> Tensor3 {
    let [m, l, p] = a1.dims();
    let n = a2.dims()[1];
    let mut out = Tensor3::zeros([m, n, p]);
    let (a1s, a2s, a3s) = (a1.as_slice(), a2.as_slice(), a3.as_slice());
    out.as_mut_slice()
        .par_chunks_mut(n * p)
        .enumerate()
        .for_each(|(i, plane)| {
            for j in 0..n {
                let tube = &mut plane[j * p..(j + 1) * p];
                let a2_tube = &a2s[(i * n + j) * l..(i * n + j + 1) * l];
                for (t, &b) in a2_tube.iter().enumerate() {
                    let a1_row = &a1s[(i * l + t) * p..(i * l + t + 1) * p];
                    let a3_row = &a3s[(t * n + j) * p..(t * n + j + 1) * p];
                    for k in 0..p {
                        tube[k] += a1_row[k] * b * a3_row[k];
                    }
                }
            }
        });
    out
}

/// BM outer product of a lateral slice (`m×1×p`), a frontal slice (`m×n×1`)
/// and a horizontal slice (`1×n×p`).
pub fn bm_outer(
    lateral: SliceRef<'_>,
    frontal: SliceRef<'_>,
    horizontal: SliceRef<'_>,
) -> Result<Tensor3> {
    if lateral.orientation() != SliceOrientation::Lateral
        || frontal.orientation() != SliceOrientation::Frontal
        || horizontal.orientation() != SliceOrientation::Horizontal
    {
        return Err(Error::dim(
            "bm_outer expects lateral, frontal and horizontal slices",
        ));
    }
    let (m, p) = lateral.shape();
    let (m2, n) = frontal.shape();
    let (n3, p3) = horizontal.shape();
    if m != m2 || n != n3 || p != p3 {
        return Err(Error::dim(format!(
            "non-conformable slices {m}x1x{p}, {m2}x{n}x1, 1x{n3}x{p3}"
        )));
    }
    Ok(Tensor3::from_fn([m, n, p], |i, j, k| {
        lateral.get(i, k) * frontal.get(i, j) * horizontal.get(j, k)
    }))
}

/// Whether `bmp(A1, A2, A3)ᵀ` equals `bmp(A2ᵀ, A3ᵀ, A1ᵀ)` to relative
/// Frobenius distance [`TRANSPOSE_IDENTITY_TOL`].
pub fn bmp_transpose_identity_check(f: &BmFactors) -> bool {
    transpose_identity_between(f, f)
}

/// Compares the transposed product of `lhs` with the product of the
/// transposed factors of `rhs`.
pub(crate) fn transpose_identity_between(lhs: &BmFactors, rhs: &BmFactors) -> bool {
    let left = lhs.product().transpose_cycle();
    let Ok(right) = bmp3(
        &rhs.a2.transpose_cycle(),
        &rhs.a3.transpose_cycle(),
        &rhs.a1.transpose_cycle(),
    ) else {
        return false;
    };
    if left.dims() != right.dims() {
        return false;
    }
    let dist = left.distance(&right);
    let scale = left.frobenius_norm().max(right.frobenius_norm());
    if scale == 0.0 {
        return dist == 0.0;
    }
    dist <= TRANSPOSE_IDENTITY_TOL * scale
}

/// Block-diagonal operator `Mat(A, B)` for `A (m×ℓ×p)` and `B (ℓ×n×p)`.
///
/// Block `(i, j)` is the `p × ℓ` matrix with entries `A(i,t,k) · B(t,j,k)`.
/// Blocks are generated on demand and never assembled into one matrix.
#[derive(Debug, Clone, Copy)]
pub struct BlockDiagLS<'a> {
    a: &'a Tensor3,
    b: &'a Tensor3,
}

pub fn mat_blocks<'a>(a: &'a Tensor3, b: &'a Tensor3) -> Result<BlockDiagLS<'a>> {
    let [_, l, p] = a.dims();
    let [l2, _, p2] = b.dims();
    if l != l2 || p != p2 {
        return Err(Error::dim(format!(
            "Mat operands {:?} and {:?} do not share ℓ and p",
            a.dims(),
            b.dims()
        )));
    }
    Ok(BlockDiagLS { a, b })
}

impl<'a> BlockDiagLS<'a> {
    /// `(m, n)`: block rows and block columns of the index grid.
    pub fn grid(&self) -> (usize, usize) {
        (self.a.dims()[0], self.b.dims()[1])
    }

    pub fn block_count(&self) -> usize {
        let (m, n) = self.grid();
        m * n
    }

    /// `(p, ℓ)`.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.a.dims()[2], self.a.dims()[1])
    }

    /// Fill `buf` (row-major `p × ℓ`) with block `(i, j)`.
    #[inline]
    pub fn fill_block(&self, i: usize, j: usize, buf: &mut [f64]) {
        let (p, l) = self.block_shape();
        debug_assert_eq!(buf.len(), p * l);
        for t in 0..l {
            let a_row = &self.a.as_slice()[(i * l + t) * p..(i * l + t + 1) * p];
            let b_row = self.b.tube(t, j);
            for k in 0..p {
                buf[k * l + t] = a_row[k] * b_row[k];
            }
        }
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix {
        let (p, l) = self.block_shape();
        let mut buf = vec![0.0; p * l];
        self.fill_block(i, j, &mut buf);
        Matrix::from_vec(p, l, buf).expect("block shape")
    }

    /// Apply the block-diagonal operator to a vector of `m·n` blocks of length
    /// `ℓ`, producing `m·n` blocks of length `p`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = self.grid();
        let (p, l) = self.block_shape();
        if x.len() != m * n * l {
            return Err(Error::dim(format!(
                "Mat operator expects input of length {}, got {}",
                m * n * l,
                x.len()
            )));
        }
        let mut out = vec![0.0; m * n * p];
        out.par_chunks_mut(p)
            .zip(x.par_chunks(l))
            .enumerate()
            .for_each_init(
                || vec![0.0; p * l],
                |buf, (idx, (out_block, x_block))| {
                    self.fill_block(idx / n, idx % n, buf);
                    for k in 0..p {
                        out_block[k] = buf[k * l..(k + 1) * l]
                            .iter()
                            .zip(x_block)
                            .map(|(h, v)| h * v)
                            .sum();
                    }
                },
            );
        Ok(out)
    }
}
