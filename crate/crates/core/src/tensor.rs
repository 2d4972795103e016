//! Dense third-order tensors.
//!
//! Entry `(i, j, k)` of an `n1 × n2 × n3` tensor lives at offset
//! `((i * n2) + j) * n3 + k`, so the third index is fastest and every tube
//! `x(i, j, :)` is a contiguous run. Tube-wise vectorization is therefore the
//! storage buffer itself.

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub type Dims = [usize; 3];

#[derive(Clone, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor3")
            .field("dims", &self.dims)
            .field("norm", &self.frobenius_norm())
            .finish()
    }
}

pub(crate) fn check_dims(dims: Dims) -> Result<usize> {
    if dims.contains(&0) {
        return Err(Error::dim(format!(
            "tensor dims must be positive, got {dims:?}"
        )));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::dim(format!("tensor dims {dims:?} overflow")))
}

impl Tensor3 {
    /// All-zero tensor. Panics if any dimension is zero.
    pub fn zeros(dims: Dims) -> Self {
        let len = check_dims(dims).expect("invalid tensor dims");
        Tensor3 {
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(dims)?;
        if data.len() != len {
            return Err(Error::dim(format!(
                "buffer of length {} cannot hold a {dims:?} tensor",
                data.len()
            )));
        }
        Ok(Tensor3 { dims, data })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut out = Tensor3::zeros(dims);
        let [n1, n2, n3] = dims;
        let mut idx = 0;
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    out.data[idx] = f(i, j, k);
                    idx += 1;
                }
            }
        }
        out
    }

    pub fn filled(dims: Dims, value: f64) -> Self {
        let mut out = Tensor3::zeros(dims);
        out.data.fill(value);
        out
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let off = self.offset(i, j, k);
        self.data[off] = value;
    }

    /// The mode-3 fiber `x(i, j, :)`.
    #[inline]
    pub fn tube(&self, i: usize, j: usize) -> &[f64] {
        let start = self.offset(i, j, 0);
        &self.data[start..start + self.dims[2]]
    }

    #[inline]
    pub fn tube_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = self.offset(i, j, 0);
        let n3 = self.dims[2];
        &mut self.data[start..start + n3]
    }

    /// Cyclic transpose: the result has dims `(n2, n3, n1)` and entry
    /// `(j, k, i)` equal to `self(i, j, k)`.
    pub fn transpose_cycle(&self) -> Tensor3 {
        let [n1, n2, n3] = self.dims;
        let mut out = Tensor3::zeros([n2, n3, n1]);
        let mut src = 0;
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    out.data[(j * n3 + k) * n1 + i] = self.data[src];
                    src += 1;
                }
            }
        }
        out
    }

    /// `transpose_cycle` applied `times` times (mod 3).
    pub fn transpose_cycle_n(&self, times: usize) -> Tensor3 {
        match times % 3 {
            0 => self.clone(),
            1 => self.transpose_cycle(),
            _ => self.transpose_cycle().transpose_cycle(),
        }
    }

    /// Tube-wise vectorization: blocks `x(i, j, :)` stacked with `i` outer and
    /// `j` inner. Under the storage order this is the buffer itself.
    #[inline]
    pub fn tvec(&self) -> &[f64] {
        &self.data
    }

    /// Inverse of [`Tensor3::tvec`].
    pub fn tfold(v: Vec<f64>, dims: Dims) -> Result<Tensor3> {
        Tensor3::from_vec(dims, v)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{what} contains NaN or infinite entries"
            )))
        }
    }

    pub fn ensure_same_dims(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.dims == other.dims {
            Ok(())
        } else {
            Err(Error::dim(format!(
                "{what}: {:?} vs {:?}",
                self.dims, other.dims
            )))
        }
    }

    /// `self + scale * other`, entrywise. Panics on mismatched dims.
    pub fn add_scaled(&self, other: &Tensor3, scale: f64) -> Tensor3 {
        assert_eq!(self.dims, other.dims, "add_scaled dims");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + scale * b)
            .collect();
        Tensor3 {
            dims: self.dims,
            data,
        }
    }

    pub fn scaled(&self, scale: f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|v| v * scale).collect(),
        }
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims, other.dims, "distance dims");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn slice(&self, orientation: SliceOrientation, index: usize) -> Result<SliceRef<'_>> {
        let bound = self.dims[orientation.fixed_axis()];
        if index >= bound {
            return Err(Error::dim(format!(
                "{orientation:?} slice {index} out of range for dims {:?}",
                self.dims
            )));
        }
        Ok(SliceRef {
            parent: self,
            orientation,
            index,
        })
    }

    /// Overwrite the squeezed slice at `index` with `m`.
    pub fn set_slice(
        &mut self,
        orientation: SliceOrientation,
        index: usize,
        m: &Matrix,
    ) -> Result<()> {
        let [n1, n2, n3] = self.dims;
        let (rows, cols) = orientation.squeezed_shape(self.dims);
        if index >= self.dims[orientation.fixed_axis()] || m.shape() != (rows, cols) {
            return Err(Error::dim(format!(
                "cannot write {:?} matrix into {orientation:?} slice {index} of {:?}",
                m.shape(),
                self.dims
            )));
        }
        match orientation {
            SliceOrientation::Lateral => {
                for i in 0..n1 {
                    for k in 0..n3 {
                        self.data[(i * n2 + index) * n3 + k] = m.get(i, k);
                    }
                }
            }
            SliceOrientation::Frontal => {
                for i in 0..n1 {
                    for j in 0..n2 {
                        self.data[(i * n2 + j) * n3 + index] = m.get(i, j);
                    }
                }
            }
            SliceOrientation::Horizontal => {
                let start = index * n2 * n3;
                self.data[start..start + n2 * n3].copy_from_slice(m.as_slice());
            }
        }
        Ok(())
    }
}

/// Which index a matrix slice holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceOrientation {
    /// `x(:, j, :)`, fixes the second index.
    Lateral,
    /// `x(:, :, k)`, fixes the third index.
    Frontal,
    /// `x(i, :, :)`, fixes the first index.
    Horizontal,
}

impl SliceOrientation {
    pub fn fixed_axis(self) -> usize {
        match self {
            SliceOrientation::Horizontal => 0,
            SliceOrientation::Lateral => 1,
            SliceOrientation::Frontal => 2,
        }
    }

    /// Shape of the squeezed matrix for a tensor of `dims`.
    pub fn squeezed_shape(self, dims: Dims) -> (usize, usize) {
        match self {
            SliceOrientation::Lateral => (dims[0], dims[2]),
            SliceOrientation::Frontal => (dims[0], dims[1]),
            SliceOrientation::Horizontal => (dims[1], dims[2]),
        }
    }
}

/// A borrowed matrix slice of a [`Tensor3`].
#[derive(Debug, Clone, Copy)]
pub struct SliceRef<'a> {
    parent: &'a Tensor3,
    orientation: SliceOrientation,
    index: usize,
}

impl<'a> SliceRef<'a> {
    pub fn parent(&self) -> &'a Tensor3 {
        self.parent
    }

    pub fn orientation(&self) -> SliceOrientation {
        self.orientation
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Shape of the slice as a third-order tensor (the fixed axis has extent 1).
    pub fn tensor_dims(&self) -> Dims {
        let mut d = self.parent.dims;
        d[self.orientation.fixed_axis()] = 1;
        d
    }

    /// Squeezed matrix shape.
    pub fn shape(&self) -> (usize, usize) {
        self.orientation.squeezed_shape(self.parent.dims)
    }

    /// Entry of the squeezed matrix.
    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.orientation {
            SliceOrientation::Lateral => self.parent.get(r, self.index, c),
            SliceOrientation::Frontal => self.parent.get(r, c, self.index),
            SliceOrientation::Horizontal => self.parent.get(self.index, r, c),
        }
    }

    pub fn squeeze(&self) -> Matrix {
        let (rows, cols) = self.shape();
        Matrix::from_fn(rows, cols, |r, c| self.get(r, c))
    }
}

/// Observed index set Ω together with the observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMask {
    dims: Dims,
    flags: Vec<bool>,
    /// Observed values in storage order of the flagged entries.
    values: Vec<f64>,
}

impl ObservationMask {
    pub fn new(dims: Dims, flags: Vec<bool>, values: Vec<f64>) -> Result<Self> {
        let len = check_dims(dims)?;
        if flags.len() != len {
            return Err(Error::dim(format!(
                "mask has {} flags for a {dims:?} tensor",
                flags.len()
            )));
        }
        let count = flags.iter().filter(|&&f| f).count();
        if values.len() != count {
            return Err(Error::dim(format!(
                "mask has {count} observed entries but {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(
                "observed values contain NaN or infinite entries",
            ));
        }
        Ok(ObservationMask {
            dims,
            flags,
            values,
        })
    }

    /// Observe the entries of `t` where `flags` is set.
    pub fn from_tensor(t: &Tensor3, flags: Vec<bool>) -> Result<Self> {
        if flags.len() != t.len() {
            return Err(Error::dim(format!(
                "mask has {} flags for a {:?} tensor",
                flags.len(),
                t.dims()
            )));
        }
        let values = flags
            .iter()
            .zip(t.as_slice())
            .filter_map(|(&f, &v)| f.then_some(v))
            .collect();
        ObservationMask::new(t.dims(), flags, values)
    }

    pub fn full(t: &Tensor3) -> Result<Self> {
        ObservationMask::from_tensor(t, vec![true; t.len()])
    }

    pub fn empty(dims: Dims) -> Result<Self> {
        let len = check_dims(dims)?;
        ObservationMask::new(dims, vec![false; len], Vec::new())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn observed_count(&self) -> usize {
        self.values.len()
    }

    pub fn sample_rate(&self) -> f64 {
        self.values.len() as f64 / self.flags.len() as f64
    }

    /// `(offset, value)` for every observed entry, in storage order.
    pub fn observed(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(off, &f)| f.then_some(off))
            .zip(self.values.iter().copied())
    }

    /// Tensor holding the observed values and zeros elsewhere.
    pub fn observed_tensor(&self) -> Tensor3 {
        let mut out = Tensor3::zeros(self.dims);
        for (off, v) in self.observed() {
            out.data[off] = v;
        }
        out
    }

    /// Mean of the observed values, 0 when nothing is observed.
    pub fn observed_mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }

    /// Overwrite the observed entries of `x` in place.
    pub fn project_in_place(&self, x: &mut Tensor3) -> Result<()> {
        if x.dims != self.dims {
            return Err(Error::dim(format!(
                "mask dims {:?} vs tensor dims {:?}",
                self.dims, x.dims
            )));
        }
        for (off, v) in self.observed() {
            x.data[off] = v;
        }
        Ok(())
    }
}

/// `T` on Ω, `x` on the complement.
pub fn project_observed(x: &Tensor3, mask: &ObservationMask) -> Result<Tensor3> {
    let mut out = x.clone();
    mask.project_in_place(&mut out)?;
    Ok(out)
}

/// `‖xhat − xgt‖_F / ‖xgt‖_F`.
pub fn relative_error(xhat: &Tensor3, xgt: &Tensor3) -> Result<f64> {
    xhat.ensure_same_dims(xgt, "relative_error")?;
    let denom = xgt.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::domain("relative error against a zero ground truth"));
    }
    Ok(xhat.distance(xgt) / denom)
}
