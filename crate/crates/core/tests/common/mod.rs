//! Reference implementations used as test oracles. Nothing here calls into the
//! kernels under test beyond plain tensor storage.

#![allow(dead_code)]

use bmnn_core::{BmFactors, Matrix, SeededRng, Tensor3};
use nalgebra::DMatrix;

pub fn random_tensor(dims: [usize; 3], rng: &mut SeededRng) -> Tensor3 {
    Tensor3::from_fn(dims, |_, _, _| rng.normal())
}

pub fn random_factors(dims: [usize; 3], l: usize, rng: &mut SeededRng) -> BmFactors {
    let [m, n, p] = dims;
    BmFactors::new(
        random_tensor([m, l, p], rng),
        random_tensor([m, n, l], rng),
        random_tensor([l, n, p], rng),
    )
    .unwrap()
}

/// Plain quadruple loop over `(i, j, k, t)`.
pub fn bmp_loops(a1: &Tensor3, a2: &Tensor3, a3: &Tensor3) -> Tensor3 {
    let [m, l, p] = a1.dims();
    let n = a2.dims()[1];
    let mut out = Tensor3::zeros([m, n, p]);
    for i in 0..m {
        for j in 0..n {
            for k in 0..p {
                let mut s = 0.0;
                for t in 0..l {
                    s += a1.get(i, t, k) * a2.get(i, j, t) * a3.get(t, j, k);
                }
                out.set(i, j, k, s);
            }
        }
    }
    out
}

/// Index rotation `(i, j, k) → (j, k, i)` written out entry by entry.
pub fn transpose_loops(x: &Tensor3) -> Tensor3 {
    let [a, b, c] = x.dims();
    let mut out = Tensor3::zeros([b, c, a]);
    for i in 0..a {
        for j in 0..b {
            for k in 0..c {
                out.set(j, k, i, x.get(i, j, k));
            }
        }
    }
    out
}

pub fn rel(a: &Tensor3, b: &Tensor3) -> f64 {
    a.distance(b) / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// One-sided (Hestenes) Jacobi singular values, descending.
pub fn jacobi_singular_values(a: &Matrix) -> Vec<f64> {
    let (rows, cols) = a.shape();
    // work on the orientation with fewer columns
    let (r, c, mut w) = if cols <= rows {
        (rows, cols, a.as_slice().to_vec())
    } else {
        (cols, rows, a.transpose().as_slice().to_vec())
    };
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..r {
                    let (x, y) = (w[i * c + p], w[i * c + q]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..r {
                    let (x, y) = (w[i * c + p], w[i * c + q]);
                    w[i * c + p] = cs * x - sn * y;
                    w[i * c + q] = sn * x + cs * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = (0..c)
        .map(|j| {
            (0..r)
                .map(|i| w[i * c + j] * w[i * c + j])
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn nuclear_norm_oracle(a: &Matrix) -> f64 {
    jacobi_singular_values(a).iter().sum()
}

/// Dense matrix of the linear map `a ↦ tvec(bmp(...))` over the entries of
/// one factor, built column by column from unit tensors through
/// [`bmp_loops`]. `which` selects the varying factor (1, 2 or 3).
pub fn factor_operator(f: &BmFactors, which: usize) -> DMatrix<f64> {
    let var_dims = f.get(which).dims();
    let cols: usize = var_dims.iter().product();
    let out_dims = f.output_dims();
    let rows: usize = out_dims.iter().product();
    let mut op = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        let mut unit = vec![0.0; cols];
        unit[c] = 1.0;
        let e = Tensor3::from_vec(var_dims, unit).unwrap();
        let y = match which {
            1 => bmp_loops(&e, &f.a2, &f.a3),
            2 => bmp_loops(&f.a1, &e, &f.a3),
            _ => bmp_loops(&f.a1, &f.a2, &e),
        };
        for (r, v) in y.as_slice().iter().enumerate() {
            op[(r, c)] = *v;
        }
    }
    op
}

/// Minimizer of `½‖bmp(...) − x‖² + (ratio/2)‖a − v‖²` over one factor, from
/// an SVD least-squares solve of the stacked system `[M; √ratio I] a = [x; √ratio v]`.
pub fn monolithic_ridge(
    f: &BmFactors,
    which: usize,
    x: &Tensor3,
    v: &Tensor3,
    ratio: f64,
) -> Tensor3 {
    let op = factor_operator(f, which);
    let (rows, cols) = op.shape();
    let s = ratio.sqrt();
    let mut stacked = DMatrix::zeros(rows + cols, cols);
    stacked.view_mut((0, 0), (rows, cols)).copy_from(&op);
    for c in 0..cols {
        stacked[(rows + c, c)] = s;
    }
    let mut rhs = DMatrix::zeros(rows + cols, 1);
    for (r, val) in x.as_slice().iter().enumerate() {
        rhs[(r, 0)] = *val;
    }
    for (c, val) in v.as_slice().iter().enumerate() {
        rhs[(rows + c, 0)] = s * val;
    }
    let sol = stacked.svd(true, true).solve(&rhs, 1e-14).unwrap();
    Tensor3::from_vec(f.get(which).dims(), sol.iter().copied().collect()).unwrap()
}
