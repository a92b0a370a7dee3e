//! Dense complex Hermitian helpers shared by the solver and its callers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::ConicError;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative eigenvalue floor below which a matrix is not treated as PSD.
pub const CLAMP_EPS: f64 = 1e-8;

/// `Re Tr(A B)` without forming the product.
pub fn re_trace_prod(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let n = a.nrows();
    let m = a.ncols();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..m {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// `(A + A^H) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    let mut out = a.clone();
    hermitize(&mut out);
    out
}

pub(crate) fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// Largest entry-wise deviation from Hermitian symmetry, relative to the
/// largest entry magnitude.
pub fn hermitian_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut scale = 0.0f64;
    let mut defect = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(a[(i, j)].norm());
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    defect / (1.0 + scale)
}

pub fn is_hermitian(a: &CMat, tol: f64) -> bool {
    hermitian_defect(a) <= tol
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Columns of the returned matrix are the eigenvectors.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, descending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Returns `B = U diag(sqrt(max(λ, 0)))` with `B B^H = X`, columns ordered by
/// descending eigenvalue.
///
/// Eigenvalues slightly below zero (within `CLAMP_EPS * ‖X‖₂`) are clamped;
/// anything more negative is rejected.
pub fn psd_sqrt_columns(x: &CMat) -> Result<CMat, ConicError> {
    if x.nrows() != x.ncols() {
        return Err(ConicError::DimensionMismatch {
            context: "psd factor input".into(),
            expected: x.nrows(),
            found: x.ncols(),
        });
    }
    let defect = hermitian_defect(x);
    if defect > 1e-9 {
        return Err(ConicError::NotHermitian {
            context: "psd factor input".into(),
            defect,
        });
    }
    let (values, vectors) = hermitian_eigen(x);
    let spectral = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = -CLAMP_EPS * spectral;
    if let Some(&min) = values.last() {
        if min < floor {
            return Err(ConicError::NotPsd {
                min_eigenvalue: min,
                floor,
            });
        }
    }
    let mut b = vectors;
    for (j, &lam) in values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        b.column_mut(j).scale_mut(s);
    }
    Ok(b)
}

/// Factor `X = Q^T Q^*`.
///
/// `Q = conj(A)` where `A^H A = X`; row `t` of `Q` carries the `t`-th largest
/// eigen-component, so column `n` of `Q` is the vector `q_n` attached to the
/// `n`-th coordinate of the lifted variable.
pub fn psd_factor(x: &CMat) -> Result<CMat, ConicError> {
    Ok(psd_sqrt_columns(x)?.transpose())
}

/// Ratio of the two largest eigenvalues, `λ₂/λ₁`; 0 for 1×1 or zero input.
pub fn dominant_rank_ratio(x: &CMat) -> Result<f64, ConicError> {
    let defect = hermitian_defect(x);
    if defect > 1e-9 {
        return Err(ConicError::NotHermitian {
            context: "rank ratio input".into(),
            defect,
        });
    }
    let values = hermitian_eigenvalues(x);
    if values.len() < 2 || values[0] <= 0.0 {
        return Ok(0.0);
    }
    Ok((values[1] / values[0]).max(0.0))
}

/// Largest `α` keeping `X + α dX` positive semidefinite, given `X ≻ 0`.
/// Returns `f64::INFINITY` when every step length is admissible and `None`
/// when `X` is not numerically positive definite.
pub(crate) fn max_psd_step(x: &CMat, dx: &CMat) -> Option<f64> {
    let n = x.nrows();
    if n == 0 {
        return Some(f64::INFINITY);
    }
    let chol = nalgebra::Cholesky::new(x.clone())?;
    let l = chol.l();
    // W = L^{-1} dX L^{-H}
    let left = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&left.adjoint())?;
    let values = hermitian_eigenvalues(&w);
    let min = values.last().copied().unwrap_or(0.0);
    if min < 0.0 {
        Some(-1.0 / min)
    } else {
        Some(f64::INFINITY)
    }
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub(crate) fn hpd_inverse(z: &CMat) -> Option<CMat> {
    let chol = nalgebra::Cholesky::new(z.clone())?;
    let mut inv = chol.inverse();
    hermitize(&mut inv);
    Some(inv)
}
