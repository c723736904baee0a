//! Thin wrappers over LAPACK-backed routines.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eig, EigVals, Eigh, Inverse, QR, SVD, UPLO};
use num_complex::Complex64;

use crate::error::Result;

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;

pub fn qr(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    Ok(m.qr()?)
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.to_vec())
}

pub fn eigenvalues(m: &CMatrix) -> Result<Array1<C64>> {
    Ok(m.eigvals()?)
}

/// Eigenvalues with unit-norm right eigenvectors stored as columns.
pub fn eigen(m: &CMatrix) -> Result<(Array1<C64>, CMatrix)> {
    Ok(m.eig()?)
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix> {
    Ok(m.inv()?)
}

/// `exp(i scale H)` for Hermitian `H`, from its eigendecomposition.
pub fn hermitian_expi(h: &CMatrix, scale: f64) -> Result<CMatrix> {
    let (w, v) = h.eigh(UPLO::Lower)?;
    let mut vd = v.clone();
    for (mut col, &x) in vd.axis_iter_mut(Axis(1)).zip(w.iter()) {
        let ph = C64::from_polar(1.0, scale * x);
        col.mapv_inplace(|z| z * ph);
    }
    Ok(vd.dot(&adjoint(&v)))
}

pub fn identity(d: usize) -> CMatrix {
    Array2::from_diag_elem(d, C64::new(1.0, 0.0))
}

pub fn adjoint(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

/// Scale row `a` by `exp(log_scale[a])`.
pub fn scale_rows(m: &mut CMatrix, log_scale: &[f64]) {
    for (mut row, &l) in m.axis_iter_mut(Axis(0)).zip(log_scale) {
        let f = l.exp();
        row.mapv_inplace(|z| z * f);
    }
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().iter().sum()
}

/// `ln(sum exp(x))` that tolerates `-inf` entries.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}
