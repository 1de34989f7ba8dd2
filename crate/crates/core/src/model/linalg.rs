//! Small dense linear-algebra helpers shared by the model and the sampler.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest absolute asymmetry `|m_ij - m_ji|` relative to the largest entry.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = symmetrize(m)
        .cholesky()
        .ok_or_else(|| Error::NotSpd(what.to_string()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// Lower Cholesky factor `L` with `m = L L'`.
pub fn cholesky_lower(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    symmetrize(m)
        .cholesky()
        .map(|c| c.unpack())
        .ok_or_else(|| Error::NotSpd(what.to_string()))
}

/// Smallest eigenvalue of `V Q` for SPD `V` and `Q`.
///
/// `V Q` is similar to `L' Q L` where `V = L L'`, which is symmetric.
pub fn min_eig_product(v: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_lower(v, "V")?;
    let m = l.transpose() * q * &l;
    Ok(min_sym_eigenvalue(&m))
}

/// Condition number of a symmetric positive-definite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}
