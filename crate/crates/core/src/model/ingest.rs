//! Reductions of raw data sets to the canonical model.

use nalgebra::{DMatrix, DVector};

use super::{linalg, CanonicalModel};
use crate::error::{Error, Result};

/// k-sample reduction: group means, `V_i = V_{i,0}/n_i`, the trace-weighted
/// within-group scatter `S`, and `n = sum_i (n_i - 1) p`.
pub fn canonicalize_ksample(samples: &[Vec<DVector<f64>>], v0: &[DMatrix<f64>]) -> Result<CanonicalModel> {
    if samples.len() != v0.len() {
        return Err(Error::Dimension(format!(
            "{} groups but {} covariance matrices",
            samples.len(),
            v0.len()
        )));
    }
    let p = samples
        .iter()
        .flat_map(|g| g.first())
        .map(|x| x.len())
        .next()
        .ok_or_else(|| Error::Dimension("no observations".into()))?;

    let mut x = Vec::with_capacity(samples.len());
    let mut v = Vec::with_capacity(samples.len());
    let mut s = 0.0;
    let mut n = 0usize;
    for (i, (group, vi0)) in samples.iter().zip(v0).enumerate() {
        let ni = group.len();
        if ni < 2 {
            return Err(Error::precondition(format!(
                "group {} has {ni} observation(s); at least 2 are needed",
                i + 1
            )));
        }
        if vi0.shape() != (p, p) {
            return Err(Error::Dimension(format!("V_{},0 is not {p}x{p}", i + 1)));
        }
        if group.iter().any(|obs| obs.len() != p) {
            return Err(Error::Dimension(format!("group {} has observations not of length {p}", i + 1)));
        }
        let vi0_inv = linalg::spd_inverse(vi0, &format!("V_{},0", i + 1))?;
        let mut mean = DVector::<f64>::zeros(p);
        for obs in group {
            mean += obs;
        }
        mean /= ni as f64;
        for obs in group {
            let d = obs - &mean;
            s += d.dot(&(&vi0_inv * &d));
        }
        x.push(mean);
        v.push(vi0 / ni as f64);
        n += (ni - 1) * p;
    }
    Ok(CanonicalModel::new(x, v, s, n))
}

/// k-regression reduction: least-squares coefficients, `V_i = (Z_i'Z_i)^{-1}`,
/// pooled residual sum of squares `S` and `n = sum_i (n_i - p)`.
pub fn canonicalize_regression(ys: &[DVector<f64>], zs: &[DMatrix<f64>]) -> Result<CanonicalModel> {
    if ys.len() != zs.len() {
        return Err(Error::Dimension(format!("{} responses but {} designs", ys.len(), zs.len())));
    }
    let p = zs
        .first()
        .map(|z| z.ncols())
        .ok_or_else(|| Error::Dimension("no groups".into()))?;
    let mut x = Vec::with_capacity(ys.len());
    let mut v = Vec::with_capacity(ys.len());
    let mut s = 0.0;
    let mut n = 0usize;
    for (i, (y, z)) in ys.iter().zip(zs).enumerate() {
        if z.ncols() != p {
            return Err(Error::Dimension(format!("Z_{} has {} columns instead of {p}", i + 1, z.ncols())));
        }
        if z.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "Z_{} has {} rows but y_{} has {} entries",
                i + 1,
                z.nrows(),
                i + 1,
                y.len()
            )));
        }
        if z.nrows() < p || !full_column_rank(z) {
            return Err(Error::RankDeficient(i + 1));
        }
        let ztz = z.transpose() * z;
        let chol = linalg::symmetrize(&ztz).cholesky().ok_or(Error::RankDeficient(i + 1))?;
        let beta = chol.solve(&(z.transpose() * y));
        let resid = y - z * &beta;
        s += resid.norm_squared();
        n += z.nrows() - p;
        v.push(linalg::symmetrize(&chol.inverse()));
        x.push(beta);
    }
    if n == 0 {
        return Err(Error::precondition("no residual degrees of freedom: sum of (n_i - p) is 0"));
    }
    Ok(CanonicalModel::new(x, v, s, n))
}

fn full_column_rank(z: &DMatrix<f64>) -> bool {
    let sv = z.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min > max * 1e-12 * (z.nrows().max(z.ncols()) as f64)
}
