//! Canonical model, loss specification and pooled statistics.
//!
//! Everything downstream works on the canonical form: k independent
//! `X_i ~ N_p(mu_i, sigma^2 V_i)` and an independent `S ~ sigma^2 chi^2_n`.
//! [`pooled_summary`] reduces a model and a loss to the GLS pooled mean
//! `nu_hat` and the two shrinkage statistics `F` (spread around `nu_hat`)
//! and `G` (size of `nu_hat`).

mod ingest;
pub mod io;
pub mod linalg;
mod matrix_spec;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{canonicalize_ksample, canonicalize_regression};
pub use matrix_spec::MatrixSpec;

/// Numerical tolerances used by validation and identity checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative asymmetry allowed in `V_i` and `Q_i`.
    pub symmetry: f64,
    /// Relative tolerance of the orthogonality and decomposition identities.
    pub identity: f64,
    /// Largest accepted condition number of `sum_i W_i`.
    pub max_condition: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-10,
            identity: 1e-8,
            max_condition: 1e12,
        }
    }
}

/// Observed sufficient statistics `(X_1..X_k, V_1..V_k, S, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalModel {
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DMatrix<f64>>,
    pub s: f64,
    pub n: usize,
}

impl CanonicalModel {
    pub fn new(x: Vec<DVector<f64>>, v: Vec<DMatrix<f64>>, s: f64, n: usize) -> Self {
        Self { x, v, s, n }
    }

    pub fn k(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.x.first().map_or(0, |x| x.len())
    }
}

/// Ground truth `(mu_1..mu_k, sigma^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParameters {
    pub mu: Vec<DVector<f64>>,
    pub sigma2: f64,
}

impl TrueParameters {
    pub fn new(mu: Vec<DVector<f64>>, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::domain("sigma2 must be positive"));
        }
        let p = mu.first().map_or(0, |m| m.len());
        if mu.iter().any(|m| m.len() != p) {
            return Err(Error::Dimension("mean vectors differ in length".into()));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn p(&self) -> usize {
        self.mu.first().map_or(0, |m| m.len())
    }
}

/// Loss weight matrices `Q_1..Q_k` and the derived `q = min_i eig_min(V_i Q_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec {
    pub q: Vec<DMatrix<f64>>,
    pub qmin: f64,
}

impl LossSpec {
    /// Builds a loss from explicit `Q_i`; `v` supplies the `V_i` needed for `qmin`.
    pub fn new(q: Vec<DMatrix<f64>>, v: &[DMatrix<f64>]) -> Result<Self> {
        if q.len() != v.len() {
            return Err(Error::Dimension(format!(
                "{} loss matrices for {} populations",
                q.len(),
                v.len()
            )));
        }
        let mut qmin = f64::INFINITY;
        for (i, (qi, vi)) in q.iter().zip(v).enumerate() {
            if qi.shape() != vi.shape() {
                return Err(Error::Dimension(format!("Q_{} and V_{} differ in shape", i + 1, i + 1)));
            }
            linalg::cholesky_lower(qi, &format!("Q_{}", i + 1))?;
            let e = linalg::min_eig_product(vi, qi).map_err(|_| Error::NotSpd(format!("V_{}", i + 1)))?;
            qmin = qmin.min(e);
        }
        Ok(Self { q, qmin })
    }

    /// `Q_i = V_i^{-1}`: the loss under which the F test is exact and `qmin = 1`.
    pub fn inverse_of(v: &[DMatrix<f64>]) -> Result<Self> {
        let q = v
            .iter()
            .enumerate()
            .map(|(i, vi)| linalg::spd_inverse(vi, &format!("V_{}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(q, v)
    }

    pub fn identity(v: &[DMatrix<f64>]) -> Result<Self> {
        let q = v.iter().map(|vi| DMatrix::identity(vi.nrows(), vi.ncols())).collect();
        Self::new(q, v)
    }

    /// True when every `Q_i V_i` is the identity within `tol` (max-abs entry).
    pub fn is_inverse_of(&self, v: &[DMatrix<f64>], tol: f64) -> bool {
        self.q.len() == v.len()
            && self.q.iter().zip(v).all(|(q, vi)| {
                q.shape() == vi.shape() && {
                    let prod = q * vi;
                    let eye = DMatrix::<f64>::identity(prod.nrows(), prod.ncols());
                    (prod - eye).amax() <= tol
                }
            })
    }
}

/// Second-stage prior constants and the preliminary-test level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Lower bound `L` on the precision in the double-shrinkage hierarchical prior.
    pub big_l: f64,
    pub alpha: f64,
    /// Use positive-part James-Stein factors (off: the plain forms are used for the risk table).
    pub js_positive_part: bool,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            a: 0.1,
            b: 0.1,
            c: 0.1,
            big_l: 0.0,
            alpha: 0.05,
            js_positive_part: false,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::domain(format!("alpha = {} is not in (0, 1)", self.alpha)));
        }
        if !(self.big_l >= 0.0 && self.big_l.is_finite()) {
            return Err(Error::domain(format!("L = {} must be nonnegative", self.big_l)));
        }
        if ![self.a, self.b, self.c].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("a, b, c must be finite"));
        }
        Ok(())
    }
}

/// One failed model invariant; `index` is the 1-based population when applicable.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, index: Option<usize>, message: String) {
        self.violations.push(Violation { index, message });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(|v| v.message.clone()).collect();
            Err(Error::InvalidModel(msgs.join("; ")))
        }
    }
}

pub fn validate_model(m: &CanonicalModel, ls: &LossSpec) -> ValidationReport {
    validate_model_with(m, ls, &Tolerances::default())
}

pub fn validate_model_with(m: &CanonicalModel, ls: &LossSpec, tol: &Tolerances) -> ValidationReport {
    let mut r = ValidationReport::default();
    let k = m.k();
    let p = m.p();
    if k < 2 {
        r.push(None, format!("k = {k} but at least 2 populations are required"));
    }
    if p < 1 {
        r.push(None, "dimension p must be at least 1".into());
    }
    if !(m.s > 0.0 && m.s.is_finite()) {
        r.push(None, "S must be positive".into());
    }
    if m.n < 1 {
        r.push(None, "n must be at least 1".into());
    }
    if m.v.len() != k {
        r.push(None, format!("{} covariance matrices for {} populations", m.v.len(), k));
    }
    if ls.q.len() != k {
        r.push(None, format!("{} loss matrices for {} populations", ls.q.len(), k));
    }
    for (i, x) in m.x.iter().enumerate() {
        if x.len() != p {
            r.push(Some(i + 1), format!("X_{} has length {} instead of {}", i + 1, x.len(), p));
        } else if x.iter().any(|v| !v.is_finite()) {
            r.push(Some(i + 1), format!("X_{} has non-finite entries", i + 1));
        }
    }
    let mut check_spd = |name: &str, i: usize, mat: &DMatrix<f64>| {
        if mat.nrows() != p || mat.ncols() != p {
            r.push(Some(i + 1), format!("{name}_{} is {}x{} instead of {p}x{p}", i + 1, mat.nrows(), mat.ncols()));
            return;
        }
        if mat.iter().any(|v| !v.is_finite()) {
            r.push(Some(i + 1), format!("{name}_{} has non-finite entries", i + 1));
            return;
        }
        if linalg::asymmetry(mat) > tol.symmetry {
            r.push(Some(i + 1), format!("{name}_{} not symmetric", i + 1));
        }
        if !(linalg::min_sym_eigenvalue(mat) > 0.0) {
            r.push(Some(i + 1), format!("{name}_{} not positive definite", i + 1));
        }
    };
    for (i, v) in m.v.iter().enumerate() {
        check_spd("V", i, v);
    }
    for (i, q) in ls.q.iter().enumerate() {
        check_spd("Q", i, q);
    }
    if !(ls.qmin > 0.0) {
        r.push(None, format!("q = {} must be positive", ls.qmin));
    }
    r
}

/// Everything in the pooled summary that depends only on `(V_i, Q_i)`.
///
/// Simulations hold `V` and `Q` fixed across replicates, so this is computed
/// once and shared.
#[derive(Debug, Clone)]
pub struct LossGeometry {
    /// `W_i = V_i^{-1} Q_i^{-1} V_i^{-1}`.
    pub w: Vec<DMatrix<f64>>,
    /// `A = (sum_i W_i)^{-1}`.
    pub a_mat: DMatrix<f64>,
    /// `sum_i W_i`.
    pub a_inv: DMatrix<f64>,
    /// `Q_i^{-1} V_i^{-1}`, the direction every shrinkage term is applied along.
    pub shrink_maps: Vec<DMatrix<f64>>,
    pub v_inv: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    /// `sum_i tr(V_i Q_i)`: the risk of the unshrunk estimator.
    pub trace_sum: f64,
    pub qmin: f64,
    /// Whether `Q_i = V_i^{-1}` for all i.
    pub q_is_v_inverse: bool,
    pub p: usize,
    pub k: usize,
}

impl LossGeometry {
    pub fn new(v: &[DMatrix<f64>], ls: &LossSpec) -> Result<Self> {
        Self::with_tolerances(v, ls, &Tolerances::default())
    }

    pub fn with_tolerances(v: &[DMatrix<f64>], ls: &LossSpec, tol: &Tolerances) -> Result<Self> {
        let k = v.len();
        if k == 0 || ls.q.len() != k {
            return Err(Error::Dimension(format!("{} V matrices and {} Q matrices", k, ls.q.len())));
        }
        let p = v[0].nrows();
        let mut w = Vec::with_capacity(k);
        let mut shrink_maps = Vec::with_capacity(k);
        let mut v_inv = Vec::with_capacity(k);
        let mut a_inv = DMatrix::<f64>::zeros(p, p);
        let mut trace_sum = 0.0;
        for (i, (vi, qi)) in v.iter().zip(&ls.q).enumerate() {
            if vi.shape() != (p, p) || qi.shape() != (p, p) {
                return Err(Error::Dimension(format!("population {} is not {p}x{p}", i + 1)));
            }
            let vi_inv = linalg::spd_inverse(vi, &format!("V_{}", i + 1))?;
            let qi_inv = linalg::spd_inverse(qi, &format!("Q_{}", i + 1))?;
            let map = &qi_inv * &vi_inv;
            let wi = linalg::symmetrize(&(&vi_inv * &map));
            a_inv += &wi;
            trace_sum += (vi * qi).trace();
            w.push(wi);
            shrink_maps.push(map);
            v_inv.push(vi_inv);
        }
        let cond = linalg::spd_condition(&a_inv);
        if !(cond <= tol.max_condition) {
            return Err(Error::IllConditioned(cond));
        }
        let a_mat = linalg::spd_inverse(&a_inv, "sum of W_i")?;
        let q_is_v_inverse = ls.is_inverse_of(v, 1e-8);
        Ok(Self {
            w,
            a_mat,
            a_inv,
            shrink_maps,
            v_inv,
            q: ls.q.clone(),
            trace_sum,
            qmin: ls.qmin,
            q_is_v_inverse,
            p,
            k,
        })
    }
}

/// Pooled mean and shrinkage statistics of one observed model.
#[derive(Debug, Clone)]
pub struct PooledSummary {
    pub geometry: Arc<LossGeometry>,
    /// GLS pooled mean `A sum_i W_i X_i`.
    pub nu_hat: DVector<f64>,
    /// `(1/S) sum_i |X_i - nu_hat|^2_{W_i}`.
    pub f: f64,
    /// `|nu_hat|^2_{A^{-1}} / S`.
    pub g: f64,
}

impl PooledSummary {
    /// Computes the statistics for `m` against a precomputed geometry.
    pub fn from_geometry(m: &CanonicalModel, geometry: Arc<LossGeometry>) -> Result<Self> {
        if m.k() != geometry.k || m.p() != geometry.p {
            return Err(Error::Dimension(format!(
                "model is {}x{} but geometry is {}x{}",
                m.k(),
                m.p(),
                geometry.k,
                geometry.p
            )));
        }
        if !(m.s > 0.0) {
            return Err(Error::InvalidModel("S must be positive".into()));
        }
        let p = geometry.p;
        let mut wx = DVector::<f64>::zeros(p);
        for (wi, xi) in geometry.w.iter().zip(&m.x) {
            wx += wi * xi;
        }
        let nu_hat = &geometry.a_mat * &wx;
        let mut spread = 0.0;
        for (wi, xi) in geometry.w.iter().zip(&m.x) {
            let d = xi - &nu_hat;
            spread += d.dot(&(wi * &d));
        }
        let size = nu_hat.dot(&(&geometry.a_inv * &nu_hat));
        Ok(Self {
            f: spread.max(0.0) / m.s,
            g: size.max(0.0) / m.s,
            nu_hat,
            geometry,
        })
    }

    pub fn w(&self) -> &[DMatrix<f64>] {
        &self.geometry.w
    }

    pub fn a_mat(&self) -> &DMatrix<f64> {
        &self.geometry.a_mat
    }
}

/// Validates `m` against `ls` and computes its pooled summary.
pub fn pooled_summary(m: &CanonicalModel, ls: &LossSpec) -> Result<PooledSummary> {
    pooled_summary_with(m, ls, &Tolerances::default())
}

pub fn pooled_summary_with(m: &CanonicalModel, ls: &LossSpec, tol: &Tolerances) -> Result<PooledSummary> {
    validate_model_with(m, ls, tol).into_result()?;
    let geometry = LossGeometry::with_tolerances(&m.v, ls, tol)?;
    PooledSummary::from_geometry(m, Arc::new(geometry))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(p: usize) -> DMatrix<f64> {
        DMatrix::identity(p, p)
    }

    fn d0() -> (CanonicalModel, LossSpec) {
        let v = vec![eye(3), eye(3)];
        let m = CanonicalModel::new(
            vec![DVector::zeros(3), DVector::from_element(3, 2.0)],
            v.clone(),
            10.0,
            10,
        );
        let ls = LossSpec::identity(&v).unwrap();
        (m, ls)
    }

    #[test]
    fn identity_model_validates() {
        let v = vec![eye(3), eye(3)];
        let m = CanonicalModel::new(vec![DVector::zeros(3); 2], v.clone(), 10.0, 10);
        let ls = LossSpec::identity(&v).unwrap();
        assert!(validate_model(&m, &ls).is_ok());
    }

    #[test]
    fn negative_eigenvalue_reported_with_index() {
        let (mut m, ls) = d0();
        m.v[1][(0, 0)] = -1.0;
        let r = validate_model(&m, &ls);
        assert!(!r.is_ok());
        let v = r.violations.iter().find(|v| v.message == "V_2 not positive definite").unwrap();
        assert_eq!(v.index, Some(2));
    }

    #[test]
    fn zero_s_reported() {
        let (mut m, ls) = d0();
        m.s = 0.0;
        let r = validate_model(&m, &ls);
        assert!(r.violations.iter().any(|v| v.message == "S must be positive"));
    }

    #[test]
    fn asymmetric_v_reported() {
        let (mut m, ls) = d0();
        m.v[0][(0, 1)] = 1e-6;
        let r = validate_model(&m, &ls);
        assert!(r.violations.iter().any(|v| v.message == "V_1 not symmetric"));
    }

    #[test]
    fn single_population_rejected() {
        let v = vec![eye(2)];
        let m = CanonicalModel::new(vec![DVector::zeros(2)], v.clone(), 1.0, 3);
        let ls = LossSpec::identity(&v).unwrap();
        assert!(!validate_model(&m, &ls).is_ok());
    }

    #[test]
    fn d0_summary() {
        let (m, ls) = d0();
        let ps = pooled_summary(&m, &ls).unwrap();
        for j in 0..3 {
            assert!((ps.nu_hat[j] - 1.0).abs() < 1e-14);
        }
        assert!((ps.a_mat() - eye(3) * 0.5).amax() < 1e-14);
        assert!((ps.f - 0.6).abs() < 1e-14);
        assert!((ps.g - 0.6).abs() < 1e-14);
    }

    #[test]
    fn equal_means_give_zero_f() {
        let v = vec![eye(2), eye(2) * 3.0];
        let x = DVector::from_vec(vec![1.5, -0.25]);
        let m = CanonicalModel::new(vec![x.clone(), x.clone()], v.clone(), 2.0, 5);
        let ls = LossSpec::identity(&v).unwrap();
        let ps = pooled_summary(&m, &ls).unwrap();
        assert!(ps.f.abs() < 1e-14);
        assert!((&ps.nu_hat - &x).amax() < 1e-14);
    }

    #[test]
    fn weighted_pooled_mean() {
        let v = vec![eye(2), eye(2) * 2.0];
        let ls = LossSpec::inverse_of(&v).unwrap();
        let m = CanonicalModel::new(
            vec![DVector::zeros(2), DVector::from_element(2, 3.0)],
            v,
            1.0,
            4,
        );
        let ps = pooled_summary(&m, &ls).unwrap();
        assert!((&ps.w()[0] - eye(2)).amax() < 1e-14);
        assert!((&ps.w()[1] - eye(2) * 0.5).amax() < 1e-14);
        assert!((ps.nu_hat[0] - 1.0).abs() < 1e-14 && (ps.nu_hat[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_loss_has_unit_qmin() {
        let v = vec![
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.7]),
            DMatrix::from_row_slice(2, 2, &[0.4, -0.1, -0.1, 1.5]),
        ];
        let ls = LossSpec::inverse_of(&v).unwrap();
        assert!((ls.qmin - 1.0).abs() < 1e-10);
        assert!(ls.is_inverse_of(&v, 1e-10));
        assert!(!LossSpec::identity(&v).unwrap().is_inverse_of(&v, 1e-10));
    }

    #[test]
    fn ill_conditioned_weights_rejected() {
        let v = vec![
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e7]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e7]),
        ];
        let ls = LossSpec::identity(&v).unwrap();
        assert!(matches!(LossGeometry::new(&v, &ls), Err(Error::IllConditioned(_))));
    }
}
