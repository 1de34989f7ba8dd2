//! Loss, unbiased risk estimation, minimaxity conditions and PRIAL.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{EstimateSet, ShrinkageFunctions};
use crate::model::{LossSpec, TrueParameters};

/// `(1/sigma^2) sum_i (mu_hat_i - mu_i)' Q_i (mu_hat_i - mu_i)`.
pub fn loss(est: &EstimateSet, truth: &TrueParameters, ls: &LossSpec) -> Result<f64> {
    let k = truth.k();
    if est.mu_hat.len() != k || ls.q.len() != k {
        return Err(Error::Dimension(format!(
            "{} estimates, {} true means, {} loss matrices",
            est.mu_hat.len(),
            k,
            ls.q.len()
        )));
    }
    let p = truth.p();
    for (i, (e, q)) in est.mu_hat.iter().zip(&ls.q).enumerate() {
        if e.len() != p || q.shape() != (p, p) {
            return Err(Error::Dimension(format!("population {} does not have dimension {p}", i + 1)));
        }
    }
    Ok(loss_unchecked(&est.mu_hat, &truth.mu, &ls.q, truth.sigma2))
}

pub(crate) fn loss_unchecked(mu_hat: &[DVector<f64>], mu: &[DVector<f64>], q: &[DMatrix<f64>], sigma2: f64) -> f64 {
    let total: f64 = mu_hat
        .iter()
        .zip(mu)
        .zip(q)
        .map(|((e, m), qi)| {
            let d = e - m;
            d.dot(&(qi * &d))
        })
        .sum();
    total / sigma2
}

/// Values and partial derivatives of `phi` and `psi` at the observed `(F, G, S)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UerInputs {
    pub phi: f64,
    pub psi: f64,
    pub phi_f: f64,
    pub phi_g: f64,
    pub phi_s: f64,
    pub psi_f: f64,
    pub psi_g: f64,
    pub psi_s: f64,
    pub f: f64,
    pub g: f64,
    pub s: f64,
    pub p: usize,
    pub k: usize,
    pub n: usize,
    /// `sum_i tr(V_i Q_i)`.
    pub trace_sum: f64,
}

impl UerInputs {
    /// Evaluates `sf` and its gradients at `(f, g, s)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_functions(sf: &ShrinkageFunctions, f: f64, g: f64, s: f64, p: usize, k: usize, n: usize, trace_sum: f64) -> Self {
        let [phi_f, phi_g, phi_s] = sf.phi_gradient(f, g, s);
        let [psi_f, psi_g, psi_s] = sf.psi_gradient(f, g, s);
        Self {
            phi: sf.phi_at(f, g, s),
            psi: sf.psi_at(f, g, s),
            phi_f,
            phi_g,
            phi_s,
            psi_f,
            psi_g,
            psi_s,
            f,
            g,
            s,
            p,
            k,
            n,
            trace_sum,
        }
    }
}

/// Unbiased estimate of the risk of the general-class member with the given
/// `phi`, `psi` and derivatives.
pub fn uer(u: &UerInputs) -> f64 {
    let (p, k, n) = (u.p as f64, u.k as f64, u.n as f64);
    let d1 = p * (k - 1.0);
    let phi_part = (2.0 * (d1 - 2.0) - (n + 2.0) * u.phi) * u.phi / u.f
        + 4.0 * u.phi_f
        + 4.0 * u.phi * (u.f * u.phi_f + u.g * u.phi_g) / u.f
        - 4.0 * u.s * u.phi * u.phi_s / u.f;
    let psi_part = (2.0 * (p - 2.0) - (n + 2.0) * u.psi) * u.psi / u.g
        + 4.0 * u.psi_g
        + 4.0 * u.psi * (u.f * u.psi_f + u.g * u.psi_g) / u.g
        - 4.0 * u.s * u.psi * u.psi_s / u.g;
    u.trace_sum - phi_part - psi_part
}

/// Outcome of a minimaxity condition check. Each margin is `rhs - lhs` of
/// one inequality, so a nonnegative (strict ones: positive) margin means the
/// inequality holds; entries ending in `_lhs`/`_rhs` are the raw sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub minimax: bool,
    /// `a > 0`, `b > 0`, `c > 1` (HB2 only).
    pub proper_prior: Option<bool>,
    /// Whether any proper prior satisfies every minimax inequality for this `(p, k, n)` (HB2 only).
    pub proper_minimax_feasible: Option<bool>,
    pub margins: BTreeMap<String, f64>,
    pub failed: Vec<String>,
}

struct Checker {
    margins: BTreeMap<String, f64>,
    failed: Vec<String>,
}

impl Checker {
    fn new() -> Self {
        Self { margins: BTreeMap::new(), failed: Vec::new() }
    }

    fn record(&mut self, name: &str, margin: f64, strict: bool) {
        self.margins.insert(name.to_string(), margin);
        let ok = if strict { margin > 0.0 } else { margin >= 0.0 };
        if !ok {
            self.failed.push(name.to_string());
        }
    }

    fn side(&mut self, name: &str, lhs: f64, rhs: f64) {
        self.margins.insert(format!("{name}_lhs"), lhs);
        self.margins.insert(format!("{name}_rhs"), rhs);
        self.record(name, rhs - lhs, false);
    }
}

fn hb1c_sides(a: f64, c: f64, d1: f64, n: f64) -> (f64, f64) {
    (
        (2.0 * d1 + n - 2.0) * a + 2.0 * (d1 - 2.0) * c,
        (n - 2.0) * d1 / 2.0 - 2.0 * n,
    )
}

fn hb2c_sides(a: f64, b: f64, c: f64, d1: f64, n: f64) -> (f64, f64) {
    hb1c_sides(a, b + c, d1, n)
}

fn hb2cc_sides(a: f64, b: f64, c: f64, p: f64, n: f64) -> (f64, f64) {
    (
        (2.0 * p + n - 2.0) * b + 2.0 * (p - 2.0) * (a + c),
        p * (n - 2.0) / 2.0 - 2.0 * n,
    )
}

/// Sufficient conditions for HB1 minimaxity.
///
/// Enforces `a + c < n/2`; the weaker `a + c < (n+2)/2` is reported as a
/// margin only. Also requires `p(k-1)/2 + a > 0`, without which the
/// estimator is undefined.
pub fn check_hb1_conditions(a: f64, c: f64, p: usize, k: usize, n: usize) -> ConditionReport {
    let d1 = (p * k.saturating_sub(1)) as f64;
    let nf = n as f64;
    let mut ck = Checker::new();
    ck.record("dim", d1 - 3.0, false);
    ck.record("integrable", d1 / 2.0 + a, true);
    ck.record("a+c<n/2", nf / 2.0 - (a + c), true);
    ck.margins.insert("a+c<(n+2)/2".into(), (nf + 2.0) / 2.0 - (a + c));
    let (lhs, rhs) = hb1c_sides(a, c, d1, nf);
    ck.side("HB1c", lhs, rhs);
    ConditionReport {
        minimax: ck.failed.is_empty(),
        proper_prior: None,
        proper_minimax_feasible: None,
        margins: ck.margins,
        failed: ck.failed,
    }
}

/// Sufficient conditions for HB2 minimaxity, prior properness, and whether
/// a proper prior can be minimax at all for this `(p, k, n)`.
pub fn check_hb2_conditions(a: f64, b: f64, c: f64, p: usize, k: usize, n: usize) -> ConditionReport {
    let d1 = (p * k.saturating_sub(1)) as f64;
    let (pf, nf) = (p as f64, n as f64);
    let mut ck = Checker::new();
    ck.record("dim", d1 - 3.0, false);
    ck.record("p>=3", pf - 3.0, false);
    ck.record("integrable", (d1 / 2.0 + a).min(pf / 2.0 + b), true);
    ck.record("a+b+c<n/2", nf / 2.0 - (a + b + c), true);
    let (lhs, rhs) = hb2c_sides(a, b, c, d1, nf);
    ck.side("HB2c", lhs, rhs);
    let (lhs, rhs) = hb2cc_sides(a, b, c, pf, nf);
    ck.side("HB2cc", lhs, rhs);
    ConditionReport {
        minimax: ck.failed.is_empty(),
        proper_prior: Some(a > 0.0 && b > 0.0 && c > 1.0),
        proper_minimax_feasible: Some(proper_minimax_feasible(p, k, n)),
        margins: ck.margins,
        failed: ck.failed,
    }
}

/// Whether some `a > 0`, `b > 0`, `c > 1` satisfies the HB2 minimax conditions.
///
/// Every left side increases in `a`, `b`, `c` (for `p >= 3`), so the set is
/// nonempty iff all inequalities hold strictly at the corner `(0, 0, 1)`.
pub fn proper_minimax_feasible(p: usize, k: usize, n: usize) -> bool {
    let d1 = (p * k.saturating_sub(1)) as f64;
    let (pf, nf) = (p as f64, n as f64);
    if d1 < 3.0 || pf < 3.0 || nf / 2.0 <= 1.0 {
        return false;
    }
    let (l1, r1) = hb2c_sides(0.0, 0.0, 1.0, d1, nf);
    let (l2, r2) = hb2cc_sides(0.0, 0.0, 1.0, pf, nf);
    l1 < r1 && l2 < r2
}

/// Percentage relative improvement in average loss over the unshrunk estimator.
pub fn prial(risk_unbiased: f64, risk_est: f64) -> Result<f64> {
    if !(risk_unbiased > 0.0) {
        return Err(Error::domain("risk of the unshrunk estimator must be positive"));
    }
    Ok(100.0 * (risk_unbiased - risk_est) / risk_unbiased)
}
