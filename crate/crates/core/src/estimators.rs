//! Shrinkage estimators of `(mu_1, ..., mu_k)`.
//!
//! Every estimator takes the observed model, the loss, the pooled summary
//! and the hyperparameters, and returns the k estimates together with a
//! diagnostics map. Apart from the two James-Stein rules, all of them are
//! members of the general class
//!
//! ```text
//! mu_hat_i = X_i - (phi(F,G,S)/F) Q_i^{-1} V_i^{-1} (X_i - nu_hat)
//!                - (psi(F,G,S)/G) Q_i^{-1} V_i^{-1} nu_hat,
//! ```
//!
//! which [`estimate_general`] evaluates for arbitrary [`ShrinkageFunctions`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CanonicalModel, Hyperparameters, LossSpec, PooledSummary};
use crate::numerics::{self, HbExponents, DEGENERATE_STAT};

/// The unshrunk estimator and the eight shrinkage estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorKind {
    Unbiased,
    Js1,
    Js2,
    Pt,
    PtStar,
    Eb1,
    Eb2,
    Hb1,
    Hb2,
}

impl EstimatorKind {
    /// The eight shrinkage estimators in risk-table column order.
    pub const SHRINKAGE: [EstimatorKind; 8] = [
        EstimatorKind::Js1,
        EstimatorKind::Js2,
        EstimatorKind::Pt,
        EstimatorKind::PtStar,
        EstimatorKind::Eb1,
        EstimatorKind::Eb2,
        EstimatorKind::Hb1,
        EstimatorKind::Hb2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Unbiased => "X",
            EstimatorKind::Js1 => "JS1",
            EstimatorKind::Js2 => "JS2",
            EstimatorKind::Pt => "PT",
            EstimatorKind::PtStar => "PT*",
            EstimatorKind::Eb1 => "EB",
            EstimatorKind::Eb2 => "EB*",
            EstimatorKind::Hb1 => "HB1",
            EstimatorKind::Hb2 => "HB2",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "x" | "none" | "unbiased" => EstimatorKind::Unbiased,
            "js1" => EstimatorKind::Js1,
            "js2" => EstimatorKind::Js2,
            "pt" => EstimatorKind::Pt,
            "pt*" | "ptstar" | "pt_star" => EstimatorKind::PtStar,
            "eb" | "eb1" => EstimatorKind::Eb1,
            "eb*" | "eb2" | "ebstar" | "eb_star" => EstimatorKind::Eb2,
            "hb1" => EstimatorKind::Hb1,
            "hb2" => EstimatorKind::Hb2,
            other => return Err(Error::domain(format!("unknown estimator '{other}'"))),
        };
        Ok(kind)
    }
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorKind> for String {
    fn from(k: EstimatorKind) -> String {
        k.name().to_string()
    }
}

/// Estimates `mu_hat_1..mu_hat_k` with named diagnostic scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub mu_hat: Vec<DVector<f64>>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateSet {
    fn new(mu_hat: Vec<DVector<f64>>, ps: &PooledSummary, s: f64) -> Self {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("F".to_string(), ps.f);
        diagnostics.insert("G".to_string(), ps.g);
        diagnostics.insert("S".to_string(), s);
        Self { mu_hat, diagnostics }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Real function of `(F, G, S)`.
pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Gradient `(d/dF, d/dG, d/dS)` of a [`ScalarFn`].
pub type GradientFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 3] + Send + Sync>;

/// Relative step of the central differences used when no gradient is supplied.
pub const FD_STEP: f64 = 1e-5;

/// `phi` and `psi` of the general class, with optional analytic gradients.
#[derive(Clone)]
pub struct ShrinkageFunctions {
    pub label: String,
    pub phi: ScalarFn,
    pub psi: ScalarFn,
    pub phi_grad: Option<GradientFn>,
    pub psi_grad: Option<GradientFn>,
}

impl fmt::Debug for ShrinkageFunctions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShrinkageFunctions")
            .field("label", &self.label)
            .field("phi_grad", &self.phi_grad.is_some())
            .field("psi_grad", &self.psi_grad.is_some())
            .finish()
    }
}

fn central_difference(h: &ScalarFn, f: f64, g: f64, s: f64) -> [f64; 3] {
    let x = [f, g, s];
    let mut out = [0.0; 3];
    for j in 0..3 {
        let step = FD_STEP * x[j].abs().max(DEGENERATE_STAT);
        let mut up = x;
        let mut down = x;
        up[j] += step;
        down[j] -= step;
        out[j] = (h(up[0], up[1], up[2]) - h(down[0], down[1], down[2])) / (2.0 * step);
    }
    out
}

impl ShrinkageFunctions {
    pub fn new(
        label: impl Into<String>,
        phi: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        psi: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            phi: Arc::new(phi),
            psi: Arc::new(psi),
            phi_grad: None,
            psi_grad: None,
        }
    }

    pub fn with_gradients(
        mut self,
        phi_grad: impl Fn(f64, f64, f64) -> [f64; 3] + Send + Sync + 'static,
        psi_grad: impl Fn(f64, f64, f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        self.phi_grad = Some(Arc::new(phi_grad));
        self.psi_grad = Some(Arc::new(psi_grad));
        self
    }

    /// `phi = psi = 0`: the unshrunk estimator.
    pub fn zero() -> Self {
        Self::new("zero", |_, _, _| 0.0, |_, _, _| 0.0).with_gradients(|_, _, _| [0.0; 3], |_, _, _| [0.0; 3])
    }

    /// `phi = min(t, F)` with `psi = 0`.
    pub fn truncated_phi(t: f64) -> Self {
        Self::new(format!("phi=min({t},F)"), move |f, _, _| t.min(f), |_, _, _| 0.0)
            .with_gradients(move |f, _, _| [if f < t { 1.0 } else { 0.0 }, 0.0, 0.0], |_, _, _| [0.0; 3])
    }

    /// `phi = min(t1, F)`, `psi = min(t2, G)`.
    pub fn truncated_pair(t1: f64, t2: f64) -> Self {
        Self::new(format!("phi=min({t1},F),psi=min({t2},G)"), move |f, _, _| t1.min(f), move |_, g, _| t2.min(g))
            .with_gradients(
                move |f, _, _| [if f < t1 { 1.0 } else { 0.0 }, 0.0, 0.0],
                move |_, g, _| [0.0, if g < t2 { 1.0 } else { 0.0 }, 0.0],
            )
    }

    /// The class member equal to EB1.
    pub fn eb1(p: usize, k: usize, n: usize) -> Self {
        let t = eb_constant(p * (k - 1), n);
        Self { label: "EB".into(), ..Self::truncated_phi(t) }
    }

    /// The class member equal to EB2.
    pub fn eb2(p: usize, k: usize, n: usize) -> Self {
        let t1 = eb_constant(p * (k - 1), n);
        let t2 = eb_constant(p, n);
        Self { label: "EB*".into(), ..Self::truncated_pair(t1, t2) }
    }

    /// `phi = F 1{F <= threshold}`, `psi = 0`: the preliminary-test estimator.
    pub fn pt(threshold: f64) -> Self {
        Self::new("PT", move |f, _, _| if f <= threshold { f } else { 0.0 }, |_, _, _| 0.0)
    }

    /// PT with `psi = min((p-2)/(n+2), G)`.
    pub fn pt_star(threshold: f64, p: usize, n: usize) -> Self {
        let t2 = eb_constant(p, n);
        Self::new("PT*", move |f, _, _| if f <= threshold { f } else { 0.0 }, move |_, g, _| t2.min(g))
    }

    pub fn hb1(q: f64, p: usize, k: usize, n: usize, a: f64, c: f64) -> Self {
        Self::new(
            "HB1",
            move |f, _, _| numerics::hb1_phi(f, q, p, k, n, a, c).unwrap_or(f64::NAN),
            |_, _, _| 0.0,
        )
    }

    pub fn hb2(e: HbExponents, big_l: f64) -> Self {
        Self::new(
            "HB2",
            move |f, g, s| numerics::hb2_factors(f, g, s, &e, big_l).map_or(f64::NAN, |r| r.0),
            move |f, g, s| numerics::hb2_factors(f, g, s, &e, big_l).map_or(f64::NAN, |r| r.1),
        )
    }

    pub fn phi_at(&self, f: f64, g: f64, s: f64) -> f64 {
        (self.phi)(f, g, s)
    }

    pub fn psi_at(&self, f: f64, g: f64, s: f64) -> f64 {
        (self.psi)(f, g, s)
    }

    /// Supplied gradient of `phi`, or central differences with relative step [`FD_STEP`].
    pub fn phi_gradient(&self, f: f64, g: f64, s: f64) -> [f64; 3] {
        match &self.phi_grad {
            Some(d) => d(f, g, s),
            None => central_difference(&self.phi, f, g, s),
        }
    }

    pub fn psi_gradient(&self, f: f64, g: f64, s: f64) -> [f64; 3] {
        match &self.psi_grad {
            Some(d) => d(f, g, s),
            None => central_difference(&self.psi, f, g, s),
        }
    }
}

/// `(d - 2)/(n + 2)`, the optimal constant of a d-dimensional shrinkage term.
fn eb_constant(d: usize, n: usize) -> f64 {
    (d as f64 - 2.0) / (n as f64 + 2.0)
}

/// Preliminary-test rejection threshold `{p(k-1)/n} F_{p(k-1), n, alpha}`.
pub fn pt_threshold(p: usize, k: usize, n: usize, alpha: f64) -> Result<f64> {
    let d1 = p * (k - 1);
    let quantile = numerics::f_quantile(d1 as u32, n as u32, alpha)?;
    Ok(d1 as f64 / n as f64 * quantile)
}

/// Checks that `kind` is defined for this model, loss and hyperparameters.
pub fn check_preconditions(kind: EstimatorKind, m: &CanonicalModel, ps: &PooledSummary, h: &Hyperparameters) -> Result<()> {
    h.validate()?;
    let (p, k, n) = (m.p(), m.k(), m.n);
    let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::precondition(format!("{kind}: {msg}"))) };
    let v_inverse = || need(ps.geometry.q_is_v_inverse, "requires Q_i = V_i^{-1}");
    match kind {
        EstimatorKind::Unbiased => Ok(()),
        EstimatorKind::Js1 => need(p >= 3, "requires p >= 3"),
        EstimatorKind::Js2 => need(p * k >= 3, "requires pk >= 3"),
        EstimatorKind::Pt => v_inverse(),
        EstimatorKind::PtStar => {
            v_inverse()?;
            need(p >= 3, "requires p >= 3")
        }
        EstimatorKind::Eb1 => need(p * (k - 1) >= 3, "requires p(k-1) >= 3"),
        EstimatorKind::Eb2 => {
            need(p * (k - 1) >= 3, "requires p(k-1) >= 3")?;
            need(p >= 3, "requires p >= 3")
        }
        EstimatorKind::Hb1 => numerics::hb1_ratio(1.0, ps.geometry.qmin, p, k, n, h.a, h.c).map(|_| ()),
        EstimatorKind::Hb2 => {
            v_inverse()?;
            HbExponents::new(p, k, n, h.a, h.b, h.c).validate()
        }
    }
}

/// Applies `kind` after checking its preconditions.
pub fn estimate(
    kind: EstimatorKind,
    m: &CanonicalModel,
    ls: &LossSpec,
    ps: &PooledSummary,
    h: &Hyperparameters,
) -> Result<EstimateSet> {
    match kind {
        EstimatorKind::Unbiased => Ok(EstimateSet::new(m.x.clone(), ps, m.s)),
        EstimatorKind::Js1 => estimate_js1(m, ls, ps, h),
        EstimatorKind::Js2 => estimate_js2(m, ls, ps, h),
        EstimatorKind::Pt => estimate_pt(m, ls, ps, h),
        EstimatorKind::PtStar => estimate_pt_star(m, ls, ps, h),
        EstimatorKind::Eb1 => estimate_eb1(m, ls, ps, h),
        EstimatorKind::Eb2 => estimate_eb2(m, ls, ps, h),
        EstimatorKind::Hb1 => estimate_hb1(m, ls, ps, h),
        EstimatorKind::Hb2 => estimate_hb2(m, ls, ps, h),
    }
}

/// `X_i - a M_i (X_i - nu_hat) - b M_i nu_hat` with `M_i = Q_i^{-1} V_i^{-1}`.
fn two_term(m: &CanonicalModel, ps: &PooledSummary, a: f64, b: f64) -> Vec<DVector<f64>> {
    m.x.iter()
        .zip(&ps.geometry.shrink_maps)
        .map(|(x, map)| {
            let mut dir = (x - &ps.nu_hat) * a;
            if b != 0.0 {
                dir += &ps.nu_hat * b;
            }
            x - map * dir
        })
        .collect()
}

/// `min(t / stat, 1)`, equal to 1 at `stat = 0`.
fn truncated_factor(t: f64, stat: f64) -> f64 {
    if stat <= 0.0 {
        1.0
    } else {
        (t / stat).min(1.0)
    }
}

/// Sample-wise James-Stein: each `X_i` shrunk toward zero in its own `V_i^{-1}` norm.
pub fn estimate_js1(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Js1, m, ps, h)?;
    let c = eb_constant(m.p(), m.n) * m.s;
    let mut factors = Vec::with_capacity(m.k());
    let mu_hat = m
        .x
        .iter()
        .zip(&ps.geometry.v_inv)
        .map(|(x, v_inv)| {
            let norm = x.dot(&(v_inv * x));
            let mut factor = if norm > 0.0 { c / norm } else { 0.0 };
            if h.js_positive_part {
                factor = factor.min(1.0);
            }
            factors.push(factor);
            x * (1.0 - factor)
        })
        .collect();
    let mut out = EstimateSet::new(mu_hat, ps, m.s);
    for (i, f) in factors.into_iter().enumerate() {
        out = out.with(&format!("factor_{}", i + 1), f);
    }
    Ok(out)
}

/// Overall James-Stein: one factor from the pooled norm `sum_i |X_i|^2_{V_i^{-1}}`.
pub fn estimate_js2(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Js2, m, ps, h)?;
    let norm: f64 = m.x.iter().zip(&ps.geometry.v_inv).map(|(x, v_inv)| x.dot(&(v_inv * x))).sum();
    let mut factor = if norm > 0.0 { eb_constant(m.p() * m.k(), m.n) * m.s / norm } else { 0.0 };
    if h.js_positive_part {
        factor = factor.min(1.0);
    }
    let mu_hat = m.x.iter().map(|x| x * (1.0 - factor)).collect();
    Ok(EstimateSet::new(mu_hat, ps, m.s).with("factor", factor))
}

fn pt_parts(m: &CanonicalModel, ps: &PooledSummary, h: &Hyperparameters) -> Result<(f64, bool)> {
    let threshold = pt_threshold(m.p(), m.k(), m.n, h.alpha)?;
    Ok((threshold, ps.f > threshold))
}

/// Preliminary test: `X_i` if the F test rejects equal means, `nu_hat` otherwise.
pub fn estimate_pt(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Pt, m, ps, h)?;
    let (threshold, reject) = pt_parts(m, ps, h)?;
    let mu_hat = if reject { m.x.clone() } else { vec![ps.nu_hat.clone(); m.k()] };
    Ok(EstimateSet::new(mu_hat, ps, m.s)
        .with("threshold", threshold)
        .with("reject", if reject { 1.0 } else { 0.0 })
        .with("factor", if reject { 0.0 } else { 1.0 }))
}

/// PT followed by shrinking `nu_hat` toward zero.
pub fn estimate_pt_star(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::PtStar, m, ps, h)?;
    let (threshold, reject) = pt_parts(m, ps, h)?;
    let factor2 = truncated_factor(eb_constant(m.p(), m.n), ps.g);
    let shift = &ps.nu_hat * factor2;
    let mu_hat = if reject {
        m.x.iter().map(|x| x - &shift).collect()
    } else {
        vec![&ps.nu_hat - &shift; m.k()]
    };
    Ok(EstimateSet::new(mu_hat, ps, m.s)
        .with("threshold", threshold)
        .with("reject", if reject { 1.0 } else { 0.0 })
        .with("factor", if reject { 0.0 } else { 1.0 })
        .with("factor2", factor2))
}

/// Empirical Bayes shrinkage toward `nu_hat`.
pub fn estimate_eb1(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Eb1, m, ps, h)?;
    let factor = truncated_factor(eb_constant(m.p() * (m.k() - 1), m.n), ps.f);
    Ok(EstimateSet::new(two_term(m, ps, factor, 0.0), ps, m.s).with("factor", factor))
}

/// EB1 plus shrinkage of `nu_hat` toward zero.
pub fn estimate_eb2(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Eb2, m, ps, h)?;
    let factor = truncated_factor(eb_constant(m.p() * (m.k() - 1), m.n), ps.f);
    let factor2 = truncated_factor(eb_constant(m.p(), m.n), ps.g);
    Ok(EstimateSet::new(two_term(m, ps, factor, factor2), ps, m.s)
        .with("factor", factor)
        .with("factor2", factor2))
}

/// Single-shrinkage hierarchical Bayes.
pub fn estimate_hb1(m: &CanonicalModel, ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Hb1, m, ps, h)?;
    let factor = numerics::hb1_ratio(ps.f, ls.qmin, m.p(), m.k(), m.n, h.a, h.c)?;
    Ok(EstimateSet::new(two_term(m, ps, factor, 0.0), ps, m.s)
        .with("factor", factor)
        .with("phi", factor * ps.f))
}

/// Double-shrinkage hierarchical Bayes.
pub fn estimate_hb2(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, h: &Hyperparameters) -> Result<EstimateSet> {
    check_preconditions(EstimatorKind::Hb2, m, ps, h)?;
    let e = HbExponents::new(m.p(), m.k(), m.n, h.a, h.b, h.c);
    let (r1, r2) = numerics::hb2_ratios(ps.f, ps.g, m.s, &e, h.big_l)?;
    Ok(EstimateSet::new(two_term(m, ps, r1, r2), ps, m.s)
        .with("factor", r1)
        .with("factor2", r2)
        .with("phi", r1 * ps.f)
        .with("psi", r2 * ps.g))
}

/// `h(x)/x`, read as `h(DEGENERATE_STAT)/DEGENERATE_STAT` below the threshold.
fn ratio(h: impl Fn(f64) -> f64, x: f64) -> f64 {
    let x = x.max(DEGENERATE_STAT);
    h(x) / x
}

/// Member of the general class given by `sf`.
pub fn estimate_general(m: &CanonicalModel, _ls: &LossSpec, ps: &PooledSummary, sf: &ShrinkageFunctions) -> Result<EstimateSet> {
    let (f, g, s) = (ps.f, ps.g, m.s);
    let r1 = ratio(|x| sf.phi_at(x, g, s), f);
    let r2 = ratio(|y| sf.psi_at(f.max(DEGENERATE_STAT), y, s), g);
    if !(r1.is_finite() && r2.is_finite()) {
        return Err(Error::domain(format!("{}: phi or psi is not finite at F = {f}, G = {g}", sf.label)));
    }
    Ok(EstimateSet::new(two_term(m, ps, r1, r2), ps, s)
        .with("factor", r1)
        .with("factor2", r2))
}
