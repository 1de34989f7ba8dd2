//! Shrinkage factors of the two hierarchical Bayes estimators.
//!
//! Single shrinkage (HB1) reduces to a ratio of incomplete beta functions
//! through `w = x / (1 + x)`:
//!
//! ```text
//! phi(F) = B_w(l + 1, M - l - 1) / B_w(l, M - l),   w = qF / (1 + qF),
//! l = p(k-1)/2 + a,   M = (n + p(k-1))/2 + 1 - c.
//! ```
//!
//! Double shrinkage (HB2) is a ratio of integrals of
//! `h(x, y, v) = x^alpha y^beta v^gamma exp(-v (x + y + 1) / 2)` over
//! `[0, F] x [0, G] x [L S, inf)`. The `v` integral is analytic (a complete
//! gamma function when `L = 0`, an upper incomplete gamma otherwise). With
//! `L = 0` the `y` integral is also analytic, again an incomplete beta; with
//! `L > 0` it is done by adaptive quadrature. The outer `x` integral is
//! always adaptive. All integrands are evaluated as logarithms in
//! `s = ln x` and exponentiated after subtracting a sampled maximum.

use super::quadrature::integrate_adaptive_1d;
use super::special::{ln_inc_beta, ln_reg_upper_inc_gamma};
use crate::error::{Error, Result};

/// Statistics below this are treated as zero and the shrink ratio is taken
/// from its small-argument limit.
pub const DEGENERATE_STAT: f64 = 1e-10;

/// Default relative tolerance of every adaptive integral in [`hb2_factors`].
pub const HB2_REL_TOL: f64 = 1e-10;

/// Orders of magnitude (in e-folds) of the integrand left to the analytic tail.
const LOG_SPAN: f64 = 40.0;

fn hb1_params(p: usize, k: usize, n: usize, a: f64, c: f64) -> Result<(f64, f64)> {
    let m = (p * (k - 1)) as f64 / 2.0;
    let l = m + a;
    let big_m = (n + p * (k - 1)) as f64 / 2.0 + 1.0 - c;
    if !(l > 0.0) {
        return Err(Error::precondition(format!("p(k-1)/2 + a = {l} must be positive")));
    }
    if !(big_m > l + 1.0) {
        return Err(Error::precondition(format!(
            "HB1 integrals diverge: need a + c < n/2 (a = {a}, c = {c}, n = {n})"
        )));
    }
    Ok((l, big_m))
}

/// `phi^HB1(F)`: the posterior mean of `F lambda` under the single-shrinkage prior.
pub fn hb1_phi(f_stat: f64, q: f64, p: usize, k: usize, n: usize, a: f64, c: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::precondition("HB1 needs k >= 2"));
    }
    let (l, big_m) = hb1_params(p, k, n, a, c)?;
    if !(f_stat > 0.0 && f_stat.is_finite()) {
        return Err(Error::domain(format!("F = {f_stat} must be positive")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::domain(format!("q = {q} must be positive")));
    }
    let qf = q * f_stat;
    let w = qf / (1.0 + qf);
    let w_c = 1.0 / (1.0 + qf);
    let num = ln_inc_beta(w, w_c, l + 1.0, big_m - l - 1.0)?;
    let den = ln_inc_beta(w, w_c, l, big_m - l)?;
    Ok((num - den).exp())
}

/// `phi^HB1(F) / F`, the HB1 shrink factor; continuous at `F = 0` where it
/// equals `q l / (l + 1)`.
pub fn hb1_ratio(f_stat: f64, q: f64, p: usize, k: usize, n: usize, a: f64, c: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::precondition("HB1 needs k >= 2"));
    }
    let (l, _) = hb1_params(p, k, n, a, c)?;
    if !(f_stat >= 0.0) {
        return Err(Error::domain(format!("F = {f_stat} must be nonnegative")));
    }
    if f_stat < DEGENERATE_STAT {
        return Ok(q * l / (l + 1.0));
    }
    Ok(hb1_phi(f_stat, q, p, k, n, a, c)? / f_stat)
}

/// Upper bound of `phi^HB1`, its limit as `F -> inf`.
pub fn hb1_phi_limit(p: usize, k: usize, n: usize, a: f64, c: f64) -> f64 {
    ((p * (k - 1)) as f64 + 2.0 * a) / (n as f64 - 2.0 * (a + c))
}

/// Exponents of `h(x, y, v) = x^alpha y^beta v^gamma e^{-v(x+y+1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbExponents {
    pub alpha_e: f64,
    pub beta_e: f64,
    pub gamma_e: f64,
}

impl HbExponents {
    pub fn new(p: usize, k: usize, n: usize, a: f64, b: f64, c: f64) -> Self {
        Self {
            alpha_e: (p * (k - 1)) as f64 / 2.0 + a - 1.0,
            beta_e: p as f64 / 2.0 + b - 1.0,
            gamma_e: (n + p * k) as f64 / 2.0 - c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_e > -1.0 && self.beta_e > -1.0) {
            return Err(Error::precondition(format!(
                "HB2 integrals diverge at the origin (alpha = {}, beta = {})",
                self.alpha_e, self.beta_e
            )));
        }
        if !(self.gamma_e > self.alpha_e + self.beta_e + 2.0) {
            return Err(Error::precondition(format!(
                "HB2 factors unbounded: need gamma > alpha + beta + 2 (a + b + c < n/2); gamma = {}",
                self.gamma_e
            )));
        }
        Ok(())
    }

    fn excess(&self) -> f64 {
        self.gamma_e - self.alpha_e - self.beta_e - 2.0
    }

    /// `lim phi^HB2` as `F, G -> inf` (and `S -> 0`).
    pub fn phi_limit(&self) -> f64 {
        (self.alpha_e + 1.0) / self.excess()
    }

    pub fn psi_limit(&self) -> f64 {
        (self.beta_e + 1.0) / self.excess()
    }

    /// `lim phi / F` as `F -> 0`.
    pub fn phi_ratio_at_zero(&self) -> f64 {
        (self.alpha_e + 1.0) / (self.alpha_e + 2.0)
    }

    pub fn psi_ratio_at_zero(&self) -> f64 {
        (self.beta_e + 1.0) / (self.beta_e + 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hb2Options {
    pub rel_tol: f64,
}

impl Default for Hb2Options {
    fn default() -> Self {
        Self { rel_tol: HB2_REL_TOL }
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln ∫_lo^hi exp(g(t)) dt`, shifting by the largest of 65 sampled values of `g`.
fn ln_integrate<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(f64::NEG_INFINITY);
    }
    let shift = (0..65)
        .map(|i| g(lo + (hi - lo) * (i as f64 + 0.5) / 65.0))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let q = integrate_adaptive_1d(
        |t| {
            let v = g(t) - shift;
            if v.is_nan() {
                f64::NAN
            } else {
                v.exp()
            }
        },
        lo,
        hi,
        rel_tol,
    )?;
    Ok(shift + q.value.ln())
}

/// `ln ∫_0^upper x^e exp(ln_rest(x)) dx` for `e > -1`.
///
/// Integrates in `s = ln x` down to `ln(x_c) - LOG_SPAN/(e+1)` where
/// `x_c = min(upper, scale)`; `scale` should be a length over which
/// `ln_rest` changes by O(1). The remainder near the origin is added as
/// `rest(x_lo) x_lo^{e+1} / (e+1)`.
fn ln_power_integral<R: Fn(f64) -> f64>(e: f64, upper: f64, scale: f64, ln_rest: R, rel_tol: f64) -> Result<f64> {
    let e1 = e + 1.0;
    let hi = upper.ln();
    let lo = upper.min(scale).ln() - LOG_SPAN / e1;
    let tail = e1 * lo - e1.ln() + ln_rest(lo.exp());
    let body = ln_integrate(|s| e1 * s + ln_rest(s.exp()), lo, hi, rel_tol)?;
    Ok(log_add(tail, body))
}

/// `(phi^HB2, psi^HB2)` at `(F, G, S)` with precision lower bound `L`.
pub fn hb2_factors(f_stat: f64, g_stat: f64, s: f64, e: &HbExponents, big_l: f64) -> Result<(f64, f64)> {
    hb2_factors_with(f_stat, g_stat, s, e, big_l, &Hb2Options::default())
}

pub fn hb2_factors_with(
    f_stat: f64,
    g_stat: f64,
    s: f64,
    e: &HbExponents,
    big_l: f64,
    opts: &Hb2Options,
) -> Result<(f64, f64)> {
    e.validate()?;
    for (name, v) in [("F", f_stat), ("G", g_stat), ("S", s)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("{name} = {v} must be positive")));
        }
    }
    if !(big_l >= 0.0 && big_l.is_finite()) {
        return Err(Error::domain(format!("L = {big_l} must be nonnegative")));
    }
    let (ln_den, ln_phi, ln_psi) = if big_l == 0.0 {
        hb2_logs_improper(f_stat, g_stat, e, opts.rel_tol)?
    } else {
        hb2_logs_truncated(f_stat, g_stat, big_l * s, e, opts.rel_tol)?
    };
    Ok(((ln_phi - ln_den).exp(), (ln_psi - ln_den).exp()))
}

/// `L = 0`: after the `v` integral the kernel is `x^alpha y^beta (1+x+y)^{-(gamma+1)}`,
/// and `∫_0^G y^beta (1+x+y)^{-(gamma+1)} dy = (1+x)^{beta-gamma} B_w(beta+1, gamma-beta)`
/// with `w = G / (1+x+G)`.
fn hb2_logs_improper(f: f64, g: f64, e: &HbExponents, rel_tol: f64) -> Result<(f64, f64, f64)> {
    let (al, be, ga) = (e.alpha_e, e.beta_e, e.gamma_e);
    let inner = |x: f64, shift: f64| -> f64 {
        let t = 1.0 + x + g;
        let w = g / t;
        let wc = (1.0 + x) / t;
        let b = be + shift;
        (b - ga) * x.ln_1p() + ln_inc_beta(w, wc, b + 1.0, ga - b).unwrap_or(f64::NAN)
    };
    let scale = 1.0 / (2.0 + (ga - be).abs() + be.abs());
    let den = ln_power_integral(al, f, scale, |x| inner(x, 0.0), rel_tol)?;
    let phi = ln_power_integral(al + 1.0, f, scale, |x| inner(x, 0.0), rel_tol)?;
    let psi = ln_power_integral(al, f, scale, |x| inner(x, 1.0), rel_tol)?;
    Ok((den, phi, psi))
}

/// `L > 0`: the `v` integral from `L S` gives
/// `(1+x+y)^{-(gamma+1)} Q(gamma+1, L S (1+x+y)/2)` up to constants; `y` and `x`
/// are then integrated adaptively.
fn hb2_logs_truncated(f: f64, g: f64, ls: f64, e: &HbExponents, rel_tol: f64) -> Result<(f64, f64, f64)> {
    let (al, be, ga) = (e.alpha_e, e.beta_e, e.gamma_e);
    let kernel = |x: f64, y: f64| -> f64 {
        let t = 1.0 + x + y;
        -(ga + 1.0) * t.ln() + ln_reg_upper_inc_gamma(ga + 1.0, 0.5 * ls * t).unwrap_or(f64::NAN)
    };
    // ln ∫_0^G y^(beta + extra) kernel(x, y) dy
    let inner = |x: f64, extra: f64| -> f64 {
        let scale = 1.0 / ((ga + 1.0) / (1.0 + x) + 0.5 * ls + 1.0);
        ln_power_integral(be + extra, g, scale, |y| kernel(x, y), rel_tol).unwrap_or(f64::NAN)
    };
    let scale = 1.0 / (2.0 + ga + 0.5 * ls);
    let den = ln_power_integral(al, f, scale, |x| inner(x, 0.0), rel_tol)?;
    let phi = ln_power_integral(al + 1.0, f, scale, |x| inner(x, 0.0), rel_tol)?;
    let psi = ln_power_integral(al, f, scale, |x| inner(x, 1.0), rel_tol)?;
    Ok((den, phi, psi))
}

/// `(phi^HB2 / F, psi^HB2 / G)`, the HB2 shrink factors.
///
/// A statistic below [`DEGENERATE_STAT`] takes its ratio from the
/// small-argument limit; the other factor is evaluated with the degenerate
/// statistic clamped to [`DEGENERATE_STAT`].
pub fn hb2_ratios(f_stat: f64, g_stat: f64, s: f64, e: &HbExponents, big_l: f64) -> Result<(f64, f64)> {
    hb2_ratios_with(f_stat, g_stat, s, e, big_l, &Hb2Options::default())
}

pub fn hb2_ratios_with(
    f_stat: f64,
    g_stat: f64,
    s: f64,
    e: &HbExponents,
    big_l: f64,
    opts: &Hb2Options,
) -> Result<(f64, f64)> {
    if !(f_stat >= 0.0 && g_stat >= 0.0) {
        return Err(Error::domain("F and G must be nonnegative"));
    }
    let f_small = f_stat < DEGENERATE_STAT;
    let g_small = g_stat < DEGENERATE_STAT;
    if f_small && g_small {
        e.validate()?;
        return Ok((e.phi_ratio_at_zero(), e.psi_ratio_at_zero()));
    }
    let fe = f_stat.max(DEGENERATE_STAT);
    let ge = g_stat.max(DEGENERATE_STAT);
    let (phi, psi) = hb2_factors_with(fe, ge, s, e, big_l, opts)?;
    let phi_ratio = if f_small { e.phi_ratio_at_zero() } else { phi / f_stat };
    let psi_ratio = if g_small { e.psi_ratio_at_zero() } else { psi / g_stat };
    Ok((phi_ratio, psi_ratio))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER: (usize, usize, usize) = (5, 5, 20);

    #[test]
    fn hb1_large_f_limit() {
        let (p, k, n) = PAPER;
        let phi = hb1_phi(1e8, 1.0, p, k, n, 0.1, 0.1).unwrap();
        assert!((phi - 20.2 / 19.6).abs() < 1e-4, "{phi}");
        assert!((hb1_phi_limit(p, k, n, 0.1, 0.1) - 1.030_612_244_897_959).abs() < 1e-12);
    }

    #[test]
    fn hb1_small_f_limit() {
        let (p, k, n) = PAPER;
        let f = 1e-8;
        let r = hb1_phi(f, 1.0, p, k, n, 0.1, 0.1).unwrap() / f;
        assert!((r - 10.1 / 11.1).abs() < 1e-4, "{r}");
        assert!((hb1_ratio(0.0, 1.0, p, k, n, 0.1, 0.1).unwrap() - 10.1 / 11.1).abs() < 1e-15);
        // continuity across the degenerate threshold
        let just_above = hb1_ratio(2.0 * DEGENERATE_STAT, 1.0, p, k, n, 0.1, 0.1).unwrap();
        assert!((just_above - 10.1 / 11.1).abs() < 1e-8);
    }

    #[test]
    fn hb1_q_scales_argument() {
        let a = hb1_phi(0.3, 0.5, 3, 3, 12, 0.2, 0.3).unwrap();
        let b = hb1_phi(0.15, 1.0, 3, 3, 12, 0.2, 0.3).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn hb1_rejects_divergent_hyperparameters() {
        assert!(hb1_phi(1.0, 1.0, 5, 5, 20, 5.0, 5.0).is_err());
        assert!(hb1_phi(0.0, 1.0, 5, 5, 20, 0.1, 0.1).is_err());
    }

    #[test]
    fn hb2_large_limits() {
        let (p, k, n) = PAPER;
        let e = HbExponents::new(p, k, n, 0.1, 0.1, 0.1);
        assert!((e.phi_limit() - 20.2 / 19.4).abs() < 1e-12);
        assert!((e.psi_limit() - 5.2 / 19.4).abs() < 1e-12);
        let (phi, psi) = hb2_factors(1e6, 1e6, 1.0, &e, 0.0).unwrap();
        assert!((phi - 1.041_237).abs() < 1e-3, "{phi}");
        assert!((psi - 0.268_041).abs() < 1e-3, "{psi}");
    }

    #[test]
    fn hb2_symmetric_case_reference() {
        // alpha = beta here, so phi = psi; reference from high-precision cubature
        let e = HbExponents::new(3, 2, 10, 0.1, 0.1, 0.1);
        let (phi, psi) = hb2_factors(0.6, 0.6, 1.0, &e, 0.0).unwrap();
        assert!((phi - 0.222_632_941_808_891_67).abs() < 1e-11, "{phi}");
        assert!((psi - phi).abs() < 1e-11);
    }

    #[test]
    fn hb2_tiny_f_bounded_by_support() {
        let e = HbExponents::new(5, 5, 20, 0.1, 0.1, 0.1);
        let f = 1e-9;
        let (phi, _) = hb2_factors(f, 1.0, 1.0, &e, 0.0).unwrap();
        assert!(phi > 0.0 && phi <= f);
        assert!((phi / f - e.phi_ratio_at_zero()).abs() < 1e-6);
    }

    #[test]
    fn hb2_improper_is_s_free() {
        let e = HbExponents::new(5, 5, 20, 0.1, 0.1, 0.1);
        assert_eq!(
            hb2_factors(0.7, 2.3, 0.01, &e, 0.0).unwrap(),
            hb2_factors(0.7, 2.3, 400.0, &e, 0.0).unwrap()
        );
    }

    #[test]
    fn hb2_truncated_tends_to_improper_as_l_vanishes() {
        let e = HbExponents::new(3, 3, 12, 0.1, 0.1, 0.1);
        let (p0, s0) = hb2_factors(0.8, 0.4, 1.0, &e, 0.0).unwrap();
        let (p1, s1) = hb2_factors(0.8, 0.4, 1.0, &e, 1e-9).unwrap();
        assert!((p0 - p1).abs() < 1e-8 && (s0 - s1).abs() < 1e-8);
        let (p2, s2) = hb2_factors(0.8, 0.4, 1.0, &e, 0.5).unwrap();
        assert!(p2 < p0 && s2 < s0);
    }

    #[test]
    fn hb2_ratios_degenerate_statistics() {
        let e = HbExponents::new(5, 5, 20, 0.1, 0.1, 0.1);
        let (r1, r2) = hb2_ratios(0.0, 0.0, 3.0, &e, 0.0).unwrap();
        assert_eq!(r1, e.phi_ratio_at_zero());
        assert_eq!(r2, e.psi_ratio_at_zero());
        let (r1, r2) = hb2_ratios(0.0, 1.5, 3.0, &e, 0.0).unwrap();
        assert_eq!(r1, e.phi_ratio_at_zero());
        let (_, psi) = hb2_factors(1e-10, 1.5, 3.0, &e, 0.0).unwrap();
        assert!((r2 - psi / 1.5).abs() < 1e-14);
    }

    #[test]
    fn hb2_rejects_bad_exponents() {
        let e = HbExponents::new(5, 5, 20, 5.0, 5.0, 5.0);
        assert!(hb2_factors(1.0, 1.0, 1.0, &e, 0.0).is_err());
    }

    #[test]
    fn large_gamma_does_not_overflow() {
        // gamma = 200
        let e = HbExponents::new(4, 6, 352, 0.1, 0.1, 0.0);
        assert!((e.gamma_e - 188.0).abs() < 1e-12 || e.gamma_e > 150.0);
        let e = HbExponents { gamma_e: 200.0, ..e };
        let (phi, psi) = hb2_factors(50.0, 80.0, 1.0, &e, 0.0).unwrap();
        assert!(phi.is_finite() && psi.is_finite() && phi > 0.0 && psi > 0.0);
        let (phi, psi) = hb2_factors(50.0, 80.0, 0.1, &e, 1.0).unwrap();
        assert!(phi.is_finite() && psi.is_finite() && phi > 0.0 && psi > 0.0);
    }
}
