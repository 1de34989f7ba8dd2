//! Special functions, quadrature and the hierarchical Bayes factors against
//! independent brute-force or third-party references.

use kshrink_core::numerics::hb::{hb2_factors, HbExponents};
use kshrink_core::numerics::quadrature::integrate_adaptive_1d;
use kshrink_core::numerics::special::{f_quantile, f_sf, ln_beta, ln_gamma, reg_inc_beta, reg_upper_inc_gamma};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::{beta as sbeta, gamma as sgamma};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn binomial(n: u64, k: u64) -> f64 {
    (1..=k).fold(1.0, |acc, j| acc * (n + 1 - j) as f64 / j as f64)
}

/// `I_x(a, b)` for integer `a, b` as a binomial tail.
fn beta_binomial_tail(x: f64, a: u64, b: u64) -> f64 {
    let m = a + b - 1;
    (a..=m).map(|j| binomial(m, j) * x.powi(j as i32) * (1.0 - x).powi((m - j) as i32)).sum()
}

#[test]
fn incomplete_beta_matches_integer_closed_forms() {
    for a in 1..=8u64 {
        for b in 1..=8u64 {
            for i in 1..20 {
                let x = i as f64 / 20.0;
                let got = reg_inc_beta(x, a as f64, b as f64).unwrap();
                let want = beta_binomial_tail(x, a, b);
                assert!((got - want).abs() < 1e-12, "I_{x}({a}, {b}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn incomplete_beta_matches_statrs() {
    for &(a, b) in &[(0.3, 0.7), (2.5, 11.0), (10.1, 1.6), (40.0, 45.0), (0.5, 120.0)] {
        for i in 1..40 {
            let x = i as f64 / 40.0;
            let got = reg_inc_beta(x, a, b).unwrap();
            let want = sbeta::beta_reg(a, b, x);
            assert!((got - want).abs() < 1e-12 + 1e-10 * want, "I_{x}({a}, {b})");
        }
    }
}

#[test]
fn log_gamma_and_beta_match_statrs() {
    for i in 1..200 {
        let x = 0.05 * i as f64;
        assert!((ln_gamma(x) - sgamma::ln_gamma(x)).abs() < 1e-12 * sgamma::ln_gamma(x).abs().max(1.0));
    }
    for &(a, b) in &[(0.5, 0.5), (2.5, 5.5), (10.1, 12.3), (100.0, 0.2)] {
        assert!((ln_beta(a, b) - sbeta::ln_beta(a, b)).abs() < 1e-11);
    }
}

#[test]
fn upper_gamma_matches_statrs() {
    for &s in &[0.3, 1.0, 2.5, 7.0, 23.4] {
        for i in 1..50 {
            let z = 0.4 * i as f64;
            let got = reg_upper_inc_gamma(s, z).unwrap();
            let want = sgamma::gamma_ur(s, z);
            assert!((got - want).abs() < 1e-12 + 1e-9 * want, "Q({s}, {z})");
        }
    }
}

#[test]
fn upper_gamma_matches_midpoint_oracle() {
    // Q(2.5, 1.3) = int_{1.3}^inf t^{1.5} e^{-t} dt / Gamma(2.5); the tail past 80 is below 1e-30
    let (s, z, hi, panels) = (2.5, 1.3, 80.0, 10_000_000usize);
    let h = (hi - z) / panels as f64;
    let sum: f64 = (0..panels)
        .map(|i| {
            let t = z + (i as f64 + 0.5) * h;
            t.powf(s - 1.0) * (-t).exp()
        })
        .sum();
    let oracle = sum * h / sgamma::gamma(s);
    let got = reg_upper_inc_gamma(s, z).unwrap();
    assert!(rel(got, oracle) < 1e-10, "{got} vs {oracle}");
}

#[test]
fn adaptive_quadrature_recovers_a_beta_integral() {
    // int_0^inf x^{1.5} (1+x)^{-8} dx = B(2.5, 5.5); the tail past 1e4 is below 1e-23
    let q = integrate_adaptive_1d(|x: f64| x.powf(1.5) * (1.0 + x).powi(-8), 0.0, 1e4, 1e-12).unwrap();
    let exact = sbeta::beta(2.5, 5.5);
    assert!(rel(q.value, exact) < 1e-10, "{} vs {exact}", q.value);
    assert!(q.error <= 1e-10 * exact);
}

#[test]
fn adaptive_quadrature_handles_endpoint_singularity() {
    let q = integrate_adaptive_1d(|x: f64| x.powf(-0.5), 0.0, 4.0, 1e-10).unwrap();
    assert!(rel(q.value, 4.0) < 1e-9);
}

/// Upper-`alpha` F point by bisection on the statrs CDF.
fn f_quantile_oracle(d1: f64, d2: f64, alpha: f64) -> f64 {
    let dist = FisherSnedecor::new(d1, d2).unwrap();
    let (mut lo, mut hi) = (0.0, 1e4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - dist.cdf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn f_quantiles_match_bisection_oracle() {
    for d in [1u32, 2, 5, 20, 100] {
        assert!((f_quantile(d, d, 0.5).unwrap() - 1.0).abs() < 1e-9);
    }
    let q = f_quantile(20, 20, 0.05).unwrap();
    assert!((q - 2.1242).abs() < 1e-3);
    assert!((q - f_quantile_oracle(20.0, 20.0, 0.05)).abs() < 1e-3);
    for &(d1, d2, alpha) in &[(3u32, 10u32, 0.05), (20, 20, 0.01), (4, 60, 0.1), (12, 7, 0.5)] {
        let got = f_quantile(d1, d2, alpha).unwrap();
        let want = f_quantile_oracle(d1 as f64, d2 as f64, alpha);
        assert!(rel(got, want) < 1e-8, "F({d1}, {d2}; {alpha}): {got} vs {want}");
        assert!((f_sf(got, d1 as f64, d2 as f64).unwrap() - alpha).abs() < 1e-10);
    }
}

/// Brute-force `(phi, psi)` by a `panels x panels` midpoint rule in
/// `(x, y)`, with the precision integral done in closed form.
#[allow(clippy::too_many_arguments)]
fn hb2_oracle(f: f64, g: f64, s: f64, p: usize, k: usize, n: usize, (a, b, c): (f64, f64, f64), big_l: f64) -> (f64, f64) {
    let (pf, kf, nf) = (p as f64, k as f64, n as f64);
    let alpha = pf * (kf - 1.0) / 2.0 + a - 1.0;
    let beta = pf / 2.0 + b - 1.0;
    let m = (nf + pf * kf) / 2.0 - c;
    let panels = 4000;
    let (hx, hy) = (f / panels as f64, g / panels as f64);
    let (mut den, mut num_x, mut num_y) = (0.0, 0.0, 0.0);
    for i in 0..panels {
        let x = (i as f64 + 0.5) * hx;
        let ln_x = x.ln();
        for j in 0..panels {
            let y = (j as f64 + 0.5) * hy;
            let t = x + y + 1.0;
            // int_{LS}^inf v^m e^{-vt/2} dv, up to the constant Gamma(m + 1)
            let mut w = (m + 1.0) * (2.0 / t).ln() + alpha * ln_x + beta * y.ln();
            if big_l > 0.0 {
                w += sgamma::gamma_ur(m + 1.0, big_l * s * t / 2.0).ln();
            }
            let w = w.exp();
            den += w;
            num_x += w * x;
            num_y += w * y;
        }
    }
    (num_x / den, num_y / den)
}

#[test]
fn hb2_factors_match_grid_oracle() {
    let (p, k, n) = (5, 5, 20);
    let hyper = (0.1, 0.1, 0.1);
    let e = HbExponents::new(p, k, n, hyper.0, hyper.1, hyper.2);
    for &(f, g, s, big_l) in &[(0.4, 0.3, 1.0, 0.0), (2.0, 5.0, 1.0, 0.0), (1.5, 0.8, 6.0, 0.05), (3.0, 2.0, 10.0, 0.2)] {
        let (phi, psi) = hb2_factors(f, g, s, &e, big_l).unwrap();
        let (ophi, opsi) = hb2_oracle(f, g, s, p, k, n, hyper, big_l);
        assert!(rel(phi, ophi) < 1e-5, "phi({f}, {g}, {s}, L={big_l}): {phi} vs {ophi}");
        assert!(rel(psi, opsi) < 1e-5, "psi({f}, {g}, {s}, L={big_l}): {psi} vs {opsi}");
    }
}

#[test]
fn hb2_factors_survive_large_exponents() {
    // gamma up to 200 with no overflow in the integrand
    let e = HbExponents::new(5, 5, 350, 0.1, 0.1, 0.1);
    for &(f, g) in &[(1e-6, 1e-6), (1e-3, 1e3), (1e6, 1e6), (0.2, 0.1)] {
        let (phi, psi) = hb2_factors(f, g, 1.0, &e, 0.0).unwrap();
        assert!(phi.is_finite() && psi.is_finite() && phi > 0.0 && psi > 0.0, "{f} {g}: {phi} {psi}");
        assert!(phi <= e.phi_limit() * (1.0 + 1e-9) && psi <= e.psi_limit() * (1.0 + 1e-9));
    }
}
