//! Special functions, adaptive quadrature and the hierarchical Bayes
//! shrinkage factors.

pub mod hb;
pub mod quadrature;
pub mod special;

pub use hb::{
    hb1_phi, hb1_phi_limit, hb1_ratio, hb2_factors, hb2_factors_with, hb2_ratios, hb2_ratios_with, Hb2Options,
    HbExponents, DEGENERATE_STAT,
};
pub use quadrature::{integrate_adaptive_1d, integrate_with_budget, Quadrature, MAX_SUBDIVISIONS};
pub use special::{f_quantile, f_sf, ln_beta, ln_gamma, ln_inc_beta, reg_inc_beta, reg_upper_inc_gamma};
