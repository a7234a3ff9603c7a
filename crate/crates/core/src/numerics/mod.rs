//! Shared numerical kernels with explicit tolerances: adaptive quadrature,
//! bracketed root finding, derivative-free minimization, and the special
//! functions the risk formulas need.

mod optimize;
mod quadrature;
mod roots;
mod special;

pub use optimize::{minimize, minimize_with, MinimizeOptions, OptimResult};
pub use quadrature::{
    integrate_finite, integrate_finite_with, QuadratureOptions, QuadratureResult,
};
pub use roots::find_root;
pub use special::{
    chi2_quantile_1, incomplete_beta, ln_beta, ln_gamma, normal_pdf, normal_quantile,
};
