//! Pareto Type I distribution, bounded from below.

use serde::Serialize;

use crate::error::{Error, Result};

/// Pareto I distribution with lower bound `u > 0` and tail index `alpha > 0`:
///
/// `F(x) = 1 - (x/u)^(-alpha)` for `x >= u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParetoI {
    u: f64,
    alpha: f64,
}

impl ParetoI {
    pub fn new(u: f64, alpha: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Pareto I requires u > 0, got {u}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Pareto I requires alpha > 0, got {alpha}"
            )));
        }
        Ok(Self { u, alpha })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.u {
            1.0
        } else {
            (x / self.u).powf(-self.alpha)
        }
    }

    pub fn log_survival(&self, x: f64) -> f64 {
        if x <= self.u {
            0.0
        } else {
            -self.alpha * (x / self.u).ln()
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.u {
            0.0
        } else {
            1.0 - self.survival(x)
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.u {
            0.0
        } else {
            self.alpha * self.u.powf(self.alpha) / x.powf(self.alpha + 1.0)
        }
    }

    /// `Q(p) = u (1-p)^(-1/alpha)`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p == 0.0 {
            self.u
        } else {
            self.inverse_survival(1.0 - p)
        }
    }

    /// The x with `S(x) = s`, computed without forming `1 - s` so that
    /// deep-tail levels keep full precision.
    pub fn inverse_survival(&self, s: f64) -> f64 {
        self.u * s.powf(-1.0 / self.alpha)
    }

    /// `E[X | X > u'] = alpha u' / (alpha - 1)`; proportional to the
    /// threshold and independent of the scale.
    pub fn tail_mean(&self, u_prime: f64) -> f64 {
        self.alpha * u_prime / (self.alpha - 1.0)
    }

    /// Excesses over `u' >= u` are again Pareto I with the same tail index.
    pub fn conditional_excess(&self, u_prime: f64) -> Result<ParetoI> {
        ParetoI::new(u_prime, self.alpha)
    }
}
