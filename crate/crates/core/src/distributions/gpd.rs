//! Generalized Pareto distribution in the (u, sigma, alpha) parameterization.

use serde::Serialize;

use crate::error::{Error, Result};

use super::pareto::ParetoI;

/// Generalized Pareto distribution bounded from below by `u >= 0`, with scale
/// `sigma > 0` and tail index `alpha > 0`:
///
/// `F(x) = 1 - [1 + (x-u)/sigma]^(-alpha)` for `x >= u`.
///
/// Pareto I is the special case `sigma = u`. Only the heavy-tailed domain is
/// supported (`alpha` finite and positive; no Weibull/Gumbel limits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gpd {
    u: f64,
    sigma: f64,
    alpha: f64,
}

impl Gpd {
    pub fn new(u: f64, sigma: f64, alpha: f64) -> Result<Self> {
        if !(u >= 0.0 && u.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "GPD requires u >= 0, got {u}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "GPD requires sigma > 0, got {sigma}"
            )));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "GPD requires alpha > 0, got {alpha}"
            )));
        }
        Ok(Self { u, sigma, alpha })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Shift parameter of the alternative form
    /// `F(x) = 1 - [(u+lambda)/(x+lambda)]^alpha`, `lambda = sigma - u`.
    pub fn lambda(&self) -> f64 {
        self.sigma - self.u
    }

    /// Tail index in the xi-parameterization, `xi = 1/alpha`.
    pub fn xi(&self) -> f64 {
        1.0 / self.alpha
    }

    pub fn survival(&self, x: f64) -> f64 {
        if x <= self.u {
            1.0
        } else {
            (1.0 + (x - self.u) / self.sigma).powf(-self.alpha)
        }
    }

    pub fn log_survival(&self, x: f64) -> f64 {
        if x <= self.u {
            0.0
        } else {
            -self.alpha * (1.0 + (x - self.u) / self.sigma).ln()
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
            self.alpha / self.sigma
                * (1.0 + (x - self.u) / self.sigma).powf(-self.alpha - 1.0)
        }
    }

    /// `Q(p) = u + sigma [(1-p)^(-1/alpha) - 1]`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p == 0.0 {
            self.u
        } else {
            self.inverse_survival(1.0 - p)
        }
    }

    /// The x with `S(x) = s`, computed without forming `1 - s`.
    pub fn inverse_survival(&self, s: f64) -> f64 {
        self.u + self.sigma * (s.powf(-1.0 / self.alpha) - 1.0)
    }

    /// `E[X | X > u'] = (sigma - u)/(alpha - 1) + alpha u'/(alpha - 1)`.
    pub fn tail_mean(&self, u_prime: f64) -> f64 {
        (self.sigma - self.u) / (self.alpha - 1.0) + self.alpha * u_prime / (self.alpha - 1.0)
    }

    /// Excesses over `u' >= u` are GPD with scale `sigma + u' - u` and the
    /// same tail index.
    pub fn conditional_excess(&self, u_prime: f64) -> Result<Gpd> {
        Gpd::new(u_prime, self.sigma + u_prime - self.u, self.alpha)
    }

    /// The Pareto I special case `sigma = u`, if applicable.
    pub fn as_pareto(&self) -> Option<ParetoI> {
        if self.sigma == self.u {
            ParetoI::new(self.u, self.alpha).ok()
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let g = Gpd::new(0.0, 1.0, 1.0).unwrap();
        assert!((g.cdf(1.0) - 0.5).abs() < 1e-15);

        let g = Gpd::new(0.0, 2.0, 3.0).unwrap();
        assert!((g.density(0.0) - 1.5).abs() < 1e-15);

        let g = Gpd::new(1.0, 1.0, 1.5).unwrap();
        assert_eq!(g.survival(1.0), 1.0);
        assert_eq!(g.quantile(0.0), 1.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let g = Gpd::new(2.0, 3.0, 1.5).unwrap();
        for &p in &[0.0, 0.1, 0.5, 0.99, 0.9999] {
            let q = g.quantile(p);
            assert!((g.cdf(q) - p).abs() < 1e-12, "p={p}");
        }
        assert_eq!(g.quantile(0.0), 2.0);
    }

    #[test]
    fn scollnik_form_agrees() {
        let g = Gpd::new(2.0, 5.0, 1.7).unwrap();
        let lambda = g.lambda();
        for &x in &[2.0, 3.0, 10.0, 500.0] {
            let alt = 1.0 - ((g.u() + lambda) / (x + lambda)).powf(g.alpha());
            assert!((alt - g.cdf(x)).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn pareto_special_case() {
        let g = Gpd::new(2.0, 2.0, 1.5).unwrap();
        let p = g.as_pareto().unwrap();
        for &x in &[2.0, 2.5, 5.0, 100.0] {
            assert!((g.cdf(x) - p.cdf(x)).abs() < 1e-15);
        }
        assert!(Gpd::new(2.0, 3.0, 1.5).unwrap().as_pareto().is_none());
    }

    #[test]
    fn tail_mean_example() {
        let g = Gpd::new(1.0, 1.0, 2.0).unwrap();
        assert!((g.tail_mean(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Gpd::new(-1.0, 1.0, 1.0).is_err());
        assert!(Gpd::new(0.0, 0.0, 1.0).is_err());
        assert!(Gpd::new(0.0, 1.0, -2.0).is_err());
    }
}
