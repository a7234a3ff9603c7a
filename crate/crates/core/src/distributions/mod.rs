//! The Pareto I / Generalized Pareto / Extended Pareto family: exact
//! distribution functions, inverse-transform sampling, conditional-excess
//! closure, and tail means.
//!
//! All models are immutable after construction; every operation is a pure
//! function of its arguments. Sampling takes an explicit seed and builds a
//! local generator, so there is no shared mutable state anywhere.

mod epd;
mod gpd;
mod pareto;

pub use epd::Epd;
pub use gpd::Gpd;
pub use pareto::ParetoI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tagged union over the three Pareto-family models; the single currency of
/// every fitting and risk operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family")]
pub enum TailModel {
    ParetoI(ParetoI),
    Gpd(Gpd),
    Epd(Epd),
}

impl From<ParetoI> for TailModel {
    fn from(p: ParetoI) -> Self {
        TailModel::ParetoI(p)
    }
}

impl From<Gpd> for TailModel {
    fn from(g: Gpd) -> Self {
        TailModel::Gpd(g)
    }
}

impl From<Epd> for TailModel {
    fn from(e: Epd) -> Self {
        TailModel::Epd(e)
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be finite, got {x}"
        )))
    }
}

impl TailModel {
    pub fn pareto(u: f64, alpha: f64) -> Result<Self> {
        Ok(ParetoI::new(u, alpha)?.into())
    }

    pub fn gpd(u: f64, sigma: f64, alpha: f64) -> Result<Self> {
        Ok(Gpd::new(u, sigma, alpha)?.into())
    }

    pub fn epd(u: f64, delta: f64, tau: f64, alpha: f64) -> Result<Self> {
        Ok(Epd::new(u, delta, tau, alpha)?.into())
    }

    /// Left endpoint of the support.
    pub fn lower_bound(&self) -> f64 {
        match self {
            TailModel::ParetoI(p) => p.u(),
            TailModel::Gpd(g) => g.u(),
            TailModel::Epd(e) => e.u(),
        }
    }

    /// Tail index.
    pub fn alpha(&self) -> f64 {
        match self {
            TailModel::ParetoI(p) => p.alpha(),
            TailModel::Gpd(g) => g.alpha(),
            TailModel::Epd(e) => e.alpha(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            TailModel::ParetoI(_) => "pareto",
            TailModel::Gpd(_) => "gpd",
            TailModel::Epd(_) => "epd",
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_finite("x", x)?;
        Ok(match self {
            TailModel::ParetoI(p) => p.cdf(x),
            TailModel::Gpd(g) => g.cdf(x),
            TailModel::Epd(e) => e.cdf(x),
        })
    }

    /// Survival function, computed directly rather than as `1 - cdf` so that
    /// deep-tail probabilities keep full relative precision.
    pub fn survival(&self, x: f64) -> Result<f64> {
        check_finite("x", x)?;
        Ok(self.survival_raw(x))
    }

    pub(crate) fn survival_raw(&self, x: f64) -> f64 {
        match self {
            TailModel::ParetoI(p) => p.survival(x),
            TailModel::Gpd(g) => g.survival(x),
            TailModel::Epd(e) => e.survival(x),
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        check_finite("x", x)?;
        Ok(match self {
            TailModel::ParetoI(p) => p.density(x),
            TailModel::Gpd(g) => g.density(x),
            TailModel::Epd(e) => e.density(x),
        })
    }

    /// Quantile function. Closed form for Pareto I and GPD; numeric
    /// inversion of the survival function for the EPD.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidInput(format!(
                "quantile requires p in [0, 1), got {p}"
            )));
        }
        match self {
            TailModel::ParetoI(m) => Ok(m.quantile(p)),
            TailModel::Gpd(g) => Ok(g.quantile(p)),
            TailModel::Epd(e) => e.quantile(p),
        }
    }

    /// The x with `S(x) = s` for `s` in (0, 1]: the quantile parameterized by
    /// the survival level directly, avoiding the `1 - p` round trip that
    /// destroys precision deep in the tail.
    pub fn inverse_survival(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "inverse_survival requires s in (0, 1], got {s}"
            )));
        }
        match self {
            TailModel::ParetoI(m) => Ok(m.inverse_survival(s)),
            TailModel::Gpd(g) => Ok(g.inverse_survival(s)),
            TailModel::Epd(e) => e.inverse_survival(s),
        }
    }

    /// Inverse-transform sampling: `n` draws, deterministic for a given seed.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidInput("sample size must be >= 1".into()));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let p: f64 = rng.gen();
            out.push(self.quantile(p)?);
        }
        Ok(out)
    }

    /// Mean above a threshold, `E[X | X > u']`, for `u'` at or above the
    /// lower bound. Closed form for Pareto I and GPD; quadrature for the EPD.
    pub fn tail_mean(&self, u_prime: f64) -> Result<f64> {
        check_finite("u'", u_prime)?;
        let alpha = self.alpha();
        if alpha <= 1.0 {
            return Err(Error::InfiniteMean { alpha });
        }
        if u_prime < self.lower_bound() {
            return Err(Error::InvalidInput(format!(
                "threshold u' = {u_prime} below the lower bound {}",
                self.lower_bound()
            )));
        }
        match self {
            TailModel::ParetoI(p) => Ok(p.tail_mean(u_prime)),
            TailModel::Gpd(g) => Ok(g.tail_mean(u_prime)),
            TailModel::Epd(e) => e.tail_mean(u_prime),
        }
    }

    /// Mean excess function `e(d) = E[X - d | X > d] = tail_mean(d) - d`.
    pub fn mean_excess(&self, d: f64) -> Result<f64> {
        Ok(self.tail_mean(d)? - d)
    }

    /// The conditional distribution of `X` given `X > u'`, which stays inside
    /// the same family with the same tail index.
    pub fn conditional_excess(&self, u_prime: f64) -> Result<TailModel> {
        check_finite("u'", u_prime)?;
        if u_prime < self.lower_bound() {
            return Err(Error::InvalidInput(format!(
                "threshold u' = {u_prime} below the lower bound {}",
                self.lower_bound()
            )));
        }
        Ok(match self {
            TailModel::ParetoI(p) => p.conditional_excess(u_prime)?.into(),
            TailModel::Gpd(g) => g.conditional_excess(u_prime)?.into(),
            TailModel::Epd(e) => e.conditional_excess(u_prime)?.into(),
        })
    }
}
