//! Heavy-tail risk analytics built on the Pareto distribution family.
//!
//! The crate models loss tails with three nested families — strict Pareto I,
//! the Generalized Pareto distribution (GPD), and the Extended Pareto
//! distribution (EPD, which adds a second-order deviation from the power
//! law) — and derives the quantities practitioners actually consume:
//!
//! - tail-index estimation: Hill estimator, maximum likelihood for GPD/EPD,
//!   profile-likelihood confidence intervals ([`tail_estimation`]);
//! - risk measures: high quantiles (VaR), expected shortfall, top-share /
//!   large-claim index, Lorenz curves, and their threshold-composed versions
//!   ([`risk_measures`]);
//! - reinsurance quantities: return periods and levels, excess-of-loss pure
//!   premiums, threshold-stability diagnostics ([`reinsurance`]);
//! - volatility-filtered dynamic VaR/ES for return series via EWMA or
//!   GARCH(1,1) filtering plus a tail fit on standardized residuals
//!   ([`dynamic_risk`]);
//! - delimited-file ingestion and the standard diagnostic plot series
//!   ([`data_io`]).
//!
//! The `heavytail` binary wraps all of it into reproducible batch runs; see
//! the [`cli`] module.

pub mod cli;
pub mod data_io;
pub mod distributions;
pub mod dynamic_risk;
pub mod error;
pub mod numerics;
pub mod reinsurance;
pub mod risk_measures;
pub mod sample;
pub mod series;
pub mod tail_estimation;

pub use distributions::{Epd, Gpd, ParetoI, TailModel};
pub use error::{Error, Result};
pub use sample::OrderedSample;
pub use series::{Interval, PlotSeries};
