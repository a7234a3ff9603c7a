//! Volatility-filtered dynamic VaR/ES for return series: EWMA and GARCH(1,1)
//! filters, a two-step tail fit on standardized residuals, sliding-window
//! refits, and violation backtesting.
//!
//! The mean is a constant sample mean throughout; the filters are sequential
//! recursions and everything downstream is a pure function of the filtered
//! series. The risk direction is the upper tail of the series handed in, so
//! callers modelling losses should pass negated returns.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{incomplete_beta, ln_beta, normal_pdf, normal_quantile};
use crate::risk_measures::{es_composed, var_composed};
use crate::series::{Interval, PlotSeries};
use crate::tail_estimation::{
    fit_epd_from_exceedances, fit_gpd_from_exceedances, EpdOptions, ModelKind, TailFit,
};

/// Time-indexed log-returns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    timestamps: Vec<f64>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<f64>, returns: Vec<f64>) -> Result<Self> {
        if timestamps.len() != returns.len() {
            return Err(Error::InvalidInput(format!(
                "timestamps ({}) and returns ({}) must have equal length",
                timestamps.len(),
                returns.len()
            )));
        }
        if returns.is_empty() {
            return Err(Error::InvalidInput("return series must be non-empty".into()));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("returns must be finite".into()));
        }
        if timestamps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            timestamps,
            returns,
        })
    }

    /// Index the observations 0..n when no explicit timestamps exist.
    pub fn from_values(returns: Vec<f64>) -> Result<Self> {
        let ts = (0..returns.len()).map(|i| i as f64).collect();
        Self::new(ts, returns)
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn mean(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.len() as f64
    }

    /// Scale every return by a constant (flipping the risk direction is
    /// `scaled(-1.0)`).
    pub fn scaled(&self, factor: f64) -> Self {
        let returns = self.returns.iter().map(|&r| r * factor).collect();
        Self {
            timestamps: self.timestamps.clone(),
            returns,
        }
    }
}

/// GARCH(1,1) parameters with the stationarity constraint
/// `alpha1 + beta1 < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GarchParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl GarchParams {
    pub fn new(alpha0: f64, alpha1: f64, beta1: f64) -> Result<Self> {
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "GARCH alpha0 must be positive and finite, got {alpha0}"
            )));
        }
        if !(alpha1 >= 0.0 && alpha1.is_finite() && beta1 >= 0.0 && beta1.is_finite()) {
            return Err(Error::InvalidParameter(
                "GARCH alpha1 and beta1 must be non-negative and finite".into(),
            ));
        }
        if alpha1 + beta1 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "GARCH stationarity requires alpha1 + beta1 < 1, got {}",
                alpha1 + beta1
            )));
        }
        Ok(Self {
            alpha0,
            alpha1,
            beta1,
        })
    }

    /// Unconditional variance `alpha0 / (1 - alpha1 - beta1)`.
    pub fn stationary_variance(&self) -> f64 {
        self.alpha0 / (1.0 - self.alpha1 - self.beta1)
    }
}

/// A conditional-volatility path aligned to a return series, plus the
/// one-step-ahead forecast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolSeries {
    pub sigma: Vec<f64>,
    pub forecast: f64,
}

/// EWMA variance recursion
/// `sigma^2_{t+1} = beta sigma^2_t + (1-beta) y^2_t`,
/// seeded with `sigma_0` and applied in order; the forecast is the first
/// out-of-sample value.
pub fn ewma_vol(series: &ReturnSeries, beta: f64, sigma0: f64) -> Result<VolSeries> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "EWMA beta must lie in (0,1), got {beta}"
        )));
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "EWMA sigma0 must be positive and finite, got {sigma0}"
        )));
    }
    let y = series.returns();
    let mut sigma = Vec::with_capacity(y.len());
    let mut s2 = sigma0 * sigma0;
    for &yt in y {
        sigma.push(s2.sqrt());
        s2 = beta * s2 + (1.0 - beta) * yt * yt;
    }
    Ok(VolSeries {
        sigma,
        forecast: s2.sqrt(),
    })
}

/// Raw GARCH(1,1) variance recursion
/// `sigma^2_{t+1} = alpha0 + alpha1 (y_t - mu)^2 + beta1 sigma^2_t`,
/// seeded with `sigma0_sq`. Parameters are taken as-is (no validation), so
/// boundary cases like `alpha0 = 0` can be exercised for cross-checks.
pub fn garch_filter(
    returns: &[f64],
    mu: f64,
    alpha0: f64,
    alpha1: f64,
    beta1: f64,
    sigma0_sq: f64,
) -> VolSeries {
    let mut sigma = Vec::with_capacity(returns.len());
    let mut s2 = sigma0_sq;
    for &yt in returns {
        sigma.push(s2.sqrt());
        let e = yt - mu;
        s2 = alpha0 + alpha1 * e * e + beta1 * s2;
    }
    VolSeries {
        sigma,
        forecast: s2.sqrt(),
    }
}

/// Presample variance: the variance of the first `min(50, n)` demeaned
/// observations. Sensitivity to this choice decays geometrically.
fn presample_variance(returns: &[f64], mu: f64) -> f64 {
    let k = returns.len().min(50);
    let head = &returns[..k];
    let v = head.iter().map(|&y| (y - mu) * (y - mu)).sum::<f64>() / k as f64;
    v.max(1e-300)
}

/// A fitted GARCH(1,1) model.
#[derive(Debug, Clone, Serialize)]
pub struct GarchFit {
    pub params: GarchParams,
    /// Constant mean of the series.
    pub mu: f64,
    pub vol: VolSeries,
    /// Gaussian quasi-log-likelihood at the optimum.
    pub loglik: f64,
    /// True when the optimizer stopped against the stationarity constraint.
    pub boundary: bool,
}

/// Gaussian quasi-maximum-likelihood GARCH(1,1) fit with a constant mean.
pub fn fit_garch11(series: &ReturnSeries) -> Result<GarchFit> {
    let n = series.len();
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "GARCH fit needs at least 100 observations, got {n}"
        )));
    }
    let y = series.returns();
    let mu = series.mean();
    let s0_sq = presample_variance(y, mu);
    let var_full = y.iter().map(|&v| (v - mu) * (v - mu)).sum::<f64>() / n as f64;

    // negative quasi-log-likelihood; stationarity enforced by a wall
    let nll = |p: &[f64]| -> f64 {
        let (a0, a1, b1) = (p[0], p[1], p[2]);
        if a0 <= 0.0 || a1 < 0.0 || b1 < 0.0 || a1 + b1 >= 0.9999 {
            return f64::INFINITY;
        }
        let mut s2 = s0_sq;
        let mut acc = 0.0;
        for &yt in y {
            let e = yt - mu;
            acc += s2.ln() + e * e / s2;
            s2 = a0 + a1 * e * e + b1 * s2;
        }
        0.5 * (acc + n as f64 * (2.0 * std::f64::consts::PI).ln())
    };

    let bounds = [
        (var_full * 1e-10, var_full * 10.0),
        (0.0, 0.9999),
        (0.0, 0.9999),
    ];
    let starts: [(f64, f64); 4] = [(0.05, 0.90), (0.10, 0.85), (0.15, 0.70), (0.02, 0.50)];
    let mut best: Option<(Vec<f64>, f64)> = None;
    for &(a1, b1) in &starts {
        let a0 = (var_full * (1.0 - a1 - b1)).max(var_full * 1e-6);
        let r = match crate::numerics::minimize_with(
            nll,
            &[a0, a1, b1],
            &bounds,
            crate::numerics::MinimizeOptions {
                tol: 1e-10,
                max_iterations: 6000,
            },
        ) {
            Ok(r) => r,
            Err(_) => continue,
        };
        if best.as_ref().map_or(true, |(_, obj)| r.objective < *obj) {
            best = Some((r.argmin, r.objective));
        }
    }
    let (argmin, objective) =
        best.ok_or_else(|| Error::Fit("all GARCH optimizer starts failed".into()))?;
    let (a0, a1, b1) = (argmin[0], argmin[1], argmin[2]);
    let boundary = a1 + b1 > 0.998;
    let params = GarchParams::new(a0, a1.max(0.0), b1.max(0.0)).map_err(|e| {
        Error::Fit(format!("GARCH optimum is not admissible: {e}"))
    })?;
    let vol = garch_filter(y, mu, params.alpha0, params.alpha1, params.beta1, s0_sq);
    Ok(GarchFit {
        params,
        mu,
        vol,
        loglik: -objective,
        boundary,
    })
}

/// Standardized residuals `x_t = (y_t - mu) / sigma_t`.
pub fn residuals(series: &ReturnSeries, mu: f64, vol: &VolSeries) -> Result<Vec<f64>> {
    if vol.sigma.len() != series.len() {
        return Err(Error::InvalidInput(format!(
            "volatility series length {} does not match returns length {}",
            vol.sigma.len(),
            series.len()
        )));
    }
    Ok(series
        .returns()
        .iter()
        .zip(&vol.sigma)
        .map(|(&y, &s)| (y - mu) / s)
        .collect())
}

/// Which volatility filter drives the dynamic pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VolFilter {
    /// EWMA with the given decay; seeded with the presample deviation.
    Ewma { beta: f64 },
    /// Fitted GARCH(1,1).
    Garch,
}

/// Threshold specification: an absolute value or an empirical quantile level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSpec {
    Absolute(f64),
    QuantileLevel(f64),
}

impl ThresholdSpec {
    /// Resolve against a raw (unsorted) data vector, using the
    /// `ceil(q n)`-th smallest convention for quantile levels.
    pub fn resolve(&self, data: &[f64]) -> Result<f64> {
        match *self {
            ThresholdSpec::Absolute(u) => {
                if !u.is_finite() {
                    return Err(Error::InvalidInput("threshold must be finite".into()));
                }
                Ok(u)
            }
            ThresholdSpec::QuantileLevel(q) => {
                if !(0.0..=1.0).contains(&q) {
                    return Err(Error::InvalidInput(format!(
                        "threshold quantile level must lie in [0,1], got {q}"
                    )));
                }
                let mut sorted = data.to_vec();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
                let n = sorted.len();
                let k = ((q * n as f64).ceil() as usize).clamp(1, n);
                Ok(sorted[k - 1])
            }
        }
    }
}

/// Output of the two-step dynamic pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct DynamicRisk {
    /// Per-t conditional VaR, aligned to the input timestamps.
    pub var: PlotSeries,
    /// Per-t conditional ES, aligned to the input timestamps.
    pub es: PlotSeries,
    /// The tail fit on standardized residuals.
    pub residual_fit: TailFit,
    pub mu: f64,
    /// One-step-ahead forecasts.
    pub forecast_var: f64,
    pub forecast_es: f64,
}

/// Two-step dynamic VaR/ES: filter the volatility, fit the chosen tail model
/// once on all standardized residuals above the threshold, then scale by the
/// per-t volatility:
/// `VaR_t(p) = mu + sigma_t VaR_X(p)`, `ES_t(p) = mu + sigma_t ES_X(p)`.
pub fn dynamic_var_es(
    series: &ReturnSeries,
    filter: VolFilter,
    tail_u: ThresholdSpec,
    p: f64,
    kind: ModelKind,
) -> Result<DynamicRisk> {
    let mu = series.mean();
    let vol = match filter {
        VolFilter::Ewma { beta } => {
            let s0 = presample_variance(series.returns(), mu).sqrt();
            ewma_vol(series, beta, s0)?
        }
        VolFilter::Garch => fit_garch11(series)?.vol,
    };
    let x = residuals(series, mu, &vol)?;

    let u = tail_u.resolve(&x)?;
    if !(u > 0.0) {
        return Err(Error::InvalidInput(format!(
            "residual tail threshold must be positive (upper tail), got {u}"
        )));
    }
    let exceed: Vec<f64> = x.iter().cloned().filter(|&v| v > u).collect();
    let fit = match kind {
        ModelKind::Gpd => fit_gpd_from_exceedances(&exceed, u, x.len(), 0.95)?,
        ModelKind::Epd => {
            fit_epd_from_exceedances(&exceed, u, x.len(), 0.95, EpdOptions::default())?
        }
    };
    if p >= fit.q_u {
        return Err(Error::ExtrapolationDomain(format!(
            "p = {p} is not deeper than the residual tail mass q_u = {}",
            fit.q_u
        )));
    }
    let var_x = var_composed(&fit, p)?;
    let es_x = es_composed(&fit, p)?;

    let var_t: Vec<f64> = vol.sigma.iter().map(|&s| mu + s * var_x).collect();
    let es_t: Vec<f64> = vol.sigma.iter().map(|&s| mu + s * es_x).collect();

    let mut var_series = PlotSeries::new(series.timestamps().to_vec(), var_t);
    var_series.set_meta("series", "dynamic_var");
    var_series.set_meta("p", p);
    let mut es_series = PlotSeries::new(series.timestamps().to_vec(), es_t);
    es_series.set_meta("series", "dynamic_es");
    es_series.set_meta("p", p);

    Ok(DynamicRisk {
        var: var_series,
        es: es_series,
        residual_fit: fit,
        mu,
        forecast_var: mu + vol.forecast * var_x,
        forecast_es: mu + vol.forecast * es_x,
    })
}

/// Unconditional per-t VaR from a sliding window `[t-h, t+h]` (truncated at
/// the ends): threshold, tail fit, and composed quantile recomputed inside
/// each window. Windows whose fit fails leave a gap and are listed in the
/// series metadata.
pub fn sliding_window_fit(
    series: &ReturnSeries,
    half_width: usize,
    tail_u: ThresholdSpec,
    p: f64,
    kind: ModelKind,
) -> Result<PlotSeries> {
    let n = series.len();
    if n < 2 * half_width + 1 {
        return Err(Error::InsufficientData(format!(
            "sliding window needs at least 2*{half_width}+1 observations, got {n}"
        )));
    }
    let y = series.returns();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut failed = 0usize;
    let mut first_failures = Vec::new();
    for t in 0..n {
        let lo = t.saturating_sub(half_width);
        let hi = (t + half_width + 1).min(n);
        let window = &y[lo..hi];
        let var_t = (|| -> Result<f64> {
            let u = tail_u.resolve(window)?;
            if !(u > 0.0) {
                return Err(Error::InvalidInput(
                    "window threshold must be positive".into(),
                ));
            }
            let exceed: Vec<f64> = window.iter().cloned().filter(|&v| v > u).collect();
            let fit = match kind {
                ModelKind::Gpd => fit_gpd_from_exceedances(&exceed, u, window.len(), 0.95)?,
                ModelKind::Epd => fit_epd_from_exceedances(
                    &exceed,
                    u,
                    window.len(),
                    0.95,
                    EpdOptions::default(),
                )?,
            };
            var_composed(&fit, p)
        })();
        match var_t {
            Ok(v) => {
                xs.push(series.timestamps()[t]);
                ys.push(v);
            }
            Err(e) => {
                failed += 1;
                if first_failures.len() < 5 {
                    first_failures.push(format!("t={t}: {e}"));
                }
            }
        }
    }
    let mut s = PlotSeries::new(xs, ys);
    s.set_meta("series", "sliding_window_var");
    s.set_meta("p", p);
    s.set_meta("half_width", half_width);
    s.set_meta("truncated_before", half_width.min(n));
    s.set_meta("truncated_after", half_width.min(n));
    if failed > 0 {
        s.set_meta("failed_windows", failed);
        s.set_meta("failed_examples", first_failures.join("; "));
    }
    Ok(s)
}

/// Gaussian VaR and ES:
/// `VaR(p) = mu + qnorm(1-p) sigma`, `ES(p) = mu + dnorm(qnorm(1-p))/p sigma`.
pub fn gaussian_var_es(mu: f64, sigma: f64, p: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "sigma must be positive and finite, got {sigma}"
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "gaussian_var_es requires p in (0,1), got {p}"
        )));
    }
    let z = normal_quantile(1.0 - p)?;
    let var = mu + z * sigma;
    let es = mu + normal_pdf(z) / p * sigma;
    Ok((var, es))
}

/// Violation backtest of a VaR series against realized values.
#[derive(Debug, Clone, Serialize)]
pub struct BacktestReport {
    pub violations: usize,
    pub n: usize,
    pub rate: f64,
    /// Exact central 95% band for the violation count under Bin(n, p).
    pub count_band: (usize, usize),
    /// The count band divided by n.
    pub rate_band: Interval,
}

/// Regularized binomial CDF `P[X <= k]` for X ~ Bin(n, p), via the
/// incomplete-beta identity.
fn binomial_cdf(k: usize, n: usize, p: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    // P[X <= k] = I_{1-p}(n-k, k+1) (regularized)
    let a = (n - k) as f64;
    let b = k as f64 + 1.0;
    let num = incomplete_beta(1.0 - p, a, b).unwrap_or(f64::NAN);
    num / ln_beta(a, b).exp()
}

/// Count exceedances of the realized series over its VaR series and compare
/// the rate to the exact binomial 95% band around `n p`.
pub fn backtest(var_series: &PlotSeries, series: &ReturnSeries, p: f64) -> Result<BacktestReport> {
    if var_series.len() != series.len() {
        return Err(Error::InvalidInput(format!(
            "VaR series length {} does not match return series length {}",
            var_series.len(),
            series.len()
        )));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "backtest requires p in (0,1), got {p}"
        )));
    }
    let n = series.len();
    let violations = series
        .returns()
        .iter()
        .zip(&var_series.y)
        .filter(|&(&y, &v)| y > v)
        .count();

    // exact central band: smallest k with CDF(k) > 0.025 up to smallest k
    // with CDF(k) >= 0.975
    let lo_tail = 0.025;
    let hi_tail = 0.975;
    let mut k_lo = 0usize;
    while k_lo < n && binomial_cdf(k_lo, n, p) <= lo_tail {
        k_lo += 1;
    }
    let mut k_hi = k_lo;
    while k_hi < n && binomial_cdf(k_hi, n, p) < hi_tail {
        k_hi += 1;
    }

    Ok(BacktestReport {
        violations,
        n,
        rate: violations as f64 / n as f64,
        count_band: (k_lo, k_hi),
        rate_band: Interval::new(k_lo as f64 / n as f64, k_hi as f64 / n as f64, 0.95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::TailModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn gaussian_returns(seed: u64, n: usize, sd: f64) -> Vec<f64> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                sd * normal_quantile(u.max(1e-16).min(1.0 - 1e-16)).unwrap()
            })
            .collect()
    }

    /// Simulate GARCH(1,1) with standard-normal innovations; returns
    /// (returns, sigma path including the seed value at t=0).
    fn simulate_garch(
        seed: u64,
        n: usize,
        a0: f64,
        a1: f64,
        b1: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut s2 = a0 / (1.0 - a1 - b1);
        let mut y = Vec::with_capacity(n);
        let mut sig = Vec::with_capacity(n);
        for _ in 0..n {
            sig.push(s2.sqrt());
            let u: f64 = rng.gen();
            let x = normal_quantile(u.max(1e-16).min(1.0 - 1e-16)).unwrap();
            let yt = s2.sqrt() * x;
            y.push(yt);
            s2 = a0 + a1 * yt * yt + b1 * s2;
        }
        (y, sig)
    }

    #[test]
    fn return_series_validation() {
        assert!(ReturnSeries::new(vec![0.0, 1.0], vec![0.1]).is_err());
        assert!(ReturnSeries::new(vec![1.0, 1.0], vec![0.1, 0.2]).is_err());
        assert!(ReturnSeries::new(vec![0.0, 1.0], vec![0.1, f64::NAN]).is_err());
        assert!(ReturnSeries::from_values(vec![]).is_err());
        let s = ReturnSeries::from_values(vec![0.1, -0.2]).unwrap();
        assert_eq!(s.timestamps(), &[0.0, 1.0]);
    }

    #[test]
    fn ewma_fixed_point_on_constant_magnitude() {
        let c = 0.02;
        let y = vec![c, -c, c, -c, c, -c];
        let s = ReturnSeries::from_values(y).unwrap();
        let v = ewma_vol(&s, 0.94, c).unwrap();
        for &sig in &v.sigma {
            assert!((sig - c).abs() < 1e-15);
        }
        assert!((v.forecast - c).abs() < 1e-15);
    }

    #[test]
    fn ewma_beta_near_one_freezes_sigma() {
        let s = ReturnSeries::from_values(vec![0.05, -0.03, 0.08, 0.01]).unwrap();
        let v = ewma_vol(&s, 0.9999, 0.01).unwrap();
        assert!((v.sigma.last().unwrap() - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ewma_hand_recursion() {
        // beta = 0.94, y = {0.01, -0.02}, sigma0 = 0.01
        let s = ReturnSeries::from_values(vec![0.01, -0.02]).unwrap();
        let beta: f64 = 0.94;
        let v = ewma_vol(&s, beta, 0.01).unwrap();
        assert!((v.sigma[0] - 0.01).abs() < 1e-18);
        // mirror the recursion's float expressions exactly
        let s2_2: f64 = beta * (0.01 * 0.01) + (1.0 - beta) * (0.01 * 0.01);
        assert_eq!(v.sigma[1], s2_2.sqrt());
        let s2_3: f64 = beta * s2_2 + (1.0 - beta) * (-0.02f64 * -0.02f64);
        assert_eq!(v.forecast, s2_3.sqrt());
        // and the numbers match the hand calculation
        assert!((s2_2 - 1e-4).abs() < 1e-18);
        assert!((s2_3 - (0.94e-4 + 0.06 * 4e-4)).abs() < 1e-18);
        assert!(ewma_vol(&s, 1.0, 0.01).is_err());
    }

    #[test]
    fn ewma_equals_garch_with_matched_parameters() {
        // EWMA(beta) and GARCH(0, 1-beta, beta) produce identical sigma paths
        // under equal initialization; alpha0 = 0 is reachable only through
        // the raw filter.
        let y = gaussian_returns(2, 300, 0.01);
        let s = ReturnSeries::from_values(y.clone()).unwrap();
        let beta = 0.94;
        let e = ewma_vol(&s, beta, 0.012).unwrap();
        let g = garch_filter(&y, 0.0, 0.0, 1.0 - beta, beta, 0.012 * 0.012);
        for (a, b) in e.sigma.iter().zip(&g.sigma) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((e.forecast - g.forecast).abs() < 1e-15);
    }

    #[test]
    fn garch_filter_reproduces_simulator_path() {
        let (y, sig) = simulate_garch(7, 2000, 0.05, 0.10, 0.85);
        let v = garch_filter(&y, 0.0, 0.05, 0.10, 0.85, sig[0] * sig[0]);
        for (a, b) in v.sigma.iter().zip(&sig) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn garch_fit_recovers_parameters_roughly() {
        // tight recovery is exercised in the acceptance suite; here just a
        // sanity box on one path
        let (y, _) = simulate_garch(11, 4000, 0.05, 0.10, 0.85);
        let s = ReturnSeries::from_values(y).unwrap();
        let fit = fit_garch11(&s).unwrap();
        assert!((fit.params.alpha1 - 0.10).abs() < 0.06, "{:?}", fit.params);
        assert!((fit.params.beta1 - 0.85).abs() < 0.10, "{:?}", fit.params);
        assert!(!fit.boundary);
        // optimality on the same data: loglik at optimum >= at the truth
        let truth_nll = {
            let mu = fit.mu;
            let y = s.returns();
            let s0 = presample_variance(y, mu);
            let v = garch_filter(y, mu, 0.05, 0.10, 0.85, s0);
            let mut acc = 0.0;
            for (yt, sig) in y.iter().zip(&v.sigma) {
                let e = yt - mu;
                acc += (sig * sig).ln() + e * e / (sig * sig);
            }
            -0.5 * (acc + y.len() as f64 * (2.0 * std::f64::consts::PI).ln())
        };
        assert!(
            fit.loglik >= truth_nll - 1e-6,
            "fit {} vs truth {}",
            fit.loglik,
            truth_nll
        );
    }

    #[test]
    fn garch_fit_on_iid_gaussian_gives_small_alpha1() {
        let y = gaussian_returns(5, 3000, 0.01);
        let s = ReturnSeries::from_values(y).unwrap();
        let fit = fit_garch11(&s).unwrap();
        assert!(fit.params.alpha1 < 0.05, "alpha1 = {}", fit.params.alpha1);
    }

    #[test]
    fn garch_fit_needs_data() {
        let s = ReturnSeries::from_values(vec![0.01; 50]).unwrap();
        assert!(matches!(
            fit_garch11(&s),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn residuals_reconstruct_returns() {
        let y = gaussian_returns(3, 500, 0.02);
        let s = ReturnSeries::from_values(y.clone()).unwrap();
        let mu = s.mean();
        let v = ewma_vol(&s, 0.9, 0.02).unwrap();
        let x = residuals(&s, mu, &v).unwrap();
        for ((&yt, &sig), &xt) in y.iter().zip(&v.sigma).zip(&x) {
            assert!((mu + sig * xt - yt).abs() <= 1e-14 * yt.abs().max(1.0));
        }
        // zero returns with mu = 0 give zero residuals
        let z = ReturnSeries::from_values(vec![0.0; 10]).unwrap();
        let v = ewma_vol(&z, 0.9, 1.0).unwrap();
        assert!(residuals(&z, 0.0, &v).unwrap().iter().all(|&x| x == 0.0));
        // simulated GARCH residuals have variance near 1
        let (y, sig) = simulate_garch(13, 5000, 0.05, 0.1, 0.85);
        let s = ReturnSeries::from_values(y).unwrap();
        let v = garch_filter(s.returns(), 0.0, 0.05, 0.1, 0.85, sig[0] * sig[0]);
        let x = residuals(&s, 0.0, &v).unwrap();
        let var: f64 = x.iter().map(|&xi| xi * xi).sum::<f64>() / x.len() as f64;
        assert!((var - 1.0).abs() < 3.0 * (2.0f64 / 5000.0).sqrt(), "var {var}");
    }

    #[test]
    fn dynamic_var_scale_equivariance() {
        // antithetic heavy-ish returns; doubling the series doubles VaR_t
        let m = TailModel::pareto(1.0, 3.0).unwrap();
        let mag = m.sample(19, 400).unwrap();
        let mut y = Vec::new();
        for (i, v) in mag.iter().enumerate() {
            y.push(if i % 2 == 0 { *v } else { -*v } * 0.01);
        }
        let s1 = ReturnSeries::from_values(y).unwrap();
        let s2 = s1.scaled(2.0);
        let d1 = dynamic_var_es(
            &s1,
            VolFilter::Ewma { beta: 0.94 },
            ThresholdSpec::QuantileLevel(0.9),
            0.01,
            ModelKind::Gpd,
        )
        .unwrap();
        let d2 = dynamic_var_es(
            &s2,
            VolFilter::Ewma { beta: 0.94 },
            ThresholdSpec::QuantileLevel(0.9),
            0.01,
            ModelKind::Gpd,
        )
        .unwrap();
        for (a, b) in d1.var.y.iter().zip(&d2.var.y) {
            assert!((2.0 * a - b).abs() < 1e-10 * b.abs().max(1e-12), "{a} {b}");
        }
        // ES dominates VaR pointwise
        for (v, e) in d1.var.y.iter().zip(&d1.es.y) {
            assert!(e >= v);
        }
    }

    #[test]
    fn dynamic_var_nearly_constant_under_frozen_filter() {
        let m = TailModel::pareto(1.0, 3.0).unwrap();
        let mag = m.sample(23, 600).unwrap();
        let y: Vec<f64> = mag
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { *v } else { -*v } * 0.01)
            .collect();
        let s = ReturnSeries::from_values(y).unwrap();
        let d = dynamic_var_es(
            &s,
            VolFilter::Ewma { beta: 0.999999 },
            ThresholdSpec::QuantileLevel(0.9),
            0.02,
            ModelKind::Gpd,
        )
        .unwrap();
        let first = d.var.y[0];
        for &v in &d.var.y {
            assert!(
                ((v - first) / first).abs() < 1e-3,
                "VaR varies under a frozen filter"
            );
        }
    }

    #[test]
    fn sliding_window_basics() {
        let m = TailModel::pareto(1.0, 1.5).unwrap();
        let mag = m.sample(31, 401).unwrap();
        let y: Vec<f64> = mag
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { *v } else { -*v })
            .collect();
        let s = ReturnSeries::from_values(y).unwrap();
        // half width covering everything: one effective window
        let h = (s.len() - 1) / 2;
        let sw = sliding_window_fit(
            &s,
            h,
            ThresholdSpec::QuantileLevel(0.7),
            0.05,
            ModelKind::Gpd,
        )
        .unwrap();
        // the central window is the full series
        let mid = sw.x.iter().position(|&t| t == h as f64).unwrap();
        assert!(sw.y[mid].is_finite());

        // window too short for the series is an error
        assert!(matches!(
            sliding_window_fit(
                &s,
                300,
                ThresholdSpec::QuantileLevel(0.7),
                0.05,
                ModelKind::Gpd
            ),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn sliding_window_records_failures_as_gaps() {
        // windows with too few positive values cannot be fitted
        let y: Vec<f64> = (0..61)
            .map(|i| if i == 30 { 1.0 } else { -1.0 - (i as f64) * 1e-3 })
            .collect();
        let s = ReturnSeries::from_values(y).unwrap();
        let sw = sliding_window_fit(
            &s,
            10,
            ThresholdSpec::QuantileLevel(0.9),
            0.05,
            ModelKind::Gpd,
        )
        .unwrap();
        assert!(sw.len() < s.len());
        assert!(sw.metadata.contains_key("failed_windows"));
    }

    #[test]
    fn gaussian_var_es_reference_values() {
        let (v, e) = gaussian_var_es(0.0, 1.0, 0.5).unwrap();
        assert!(v.abs() < 1e-14);
        assert!((e - 0.797_884_560_802_865_4).abs() < 1e-12);

        let (v, _) = gaussian_var_es(0.0, 1.0, 0.01).unwrap();
        assert!((v - 2.326_347_874_040_841).abs() < 1e-9);

        // affine equivariance
        let (v1, e1) = gaussian_var_es(0.1, 1.0, 0.05).unwrap();
        let (v2, e2) = gaussian_var_es(0.1, 2.0, 0.05).unwrap();
        assert!(((v2 - 0.1) - 2.0 * (v1 - 0.1)).abs() < 1e-12);
        assert!(((e2 - 0.1) - 2.0 * (e1 - 0.1)).abs() < 1e-12);

        assert!(gaussian_var_es(0.0, 0.0, 0.05).is_err());
        assert!(gaussian_var_es(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn backtest_extreme_var_levels() {
        let y = gaussian_returns(41, 500, 0.01);
        let s = ReturnSeries::from_values(y).unwrap();
        let huge = PlotSeries::new(s.timestamps().to_vec(), vec![1e100; s.len()]);
        let r = backtest(&huge, &s, 0.01).unwrap();
        assert_eq!(r.violations, 0);
        let tiny = PlotSeries::new(s.timestamps().to_vec(), vec![-1e100; s.len()]);
        let r = backtest(&tiny, &s, 0.01).unwrap();
        assert_eq!(r.violations, s.len());
        assert!((r.rate - 1.0).abs() < 1e-15);

        let short = PlotSeries::new(vec![0.0], vec![0.0]);
        assert!(backtest(&short, &s, 0.01).is_err());
    }

    #[test]
    fn backtest_band_covers_the_mean() {
        // Bin(1000, 0.01): central 95% band must contain the mean 10
        let y = vec![0.001; 1000];
        let ts: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let s = ReturnSeries::new(ts.clone(), y).unwrap();
        let v = PlotSeries::new(ts, vec![1.0; 1000]);
        let r = backtest(&v, &s, 0.01).unwrap();
        assert!(r.count_band.0 <= 10 && 10 <= r.count_band.1, "{:?}", r.count_band);
        // band endpoints have the right tail masses
        assert!(binomial_cdf(r.count_band.0, 1000, 0.01) > 0.025);
        if r.count_band.0 > 0 {
            assert!(binomial_cdf(r.count_band.0 - 1, 1000, 0.01) <= 0.025);
        }
        assert!(binomial_cdf(r.count_band.1, 1000, 0.01) >= 0.975);
    }
}
