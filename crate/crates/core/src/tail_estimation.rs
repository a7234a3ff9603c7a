//! Tail-parameter estimation: Hill estimator with asymptotic confidence
//! intervals, maximum likelihood for GPD and EPD above a threshold, and
//! profile-likelihood confidence intervals for the tail index.
//!
//! Thresholds are always inputs, never auto-selected; [`alpha_stability`]
//! supports the human choice. All fits are deterministic given data and
//! options: the EPD multi-start grid is fixed and nothing draws randomness.

use serde::Serialize;

use crate::distributions::{Epd, Gpd, ParetoI, TailModel};
use crate::error::{Error, Result};
use crate::numerics::{chi2_quantile_1, find_root, minimize_with, normal_quantile, MinimizeOptions};
use crate::sample::OrderedSample;
use crate::series::{Interval, PlotSeries};

/// Which estimator produced a [`TailFit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Hill,
    MleGpd,
    MleEpd,
}

impl FitMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FitMethod::Hill => "hill",
            FitMethod::MleGpd => "mle_gpd",
            FitMethod::MleEpd => "mle_epd",
        }
    }
}

/// A fitted conditional tail model above a threshold `u`, together with the
/// exceedance bookkeeping every composed risk measure needs.
#[derive(Debug, Clone, Serialize)]
pub struct TailFit {
    /// The conditional law of X given X > u (its lower bound is `u`).
    pub model: TailModel,
    /// Threshold the tail was fitted above.
    pub u: f64,
    /// Number of observations strictly above `u`.
    pub n_exceed: usize,
    /// Exceedance probability estimate `n_exceed / n`.
    pub q_u: f64,
    /// Log-likelihood of the exceedances under `model` (x-space density).
    pub loglik: f64,
    /// Confidence interval for the tail index at the stated level.
    pub alpha_ci: Interval,
    pub method: FitMethod,
}

impl TailFit {
    pub fn alpha(&self) -> f64 {
        self.model.alpha()
    }
}

/// One record of a Hill plot: the estimate from the top `k` observations.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HillRecord {
    /// Number of top order statistics used.
    pub k: usize,
    pub alpha_hat: f64,
    pub ci: Interval,
}

/// The Hill plot data: one record per k in [2, n-1].
#[derive(Debug, Clone, Serialize)]
pub struct HillSeries {
    pub records: Vec<HillRecord>,
}

impl HillSeries {
    pub fn to_plot_series(&self) -> PlotSeries {
        let x: Vec<f64> = self.records.iter().map(|r| r.k as f64).collect();
        let y: Vec<f64> = self.records.iter().map(|r| r.alpha_hat).collect();
        let lo: Vec<f64> = self.records.iter().map(|r| r.ci.lo).collect();
        let hi: Vec<f64> = self.records.iter().map(|r| r.ci.hi).collect();
        let mut s = PlotSeries::with_bands(x, y, lo, hi);
        s.set_meta("series", "hill");
        s.set_meta("x_axis", "k (number of top order statistics)");
        s
    }
}

fn check_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence level must lie in (0,1), got {level}"
        )));
    }
    normal_quantile((1.0 + level) / 2.0)
}

// ---------------------------------------------------------------------------
// Hill estimator
// ---------------------------------------------------------------------------

/// Hill's estimator of the tail index above `u`:
/// `alpha_hat = [ mean of log(x_i) - log(u) over exceedances ]^-1`,
/// with the Gaussian-limit confidence interval
/// `alpha_hat +/- z alpha_hat / sqrt(n_u)`.
pub fn hill(sample: &OrderedSample, u: f64, level: f64) -> Result<TailFit> {
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "hill threshold must be positive and finite, got {u}"
        )));
    }
    hill_from_exceedances(sample.exceedances(u), u, sample.n(), level)
}

/// Hill estimator from pre-extracted exceedances (all strictly above `u`)
/// out of a source sample of size `n_total`.
pub fn hill_from_exceedances(
    exceedances: &[f64],
    u: f64,
    n_total: usize,
    level: f64,
) -> Result<TailFit> {
    let z = check_level(level)?;
    let n_u = exceedances.len();
    if n_u < 2 {
        return Err(Error::InsufficientData(format!(
            "hill needs at least 2 exceedances above u = {u}, found {n_u}"
        )));
    }
    let mean_log: f64 = exceedances.iter().map(|&x| (x / u).ln()).sum::<f64>() / n_u as f64;
    let alpha = 1.0 / mean_log;
    let half = z * alpha / (n_u as f64).sqrt();
    let model = ParetoI::new(u, alpha)?;
    let loglik: f64 = exceedances.iter().map(|&x| model.density(x).ln()).sum();
    Ok(TailFit {
        model: model.into(),
        u,
        n_exceed: n_u,
        q_u: n_u as f64 / n_total as f64,
        loglik,
        alpha_ci: Interval::new(alpha - half, alpha + half, level),
        method: FitMethod::Hill,
    })
}

/// The Hill plot: for each k in [2, n-1], the Hill estimate using the top k
/// order statistics, with the threshold at the (k+1)-th largest observation.
pub fn hill_series(sample: &OrderedSample, level: f64) -> Result<HillSeries> {
    let z = check_level(level)?;
    let n = sample.n();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "hill series needs n >= 3 observations, got {n}"
        )));
    }
    let values = sample.values();
    let mut records = Vec::with_capacity(n - 2);
    // cumulative sum of logs from the top
    let mut log_sum = values[n - 1].ln();
    for k in 2..n {
        let threshold = values[n - 1 - k]; // (k+1)-th largest
        log_sum += values[n - k].ln();
        let mean_excess_log = log_sum / k as f64 - threshold.ln();
        let alpha_hat = 1.0 / mean_excess_log;
        let half = z * alpha_hat / (k as f64).sqrt();
        records.push(HillRecord {
            k,
            alpha_hat,
            ci: Interval::new(alpha_hat - half, alpha_hat + half, level),
        });
    }
    Ok(HillSeries { records })
}

/// Confidence interval for a high composed quantile based on the Hill fit,
/// by the delta method: the relative standard error of `Q_u(1-p)` is
/// `sqrt(1 + log(q_u/p)^2) / (alpha sqrt(n_u))`.
pub fn quantile_ci_hill(
    sample: &OrderedSample,
    u: f64,
    p: f64,
    level: f64,
) -> Result<Interval> {
    let z = check_level(level)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidInput(format!(
            "quantile_ci_hill requires p in (0,1), got {p}"
        )));
    }
    let fit = hill(sample, u, level)?;
    if p >= fit.q_u {
        return Err(Error::ExtrapolationDomain(format!(
            "p = {p} is not beyond the threshold exceedance probability q_u = {}",
            fit.q_u
        )));
    }
    let alpha = fit.alpha();
    let q_hat = u * (p / fit.q_u).powf(-1.0 / alpha);
    let log_ratio = (fit.q_u / p).ln();
    let rel_se = (1.0 + log_ratio * log_ratio).sqrt() / (alpha * (fit.n_exceed as f64).sqrt());
    let half = z * q_hat * rel_se;
    Ok(Interval::new(q_hat - half, q_hat + half, level))
}

// ---------------------------------------------------------------------------
// GPD maximum likelihood
// ---------------------------------------------------------------------------

/// GPD log-likelihood of excesses `y_i = x_i - u` at (sigma, alpha):
/// `sum [ log alpha - log sigma - (alpha+1) log(1 + y_i/sigma) ]`.
fn gpd_loglik(excesses: &[f64], sigma: f64, alpha: f64) -> f64 {
    let mut ll = 0.0;
    let la = alpha.ln();
    let ls = sigma.ln();
    for &y in excesses {
        ll += la - ls - (alpha + 1.0) * (1.0 + y / sigma).ln();
    }
    ll
}

fn check_degenerate(excesses: &[f64], u: f64) -> Result<()> {
    let min = excesses.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = excesses.iter().cloned().fold(0.0f64, f64::max);
    if max - min <= 1e-12 * max.max(1.0) {
        return Err(Error::DegenerateData(format!(
            "all {} excesses above u = {u} are (numerically) equal to {max}; \
             the likelihood is maximized on a parameter-space boundary",
            excesses.len()
        )));
    }
    Ok(())
}

/// Maximum-likelihood GPD fit above `u`. Needs at least 5 exceedances.
/// The confidence interval for alpha comes from the profile likelihood.
pub fn fit_gpd(sample: &OrderedSample, u: f64, level: f64) -> Result<TailFit> {
    fit_gpd_from_exceedances(sample.exceedances(u), u, sample.n(), level)
}

/// GPD fit from pre-extracted exceedances (all strictly above `u`) out of a
/// source sample of size `n_total`.
pub fn fit_gpd_from_exceedances(
    exceedances: &[f64],
    u: f64,
    n_total: usize,
    level: f64,
) -> Result<TailFit> {
    check_level(level)?;
    let n_u = exceedances.len();
    if n_u < 5 {
        return Err(Error::InsufficientData(format!(
            "GPD fit needs at least 5 exceedances above u = {u}, found {n_u}"
        )));
    }
    let excesses: Vec<f64> = exceedances.iter().map(|&x| x - u).collect();
    if excesses.iter().any(|&y| y <= 0.0) {
        return Err(Error::DegenerateData(
            "exceedance set contains the threshold itself".into(),
        ));
    }
    check_degenerate(&excesses, u)?;

    let (sigma, alpha, loglik) = gpd_mle(&excesses)?;
    let model = Gpd::new(u, sigma, alpha)?;

    let alpha_ci = profile_ci_gpd(&excesses, alpha, sigma, loglik, level)?;
    Ok(TailFit {
        model: model.into(),
        u,
        n_exceed: n_u,
        q_u: n_u as f64 / n_total as f64,
        loglik,
        alpha_ci,
        method: FitMethod::MleGpd,
    })
}

/// Joint MLE over (sigma, alpha) in log space, multi-start.
fn gpd_mle(excesses: &[f64]) -> Result<(f64, f64, f64)> {
    let n = excesses.len() as f64;
    let mean = excesses.iter().sum::<f64>() / n;
    let var = excesses.iter().map(|&y| (y - mean).powi(2)).sum::<f64>() / n;

    // method-of-moments alpha from var/mean^2 = alpha/(alpha-2), valid when
    // the ratio exceeds 1; otherwise start in the moderately heavy regime
    let ratio = var / (mean * mean);
    let alpha_mom = if ratio > 1.05 {
        (2.0 * ratio / (ratio - 1.0)).clamp(0.5, 50.0)
    } else {
        5.0
    };
    let sigma_mom = if alpha_mom > 1.0 {
        mean * (alpha_mom - 1.0)
    } else {
        mean
    };

    let nll = |p: &[f64]| -gpd_loglik(excesses, p[0].exp(), p[1].exp());
    let bounds = [
        (mean.ln() - 23.0, mean.ln() + 23.0),
        ((1e-3f64).ln(), (1e4f64).ln()),
    ];
    let starts = [
        [sigma_mom.ln(), alpha_mom.ln()],
        [mean.ln(), (1.5f64).ln()],
        [(2.0 * mean).ln(), (3.0f64).ln()],
    ];

    let mut best: Option<(f64, f64, f64)> = None;
    for start in &starts {
        let r = match minimize_with(
            nll,
            start,
            &bounds,
            MinimizeOptions {
                tol: 1e-11,
                max_iterations: 4000,
            },
        ) {
            Ok(r) => r,
            Err(_) => continue,
        };
        let cand = (r.argmin[0].exp(), r.argmin[1].exp(), -r.objective);
        if best.map_or(true, |(_, _, ll)| cand.2 > ll) {
            best = Some(cand);
        }
    }
    let (sigma, alpha, loglik) =
        best.ok_or_else(|| Error::Fit("all GPD optimizer starts failed".into()))?;

    // a solution pinned to the box edge means the likelihood wants to leave
    // the heavy-tailed regime entirely
    if alpha <= 1.1e-3 || alpha >= 0.99e4 {
        return Err(Error::Fit(format!(
            "GPD likelihood maximized on the parameter boundary \
             (sigma = {sigma:.6e}, alpha = {alpha:.6e}); \
             the excess data is not compatible with a heavy-tailed GPD"
        )));
    }
    Ok((sigma, alpha, loglik))
}

/// Profile log-likelihood of alpha for the GPD: maximize over sigma at
/// fixed alpha. Returns (sigma_hat_alpha, loglik).
fn gpd_profile_loglik(excesses: &[f64], alpha: f64, sigma_warm: f64) -> Result<(f64, f64)> {
    let mean = excesses.iter().sum::<f64>() / excesses.len() as f64;
    let nll = |p: &[f64]| -gpd_loglik(excesses, p[0].exp(), alpha);
    let r = minimize_with(
        nll,
        &[sigma_warm.ln()],
        &[(mean.ln() - 23.0, mean.ln() + 23.0)],
        MinimizeOptions {
            tol: 1e-11,
            max_iterations: 2000,
        },
    )?;
    Ok((r.argmin[0].exp(), -r.objective))
}

fn profile_ci_gpd(
    excesses: &[f64],
    alpha_hat: f64,
    sigma_hat: f64,
    loglik_hat: f64,
    level: f64,
) -> Result<Interval> {
    profile_ci_generic(alpha_hat, loglik_hat, level, |alpha| {
        gpd_profile_loglik(excesses, alpha, sigma_hat).map(|(_, ll)| ll)
    })
}

/// Locate the level-set endpoints
/// `{ alpha : logL_p(alpha) >= logL_p(alpha_hat) - q_chi2(level)/2 }`
/// by stepping geometrically away from the MLE until the profile drops below
/// the threshold, then root-finding inside the bracketing cell. A side whose
/// endpoint escapes the searched range is flagged open.
fn profile_ci_generic(
    alpha_hat: f64,
    loglik_hat: f64,
    level: f64,
    mut profile: impl FnMut(f64) -> Result<f64>,
) -> Result<Interval> {
    let threshold = loglik_hat - 0.5 * chi2_quantile_1(level)?;
    let mut h = |a: f64| -> f64 {
        profile(a)
            .map(|ll| ll - threshold)
            .unwrap_or(f64::NEG_INFINITY)
    };

    const FACTOR: f64 = 1.25;
    const MAX_STEPS: usize = 40;

    // downward
    let mut lo = alpha_hat;
    let mut open_lo = true;
    let mut prev = alpha_hat;
    for _ in 0..MAX_STEPS {
        let cand = prev / FACTOR;
        if h(cand) < 0.0 {
            lo = find_root(|a| h(a), cand, prev, 1e-6)?;
            open_lo = false;
            break;
        }
        prev = cand;
    }
    if open_lo {
        lo = prev;
    }

    // upward
    let mut hi = alpha_hat;
    let mut open_hi = true;
    let mut prev = alpha_hat;
    for _ in 0..MAX_STEPS {
        let cand = prev * FACTOR;
        if h(cand) < 0.0 {
            hi = find_root(|a| h(a), prev, cand, 1e-6)?;
            open_hi = false;
            break;
        }
        prev = cand;
    }
    if open_hi {
        hi = prev;
    }

    let mut ci = Interval::new(lo.min(alpha_hat), hi.max(alpha_hat), level);
    ci.open_lo = open_lo;
    ci.open_hi = open_hi;
    Ok(ci)
}

// ---------------------------------------------------------------------------
// EPD maximum likelihood
// ---------------------------------------------------------------------------

/// Options for the EPD fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpdOptions {
    /// Freeze the second-order rate at a fixed value instead of estimating it.
    pub fixed_tau: Option<f64>,
    /// Freeze the second-order deviation (delta = 0 collapses to Pareto I).
    pub fixed_delta: Option<f64>,
}

/// Fixed restart grid for tau; the best log-likelihood wins.
const TAU_GRID: [f64; 6] = [-0.25, -0.5, -1.0, -2.0, -5.0, -10.0];

const TAU_BOUNDS: (f64, f64) = (-50.0, -1e-8);
const DELTA_MAX: f64 = 1e3;

/// EPD log-likelihood in x-space for relative excesses `z_i = x_i/u`:
/// `sum [ log alpha - (alpha+1) log g(z_i) + log g'(z_i) ] - n log u`
/// with `g(z) = (1+delta) z - delta z^(tau+1)`.
/// Returns -inf outside the admissible region.
fn epd_loglik(rel_excesses: &[f64], u: f64, delta: f64, tau: f64, alpha: f64) -> f64 {
    if !(alpha > 0.0) || tau > 0.0 {
        return f64::NEG_INFINITY;
    }
    let lower = if tau == 0.0 {
        -1.0
    } else {
        (-1.0f64).max(1.0 / tau)
    };
    if delta <= lower {
        return f64::NEG_INFINITY;
    }
    let mut ll = rel_excesses.len() as f64 * (alpha.ln() - u.ln());
    for &z in rel_excesses {
        let zt = z.powf(tau);
        let g = (1.0 + delta) * z - delta * zt * z;
        let gp = (1.0 + delta) - delta * (tau + 1.0) * zt;
        if g <= 0.0 || gp <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += -(alpha + 1.0) * g.ln() + gp.ln();
    }
    ll
}

/// Maximum-likelihood EPD fit above `u` with the default options.
pub fn fit_epd(sample: &OrderedSample, u: f64, level: f64) -> Result<TailFit> {
    fit_epd_with(sample, u, level, EpdOptions::default())
}

pub fn fit_epd_with(
    sample: &OrderedSample,
    u: f64,
    level: f64,
    opts: EpdOptions,
) -> Result<TailFit> {
    fit_epd_from_exceedances(sample.exceedances(u), u, sample.n(), level, opts)
}

/// EPD fit from pre-extracted exceedances out of a source of size `n_total`.
pub fn fit_epd_from_exceedances(
    exceedances: &[f64],
    u: f64,
    n_total: usize,
    level: f64,
    opts: EpdOptions,
) -> Result<TailFit> {
    check_level(level)?;
    if !(u > 0.0 && u.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "EPD threshold must be positive, got {u}"
        )));
    }
    let n_u = exceedances.len();
    if n_u < 10 {
        return Err(Error::InsufficientData(format!(
            "EPD fit needs at least 10 exceedances above u = {u}, found {n_u}"
        )));
    }
    let rel: Vec<f64> = exceedances.iter().map(|&x| x / u).collect();
    if rel.iter().any(|&z| z <= 1.0) {
        return Err(Error::DegenerateData(
            "exceedance set contains the threshold itself".into(),
        ));
    }
    check_degenerate(&rel, u)?;

    // alpha initialized at the Hill estimate
    let hill_alpha = {
        let mean_log: f64 = rel.iter().map(|&z| z.ln()).sum::<f64>() / n_u as f64;
        1.0 / mean_log
    };

    let (delta, tau, alpha, loglik) = epd_mle(&rel, u, hill_alpha, &opts)?;
    let model = Epd::new(u, delta, tau, alpha).map_err(|e| {
        Error::Fit(format!(
            "EPD optimum (delta={delta:.6}, tau={tau:.6}, alpha={alpha:.6}) \
             is not an admissible distribution: {e}"
        ))
    })?;

    let alpha_ci = profile_ci_generic(alpha, loglik, level, |a| {
        epd_profile_loglik(&rel, u, a, delta, tau, &opts).map(|(ll, _, _)| ll)
    })?;

    Ok(TailFit {
        model: model.into(),
        u,
        n_exceed: n_u,
        q_u: n_u as f64 / n_total as f64,
        loglik,
        alpha_ci,
        method: FitMethod::MleEpd,
    })
}

fn delta_lower(tau: f64) -> f64 {
    if tau == 0.0 {
        -1.0
    } else {
        (-1.0f64).max(1.0 / tau)
    }
}

/// True when a candidate sits on the edge of the admissible region. The
/// likelihood can climb indefinitely along the exponential-limit ridge
/// (delta -> its lower bound with alpha -> inf), where the model degenerates;
/// such candidates are rejected rather than reported as estimates.
fn epd_boundary(delta: f64, tau: f64, alpha: f64) -> bool {
    alpha >= 9e3 || alpha <= 1.2e-3 || delta <= delta_lower(tau) + 1e-6 || delta >= DELTA_MAX - 1e-3
}

/// Optimize (delta, alpha) at fixed tau.
fn epd_mle_fixed_tau(
    rel: &[f64],
    u: f64,
    tau: f64,
    delta0: f64,
    alpha0: f64,
) -> Option<(f64, f64, f64, f64)> {
    let nll = |p: &[f64]| -epd_loglik(rel, u, p[0], tau, p[1].exp());
    let dlo = delta_lower(tau);
    let r = minimize_with(
        nll,
        &[delta0.clamp(dlo + 1e-6, DELTA_MAX), alpha0.ln()],
        &[(dlo + 1e-9, DELTA_MAX), ((1e-3f64).ln(), (1e4f64).ln())],
        MinimizeOptions {
            tol: 1e-11,
            max_iterations: 4000,
        },
    )
    .ok()?;
    Some((r.argmin[0], tau, r.argmin[1].exp(), -r.objective))
}

/// Multi-start EPD MLE: a coarse grid over tau with (delta, alpha) optimized
/// at each grid point (delta initialized at 0, alpha at the Hill estimate),
/// followed by a local joint refinement of (delta, tau, alpha) with tau
/// confined to a neighborhood of the winning grid point. Best admissible
/// log-likelihood wins.
fn epd_mle(
    rel: &[f64],
    u: f64,
    hill_alpha: f64,
    opts: &EpdOptions,
) -> Result<(f64, f64, f64, f64)> {
    let alpha0 = hill_alpha.clamp(1e-2, 1e3);

    if let (Some(tau), Some(delta)) = (opts.fixed_tau, opts.fixed_delta) {
        // only alpha free
        let nll = |p: &[f64]| -epd_loglik(rel, u, delta, tau, p[0].exp());
        let r = minimize_with(
            nll,
            &[alpha0.ln()],
            &[((1e-3f64).ln(), (1e4f64).ln())],
            MinimizeOptions {
                tol: 1e-12,
                max_iterations: 2000,
            },
        )?;
        return Ok((delta, tau, r.argmin[0].exp(), -r.objective));
    }

    if let Some(tau) = opts.fixed_tau {
        let cand = epd_mle_fixed_tau(rel, u, tau, 0.0, alpha0)
            .ok_or_else(|| Error::Fit("EPD optimizer failed at the fixed tau".into()))?;
        if epd_boundary(cand.0, cand.1, cand.2) {
            return Err(Error::Fit(format!(
                "EPD likelihood at tau = {tau} is maximized on the parameter boundary \
                 (delta = {:.6}, alpha = {:.6}); the exceedances favor the \
                 exponential-limit degeneracy",
                cand.0, cand.2
            )));
        }
        return Ok(cand);
    }

    if let Some(delta) = opts.fixed_delta {
        // tau and alpha free at frozen delta
        let mut best: Option<(f64, f64, f64, f64)> = None;
        for &tau0 in &TAU_GRID {
            let nll = |p: &[f64]| -epd_loglik(rel, u, delta, p[0], p[1].exp());
            let cand = minimize_with(
                nll,
                &[tau0, alpha0.ln()],
                &[TAU_BOUNDS, ((1e-3f64).ln(), (1e4f64).ln())],
                MinimizeOptions {
                    tol: 1e-11,
                    max_iterations: 4000,
                },
            )
            .ok()
            .map(|r| (delta, r.argmin[0], r.argmin[1].exp(), -r.objective));
            if let Some(c) = cand {
                if c.3.is_finite()
                    && !epd_boundary(c.0, c.1, c.2)
                    && best.map_or(true, |b| c.3 > b.3)
                {
                    best = Some(c);
                }
            }
        }
        return best.ok_or_else(|| Error::Fit("all EPD optimizer starts failed".into()));
    }

    // stage 1: grid over tau
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &tau0 in &TAU_GRID {
        if let Some(c) = epd_mle_fixed_tau(rel, u, tau0, 0.0, alpha0) {
            if c.3.is_finite() && !epd_boundary(c.0, c.1, c.2) && best.map_or(true, |b| c.3 > b.3)
            {
                best = Some(c);
            }
        }
    }
    let stage1 = best.ok_or_else(|| {
        Error::Fit(
            "all EPD optimizer starts landed on the parameter boundary; \
             the exceedances favor the exponential-limit degeneracy"
                .into(),
        )
    })?;

    // stage 2: joint local refinement with tau confined near the winner
    let (d1, t1, a1, ll1) = stage1;
    let tau_lo = (t1 * 3.0).max(TAU_BOUNDS.0);
    let tau_hi = (t1 / 3.0).min(TAU_BOUNDS.1);
    let nll = |p: &[f64]| -epd_loglik(rel, u, p[0], p[1], p[2].exp());
    let refined = minimize_with(
        nll,
        &[d1, t1, a1.ln()],
        &[
            (-1.0 + 1e-9, DELTA_MAX),
            (tau_lo, tau_hi),
            ((1e-3f64).ln(), (1e4f64).ln()),
        ],
        MinimizeOptions {
            tol: 1e-11,
            max_iterations: 6000,
        },
    )
    .ok()
    .map(|r| (r.argmin[0], r.argmin[1], r.argmin[2].exp(), -r.objective));

    match refined {
        Some(c) if c.3.is_finite() && c.3 > ll1 && !epd_boundary(c.0, c.1, c.2) => Ok(c),
        _ => Ok(stage1),
    }
}

/// Profile log-likelihood of alpha for the EPD: maximize over (delta, tau)
/// (respecting frozen options) at fixed alpha. Returns (loglik, delta, tau).
fn epd_profile_loglik(
    rel: &[f64],
    u: f64,
    alpha: f64,
    delta_warm: f64,
    tau_warm: f64,
    opts: &EpdOptions,
) -> Result<(f64, f64, f64)> {
    match (opts.fixed_tau, opts.fixed_delta) {
        (Some(tau), Some(delta)) => Ok((epd_loglik(rel, u, delta, tau, alpha), delta, tau)),
        (Some(tau), None) => {
            let nll = |p: &[f64]| -epd_loglik(rel, u, p[0], tau, alpha);
            let dlo = if tau == 0.0 {
                -1.0
            } else {
                (-1.0f64).max(1.0 / tau)
            };
            let r = minimize_with(
                nll,
                &[delta_warm.clamp(dlo + 1e-6, DELTA_MAX)],
                &[(dlo + 1e-9, DELTA_MAX)],
                MinimizeOptions {
                    tol: 1e-10,
                    max_iterations: 2000,
                },
            )?;
            Ok((-r.objective, r.argmin[0], tau))
        }
        (None, Some(delta)) => {
            let nll = |p: &[f64]| -epd_loglik(rel, u, delta, p[0], alpha);
            let r = minimize_with(
                nll,
                &[tau_warm.clamp(TAU_BOUNDS.0, TAU_BOUNDS.1)],
                &[TAU_BOUNDS],
                MinimizeOptions {
                    tol: 1e-10,
                    max_iterations: 2000,
                },
            )?;
            Ok((-r.objective, delta, r.argmin[0]))
        }
        (None, None) => {
            let nll = |p: &[f64]| -epd_loglik(rel, u, p[0], p[1], alpha);
            let r = minimize_with(
                nll,
                &[
                    delta_warm.clamp(-1.0 + 1e-6, DELTA_MAX),
                    tau_warm.clamp(TAU_BOUNDS.0, TAU_BOUNDS.1),
                ],
                &[(-1.0 + 1e-9, DELTA_MAX), TAU_BOUNDS],
                MinimizeOptions {
                    tol: 1e-10,
                    max_iterations: 3000,
                },
            )?;
            Ok((-r.objective, r.argmin[0], r.argmin[1]))
        }
    }
}

// ---------------------------------------------------------------------------
// Profile likelihood
// ---------------------------------------------------------------------------

/// Which conditional family to profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gpd,
    Epd,
}

/// Output of [`profile_alpha`]: the profile-likelihood point estimate, the
/// chi-square(1)-calibrated interval, and the profile curve for plotting.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileAlpha {
    pub alpha_hat: f64,
    pub ci: Interval,
    pub curve: PlotSeries,
}

/// Profile likelihood for the tail index: maximize the log-likelihood over
/// the nuisance parameters at each fixed alpha, locate the
/// `logL_p(alpha) >= logL_p(alpha_hat) - q_chi2(1)(level)/2` level set, and
/// return the curve over a grid around the estimate.
pub fn profile_alpha(
    sample: &OrderedSample,
    u: f64,
    kind: ModelKind,
    level: f64,
) -> Result<ProfileAlpha> {
    check_level(level)?;
    let joint = match kind {
        ModelKind::Gpd => fit_gpd(sample, u, level)?,
        ModelKind::Epd => fit_epd(sample, u, level)?,
    };

    let excesses: Vec<f64> = sample.exceedances(u).iter().map(|&x| x - u).collect();
    let rel: Vec<f64> = sample.exceedances(u).iter().map(|&x| x / u).collect();
    let (sigma_warm, delta_warm, tau_warm) = match &joint.model {
        TailModel::Gpd(g) => (g.sigma(), 0.0, -1.0),
        TailModel::Epd(e) => (u, e.delta(), e.tau()),
        TailModel::ParetoI(_) => (u, 0.0, -1.0),
    };
    let opts = EpdOptions::default();
    let mut profile = |alpha: f64| -> Result<f64> {
        match kind {
            ModelKind::Gpd => gpd_profile_loglik(&excesses, alpha, sigma_warm).map(|(_, ll)| ll),
            ModelKind::Epd => epd_profile_loglik(&rel, u, alpha, delta_warm, tau_warm, &opts)
                .map(|(ll, _, _)| ll),
        }
    };

    // refine the profile maximizer around the joint MLE; mathematically they
    // coincide, and this cross-checks the two optimizations against each other
    let a0 = joint.alpha();
    let golden = golden_max(&mut profile, a0 / 1.5, a0 * 1.5, 1e-9)?;
    let alpha_hat = golden.0;
    let loglik_hat = golden.1.max(joint.loglik);

    let ci = profile_ci_generic(alpha_hat, loglik_hat, level, &mut profile)?;

    // curve on a log-spaced grid spanning the interval comfortably
    let lo = (ci.lo * 0.8).max(alpha_hat / 4.0).min(ci.lo);
    let hi = (ci.hi * 1.2).max(alpha_hat * 1.05);
    let m = 61;
    let mut xs = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    for i in 0..m {
        let a = lo * (hi / lo).powf(i as f64 / (m - 1) as f64);
        if let Ok(ll) = profile(a) {
            xs.push(a);
            ys.push(ll);
        }
    }
    let mut curve = PlotSeries::new(xs, ys);
    curve.set_meta("series", "profile_loglik");
    curve.set_meta(
        "model",
        match kind {
            ModelKind::Gpd => "gpd",
            ModelKind::Epd => "epd",
        },
    );
    curve.set_meta("threshold", u);
    curve.set_meta("ci_lo", ci.lo);
    curve.set_meta("ci_hi", ci.hi);

    Ok(ProfileAlpha {
        alpha_hat,
        ci,
        curve,
    })
}

/// Golden-section maximization of a unimodal function on [a, b].
fn golden_max(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a).abs() <= tol * (a.abs() + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = f(d)?;
        }
    }
    if fc > fd {
        Ok((c, fc))
    } else {
        Ok((d, fd))
    }
}

// ---------------------------------------------------------------------------
// Threshold stability
// ---------------------------------------------------------------------------

/// Tail-index estimates across a grid of thresholds, for the stability plot
/// that supports threshold choice. Thresholds where the fit fails are left
/// out of the series and noted in its metadata.
pub fn alpha_stability(
    sample: &OrderedSample,
    thresholds: &[f64],
    method: FitMethod,
    level: f64,
) -> Result<PlotSeries> {
    check_level(level)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut los = Vec::new();
    let mut his = Vec::new();
    let mut failures = Vec::new();
    for &u in thresholds {
        let fit = match method {
            FitMethod::Hill => hill(sample, u, level),
            FitMethod::MleGpd => fit_gpd(sample, u, level),
            FitMethod::MleEpd => fit_epd(sample, u, level),
        };
        match fit {
            Ok(f) => {
                xs.push(u);
                ys.push(f.alpha());
                los.push(f.alpha_ci.lo);
                his.push(f.alpha_ci.hi);
            }
            Err(e) => failures.push(format!("u={u}: {e}")),
        }
    }
    let mut s = PlotSeries::with_bands(xs, ys, los, his);
    s.set_meta("series", "alpha_stability");
    s.set_meta("method", method.name());
    if !failures.is_empty() {
        s.set_meta("failed_thresholds", failures.join("; "));
    }
    Ok(s)
}
