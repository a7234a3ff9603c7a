//! Return periods, return levels, and excess-of-loss pure premiums, both
//! parametric (from a [`TailFit`]) and empirical.
//!
//! Claim frequency (`claims_per_period`) is always user input, derived at
//! most from a count divided by a number of periods; nothing here fits an
//! occurrence process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::distributions::TailModel;
use crate::error::{Error, Result};
use crate::numerics::normal_quantile;
use crate::sample::OrderedSample;
use crate::series::{Interval, PlotSeries};
use crate::tail_estimation::{
    fit_epd_from_exceedances, fit_gpd_from_exceedances, hill, hill_from_exceedances,
    EpdOptions, FitMethod, TailFit,
};

/// The level `z(t)` exceeded on average once every `t` events, under the
/// composed distribution `P[Y > x] = q_u S_model(x)`:
/// `z(t) = Q_u(1 - 1/t)`, i.e. `S_model(z) = 1/(q_u t)`.
pub fn return_level(fit: &TailFit, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "return period must be positive and finite, got {t}"
        )));
    }
    let qt = fit.q_u * t;
    if qt < 1.0 {
        return Err(Error::SubThreshold(format!(
            "q_u * t = {qt} < 1: an event this frequent sits below the fitted threshold"
        )));
    }
    fit.model.inverse_survival(1.0 / qt)
}

/// Expected waiting count until the level `z` is exceeded:
/// `t = 1 / (q_u S_model(z))` (the mean of the geometric first-passage count).
pub fn return_period(fit: &TailFit, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::InvalidInput(format!("level must be finite, got {z}")));
    }
    if z < fit.u {
        return Err(Error::SubThreshold(format!(
            "level z = {z} sits below the fitted threshold u = {}",
            fit.u
        )));
    }
    let s = fit.model.survival(z)?;
    if s == 0.0 {
        return Err(Error::InvalidInput(format!(
            "survival underflows at z = {z}; the return period is not representable"
        )));
    }
    Ok(1.0 / (fit.q_u * s))
}

/// An excess-of-loss quote with a single deductible.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PremiumQuote {
    pub deductible: f64,
    /// `E[(Y-d)+]` under the composed model: `P[Y > d] * e(d)`.
    pub per_claim_premium: f64,
    /// `per_claim_premium * claims_per_period`.
    pub annual_premium: f64,
    /// Composed exceedance probability `P[Y > d] = q_u S_model(d)`.
    pub exceed_prob: f64,
    /// Mean excess `e(d)` of the fitted tail at the deductible.
    pub mean_excess_at_d: f64,
    pub claims_per_period: f64,
}

/// Pure premium of an excess-of-loss cover with deductible `d >= u`:
/// `pi(d) = e(d) * P[Y > d]`, times the claim frequency for the annual figure.
pub fn pure_premium(fit: &TailFit, d: f64, claims_per_period: f64) -> Result<PremiumQuote> {
    if !(claims_per_period >= 0.0 && claims_per_period.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "claims_per_period must be non-negative and finite, got {claims_per_period}"
        )));
    }
    if !d.is_finite() || d < fit.u {
        return Err(Error::ExtrapolationDomain(format!(
            "deductible d = {d} sits below the fitted threshold u = {}; \
             price the body empirically instead",
            fit.u
        )));
    }
    let mean_excess_at_d = fit.model.mean_excess(d)?;
    let exceed_prob = fit.q_u * fit.model.survival(d)?;
    let per_claim_premium = exceed_prob * mean_excess_at_d;
    Ok(PremiumQuote {
        deductible: d,
        per_claim_premium,
        annual_premium: per_claim_premium * claims_per_period,
        exceed_prob,
        mean_excess_at_d,
        claims_per_period,
    })
}

/// Empirical mean excess above `d` with a normal-approximation confidence
/// interval from the exceedance-sample standard deviation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanExcessEstimate {
    pub value: f64,
    pub ci: Interval,
    pub n_over: usize,
}

pub fn empirical_mean_excess(
    sample: &OrderedSample,
    d: f64,
    level: f64,
) -> Result<MeanExcessEstimate> {
    let z = normal_quantile((1.0 + level) / 2.0)?;
    let over = sample.exceedances(d);
    let n = over.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "empirical mean excess needs at least 2 observations above d = {d}, found {n}"
        )));
    }
    let mean = over.iter().map(|&x| x - d).sum::<f64>() / n as f64;
    let var = over
        .iter()
        .map(|&x| (x - d - mean).powi(2))
        .sum::<f64>()
        / (n as f64 - 1.0);
    let half = z * (var / n as f64).sqrt();
    Ok(MeanExcessEstimate {
        value: mean,
        ci: Interval::new(mean - half, mean + half, level),
        n_over: n,
    })
}

/// Stability of the mean excess and pure premium at a fixed deductible as
/// the fitting threshold varies: one series per estimation method plus the
/// empirical reference.
#[derive(Debug, Clone, Serialize)]
pub struct PremiumStability {
    /// `e(d)` per method across thresholds.
    pub mean_excess: Vec<PlotSeries>,
    /// Per-claim `pi(d)` per method across thresholds.
    pub premium: Vec<PlotSeries>,
}

pub fn premium_stability(
    sample: &OrderedSample,
    d: f64,
    thresholds: &[f64],
    claims_per_period: f64,
    level: f64,
) -> Result<PremiumStability> {
    let mut mean_excess = Vec::new();
    let mut premium = Vec::new();

    for method in [FitMethod::Hill, FitMethod::MleGpd, FitMethod::MleEpd] {
        let mut xs = Vec::new();
        let mut e_ys = Vec::new();
        let mut p_ys = Vec::new();
        let mut failures = Vec::new();
        for &u in thresholds {
            if u > d {
                failures.push(format!("u={u}: above the deductible"));
                continue;
            }
            let fit = match method {
                FitMethod::Hill => hill(sample, u, level),
                FitMethod::MleGpd => crate::tail_estimation::fit_gpd(sample, u, level),
                FitMethod::MleEpd => crate::tail_estimation::fit_epd(sample, u, level),
            };
            match fit.and_then(|f| pure_premium(&f, d, claims_per_period)) {
                Ok(q) => {
                    xs.push(u);
                    e_ys.push(q.mean_excess_at_d);
                    p_ys.push(q.per_claim_premium);
                }
                Err(e) => failures.push(format!("u={u}: {e}")),
            }
        }
        let mut es = PlotSeries::new(xs.clone(), e_ys);
        es.set_meta("series", "mean_excess_stability");
        es.set_meta("method", method.name());
        es.set_meta("deductible", d);
        let mut ps = PlotSeries::new(xs, p_ys);
        ps.set_meta("series", "premium_stability");
        ps.set_meta("method", method.name());
        ps.set_meta("deductible", d);
        if !failures.is_empty() {
            es.set_meta("failed_thresholds", failures.join("; "));
            ps.set_meta("failed_thresholds", failures.join("; "));
        }
        mean_excess.push(es);
        premium.push(ps);
    }

    // empirical horizontal reference
    let emp = empirical_mean_excess(sample, d, level)?;
    let n_over = sample.n_exceed(d);
    let emp_premium = emp.value * n_over as f64 / sample.n() as f64;
    let xs: Vec<f64> = thresholds.to_vec();
    let mut es = PlotSeries::with_bands(
        xs.clone(),
        vec![emp.value; xs.len()],
        vec![emp.ci.lo; xs.len()],
        vec![emp.ci.hi; xs.len()],
    );
    es.set_meta("series", "mean_excess_stability");
    es.set_meta("method", "empirical");
    es.set_meta("deductible", d);
    let mut ps = PlotSeries::new(xs.clone(), vec![emp_premium; xs.len()]);
    ps.set_meta("series", "premium_stability");
    ps.set_meta("method", "empirical");
    ps.set_meta("deductible", d);
    mean_excess.push(es);
    premium.push(ps);

    Ok(PremiumStability {
        mean_excess,
        premium,
    })
}

// ---------------------------------------------------------------------------
// Return-level curves with confidence bands
// ---------------------------------------------------------------------------

/// How the return-level confidence band is computed.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum ReturnLevelCi {
    /// Delta method on the fitted parameters, with the covariance taken from
    /// the inverse observed information (numeric Hessian at the MLE).
    Delta,
    /// Nonparametric bootstrap: resample the exceedances, refit, take
    /// empirical quantiles of the return level.
    Bootstrap { replicates: usize, seed: u64 },
}

/// A return-level curve `t -> z(t)` with per-point confidence intervals.
#[derive(Debug, Clone, Serialize)]
pub struct ReturnLevelCurve {
    pub t: Vec<f64>,
    pub z: Vec<f64>,
    pub ci: Vec<Interval>,
    pub method: String,
}

impl ReturnLevelCurve {
    pub fn to_plot_series(&self) -> PlotSeries {
        let lo: Vec<f64> = self.ci.iter().map(|c| c.lo).collect();
        let hi: Vec<f64> = self.ci.iter().map(|c| c.hi).collect();
        let mut s = PlotSeries::with_bands(self.t.clone(), self.z.clone(), lo, hi);
        s.set_meta("series", "return_level");
        s.set_meta("ci_method", &self.method);
        s
    }
}

/// Free parameters of a fitted model, for generic perturbation.
fn free_params(model: &TailModel) -> Vec<f64> {
    match model {
        TailModel::ParetoI(p) => vec![p.alpha()],
        TailModel::Gpd(g) => vec![g.sigma(), g.alpha()],
        TailModel::Epd(e) => vec![e.delta(), e.tau(), e.alpha()],
    }
}

fn rebuild(model: &TailModel, params: &[f64]) -> Result<TailModel> {
    match model {
        TailModel::ParetoI(p) => TailModel::pareto(p.u(), params[0]),
        TailModel::Gpd(g) => TailModel::gpd(g.u(), params[0], params[1]),
        TailModel::Epd(e) => TailModel::epd(e.u(), params[0], params[1], params[2]),
    }
}

/// Numeric observed information: negative Hessian of the exceedance
/// log-likelihood at the fitted parameters, by central differences.
fn observed_information(
    model: &TailModel,
    exceedances: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let theta = free_params(model);
    let k = theta.len();
    let ll = |params: &[f64]| -> Result<f64> {
        let m = rebuild(model, params)?;
        let mut acc = 0.0;
        for &x in exceedances {
            let d = m.density(x)?;
            if !(d > 0.0) {
                return Err(Error::InvalidInput("zero density at data point".into()));
            }
            acc += d.ln();
        }
        Ok(acc)
    };
    let h: Vec<f64> = theta.iter().map(|&t| 1e-4 * t.abs().max(1e-2)).collect();
    let mut hess = vec![vec![0.0; k]; k];
    let base = ll(&theta)?;
    for i in 0..k {
        for j in i..k {
            let v = if i == j {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[i] += h[i];
                tm[i] -= h[i];
                (ll(&tp)? - 2.0 * base + ll(&tm)?) / (h[i] * h[i])
            } else {
                let mut tpp = theta.clone();
                let mut tpm = theta.clone();
                let mut tmp = theta.clone();
                let mut tmm = theta.clone();
                tpp[i] += h[i];
                tpp[j] += h[j];
                tpm[i] += h[i];
                tpm[j] -= h[j];
                tmp[i] -= h[i];
                tmp[j] += h[j];
                tmm[i] -= h[i];
                tmm[j] -= h[j];
                (ll(&tpp)? - ll(&tpm)? - ll(&tmp)? + ll(&tmm)?) / (4.0 * h[i] * h[j])
            };
            hess[i][j] = -v;
            hess[j][i] = -v;
        }
    }
    Ok(hess)
}

/// Invert a small symmetric positive-definite matrix by Gauss-Jordan.
fn invert_small(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut inv = vec![vec![0.0; n]; n];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..n {
        // partial pivot
        let mut piv = col;
        for r in col + 1..n {
            if m[r][col].abs() > m[piv][col].abs() {
                piv = r;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return Err(Error::InvalidInput(
                "observed information is singular".into(),
            ));
        }
        m.swap(col, piv);
        inv.swap(col, piv);
        let d = m[col][col];
        for c in 0..n {
            m[col][c] /= d;
            inv[col][c] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for c in 0..n {
                    m[r][c] -= f * m[col][c];
                    inv[r][c] -= f * inv[col][c];
                }
            }
        }
    }
    Ok(inv)
}

/// Return-level curve over a grid of periods, with confidence bands.
///
/// `sample` must be the data the fit came from (the bands need either the
/// observed information or bootstrap refits of the exceedances).
pub fn return_level_curve(
    sample: &OrderedSample,
    fit: &TailFit,
    t_grid: &[f64],
    ci: ReturnLevelCi,
    level: f64,
) -> Result<ReturnLevelCurve> {
    let zq = normal_quantile((1.0 + level) / 2.0)?;
    let exceedances = sample.exceedances(fit.u);
    let mut t_out = Vec::new();
    let mut z_out = Vec::new();
    let mut ci_out = Vec::new();

    match ci {
        ReturnLevelCi::Delta => {
            // Pareto from the Hill fit has the closed-form variance
            // alpha^2/n_u; other families use the observed information.
            let cov: Vec<Vec<f64>> = match (&fit.model, fit.method) {
                (TailModel::ParetoI(p), FitMethod::Hill) => {
                    vec![vec![p.alpha() * p.alpha() / fit.n_exceed as f64]]
                }
                _ => invert_small(&observed_information(&fit.model, exceedances)?)?,
            };
            let theta = free_params(&fit.model);
            for &t in t_grid {
                let z = match return_level(fit, t) {
                    Ok(z) => z,
                    Err(_) => continue,
                };
                // numeric gradient of z with respect to the parameters
                let mut grad = vec![0.0; theta.len()];
                let mut ok = true;
                for i in 0..theta.len() {
                    let h = 1e-5 * theta[i].abs().max(1e-2);
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[i] += h;
                    tm[i] -= h;
                    let zp = rebuild(&fit.model, &tp)
                        .and_then(|m| m.inverse_survival(1.0 / (fit.q_u * t)));
                    let zm = rebuild(&fit.model, &tm)
                        .and_then(|m| m.inverse_survival(1.0 / (fit.q_u * t)));
                    match (zp, zm) {
                        (Ok(a), Ok(b)) => grad[i] = (a - b) / (2.0 * h),
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                let var = if ok {
                    let mut v = 0.0;
                    for i in 0..grad.len() {
                        for j in 0..grad.len() {
                            v += grad[i] * cov[i][j] * grad[j];
                        }
                    }
                    v.max(0.0)
                } else {
                    f64::NAN
                };
                let half = if var.is_finite() { zq * var.sqrt() } else { 0.0 };
                t_out.push(t);
                z_out.push(z);
                ci_out.push(Interval::new(z - half, z + half, level));
            }
        }
        ReturnLevelCi::Bootstrap { replicates, seed } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n_u = exceedances.len();
            let mut z_reps: Vec<Vec<f64>> = vec![Vec::new(); t_grid.len()];
            for _ in 0..replicates {
                let resampled: Vec<f64> = (0..n_u)
                    .map(|_| exceedances[rng.gen_range(0..n_u)])
                    .collect();
                let refit = match fit.method {
                    FitMethod::Hill => {
                        hill_from_exceedances(&resampled, fit.u, sample.n(), level)
                    }
                    FitMethod::MleGpd => {
                        fit_gpd_from_exceedances(&resampled, fit.u, sample.n(), level)
                    }
                    FitMethod::MleEpd => fit_epd_from_exceedances(
                        &resampled,
                        fit.u,
                        sample.n(),
                        level,
                        EpdOptions::default(),
                    ),
                };
                if let Ok(rf) = refit {
                    for (i, &t) in t_grid.iter().enumerate() {
                        if let Ok(z) = return_level(&rf, t) {
                            z_reps[i].push(z);
                        }
                    }
                }
            }
            for (i, &t) in t_grid.iter().enumerate() {
                let z = match return_level(fit, t) {
                    Ok(z) => z,
                    Err(_) => continue,
                };
                let reps = &mut z_reps[i];
                if reps.len() < 10 {
                    t_out.push(t);
                    z_out.push(z);
                    ci_out.push(Interval::new(z, z, level));
                    continue;
                }
                reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let lo_idx = (((1.0 - level) / 2.0) * reps.len() as f64) as usize;
                let hi_idx = ((((1.0 + level) / 2.0) * reps.len() as f64) as usize)
                    .min(reps.len() - 1);
                t_out.push(t);
                z_out.push(z);
                ci_out.push(Interval::new(reps[lo_idx], reps[hi_idx], level));
            }
        }
    }

    Ok(ReturnLevelCurve {
        t: t_out,
        z: z_out,
        ci: ci_out,
        method: match ci {
            ReturnLevelCi::Delta => "delta".to_string(),
            ReturnLevelCi::Bootstrap { replicates, seed } => {
                format!("bootstrap(replicates={replicates}, seed={seed})")
            }
        },
    })
}
