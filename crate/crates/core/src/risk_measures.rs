//! Quantile-based risk measures: VaR, expected shortfall, top-share /
//! large-claim index, Lorenz curves, and the threshold-composed versions
//! built from a [`TailFit`] plus an empirical body.
//!
//! Top shares and Lorenz curves for GPD/EPD are computed by adaptive
//! quadrature of the quantile function (closed form for strict Pareto); the
//! incomplete-beta closed form in the literature is used only as a
//! cross-check, never as the implementation.

use serde::Serialize;

use crate::distributions::TailModel;
use crate::error::{Error, Result};
use crate::numerics::{integrate_finite_with, QuadratureOptions};
use crate::sample::OrderedSample;
use crate::series::PlotSeries;
use crate::tail_estimation::TailFit;

fn check_alpha_finite_mean(model: &TailModel) -> Result<()> {
    let alpha = model.alpha();
    if alpha <= 1.0 {
        return Err(Error::InfiniteMean { alpha });
    }
    Ok(())
}

/// Value-at-Risk at level `p`: the quantile `Q(1-p)`.
pub fn var(model: &TailModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "VaR requires p in (0,1], got {p}"
        )));
    }
    model.quantile(1.0 - p)
}

/// Expected shortfall at level `p`: the mean above the (1-p)-quantile,
/// `ES(p) = E[X | X > Q(1-p)] = Q(1-p) + e(Q(1-p))`.
pub fn expected_shortfall(model: &TailModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "expected shortfall requires p in (0,1], got {p}"
        )));
    }
    check_alpha_finite_mean(model)?;
    let q = model.quantile(1.0 - p)?;
    model.tail_mean(q)
}

/// `integral of Q(y) dy over [a, b]` for `0 <= a < b <= 1`.
///
/// When `b = 1` the integrand has an integrable singularity `(1-y)^(-1/alpha)`;
/// the substitution `y = 1 - s^k` with `k = ceil(2 alpha/(alpha-1))` makes it
/// smooth before the adaptive rule sees it.
fn integral_of_quantile(model: &TailModel, a: f64, b: f64) -> Result<f64> {
    debug_assert!((0.0..1.0).contains(&a) && a < b && b <= 1.0);
    let scale = model.lower_bound().max(1.0);
    let opts = QuadratureOptions {
        tol: 1e-11 * scale,
        max_depth: 48,
    };
    if b < 1.0 {
        let r = integrate_finite_with(
            |y| model.quantile(y).unwrap_or(f64::NAN),
            a,
            b,
            opts,
        )?;
        return Ok(r.value);
    }
    let alpha = model.alpha();
    let k = (2.0 * alpha / (alpha - 1.0)).ceil().max(2.0);
    let s_max = (1.0 - a).powf(1.0 / k);
    let r = integrate_finite_with(
        |s| k * s.powf(k - 1.0) * model.inverse_survival(s.powf(k)).unwrap_or(f64::NAN),
        0.0,
        s_max,
        opts,
    )?;
    Ok(r.value)
}

/// Top p-share (large claim index): the fraction of the total expectation
/// carried by the top p of the distribution,
/// `TS(p) = p ES(p) / E[X] = 1 - L(1-p)`.
///
/// Strict Pareto has the closed form `p^((alpha-1)/alpha)`; GPD and EPD are
/// computed by quadrature of the quantile function.
pub fn top_share(model: &TailModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "top share requires p in (0,1], got {p}"
        )));
    }
    check_alpha_finite_mean(model)?;
    if p == 1.0 {
        return Ok(1.0);
    }
    match model {
        TailModel::ParetoI(m) => Ok(p.powf((m.alpha() - 1.0) / m.alpha())),
        _ => {
            let num = integral_of_quantile(model, 1.0 - p, 1.0)?;
            let den = integral_of_quantile(model, 0.0, 1.0)?;
            Ok(num / den)
        }
    }
}

/// Lorenz curve values `L(v) = (1/E[X]) integral of Q(y) dy over [0, v]`
/// on the given grid of probabilities.
pub fn lorenz(model: &TailModel, grid: &[f64]) -> Result<PlotSeries> {
    check_alpha_finite_mean(model)?;
    if grid.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidInput(
            "Lorenz grid values must lie in [0,1]".into(),
        ));
    }
    let alpha = model.alpha();
    let mut ys = Vec::with_capacity(grid.len());
    match model {
        TailModel::ParetoI(_) => {
            for &v in grid {
                ys.push(1.0 - (1.0 - v).powf((alpha - 1.0) / alpha));
            }
        }
        _ => {
            let total = integral_of_quantile(model, 0.0, 1.0)?;
            for &v in grid {
                let l = if v == 0.0 {
                    0.0
                } else if v == 1.0 {
                    1.0
                } else {
                    integral_of_quantile(model, 0.0, v)? / total
                };
                ys.push(l);
            }
        }
    }
    let mut s = PlotSeries::new(grid.to_vec(), ys);
    s.set_meta("series", "lorenz");
    s.set_meta("family", model.family_name());
    Ok(s)
}

/// Empirical top share: the sum of the top `ceil(n p)` order statistics over
/// the total sum.
pub fn empirical_top_share(sample: &OrderedSample, p: f64) -> Result<f64> {
    let n = sample.n();
    let k = (n as f64 * p).ceil() as i64;
    if k < 1 || k > n as i64 {
        return Err(Error::InvalidInput(format!(
            "empirical top share requires 1 <= ceil(n p) <= n, got {k} for p = {p}"
        )));
    }
    let k = k as usize;
    let top: f64 = sample.values()[n - k..].iter().sum();
    Ok(top / sample.sum())
}

/// Diagnostic ratio of the maximum to the sum, `M_n / S_n`. Stays away from
/// zero in large samples only for infinite-mean (alpha < 1) tails.
pub fn max_sum_ratio(sample: &OrderedSample) -> f64 {
    sample.max() / sample.sum()
}

// ---------------------------------------------------------------------------
// Threshold-composed measures
// ---------------------------------------------------------------------------

fn check_composed_domain(fit: &TailFit, p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "composed measures require p > 0, got {p}"
        )));
    }
    if p > fit.q_u {
        return Err(Error::ExtrapolationDomain(format!(
            "p = {p} exceeds the tail mass q_u = {}; the parametric tail \
             cannot serve body quantiles",
            fit.q_u
        )));
    }
    Ok(())
}

/// Composed Value-at-Risk `Q_u(1-p)` from a fitted tail: the quantile of the
/// distribution whose survival is `q_u * S_model(x)` for `x >= u`.
/// Continuous at the threshold: `p = q_u` yields exactly `u`.
pub fn var_composed(fit: &TailFit, p: f64) -> Result<f64> {
    check_composed_domain(fit, p)?;
    fit.model.inverse_survival(p / fit.q_u)
}

/// Composed expected shortfall `ES_u(p)`: the tail mean of the fitted model
/// above the composed quantile.
pub fn es_composed(fit: &TailFit, p: f64) -> Result<f64> {
    check_composed_domain(fit, p)?;
    let q = var_composed(fit, p)?;
    fit.model.tail_mean(q)
}

/// How the total expectation is estimated inside composed top shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanEstimator {
    /// `(1-q_u) * mean(body) + q_u * tail_mean(model, u)`: empirical body,
    /// parametric tail.
    Hybrid,
    /// Plain sample mean of all observations.
    SampleMean,
}

/// A fitted tail plus the empirical body statistics needed by the composed
/// top share.
#[derive(Debug, Clone, Serialize)]
pub struct ComposedTail {
    pub fit: TailFit,
    /// Mean of the observations at or below the threshold.
    pub body_mean: f64,
    /// Mean of all observations.
    pub sample_mean: f64,
}

impl ComposedTail {
    /// Build from the source sample the fit came from.
    pub fn from_sample(sample: &OrderedSample, fit: TailFit) -> Result<Self> {
        if !(fit.q_u > 0.0 && fit.q_u < 1.0) {
            return Err(Error::InvalidInput(format!(
                "composed tail requires q_u in (0,1), got {}",
                fit.q_u
            )));
        }
        let body = sample.body(fit.u);
        if body.is_empty() {
            return Err(Error::InvalidInput(
                "no observations at or below the threshold".into(),
            ));
        }
        let body_mean = body.iter().sum::<f64>() / body.len() as f64;
        Ok(Self {
            fit,
            body_mean,
            sample_mean: sample.mean(),
        })
    }

    /// Build from pre-computed summary statistics (the body itself is not
    /// needed by any composed operation, only its mean).
    pub fn from_parts(fit: TailFit, body_mean: f64, sample_mean: f64) -> Result<Self> {
        if !(fit.q_u > 0.0 && fit.q_u < 1.0) {
            return Err(Error::InvalidInput(format!(
                "composed tail requires q_u in (0,1), got {}",
                fit.q_u
            )));
        }
        if !(body_mean.is_finite() && body_mean >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "body mean must be finite and non-negative, got {body_mean}"
            )));
        }
        Ok(Self {
            fit,
            body_mean,
            sample_mean,
        })
    }

    pub fn var(&self, p: f64) -> Result<f64> {
        var_composed(&self.fit, p)
    }

    pub fn es(&self, p: f64) -> Result<f64> {
        es_composed(&self.fit, p)
    }

    /// The hybrid total-mean estimate
    /// `(1-q_u) body_mean + q_u ES_u(q_u)`.
    pub fn hybrid_mean(&self) -> Result<f64> {
        let tail = self.fit.model.tail_mean(self.fit.u)?;
        Ok((1.0 - self.fit.q_u) * self.body_mean + self.fit.q_u * tail)
    }

    /// Composed top share `TS_u(p) = p ES_u(p) / E[X]`, with the total mean
    /// estimated per `mean_est`.
    pub fn top_share(&self, p: f64, mean_est: MeanEstimator) -> Result<f64> {
        let es = self.es(p)?;
        let e_x = match mean_est {
            MeanEstimator::Hybrid => self.hybrid_mean()?,
            MeanEstimator::SampleMean => self.sample_mean,
        };
        if !(e_x > 0.0) {
            return Err(Error::InvalidInput(format!(
                "total-mean estimate must be positive, got {e_x}"
            )));
        }
        Ok(p * es / e_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tail_estimation::FitMethod;
    use crate::series::Interval;

    fn fit_for(model: TailModel, u: f64, q_u: f64) -> TailFit {
        TailFit {
            model,
            u,
            n_exceed: 100,
            q_u,
            loglik: 0.0,
            alpha_ci: Interval::new(0.0, f64::INFINITY, 0.95),
            method: FitMethod::Hill,
        }
    }

    #[test]
    fn var_reference_values() {
        let m = TailModel::pareto(1.0, 2.0).unwrap();
        assert!((var(&m, 0.01).unwrap() - 10.0).abs() < 1e-12);
        let m = TailModel::gpd(0.0, 1.0, 1.0).unwrap();
        assert!((var(&m, 0.5).unwrap() - 1.0).abs() < 1e-12);
        // EPD VaR is the numeric quantile
        let m = TailModel::epd(1.0, 0.4, -2.0, 1.5).unwrap();
        let v = var(&m, 0.01).unwrap();
        assert!((m.quantile(0.99).unwrap() - v).abs() < 1e-12);
        assert!(var(&m, 0.0).is_err());
    }

    #[test]
    fn expected_shortfall_reference_values() {
        let m = TailModel::pareto(1.0, 2.0).unwrap();
        assert!((expected_shortfall(&m, 0.01).unwrap() - 20.0).abs() < 1e-9);

        // GPD(1,1,2) at the p with Q(1-p) = 5: p = 0.04
        let m = TailModel::gpd(1.0, 1.0, 2.0).unwrap();
        let p = 0.04;
        assert!((var(&m, p).unwrap() - 5.0).abs() < 1e-12);
        assert!((expected_shortfall(&m, p).unwrap() - 10.0).abs() < 1e-9);

        // EPD at tau = -1 matches the equivalent GPD closed form
        let e = TailModel::epd(1.0, 0.5, -1.0, 2.0).unwrap();
        let g = TailModel::gpd(1.0, 1.0 / 1.5, 2.0).unwrap();
        let (a, b) = (
            expected_shortfall(&e, 0.01).unwrap(),
            expected_shortfall(&g, 0.01).unwrap(),
        );
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }

    #[test]
    fn es_equals_var_plus_mean_excess() {
        for m in [
            TailModel::pareto(1.0, 1.7).unwrap(),
            TailModel::gpd(2.0, 3.0, 2.5).unwrap(),
            TailModel::epd(1.0, 0.3, -2.0, 2.0).unwrap(),
        ] {
            for &p in &[0.1, 0.01, 0.001] {
                let q = var(&m, p).unwrap();
                let es = expected_shortfall(&m, p).unwrap();
                assert!(
                    (es - (q + m.mean_excess(q).unwrap())).abs() < 1e-9 * es.abs().max(1.0),
                    "{m:?} p={p}"
                );
                assert!(es > q, "ES must exceed VaR");
            }
        }
    }

    #[test]
    fn strict_pareto_es_var_ratio_is_constant() {
        let m = TailModel::pareto(1.0, 1.5).unwrap();
        let ratio0 = 1.5 / 0.5;
        for &p in &[0.1, 0.01, 0.001, 1e-4] {
            let r = expected_shortfall(&m, p).unwrap() / var(&m, p).unwrap();
            assert!((r - ratio0).abs() < 1e-10, "p={p}: {r}");
        }
    }

    #[test]
    fn es_requires_finite_mean() {
        let m = TailModel::pareto(1.0, 0.9).unwrap();
        assert!(matches!(
            expected_shortfall(&m, 0.01),
            Err(Error::InfiniteMean { .. })
        ));
    }

    #[test]
    fn top_share_pareto_closed_form() {
        let m = TailModel::pareto(7.0, 2.0).unwrap();
        assert!((top_share(&m, 0.01).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(top_share(&m, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn top_share_gpd_matches_closed_form_oracle() {
        // independent oracle: the layer-cake closed form for GPD(0,1,3),
        //   integral of Q over [1-p, 1] = p Q(1-p) + (sigma/(alpha-1)) S(Q(1-p))^((alpha-1)/alpha)
        // with E[X] = sigma/(alpha-1)
        let (sigma, alpha, p) = (1.0f64, 3.0f64, 0.05f64);
        let m = TailModel::gpd(0.0, sigma, alpha).unwrap();
        let q = sigma * (p.powf(-1.0 / alpha) - 1.0);
        let tail_integral = sigma / (alpha - 1.0) * (1.0 + q / sigma).powf(1.0 - alpha);
        let oracle = (p * q + tail_integral) / (sigma / (alpha - 1.0));
        let ts = top_share(&m, p).unwrap();
        assert!((ts - oracle).abs() < 1e-8, "quadrature {ts} vs oracle {oracle}");
        assert!(ts > p && ts < 1.0);
    }

    #[test]
    fn top_share_monotone_in_p() {
        let m = TailModel::epd(1.0, 0.5, -1.5, 2.0).unwrap();
        let mut prev = 0.0;
        for &p in &[0.001, 0.01, 0.05, 0.2, 0.5, 0.9, 1.0] {
            let ts = top_share(&m, p).unwrap();
            assert!(ts > prev, "p={p}: {ts} <= {prev}");
            assert!(ts >= p, "TS(p) >= p violated at {p}");
            prev = ts;
        }
    }

    #[test]
    fn lorenz_endpoints_and_pareto_identity() {
        let m = TailModel::pareto(1.0, 2.0).unwrap();
        let grid = [0.0, 0.25, 0.5, 0.9, 0.99, 1.0];
        let l = lorenz(&m, &grid).unwrap();
        assert!(l.y[0].abs() < 1e-12);
        assert!((l.y[grid.len() - 1] - 1.0).abs() < 1e-8);
        // L(1-p) = 1 - p^((alpha-1)/alpha)
        for (i, &v) in grid.iter().enumerate() {
            let p = 1.0 - v;
            if p > 0.0 && p < 1.0 {
                let expect = 1.0 - top_share(&m, p).unwrap();
                assert!((l.y[i] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lorenz_gpd_matches_closed_form_and_is_convex() {
        // integral of Q over [0, v] for GPD(0, sigma, alpha):
        //   (u - sigma) v + sigma alpha/(alpha-1) (1 - (1-v)^((alpha-1)/alpha))
        let (sigma, alpha) = (1.0f64, 3.0f64);
        let m = TailModel::gpd(0.0, sigma, alpha).unwrap();
        let e_x = sigma / (alpha - 1.0);
        let closed = |v: f64| {
            (-sigma * v + sigma * alpha / (alpha - 1.0) * (1.0 - (1.0 - v).powf(1.0 - 1.0 / alpha)))
                / e_x
        };
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let l = lorenz(&m, &grid).unwrap();
        for (i, &v) in grid.iter().enumerate() {
            if v > 0.0 && v < 1.0 {
                assert!(
                    (l.y[i] - closed(v)).abs() < 1e-8,
                    "v={v}: {} vs {}",
                    l.y[i],
                    closed(v)
                );
            }
        }
        // convex nondecreasing
        for w in l.y.windows(3) {
            assert!(w[1] <= w[2] + 1e-12);
            assert!(w[1] - w[0] <= w[2] - w[1] + 1e-9);
        }
        // complement consistency with the top share
        for &p in &[0.05, 0.2, 0.5] {
            let ts = top_share(&m, p).unwrap();
            let lv = lorenz(&m, &[1.0 - p]).unwrap().y[0];
            assert!((ts + lv - 1.0).abs() < 1e-8, "p={p}");
        }
    }

    #[test]
    fn empirical_top_share_small_cases() {
        let s = OrderedSample::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((empirical_top_share(&s, 0.25).unwrap() - 0.25).abs() < 1e-15);
        let s = OrderedSample::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((empirical_top_share(&s, 0.25).unwrap() - 0.4).abs() < 1e-15);
        assert!((empirical_top_share(&s, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(empirical_top_share(&s, 0.0).is_err());
        assert!(empirical_top_share(&s, 1.5).is_err());
    }

    #[test]
    fn max_sum_ratio_small_cases() {
        let s = OrderedSample::new(vec![5.0]).unwrap();
        assert_eq!(max_sum_ratio(&s), 1.0);
        let s = OrderedSample::new(vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((max_sum_ratio(&s) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn var_composed_reference_values() {
        // Pareto fit u=1, alpha=2, q_u=0.1, p=0.001 -> 10
        let fit = fit_for(TailModel::pareto(1.0, 2.0).unwrap(), 1.0, 0.1);
        assert!((var_composed(&fit, 0.001).unwrap() - 10.0).abs() < 1e-12);
        // continuity at the threshold
        assert_eq!(var_composed(&fit, 0.1).unwrap(), 1.0);
        // beyond the tail is extrapolation
        assert!(matches!(
            var_composed(&fit, 0.2),
            Err(Error::ExtrapolationDomain(_))
        ));

        // GPD fit u=2, sigma=1, alpha=1.5, q_u=0.2, p=0.002
        let fit = fit_for(TailModel::gpd(2.0, 1.0, 1.5).unwrap(), 2.0, 0.2);
        let q = var_composed(&fit, 0.002).unwrap();
        assert!((q - 22.544_346_900_318_832).abs() < 1e-9, "got {q}");
        // cross-check by inverting the composed survival numerically
        let s = fit.model.survival(q).unwrap() * fit.q_u;
        assert!((s - 0.002).abs() < 1e-12);
    }

    #[test]
    fn es_composed_reference_values() {
        let fit = fit_for(TailModel::pareto(1.0, 2.0).unwrap(), 1.0, 0.1);
        assert!((es_composed(&fit, 0.001).unwrap() - 20.0).abs() < 1e-12);

        let fit = fit_for(TailModel::gpd(2.0, 1.0, 1.5).unwrap(), 2.0, 0.2);
        let es = es_composed(&fit, 0.002).unwrap();
        assert!((es - 65.633_040_700_956_49).abs() < 1e-8, "got {es}");

        // EPD: definitional route through the conditional tail mean
        let fit = fit_for(TailModel::epd(1.0, 0.5, -1.0, 2.0).unwrap(), 1.0, 0.3);
        let q = var_composed(&fit, 0.01).unwrap();
        let es = es_composed(&fit, 0.01).unwrap();
        assert!((es - fit.model.tail_mean(q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn composed_pareto_agrees_with_unconditional() {
        // For a strict-Pareto composed tail with q_u = (u/u0)^-alpha, the
        // composed quantile equals the ParetoI(u0, alpha) quantile.
        let (u0, alpha, u) = (1.0f64, 2.0f64, 3.0f64);
        let q_u = (u / u0).powf(-alpha);
        let fit = fit_for(TailModel::pareto(u, alpha).unwrap(), u, q_u);
        let full = TailModel::pareto(u0, alpha).unwrap();
        for &p in &[0.01, 0.003, 1e-4] {
            let a = var_composed(&fit, p).unwrap();
            let b = full.quantile(1.0 - p).unwrap();
            assert!((a - b).abs() < 1e-10 * b, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn composed_top_share_degenerate_body() {
        // all-zero body, Pareto tail u=1, alpha=2, q_u=0.5, p=0.5 -> TS = 1
        let fit = fit_for(TailModel::pareto(1.0, 2.0).unwrap(), 1.0, 0.5);
        let ct = ComposedTail::from_parts(fit, 0.0, f64::NAN).unwrap();
        let ts = ct.top_share(0.5, MeanEstimator::Hybrid).unwrap();
        assert!((ts - 1.0).abs() < 1e-12, "got {ts}");
        // TS -> 0 as p -> 0
        let ts_small = ct.top_share(1e-6, MeanEstimator::Hybrid).unwrap();
        assert!(ts_small < 1e-2);
    }

    #[test]
    fn composed_top_share_mean_estimators() {
        let m = TailModel::pareto(1.0, 2.0).unwrap();
        let sample = OrderedSample::new(m.sample(13, 2000).unwrap()).unwrap();
        let u = sample.empirical_quantile(0.9).unwrap();
        let fit = crate::tail_estimation::hill(&sample, u, 0.95).unwrap();
        let ct = ComposedTail::from_sample(&sample, fit).unwrap();
        let hybrid = ct.top_share(0.05, MeanEstimator::Hybrid).unwrap();
        let plain = ct.top_share(0.05, MeanEstimator::SampleMean).unwrap();
        // both sit near the closed form p^((alpha-1)/alpha) = 0.05^0.5
        let truth = 0.05f64.sqrt();
        assert!((hybrid - truth).abs() < 0.06, "hybrid {hybrid}");
        assert!((plain - truth).abs() < 0.06, "plain {plain}");
    }
}
