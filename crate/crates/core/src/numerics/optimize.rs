//! Derivative-free minimization: Nelder-Mead simplex with box-bound
//! projection. Likelihood surfaces here are low-dimensional (1-3 parameters)
//! and cheap to evaluate, which is exactly the regime where a simplex earns
//! its keep.

use crate::error::{Error, Result};

/// Result of a minimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub argmin: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Options for [`minimize_with`].
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Convergence tolerance on the simplex diameter (relative to the scale
    /// of the current best point).
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 4000,
        }
    }
}

/// Minimize `f` starting from `x0`, constrained to the box `bounds`
/// (use `f64::NEG_INFINITY` / `f64::INFINITY` for unbounded coordinates).
pub fn minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    tol: f64,
) -> Result<OptimResult> {
    minimize_with(
        f,
        x0,
        bounds,
        MinimizeOptions {
            tol,
            ..MinimizeOptions::default()
        },
    )
}

pub fn minimize_with<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    bounds: &[(f64, f64)],
    opts: MinimizeOptions,
) -> Result<OptimResult> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidInput("x0 must be non-empty".into()));
    }
    if bounds.len() != n {
        return Err(Error::InvalidInput(format!(
            "bounds length {} does not match dimension {n}",
            bounds.len()
        )));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if lo > hi {
            return Err(Error::InvalidInput(format!(
                "bound {i} has lo > hi: [{lo}, {hi}]"
            )));
        }
        if x0[i] < lo || x0[i] > hi {
            return Err(Error::InvalidInput(format!(
                "x0[{i}] = {} outside bound [{lo}, {hi}]",
                x0[i]
            )));
        }
    }

    let clamp = |x: &mut [f64]| {
        for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
            *xi = xi.clamp(lo, hi);
        }
    };
    // Non-finite objective values act as an infinite wall.
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::Optimization(format!(
            "objective is not finite at the starting point ({f0})"
        )));
    }

    // Initial simplex: x0 plus a perturbation along each axis, stepping
    // inward when x0 sits on a bound.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let scale = 0.05 * v[i].abs().max(1.0);
        let (lo, hi) = bounds[i];
        let stepped = if v[i] + scale <= hi {
            v[i] + scale
        } else if v[i] - scale >= lo {
            v[i] - scale
        } else {
            0.5 * (lo + hi)
        };
        v[i] = stepped;
        simplex.push(v);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut iterations = 0usize;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;

        // order by objective
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&i, &j| fvals[i].partial_cmp(&fvals[j]).expect("no NaN objectives"));
        let ordered: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_f: Vec<f64> = idx.iter().map(|&i| fvals[i]).collect();
        simplex = ordered;
        fvals = ordered_f;

        // convergence: simplex diameter below tolerance (relative to scale)
        let scale = simplex[0]
            .iter()
            .fold(1.0f64, |acc, &v| acc.max(v.abs()));
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        if diameter <= opts.tol * scale {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let worst = simplex[n].clone();
        let f_best = fvals[0];
        let f_second_worst = fvals[n - 1];
        let f_worst = fvals[n];

        // reflection
        let mut xr: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| c + ALPHA * (c - w))
            .collect();
        clamp(&mut xr);
        let fr = eval(&xr);

        if fr < f_best {
            // expansion
            let mut xe: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + GAMMA * (c - w))
                .collect();
            clamp(&mut xe);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                fvals[n] = fe;
            } else {
                simplex[n] = xr;
                fvals[n] = fr;
            }
            continue;
        }
        if fr < f_second_worst {
            simplex[n] = xr;
            fvals[n] = fr;
            continue;
        }

        // contraction (outside if the reflected point improved on the worst)
        let towards = if fr < f_worst { &xr } else { &worst };
        let mut xc: Vec<f64> = centroid
            .iter()
            .zip(towards)
            .map(|(c, t)| c + RHO * (t - c))
            .collect();
        clamp(&mut xc);
        let fc = eval(&xc);
        if fc < f_worst.min(fr) {
            simplex[n] = xc;
            fvals[n] = fc;
            continue;
        }

        // shrink towards the best vertex
        let best = simplex[0].clone();
        for k in 1..=n {
            let mut v: Vec<f64> = best
                .iter()
                .zip(&simplex[k])
                .map(|(b, s)| b + SIGMA * (s - b))
                .collect();
            clamp(&mut v);
            fvals[k] = eval(&v);
            simplex[k] = v;
        }
    }

    // best vertex (simplex may be unsorted after the final iteration)
    let (best_idx, _) = fvals
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).expect("no NaN objectives"))
        .expect("non-empty simplex");

    let objective = fvals[best_idx];
    if !objective.is_finite() {
        return Err(Error::Optimization(
            "objective non-finite everywhere along the search".into(),
        ));
    }
    // Never report a point worse than the start.
    if objective > f0 {
        return Ok(OptimResult {
            argmin: x0.to_vec(),
            objective: f0,
            converged: false,
            iterations,
        });
    }

    Ok(OptimResult {
        argmin: simplex[best_idx].clone(),
        objective,
        converged,
        iterations,
    })
}
