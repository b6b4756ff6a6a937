//! Master-equation solvers on a truncated generator.
//!
//! The transient solver uses uniformization: the semigroup is expanded in
//! Poisson-weighted powers of the substochastic matrix `P = I + Q/L`. Weights
//! are evaluated in log space so large `L*t` cannot underflow, and the
//! neglected tail is certified against a budget. The stationary solver power
//! iterates `I + Q_cens/L` for the censored chain, reporting the achieved
//! generator residual.

use statrs::function::gamma::ln_gamma;

use super::Generator;
use crate::{Error, Result};

/// Default bound on the neglected uniformization tail.
pub const DEFAULT_SERIES_TOL: f64 = 1e-10;

/// Default stationary residual target.
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-12;

/// Transient distribution with its truncation certificate.
#[derive(Debug, Clone)]
pub struct TransientSolution {
    /// Probability over the enumeration at the horizon.
    pub p: Vec<f64>,
    /// Mass missing from `p`: leak through the truncation plus the series
    /// tail. Equals the initial mass minus `sum(p)`.
    pub deficit: f64,
    /// Certified bound on the neglected series tail alone.
    pub series_tail: f64,
    /// Uniformization rate actually used.
    pub uniformization_rate: f64,
    /// Number of Poisson terms accumulated.
    pub terms: usize,
}

/// Stationary distribution of the censored chain with its residual.
#[derive(Debug, Clone)]
pub struct StationarySolution {
    pub pi: Vec<f64>,
    /// Achieved `max_i |(Q_cens pi)_i|`.
    pub residual: f64,
    pub iterations: usize,
    /// Rate at which the untruncated chain would bleed mass out of the
    /// enumeration at stationarity. Small values certify the box.
    pub stationary_leak: f64,
}

/// Evolves `p0` for time `t` under the truncated master equation.
pub fn transient_solve(
    gen: &Generator,
    p0: &[f64],
    t: f64,
    series_tol: f64,
) -> Result<TransientSolution> {
    let n = gen.n;
    if p0.len() != n {
        return Err(Error::Solve(format!(
            "initial vector has {} entries, generator has {n} states",
            p0.len()
        )));
    }
    if p0.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::Solve("initial vector must be nonnegative".into()));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Solve(format!("horizon must be finite and nonnegative, got {t}")));
    }
    if !(series_tol > 0.0 && series_tol < 1.0) {
        return Err(Error::Solve("series tolerance must lie in (0, 1)".into()));
    }
    let mass0: f64 = p0.iter().sum();
    let lambda = gen.max_exit_rate();
    let q = lambda * t;
    if q == 0.0 {
        return Ok(TransientSolution {
            p: p0.to_vec(),
            deficit: 0.0,
            series_tail: 0.0,
            uniformization_rate: lambda,
            terms: 1,
        });
    }

    let ln_q = q.ln();
    let max_terms = (2.0 * (q + 12.0 * q.sqrt() + 200.0)) as usize;
    let mut v = p0.to_vec();
    let mut result = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut cumulative = 0.0;
    let mut m = 0usize;
    loop {
        // Poisson(q) weight of term m, in log space to survive large q.
        let ln_w = if m == 0 { -q } else { -q + m as f64 * ln_q - ln_gamma(m as f64 + 1.0) };
        let w = ln_w.exp();
        if w > 0.0 {
            for i in 0..n {
                result[i] += w * v[i];
            }
        }
        cumulative += w;
        if m as f64 >= q && 1.0 - cumulative <= series_tol {
            break;
        }
        if m >= max_terms {
            return Err(Error::Solve(format!(
                "uniformization did not meet the tail budget within {max_terms} terms"
            )));
        }
        // v <- P v with P = I + Q/lambda.
        gen.apply(&v, &mut scratch);
        for i in 0..n {
            v[i] = (v[i] + scratch[i] / lambda).max(0.0);
        }
        m += 1;
    }
    let mass: f64 = result.iter().sum();
    Ok(TransientSolution {
        p: result,
        deficit: (mass0 - mass).max(0.0),
        series_tail: (1.0 - cumulative).max(0.0) * mass0,
        uniformization_rate: lambda,
        terms: m + 1,
    })
}

/// Computes the stationary distribution of the censored chain by power
/// iteration, to the requested residual.
pub fn stationary_solve(gen: &Generator, tol: f64) -> Result<StationarySolution> {
    let n = gen.n;
    if n == 0 {
        return Err(Error::Solve("empty state space".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Solve("residual tolerance must be positive".into()));
    }
    let max_exit_censored = (0..n).map(|j| -(gen.diag[j] + gen.leak[j])).fold(0.0, f64::max);
    let mut pi = vec![1.0 / n as f64; n];
    let mut scratch = vec![0.0; n];
    if max_exit_censored == 0.0 {
        // Every state absorbing: any distribution is stationary.
        let stationary_leak = gen.leak_rate(&pi);
        return Ok(StationarySolution { pi, residual: 0.0, iterations: 0, stationary_leak });
    }
    // Strict slack keeps the iteration matrix aperiodic.
    let lambda = max_exit_censored * 1.05;
    const MAX_ITERS: usize = 2_000_000;
    const CHECK_EVERY: usize = 64;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for iter in 1..=MAX_ITERS {
        gen.apply_censored(&pi, &mut scratch);
        let mut mass = 0.0;
        for i in 0..n {
            pi[i] = (pi[i] + scratch[i] / lambda).max(0.0);
            mass += pi[i];
        }
        for x in pi.iter_mut() {
            *x /= mass;
        }
        iterations = iter;
        if iter % CHECK_EVERY == 0 {
            gen.apply_censored(&pi, &mut scratch);
            residual = scratch.iter().fold(0.0, |acc: f64, &y| acc.max(y.abs()));
            if residual <= tol {
                break;
            }
        }
    }
    if residual > tol {
        return Err(Error::Solve(format!(
            "stationary iteration stalled at residual {residual:.3e} after {iterations} steps"
        )));
    }
    let stationary_leak = gen.leak_rate(&pi);
    Ok(StationarySolution { pi, residual, iterations, stationary_leak })
}
