//! Experiment orchestration: event probabilities with confidence intervals,
//! the convergence sweep over the scaling parameter, log-log rate fitting,
//! and property harnesses for the intensity, jump-count, and exit bounds
//! behind the reduction.

use std::fmt;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cme::{
    build_generator, enumerate_states, transient_solve, Truncation, DEFAULT_SERIES_TOL,
};
use crate::dist::{total_variation, DistributionVector};
use crate::network::{Factor, Reaction, ReactionNetwork};
use crate::projection::{build_projected_system, high_side_limits};
use crate::scaling::{classify_reactions, ScaledSystem};
use crate::ssa::{simulate_original, simulate_reduced, SimConfig};
use crate::{Error, Result};

/// Normal quantile used for all reported confidence intervals.
pub const WILSON_Z95: f64 = 1.96;

/// Decorrelates a base seed with a salt (one splitmix64 step), so that grid
/// points of an experiment draw independent randomness while the whole run
/// stays a pure function of the base seed.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut x = base ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

// ---------------------------------------------------------------------------
// Event sets
// ---------------------------------------------------------------------------

/// A conjunction of per-species copy-number predicates, written like
/// `"S1 in {3,4}"`, `"B >= 10 and C <= 2"`, or `"S4 in [0..5]"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventSet {
    clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Clause {
    species: String,
    pred: Pred,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pred {
    /// Sorted distinct values.
    In(Vec<i64>),
    /// Inclusive range.
    Range(i64, i64),
    AtLeast(i64),
    AtMost(i64),
    Exactly(i64),
}

impl Pred {
    fn matches(&self, v: i64) -> bool {
        match self {
            Pred::In(vals) => vals.binary_search(&v).is_ok(),
            Pred::Range(lo, hi) => *lo <= v && v <= *hi,
            Pred::AtLeast(lo) => v >= *lo,
            Pred::AtMost(hi) => v <= *hi,
            Pred::Exactly(x) => v == *x,
        }
    }
}

impl EventSet {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::InvalidConfig("empty event expression".into()));
        }
        let clauses = text
            .split(" and ")
            .map(parse_clause)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { clauses })
    }

    /// Species mentioned, first occurrence order, deduplicated.
    pub fn species(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for c in &self.clauses {
            if !out.contains(&c.species.as_str()) {
                out.push(&c.species);
            }
        }
        out
    }

    /// Binds clause species to positions in a state legend.
    pub fn resolve(&self, legend: &[String]) -> Result<ResolvedEvent> {
        let clauses = self
            .clauses
            .iter()
            .map(|c| {
                let dim = legend.iter().position(|n| *n == c.species).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "event species '{}' not among [{}]",
                        c.species,
                        legend.join(", ")
                    ))
                })?;
                Ok((dim, c.pred.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedEvent { clauses })
    }

    /// Probability of the event under a distribution whose state tuples are
    /// described by `legend`.
    pub fn probability(&self, dist: &DistributionVector, legend: &[String]) -> Result<f64> {
        let resolved = self.resolve(legend)?;
        Ok(dist.event_probability(|s| resolved.matches(s)))
    }
}

impl std::str::FromStr for EventSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl fmt::Display for EventSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                write!(f, " and ")?;
            }
            write!(f, "{} ", c.species)?;
            match &c.pred {
                Pred::In(vals) => {
                    write!(f, "in {{")?;
                    for (j, v) in vals.iter().enumerate() {
                        if j > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{v}")?;
                    }
                    write!(f, "}}")?;
                }
                Pred::Range(lo, hi) => write!(f, "in [{lo}..{hi}]")?,
                Pred::AtLeast(v) => write!(f, ">= {v}")?,
                Pred::AtMost(v) => write!(f, "<= {v}")?,
                Pred::Exactly(v) => write!(f, "= {v}")?,
            }
        }
        Ok(())
    }
}

/// An event bound to concrete state-tuple positions.
#[derive(Debug, Clone)]
pub struct ResolvedEvent {
    clauses: Vec<(usize, Pred)>,
}

impl ResolvedEvent {
    pub fn matches(&self, state: &[i64]) -> bool {
        self.clauses.iter().all(|(dim, pred)| pred.matches(state[*dim]))
    }
}

fn parse_clause(text: &str) -> Result<Clause> {
    let t = text.trim();
    let err = |msg: &str| Error::InvalidConfig(format!("event clause '{t}': {msg}"));
    let (species, rest) = t
        .split_once(char::is_whitespace)
        .ok_or_else(|| err("expected '<species> <predicate>'"))?;
    if species.is_empty()
        || !species.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
    {
        return Err(err("species name must be alphanumeric"));
    }
    let rest = rest.trim();
    let parse_int = |s: &str| -> Result<i64> {
        s.trim()
            .parse::<i64>()
            .map_err(|_| err(&format!("'{}' is not an integer", s.trim())))
    };
    let pred = if let Some(body) = rest.strip_prefix("in") {
        let body = body.trim_start();
        if let Some(inner) = body.strip_prefix('{') {
            let inner = inner
                .strip_suffix('}')
                .ok_or_else(|| err("unterminated '{'"))?;
            let mut vals = inner
                .split(',')
                .map(parse_int)
                .collect::<Result<Vec<_>>>()?;
            if vals.is_empty() {
                return Err(err("empty value set"));
            }
            vals.sort_unstable();
            vals.dedup();
            Pred::In(vals)
        } else if let Some(inner) = body.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated '['"))?;
            let (a, b) = inner
                .split_once("..")
                .ok_or_else(|| err("range needs 'lo..hi'"))?;
            let (lo, hi) = (parse_int(a)?, parse_int(b)?);
            if lo > hi {
                return Err(err("range lower bound exceeds upper bound"));
            }
            Pred::Range(lo, hi)
        } else {
            return Err(err("'in' expects '{...}' or '[lo..hi]'"));
        }
    } else if let Some(v) = rest.strip_prefix(">=") {
        Pred::AtLeast(parse_int(v)?)
    } else if let Some(v) = rest.strip_prefix("<=") {
        Pred::AtMost(parse_int(v)?)
    } else if let Some(v) = rest.strip_prefix("==") {
        Pred::Exactly(parse_int(v)?)
    } else if let Some(v) = rest.strip_prefix('=') {
        Pred::Exactly(parse_int(v)?)
    } else {
        return Err(err("unknown predicate; use 'in', '>=', '<=', or '='"));
    };
    Ok(Clause { species: species.to_string(), pred })
}

// ---------------------------------------------------------------------------
// Interval and slope estimation
// ---------------------------------------------------------------------------

/// Wilson score interval for a binomial proportion. Returns
/// `(p_hat, lower, upper)`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64, f64)> {
    if trials == 0 {
        return Err(Error::Analysis("Wilson interval needs at least one trial".into()));
    }
    if successes > trials {
        return Err(Error::Analysis("successes exceed trials".into()));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok((p, (center - half).max(0.0), (center + half).min(1.0)))
}

/// Least-squares fit of `d = prefactor * n^(-exponent)` on log-log axes.
#[derive(Debug, Clone, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::Analysis(format!(
            "power-law fit needs at least two points, got {}",
            points.len()
        )));
    }
    for &(n, d) in points {
        if !(n > 0.0 && d > 0.0) || !n.is_finite() || !d.is_finite() {
            return Err(Error::Analysis(format!(
                "power-law fit needs positive finite points, got ({n}, {d})"
            )));
        }
    }
    let m = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, d)| (n.ln(), d.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Analysis("power-law fit needs at least two distinct n".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = logs
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(PowerLawFit {
        exponent: -slope,
        prefactor: intercept.exp(),
        r_squared,
        points_used: points.len(),
    })
}

// ---------------------------------------------------------------------------
// Convergence sweep
// ---------------------------------------------------------------------------

/// Parameters of a convergence sweep over the scaling parameter.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub event: EventSet,
    /// Horizon in reduced time units.
    pub t: f64,
    /// Scaling parameters, ascending.
    pub grid: Vec<f64>,
    /// Trajectories per grid point.
    pub samples: usize,
    pub base_seed: u64,
    /// Simulate the reduced chain at every grid point instead of the
    /// original system. Distances then probe the Monte Carlo noise floor.
    pub self_check: bool,
}

/// How the reference law of the reduced system was obtained.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSummary {
    /// Master-equation solve on the reduced state space.
    MasterEquation { states: usize, deficit: f64 },
    /// Reduced-chain ensemble with a larger sample count.
    Ensemble { samples: usize, seed: u64, stderr: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergencePoint {
    pub n: f64,
    pub seed: u64,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub stderr: f64,
    /// |p_hat - p_ref|.
    pub distance: f64,
    /// Total variation between the empirical low-species joint law and the
    /// reference joint law.
    pub tv_joint: f64,
    pub capped: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub event: String,
    pub t: f64,
    pub samples: usize,
    pub base_seed: u64,
    pub self_check: bool,
    pub p_ref: f64,
    pub reference: ReferenceSummary,
    pub points: Vec<ConvergencePoint>,
    /// Raw point estimates decrease strictly along the grid.
    pub strictly_decreasing: bool,
    /// Each consecutive decrease exceeds twice the combined standard error.
    pub decreasing_beyond_2se: bool,
    pub fit: Option<PowerLawFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_note: Option<String>,
}

impl ConvergenceReport {
    /// Whether every consecutive distance drop exceeds `z` combined standard
    /// errors.
    pub fn decreases_beyond(&self, z: f64) -> bool {
        self.points.windows(2).all(|w| {
            let noise = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
            w[0].distance - w[1].distance > z * noise
        })
    }

    /// Flat table of the per-point results.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,seed,p_hat,wilson_low,wilson_high,stderr,distance,tv_joint,capped\n",
        );
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.n,
                p.seed,
                p.p_hat,
                p.wilson_low,
                p.wilson_high,
                p.stderr,
                p.distance,
                p.tv_joint,
                p.capped
            ));
        }
        out
    }
}

/// Measures `d(N) = |P(original event at t) - P(reduced event at t)|` over a
/// grid of scaling parameters and fits the decay exponent.
pub fn convergence_sweep(net: &ReactionNetwork, cfg: &SweepConfig) -> Result<ConvergenceReport> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidConfig("sweep grid must not be empty".into()));
    }
    let mut grid = cfg.grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if grid.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig("sweep grid has duplicate entries".into()));
    }

    let projected = build_projected_system(net)?;
    let rnet = &projected.network;
    let legend: Vec<String> = rnet.species().iter().map(|s| s.name.clone()).collect();
    let resolved = cfg.event.resolve(&legend)?;
    let low_dims: Vec<usize> = (0..rnet.n_species()).collect();

    // Reference law of the reduced chain at the horizon: master equation
    // when the state space enumerates, otherwise a larger ensemble.
    let init: Vec<i64> = rnet.initial_counts(1.0).iter().map(|&v| v.round() as i64).collect();
    let (ref_dist, reference) = match enumerate_states(rnet, &init, Truncation::Auto) {
        Ok(space) => {
            let gen = build_generator(rnet, &space);
            let p0 = space.point_mass(&init)?;
            let sol = transient_solve(&gen, &p0, cfg.t, DEFAULT_SERIES_TOL)?;
            let dist = space.distribution(&sol.p);
            let summary =
                ReferenceSummary::MasterEquation { states: space.len(), deficit: sol.deficit };
            (dist, summary)
        }
        Err(_) => {
            let seed = derive_seed(cfg.base_seed, u64::MAX);
            let samples = cfg.samples.saturating_mul(10);
            let sim = SimConfig::new(cfg.t, samples, seed);
            let ens = simulate_reduced(rnet, &sim)?;
            let dist = ens.distribution(&low_dims);
            let p = dist.event_probability(|s| resolved.matches(s));
            let stderr = (p * (1.0 - p) / samples as f64).sqrt();
            (dist, ReferenceSummary::Ensemble { samples, seed, stderr })
        }
    };
    let p_ref = ref_dist.event_probability(|s| resolved.matches(s));
    let ref_stderr = match &reference {
        ReferenceSummary::MasterEquation { .. } => 0.0,
        ReferenceSummary::Ensemble { stderr, .. } => *stderr,
    };

    let mut points = Vec::with_capacity(grid.len());
    for (i, &n) in grid.iter().enumerate() {
        let seed = derive_seed(cfg.base_seed, i as u64 + 1);
        let sim = SimConfig::new(cfg.t, cfg.samples, seed);
        let ens = if cfg.self_check {
            simulate_reduced(rnet, &sim)?
        } else {
            let sys = ScaledSystem::new(net, n)?;
            simulate_original(&sys, &sim)?
        };
        let capped = ens.capped_count();
        let effective = cfg.samples as u64 - capped;
        let emp = ens.distribution(&low_dims);
        let p_hat = emp.event_probability(|s| resolved.matches(s));
        let successes = (p_hat * effective as f64).round() as u64;
        let (_, lo, hi) = wilson_interval(successes, effective, WILSON_Z95)?;
        let se_point = (p_hat * (1.0 - p_hat) / effective as f64).sqrt();
        let stderr = (se_point.powi(2) + ref_stderr.powi(2)).sqrt();
        points.push(ConvergencePoint {
            n,
            seed,
            p_hat,
            wilson_low: lo,
            wilson_high: hi,
            stderr,
            distance: (p_hat - p_ref).abs(),
            tv_joint: total_variation(&emp, &ref_dist),
            capped,
        });
    }

    let strictly_decreasing =
        points.windows(2).all(|w| w[1].distance < w[0].distance);

    // Distances buried in Monte Carlo noise carry no slope information;
    // only points whose estimate clears its own standard error enter the
    // fit, and fewer than three survivors yield no fit at all.
    let fit_points: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.distance >= p.stderr)
        .map(|p| (p.n, p.distance))
        .collect();
    let below_noise = points.len() - fit_points.len();
    let (fit, mut fit_note) = if fit_points.len() >= 3 {
        match fit_power_law(&fit_points) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(format!("fit skipped: {e}"))),
        }
    } else {
        (
            None,
            Some(format!(
                "fit skipped: only {} of {} distances rise above their standard error",
                fit_points.len(),
                points.len()
            )),
        )
    };
    if below_noise > 0 && fit.is_some() {
        fit_note = Some(format!(
            "{below_noise} of {} distances sit below one standard error and were \
             excluded from the fit",
            points.len()
        ));
    }

    let report = ConvergenceReport {
        event: cfg.event.to_string(),
        t: cfg.t,
        samples: cfg.samples,
        base_seed: cfg.base_seed,
        self_check: cfg.self_check,
        p_ref,
        reference,
        points,
        strictly_decreasing,
        decreasing_beyond_2se: false,
        fit,
        fit_note,
    };
    let decreasing = report.decreases_beyond(2.0);
    Ok(ConvergenceReport { decreasing_beyond_2se: decreasing, ..report })
}

// ---------------------------------------------------------------------------
// Intensity-gap harness
// ---------------------------------------------------------------------------

/// Parameters of the intensity-gap property check on random compact-set
/// states.
#[derive(Debug, Clone)]
pub struct IntensityGapConfig {
    /// Scaling parameter where the free constants are calibrated.
    pub calibration_n: f64,
    /// Scaling parameters where the bounds are verified.
    pub grid: Vec<f64>,
    /// Compact-set radius exponent: `M = N^rho`.
    pub rho: f64,
    /// Random states per grid point.
    pub samples: usize,
    pub seed: u64,
}

impl Default for IntensityGapConfig {
    fn default() -> Self {
        Self { calibration_n: 1e2, grid: vec![1e3, 1e4], rho: 0.3, samples: 10_000, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntensityGapPoint {
    pub n: f64,
    pub m: f64,
    /// Constants are fitted here rather than verified.
    pub calibration: bool,
    pub states_checked: usize,
    /// Worst `gap - bound` over dominant reactions; at or below zero (up to
    /// float slack) means the per-reaction bound holds.
    pub dominant_worst_excess: f64,
    pub dominant_holds: bool,
    /// Largest scaled intensity of any negligible reaction.
    pub negligible_max: f64,
    /// Fitted ceiling `c_neg * n^(-nu2)`.
    pub negligible_bound: f64,
    pub negligible_holds: bool,
    /// Worst total-intensity mismatch relative to the fitted envelope.
    pub total_worst_ratio: f64,
    pub total_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntensityGapReport {
    pub rho: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub samples: usize,
    pub seed: u64,
    pub c_negligible: f64,
    pub c_total: f64,
    pub points: Vec<IntensityGapPoint>,
    pub all_hold: bool,
}

/// Product of the rate-law factors that read only low-abundance species.
fn low_factor_product(net: &ReactionNetwork, r: &Reaction, z: &[f64]) -> f64 {
    r.law
        .iter()
        .filter(|f| f.species().iter().all(|&i| net.is_low(i)))
        .map(|f| f.value(z))
        .product()
}

/// Sum of high-side factor degrees, as a local sensitivity scale.
fn high_degree(net: &ReactionNetwork, r: &Reaction) -> f64 {
    r.law
        .iter()
        .filter(|f| f.species().iter().any(|&i| !net.is_low(i)))
        .map(|f| match f {
            Factor::FallingFactorial { degree, .. } | Factor::Power { degree, .. } => {
                *degree as f64
            }
            Factor::Sqrt { .. } => 0.5,
            Factor::Hill { .. } => 1.0,
            Factor::Log1p { .. } => 1.0,
        })
        .sum()
}

/// Draws a random state of the compact set: low copy numbers uniform in
/// `[0, floor(M)]`, high coordinates perturbed around their initial values
/// within the admissible window, verified and shrunk on rejection.
fn sample_compact_state(
    sys: &ScaledSystem<'_>,
    limits: &[f64],
    m: f64,
    base_rel: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let net = sys.network;
    let low_bound = m.floor() as i64;
    let z0 = net.initial_scaled();
    let mut z = vec![0.0; net.n_species()];
    for attempt in 0..40 {
        let shrink = 0.5f64.powi(attempt);
        for i in 0..net.n_species() {
            if net.is_low(i) {
                z[i] = rng.random_range(0..=low_bound) as f64;
            } else if z0[i] > 0.0 {
                let u: f64 = rng.random();
                z[i] = z0[i] * (1.0 + base_rel * shrink * (2.0 * u - 1.0));
            } else {
                z[i] = 0.0;
            }
        }
        if sys.in_compact_set(limits, &z, m) {
            return Ok(z);
        }
    }
    Err(Error::Analysis(
        "could not draw a compact-set state; the admissible window may be empty".into(),
    ))
}

/// Checks, on random compact-set states, that (a) each dominant scaled
/// intensity stays within `kappa * lambda_L * M/N` of its factorized form,
/// (b) negligible intensities vanish at rate `N^(-nu2)`, and (c) the total
/// scaled intensity matches the total projected intensity (dominant
/// self-loop projections included) within the `N^(-nu1)` envelope. The free
/// constants of (b) and (c) are fitted at the calibration point.
pub fn intensity_gap_check(
    net: &ReactionNetwork,
    cfg: &IntensityGapConfig,
) -> Result<IntensityGapReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    if !(cfg.rho > 0.0 && cfg.rho < 1.0) {
        return Err(Error::InvalidConfig("rho must lie in (0, 1)".into()));
    }
    let scaling = classify_reactions(net)?;
    let nu1 = 1.0 - cfg.rho;
    let max_low_coeff = net
        .reactions()
        .iter()
        .map(|r| {
            r.source
                .terms()
                .iter()
                .filter(|&&(i, _)| net.is_low(i))
                .map(|&(_, c)| c)
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    let nu2 = 1.0 - cfg.rho * (max_low_coeff as f64 + 1.0);
    if nu2 <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "rho = {} is too large for source degree {max_low_coeff}; \
             the negligible-intensity exponent must stay positive",
            cfg.rho
        )));
    }

    let mut ns = vec![cfg.calibration_n];
    ns.extend_from_slice(&cfg.grid);
    let mut c_negligible = 0.0;
    let mut c_total = 0.0;
    let mut points = Vec::with_capacity(ns.len());
    for (pi, &n) in ns.iter().enumerate() {
        let calibration = pi == 0;
        let sys = ScaledSystem::new(net, n)?;
        let limits = high_side_limits(net, &sys.scaling)?;
        let m = n.powf(cfg.rho);
        let degree_scale = scaling
            .dominant
            .iter()
            .map(|&k| high_degree(net, &net.reactions()[k]))
            .fold(0.0, f64::max);
        let s_scale = limits.iter().fold(1.0, |acc: f64, &s| acc.max(s.abs()));
        let base_rel = (m / n) / (2.0 * degree_scale * s_scale + 1.0);

        let mut dominant_worst = f64::NEG_INFINITY;
        let mut negligible_max = 0.0f64;
        let mut total_ratio = 0.0f64;
        let point_seed = derive_seed(cfg.seed, pi as u64);
        for sample in 0..cfg.samples {
            let mut rng = ChaCha8Rng::seed_from_u64(point_seed);
            rng.set_stream(sample as u64);
            let z = sample_compact_state(&sys, &limits, m, base_rel, &mut rng)?;

            let mut sum_scaled = 0.0;
            for k in 0..net.reactions().len() {
                sum_scaled += sys.scaled_intensity(k, &z);
            }
            let mut sum_projected = 0.0;
            for (pos, &k) in scaling.dominant.iter().enumerate() {
                let r = &net.reactions()[k];
                let low = low_factor_product(net, r, &z);
                let lambda = sys.scaled_intensity(k, &z);
                let gap = (lambda - r.kappa * limits[pos] * low).abs();
                let bound = r.kappa * low * m / n;
                dominant_worst = dominant_worst.max(gap - bound);
                sum_projected += r.kappa * limits[pos] * low;
            }
            for &k in &scaling.negligible {
                negligible_max = negligible_max.max(sys.scaled_intensity(k, &z));
            }
            let envelope = n.powf(-nu1) * sum_projected + n.powf(-nu2);
            total_ratio = total_ratio.max((sum_scaled - sum_projected).abs() / envelope);
        }

        if calibration {
            c_negligible = negligible_max / n.powf(-nu2);
            c_total = total_ratio;
        }
        let negligible_bound = c_negligible * n.powf(-nu2);
        let slack = 1.0 + 1e-9;
        let dominant_holds = dominant_worst <= 1e-12;
        let negligible_holds =
            calibration || negligible_max <= negligible_bound * slack + 1e-300;
        let total_holds = calibration || total_ratio <= c_total * slack + 1e-300;
        points.push(IntensityGapPoint {
            n,
            m,
            calibration,
            states_checked: cfg.samples,
            dominant_worst_excess: dominant_worst,
            dominant_holds,
            negligible_max,
            negligible_bound,
            negligible_holds,
            total_worst_ratio: total_ratio,
            total_holds,
        });
    }
    let all_hold = points
        .iter()
        .all(|p| p.dominant_holds && p.negligible_holds && p.total_holds);
    Ok(IntensityGapReport {
        rho: cfg.rho,
        nu1,
        nu2,
        samples: cfg.samples,
        seed: cfg.seed,
        c_negligible,
        c_total,
        points,
        all_hold,
    })
}

// ---------------------------------------------------------------------------
// Jump-moment harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct JumpMomentConfig {
    /// Horizon where the constant is fitted.
    pub t_fit: f64,
    /// Horizons where the bound is verified.
    pub ts: Vec<f64>,
    /// Multiplier on the fitted constant.
    pub safety: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for JumpMomentConfig {
    fn default() -> Self {
        Self { t_fit: 1.0, ts: vec![1.0, 10.0, 100.0], safety: 2.0, samples: 10_000, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpMomentPoint {
    pub t: f64,
    /// Sample mean of the squared jump count of the reduced chain.
    pub mean_square: f64,
    pub stderr: f64,
    /// `safety * c_fit * max(1, t^2)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpMomentReport {
    pub t_fit: f64,
    /// Fitted `E[J(t_fit)^2] / max(1, t_fit^2)`.
    pub c_fit: f64,
    pub safety: f64,
    pub samples: usize,
    pub seed: u64,
    pub points: Vec<JumpMomentPoint>,
    pub all_hold: bool,
}

/// Verifies that the reduced chain's squared jump count grows no faster than
/// `max(1, t^2)`, with the constant fitted at the shortest horizon.
pub fn jump_moment_check(
    net: &ReactionNetwork,
    cfg: &JumpMomentConfig,
) -> Result<JumpMomentReport> {
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    if !(cfg.safety >= 1.0) {
        return Err(Error::InvalidConfig("safety factor must be at least 1".into()));
    }
    let projected = build_projected_system(net)?;
    let rnet = &projected.network;

    let measure = |t: f64, seed: u64| -> Result<(f64, f64)> {
        let sim = SimConfig::new(t, cfg.samples, seed);
        let ens = simulate_reduced(rnet, &sim)?;
        let sq: Vec<f64> =
            ens.trajectories.iter().map(|tr| (tr.jumps as f64).powi(2)).collect();
        let mean = sq.iter().sum::<f64>() / sq.len() as f64;
        let var = sq.iter().map(|&v| (v - mean).powi(2)).sum::<f64>()
            / (sq.len().saturating_sub(1).max(1)) as f64;
        Ok((mean, (var / sq.len() as f64).sqrt()))
    };

    let (fit_mean, _) = measure(cfg.t_fit, derive_seed(cfg.seed, 0))?;
    let c_fit = fit_mean / cfg.t_fit.powi(2).max(1.0);
    let mut points = Vec::with_capacity(cfg.ts.len());
    for (i, &t) in cfg.ts.iter().enumerate() {
        let (mean_square, stderr) = measure(t, derive_seed(cfg.seed, i as u64 + 1))?;
        let bound = cfg.safety * c_fit * t.powi(2).max(1.0);
        points.push(JumpMomentPoint { t, mean_square, stderr, bound, holds: mean_square <= bound });
    }
    let all_hold = points.iter().all(|p| p.holds);
    Ok(JumpMomentReport {
        t_fit: cfg.t_fit,
        c_fit,
        safety: cfg.safety,
        samples: cfg.samples,
        seed: cfg.seed,
        points,
        all_hold,
    })
}

// ---------------------------------------------------------------------------
// Exit-probability harness
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExitConfig {
    pub grid: Vec<f64>,
    /// Compact-set radius exponent: `M = N^rho`.
    pub rho: f64,
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for ExitConfig {
    fn default() -> Self {
        Self { grid: vec![1e2, 1e3, 1e4], rho: 0.3, t: 10.0, samples: 10_000, seed: 7 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitPoint {
    pub n: f64,
    pub m: f64,
    pub exited: u64,
    pub samples: usize,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub rho: f64,
    pub t: f64,
    pub seed: u64,
    pub points: Vec<ExitPoint>,
    /// Estimates never increase along the (ascending) grid.
    pub nonincreasing: bool,
}

/// Estimates, per scaling parameter, the probability that the original
/// system leaves the compact set before the horizon.
pub fn exit_probability_check(net: &ReactionNetwork, cfg: &ExitConfig) -> Result<ExitReport> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidConfig("exit grid must not be empty".into()));
    }
    if cfg.samples == 0 {
        return Err(Error::InvalidConfig("samples must be positive".into()));
    }
    let mut grid = cfg.grid.clone();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = Vec::with_capacity(grid.len());
    for (i, &n) in grid.iter().enumerate() {
        let sys = ScaledSystem::new(net, n)?;
        let mut sim = SimConfig::new(cfg.t, cfg.samples, derive_seed(cfg.seed, i as u64));
        sim.exit_m = Some(n.powf(cfg.rho));
        let ens = simulate_original(&sys, &sim)?;
        let exited = ens.exited_count();
        let (p_hat, lo, hi) = wilson_interval(exited, cfg.samples as u64, WILSON_Z95)?;
        points.push(ExitPoint {
            n,
            m: n.powf(cfg.rho),
            exited,
            samples: cfg.samples,
            p_hat,
            wilson_low: lo,
            wilson_high: hi,
        });
    }
    let nonincreasing = points.windows(2).all(|w| w[1].p_hat <= w[0].p_hat);
    Ok(ExitReport { rho: cfg.rho, t: cfg.t, seed: cfg.seed, points, nonincreasing })
}

/// Bundle of the three property harnesses, for one-call reporting.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaSuiteReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_gap: Option<IntensityGapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_moment: Option<JumpMomentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_probability: Option<ExitReport>,
}

impl LemmaSuiteReport {
    pub fn all_hold(&self) -> bool {
        self.intensity_gap.as_ref().is_none_or(|r| r.all_hold)
            && self.jump_moment.as_ref().is_none_or(|r| r.all_hold)
            && self.exit_probability.as_ref().is_none_or(|r| r.nonincreasing)
    }
}
