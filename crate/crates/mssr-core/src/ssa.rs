//! Exact stochastic simulation of reaction networks (Gillespie's direct
//! method), for both the original multiscale system and its reduced
//! projection.
//!
//! The original system is simulated on the rescaled clock: every intensity
//! carries the prefactor `N^(gamma+beta_k)` and trajectories run to the
//! nominal horizon `t`. The embedded jump chain is identical to the raw-time
//! chain run to `t * N^gamma`, so terminal distributions, jump counts, and
//! exit events agree path by path.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Factor, ReactionNetwork};
use crate::projection::high_side_limits;
use crate::scaling::ScaledSystem;
use crate::{Error, Result};

/// Ensemble simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Time horizon in reduced (rescaled) units.
    pub horizon: f64,
    /// Number of independent trajectories.
    pub samples: usize,
    /// Base seed. Trajectory `i` uses an independent counter-mode stream `i`
    /// of this seed, so results do not depend on scheduling order.
    pub seed: u64,
    /// Hard cap on jumps per trajectory. Trajectories that hit the cap are
    /// flagged, never silently truncated.
    pub max_jumps: u64,
    /// When set, each trajectory monitors first exit from the compact set
    /// with this radius parameter `M` (low copy numbers at most `M`, scaled
    /// high-side intensity factors within `M/N` of their limits).
    pub exit_m: Option<f64>,
    /// Run trajectories on the rayon pool. Ignored (always sequential) when
    /// the `parallel` feature is disabled.
    pub parallel: bool,
}

impl SimConfig {
    pub fn new(horizon: f64, samples: usize, seed: u64) -> Self {
        Self { horizon, samples, seed, max_jumps: 100_000_000, exit_m: None, parallel: true }
    }

    fn validate(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "horizon must be finite and nonnegative, got {}",
                self.horizon
            )));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("samples must be positive".into()));
        }
        if self.max_jumps == 0 {
            return Err(Error::InvalidConfig("max_jumps must be positive".into()));
        }
        Ok(())
    }
}

/// Terminal record of one trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// Copy numbers at the horizon (or at the cap, when `capped`).
    pub terminal: Vec<i64>,
    /// Number of reaction events.
    pub jumps: u64,
    /// Whether the path left the monitored compact set before the horizon.
    /// Always `false` when exit monitoring is off.
    pub exited: bool,
    /// Whether the jump cap fired before the horizon.
    pub capped: bool,
}

/// A batch of independent trajectories with the legend needed to read them.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    /// Species names aligned with `Trajectory::terminal` coordinates.
    pub species: Vec<String>,
    pub trajectories: Vec<Trajectory>,
    pub horizon: f64,
    pub seed: u64,
}

impl Ensemble {
    /// Empirical terminal distribution over the selected coordinates.
    /// Capped trajectories never reached the horizon and are excluded.
    pub fn distribution(&self, dims: &[usize]) -> crate::dist::DistributionVector {
        crate::dist::DistributionVector::from_observations(
            self.trajectories
                .iter()
                .filter(|tr| !tr.capped)
                .map(|tr| tr.terminal.as_slice()),
        )
        .marginal(dims)
    }

    /// Positions of the named species in the terminal vectors.
    pub fn dims(&self, names: &[&str]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|name| {
                self.species.iter().position(|s| s == name).ok_or_else(|| {
                    Error::InvalidConfig(format!("unknown species '{name}' in ensemble"))
                })
            })
            .collect()
    }

    /// First and second moments of the jump count.
    pub fn jump_moments(&self) -> (f64, f64) {
        let n = self.trajectories.len() as f64;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for tr in &self.trajectories {
            let j = tr.jumps as f64;
            m1 += j;
            m2 += j * j;
        }
        (m1 / n, m2 / n)
    }

    pub fn exited_count(&self) -> u64 {
        self.trajectories.iter().filter(|tr| tr.exited).count() as u64
    }

    pub fn capped_count(&self) -> u64 {
        self.trajectories.iter().filter(|tr| tr.capped).count() as u64
    }
}

/// Compact-set membership test evaluated on raw copy numbers.
struct ExitMonitor {
    /// Low-side copy-number bound `M`.
    m: f64,
    n_low: usize,
    /// Allowed deviation `M/N` of each high-side factor product.
    tol: f64,
    checks: Vec<ExitCheck>,
}

struct ExitCheck {
    /// `N^(gamma+beta)` for the reaction.
    prefactor: f64,
    /// High-side factors of the reaction's rate law.
    factors: Vec<Factor>,
    /// The factorization limit the product must stay near.
    limit: f64,
}

impl ExitMonitor {
    fn inside(&self, x: &[f64]) -> bool {
        if x[..self.n_low].iter().any(|&v| v > self.m) {
            return false;
        }
        for check in &self.checks {
            let mut high = check.prefactor;
            for f in &check.factors {
                high *= f.value(x);
            }
            if (high - check.limit).abs() > self.tol {
                return false;
            }
        }
        true
    }
}

/// Precomputed per-reaction data shared by all trajectories of one ensemble.
struct Engine<'a> {
    net: &'a ReactionNetwork,
    init: Vec<f64>,
    /// Multiplies the mass-action/rate-law intensity of each reaction.
    prefactor: Vec<f64>,
    /// Source requirements: reaction fires only if every listed species has
    /// at least the listed count. Keeps states nonnegative for any rate law.
    guards: Vec<Vec<(usize, f64)>>,
    /// Sparse net stoichiometry.
    deltas: Vec<Vec<(usize, f64)>>,
    horizon: f64,
    max_jumps: u64,
    exit: Option<ExitMonitor>,
}

impl Engine<'_> {
    fn run_one(&self, rng: &mut ChaCha8Rng) -> Trajectory {
        let n_reactions = self.net.reactions().len();
        let mut x = self.init.clone();
        let mut t = 0.0;
        let mut jumps = 0u64;
        let mut capped = false;
        let mut exited = match &self.exit {
            Some(mon) => !mon.inside(&x),
            None => false,
        };
        let mut rates = vec![0.0; n_reactions];
        loop {
            let mut a0 = 0.0;
            for (k, slot) in rates.iter_mut().enumerate() {
                let blocked = self.guards[k].iter().any(|&(i, need)| x[i] < need);
                let rate = if blocked {
                    0.0
                } else {
                    self.prefactor[k] * self.net.evaluate_intensity(k, &x)
                };
                *slot = rate;
                a0 += rate;
            }
            if a0 <= 0.0 {
                break;
            }
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / a0;
            if t >= self.horizon {
                break;
            }
            let mut r = rng.random::<f64>() * a0;
            let mut chosen = usize::MAX;
            for (k, &rate) in rates.iter().enumerate() {
                if rate > 0.0 {
                    chosen = k;
                    if r < rate {
                        break;
                    }
                    r -= rate;
                }
            }
            for &(i, d) in &self.deltas[chosen] {
                x[i] += d;
            }
            jumps += 1;
            if !exited {
                if let Some(mon) = &self.exit {
                    exited = !mon.inside(&x);
                }
            }
            if jumps >= self.max_jumps {
                capped = true;
                break;
            }
        }
        Trajectory {
            terminal: x.iter().map(|&v| v.round() as i64).collect(),
            jumps,
            exited,
            capped,
        }
    }

    fn run_ensemble(&self, cfg: &SimConfig) -> Ensemble {
        let seed = cfg.seed;
        let one = |i: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            self.run_one(&mut rng)
        };
        #[cfg(feature = "parallel")]
        let trajectories: Vec<Trajectory> = if cfg.parallel {
            use rayon::prelude::*;
            (0..cfg.samples).into_par_iter().map(one).collect()
        } else {
            (0..cfg.samples).map(one).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let trajectories: Vec<Trajectory> = (0..cfg.samples).map(one).collect();
        Ensemble {
            species: self.net.species().iter().map(|s| s.name.clone()).collect(),
            trajectories,
            horizon: cfg.horizon,
            seed,
        }
    }
}

/// Per reaction, sparse `(species index, value)` pairs.
type SpeciesTerms = Vec<Vec<(usize, f64)>>;

fn guards_and_deltas(net: &ReactionNetwork) -> (SpeciesTerms, SpeciesTerms) {
    let guards = net
        .reactions()
        .iter()
        .map(|r| r.source.terms().iter().map(|&(i, c)| (i, c as f64)).collect())
        .collect();
    let deltas = net
        .reactions()
        .iter()
        .map(|r| {
            r.delta(net.n_species())
                .into_iter()
                .enumerate()
                .filter(|&(_, d)| d != 0)
                .map(|(i, d)| (i, d as f64))
                .collect()
        })
        .collect();
    (guards, deltas)
}

/// Simulates the original multiscale system at its scaling parameter, on the
/// rescaled clock, starting from `N^alpha * z0` copy numbers.
pub fn simulate_original(sys: &ScaledSystem<'_>, cfg: &SimConfig) -> Result<Ensemble> {
    cfg.validate()?;
    let net = sys.network;
    let prefactor: Vec<f64> = net
        .reactions()
        .iter()
        .map(|r| sys.n_pow(sys.gamma + r.beta))
        .collect();
    let exit = match cfg.exit_m {
        Some(m) => Some(build_monitor(sys, m)?),
        None => None,
    };
    let (guards, deltas) = guards_and_deltas(net);
    let engine = Engine {
        net,
        init: net.initial_counts(sys.n),
        prefactor,
        guards,
        deltas,
        horizon: cfg.horizon,
        max_jumps: cfg.max_jumps,
        exit,
    };
    Ok(engine.run_ensemble(cfg))
}

/// Simulates a network as a plain unit-scale jump process: unscaled
/// intensities, initial counts `z0`. This is the semantics of a reduced
/// system, whose species are all at low abundance.
pub fn simulate_reduced(net: &ReactionNetwork, cfg: &SimConfig) -> Result<Ensemble> {
    cfg.validate()?;
    if cfg.exit_m.is_some() {
        return Err(Error::InvalidConfig(
            "exit monitoring applies to the original system only".into(),
        ));
    }
    let (guards, deltas) = guards_and_deltas(net);
    let engine = Engine {
        net,
        init: net.initial_counts(1.0),
        prefactor: vec![1.0; net.reactions().len()],
        guards,
        deltas,
        horizon: cfg.horizon,
        max_jumps: cfg.max_jumps,
        exit: None,
    };
    Ok(engine.run_ensemble(cfg))
}

fn build_monitor(sys: &ScaledSystem<'_>, m: f64) -> Result<ExitMonitor> {
    if !(m > 0.0) {
        return Err(Error::InvalidConfig("exit radius M must be positive".into()));
    }
    let net = sys.network;
    let scaling = &sys.scaling;
    let limits = high_side_limits(net, scaling)?;
    let mut checks = Vec::new();
    for (pos, &k) in scaling.dominant.iter().enumerate() {
        let r = &net.reactions()[k];
        let factors: Vec<Factor> = r
            .law
            .iter()
            .filter(|f| f.species().iter().any(|&i| !net.is_low(i)))
            .cloned()
            .collect();
        checks.push(ExitCheck {
            prefactor: sys.n_pow(sys.gamma + r.beta),
            factors,
            limit: limits[pos],
        });
    }
    Ok(ExitMonitor { m, n_low: net.n_low(), tol: m / sys.n, checks })
}

/// Convenience wrapper: the exit radius `M = N^rho` used throughout the
/// compact-set analysis.
pub fn exit_radius(sys: &ScaledSystem<'_>, rho: f64) -> f64 {
    sys.n.powf(rho)
}
