//! Finite-state solution of the chemical master equation.
//!
//! The master equation is solved on a finite enumeration of states. Flow out
//! of the enumeration is collected as a leak term, so every answer carries a
//! certificate of how much probability the truncation lost. Conservation
//! constraints detected from the stoichiometry pin species exactly; when they
//! confine every species the enumeration is closed and nothing can leak.

mod reference;
mod solve;

pub use reference::birth_death_reference;
pub use solve::{
    stationary_solve, transient_solve, StationarySolution, TransientSolution,
    DEFAULT_SERIES_TOL, DEFAULT_STATIONARY_TOL,
};

use std::collections::HashMap;

use serde::Serialize;

use crate::dist::DistributionVector;
use crate::network::ReactionNetwork;
use crate::{Error, Result};

/// How to truncate the (possibly infinite) state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Cap every species at this copy number.
    Box(i64),
    /// Bound species through detected conservation constraints where
    /// possible; the rest fall back to a default box sized from the initial
    /// state.
    Auto,
}

/// Largest allowed enumeration, as a guard against runaway products.
const MAX_STATES: u128 = 2_000_000;

/// An enumerated finite state set with constant-time state lookup.
#[derive(Debug, Clone)]
pub struct StateSpace {
    /// Species names aligned with state coordinates.
    pub species: Vec<String>,
    /// States in lexicographic order.
    pub states: Vec<Vec<i64>>,
    /// Per-species upper bounds actually used.
    pub bounds: Vec<i64>,
    /// Conservation constraints enforced exactly: weights and conserved total.
    pub constraints: Vec<(Vec<i64>, i64)>,
    /// Which species are pinned by some constraint.
    pub covered: Vec<bool>,
    /// True when constraints bound every species within the enumeration, so
    /// no reachable state lies outside it.
    pub closed: bool,
    index: HashMap<Vec<i64>, usize>,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &[i64]) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Probability vector concentrated on one state.
    pub fn point_mass(&self, state: &[i64]) -> Result<Vec<f64>> {
        let idx = self.index_of(state).ok_or_else(|| {
            Error::Enumeration(format!("state {state:?} lies outside the enumeration"))
        })?;
        let mut p = vec![0.0; self.len()];
        p[idx] = 1.0;
        Ok(p)
    }

    /// Wraps a probability vector as a distribution keyed by state tuples.
    pub fn distribution(&self, p: &[f64]) -> DistributionVector {
        DistributionVector::from_weighted(
            self.states.iter().zip(p).filter(|(_, &w)| w != 0.0).map(|(s, &w)| (s.clone(), w)),
        )
    }
}

/// Enumerates all states within per-species bounds that satisfy every
/// conservation constraint consistent with `init`.
pub fn enumerate_states(
    net: &ReactionNetwork,
    init: &[i64],
    truncation: Truncation,
) -> Result<StateSpace> {
    let ns = net.n_species();
    if init.len() != ns {
        return Err(Error::Enumeration(format!(
            "initial state has {} coordinates, network has {ns} species",
            init.len()
        )));
    }
    if init.iter().any(|&v| v < 0) {
        return Err(Error::Enumeration("initial copy numbers must be nonnegative".into()));
    }

    // Componentwise nonnegative conservation laws bound every species they
    // touch: w.x = w.init forces x_i <= total / w_i. Mixed-sign laws do not
    // bound and are left out.
    let constraints: Vec<(Vec<i64>, i64)> = net
        .conservation_laws()
        .into_iter()
        .filter(|w| w.iter().all(|&c| c >= 0))
        .map(|w| {
            let total = w.iter().zip(init).map(|(&c, &v)| c * v).sum::<i64>();
            (w, total)
        })
        .collect();

    let mut pinned = vec![i64::MAX; ns];
    for (w, total) in &constraints {
        for i in 0..ns {
            if w[i] > 0 {
                pinned[i] = pinned[i].min(total / w[i]);
            }
        }
    }
    let covered: Vec<bool> = pinned.iter().map(|&b| b < i64::MAX).collect();

    let (bounds, closed): (Vec<i64>, bool) = match truncation {
        Truncation::Box(m) => {
            if m < 0 {
                return Err(Error::Enumeration("box bound must be nonnegative".into()));
            }
            let closed = covered.iter().zip(&pinned).all(|(&c, &p)| c && p <= m);
            ((0..ns).map(|i| pinned[i].min(m)).collect(), closed)
        }
        Truncation::Auto => {
            let default_box = 40.max(4 * init.iter().copied().max().unwrap_or(0));
            let closed = covered.iter().all(|&c| c);
            (
                (0..ns)
                    .map(|i| if covered[i] { pinned[i] } else { default_box })
                    .collect(),
                closed,
            )
        }
    };

    let product: u128 = bounds.iter().map(|&b| b as u128 + 1).product();
    if product > MAX_STATES {
        return Err(Error::Enumeration(format!(
            "truncation spans {product} states, above the {MAX_STATES} limit"
        )));
    }

    let mut states = Vec::new();
    let mut current = vec![0i64; ns];
    enumerate_rec(&bounds, &constraints, 0, &mut current, &mut states);

    let index: HashMap<Vec<i64>, usize> =
        states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    if !index.contains_key(init) {
        return Err(Error::Enumeration(
            "initial state violates the truncation; widen the box".into(),
        ));
    }

    Ok(StateSpace {
        species: net.species().iter().map(|s| s.name.clone()).collect(),
        states,
        bounds,
        constraints,
        covered,
        closed,
        index,
    })
}

fn enumerate_rec(
    bounds: &[i64],
    constraints: &[(Vec<i64>, i64)],
    pos: usize,
    current: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
) {
    if pos == bounds.len() {
        if constraints
            .iter()
            .all(|(w, total)| w.iter().zip(current.iter()).map(|(&c, &v)| c * v).sum::<i64>() == *total)
        {
            out.push(current.clone());
        }
        return;
    }
    for v in 0..=bounds[pos] {
        current[pos] = v;
        enumerate_rec(bounds, constraints, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Sparse master-equation generator on an enumerated state space, in the
/// column convention: probability flows from each source state `j` along
/// `transitions[j]`, and `diag[j]` is the negative total outflow including
/// the part that leaves the enumeration (`leak[j]`).
#[derive(Debug, Clone)]
pub struct Generator {
    pub n: usize,
    pub transitions: Vec<Vec<(u32, f64)>>,
    pub diag: Vec<f64>,
    pub leak: Vec<f64>,
}

impl Generator {
    pub fn max_exit_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |acc, &d| acc.max(-d))
    }

    /// `y = Q p`.
    pub fn apply(&self, p: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            let pj = p[j];
            if pj == 0.0 {
                continue;
            }
            y[j] += self.diag[j] * pj;
            for &(i, rate) in &self.transitions[j] {
                y[i as usize] += rate * pj;
            }
        }
    }

    /// `y = Q_cens p` where the censored generator ignores leak outflow,
    /// keeping all mass inside the enumeration.
    pub fn apply_censored(&self, p: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for j in 0..self.n {
            let pj = p[j];
            if pj == 0.0 {
                continue;
            }
            y[j] += (self.diag[j] + self.leak[j]) * pj;
            for &(i, rate) in &self.transitions[j] {
                y[i as usize] += rate * pj;
            }
        }
    }

    /// Instantaneous rate of probability loss through the truncation.
    pub fn leak_rate(&self, p: &[f64]) -> f64 {
        self.leak.iter().zip(p).map(|(&l, &pj)| l * pj).sum()
    }

    /// Dense matrix form, for small cross-checks.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut q = vec![vec![0.0; self.n]; self.n];
        for (j, (&diag, col)) in self.diag.iter().zip(&self.transitions).enumerate() {
            q[j][j] += diag;
            for &(i, rate) in col {
                q[i as usize][j] += rate;
            }
        }
        q
    }
}

/// Builds the truncated generator of a network treated as a unit-scale jump
/// process (the semantics of reduced systems).
pub fn build_generator(net: &ReactionNetwork, space: &StateSpace) -> Generator {
    let n = space.len();
    let mut transitions = vec![Vec::new(); n];
    let mut diag = vec![0.0; n];
    let mut leak = vec![0.0; n];
    let deltas: Vec<Vec<i64>> =
        net.reactions().iter().map(|r| r.delta(net.n_species())).collect();
    let mut xf = vec![0.0; net.n_species()];
    let mut target = vec![0i64; net.n_species()];
    for (j, state) in space.states.iter().enumerate() {
        for (i, &v) in state.iter().enumerate() {
            xf[i] = v as f64;
        }
        for (k, r) in net.reactions().iter().enumerate() {
            if r.source.terms().iter().any(|&(i, c)| state[i] < c as i64) {
                continue;
            }
            let rate = net.evaluate_intensity(k, &xf);
            if !(rate > 0.0) {
                continue;
            }
            for i in 0..state.len() {
                target[i] = state[i] + deltas[k][i];
            }
            match space.index_of(&target) {
                Some(i) => transitions[j].push((i as u32, rate)),
                None => leak[j] += rate,
            }
            diag[j] -= rate;
        }
    }
    Generator { n, transitions, diag, leak }
}

/// Structural and numerical diagnostics for a stationary solution: whether
/// the enumeration is closed, whether the chain is one communicating class,
/// and how much stationary mass presses against the artificial boundary.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityProbe {
    pub states: usize,
    pub closed: bool,
    pub strongly_connected: bool,
    pub residual: f64,
    /// Stationary probability flow that the truncation would discard.
    pub stationary_leak: f64,
    /// Stationary mass on states touching a box bound not backed by a
    /// conservation constraint.
    pub boundary_mass: f64,
}

pub fn stationarity_probe(
    space: &StateSpace,
    gen: &Generator,
    sol: &StationarySolution,
) -> StationarityProbe {
    let n = gen.n;
    let forward: Vec<&Vec<(u32, f64)>> = gen.transitions.iter().collect();
    let mut backward = vec![Vec::new(); n];
    for (j, outs) in gen.transitions.iter().enumerate() {
        for &(i, _) in outs {
            backward[i as usize].push(j as u32);
        }
    }
    let reach = |adj: &dyn Fn(usize) -> Vec<usize>| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(j) = stack.pop() {
            for i in adj(j) {
                if !seen[i] {
                    seen[i] = true;
                    count += 1;
                    stack.push(i);
                }
            }
        }
        count
    };
    let fwd = reach(&|j| forward[j].iter().map(|&(i, _)| i as usize).collect());
    let bwd = reach(&|j| backward[j].iter().map(|&i| i as usize).collect());
    let strongly_connected = fwd == n && bwd == n;

    let boundary_mass = space
        .states
        .iter()
        .zip(&sol.pi)
        .filter(|(s, _)| {
            s.iter()
                .enumerate()
                .any(|(i, &v)| !space.covered[i] && v == space.bounds[i])
        })
        .map(|(_, &p)| p)
        .sum();

    StationarityProbe {
        states: n,
        closed: space.closed,
        strongly_connected,
        residual: sol.residual,
        stationary_leak: gen.leak_rate(&sol.pi),
        boundary_mass,
    }
}
