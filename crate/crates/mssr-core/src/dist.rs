//! Probability mass functions over integer state tuples.

use std::collections::BTreeMap;

/// A pmf over integer state vectors, empirical or exact. Total mass can sit
/// slightly below one for truncated solutions; `mass()` exposes it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistributionVector {
    map: BTreeMap<Vec<i64>, f64>,
}

impl DistributionVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_weighted(pairs: impl IntoIterator<Item = (Vec<i64>, f64)>) -> Self {
        let mut d = Self::new();
        for (state, w) in pairs {
            d.add(state, w);
        }
        d
    }

    /// Empirical distribution: each state weighted `1/n` where `n` is the
    /// total number of observations.
    pub fn from_observations<'a>(states: impl IntoIterator<Item = &'a [i64]>) -> Self {
        let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
        let mut n = 0u64;
        for s in states {
            *counts.entry(s.to_vec()).or_insert(0) += 1;
            n += 1;
        }
        let mut d = Self::new();
        for (state, c) in counts {
            d.map.insert(state, c as f64 / n as f64);
        }
        d
    }

    pub fn add(&mut self, state: Vec<i64>, weight: f64) {
        if weight != 0.0 {
            *self.map.entry(state).or_insert(0.0) += weight;
        }
    }

    pub fn probability(&self, state: &[i64]) -> f64 {
        self.map.get(state).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> {
        self.map.iter().map(|(k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.map.values().sum()
    }

    /// Rescales to total mass one. No-op on an all-zero distribution.
    pub fn normalized(&self) -> Self {
        let m = self.mass();
        if m <= 0.0 {
            return self.clone();
        }
        Self { map: self.map.iter().map(|(k, v)| (k.clone(), v / m)).collect() }
    }

    /// Marginal over the given coordinate positions, in the given order.
    pub fn marginal(&self, dims: &[usize]) -> Self {
        let mut d = Self::new();
        for (state, w) in self.iter() {
            d.add(dims.iter().map(|&i| state[i]).collect(), w);
        }
        d
    }

    /// Probability of a predicate over full state tuples.
    pub fn event_probability(&self, event: impl Fn(&[i64]) -> bool) -> f64 {
        self.iter().filter(|(s, _)| event(s)).map(|(_, w)| w).sum()
    }

    /// Mean of one coordinate.
    pub fn mean(&self, dim: usize) -> f64 {
        self.iter().map(|(s, w)| s[dim] as f64 * w).sum()
    }
}

/// Total variation distance: half the L1 distance over the union support.
pub fn total_variation(p: &DistributionVector, q: &DistributionVector) -> f64 {
    let mut acc = 0.0;
    for (state, w) in p.iter() {
        acc += (w - q.probability(state)).abs();
    }
    for (state, w) in q.iter() {
        if p.probability(state) == 0.0 {
            acc += w.abs();
        }
    }
    acc / 2.0
}
