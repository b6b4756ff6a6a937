//! Intensity orders, dominant-reaction classification, and the scaled
//! process view of a network.
//!
//! At scale `N` species `i` starts near `N^alpha_i z0_i` and reaction `k`
//! fires with intensity `N^beta_k kappa_k` times its law. The order
//! `theta_k` is the exponent of `N` in that intensity at the initial state;
//! `theta0 = max_k theta_k` sets the short timescale `t N^-theta0` on which
//! only the dominant reactions (order exactly `theta0`) still move low-copy
//! species at visible rates.

use crate::network::{rational_f64, Factor, ReactionNetwork};
use crate::{Error, Rational, Result};
use num_traits::Zero;
use serde::Serialize;

/// Classification of every reaction by intensity order.
#[derive(Debug, Clone)]
pub struct Scaling {
    /// `theta_k` per reaction; `None` marks a degenerate order (a power-like
    /// factor sits on an abundant species whose initial abundance is zero).
    pub orders: Vec<Option<Rational>>,
    pub theta0: Rational,
    /// Indices of dominant reactions, ascending.
    pub dominant: Vec<usize>,
    /// Indices of negligible reactions (finite order below `theta0`).
    pub negligible: Vec<usize>,
    /// Indices of reactions with degenerate order.
    pub degenerate: Vec<usize>,
}

/// Order of `N` contributed by one factor at the initial state, or `None`
/// when the order degenerates.
fn factor_order(net: &ReactionNetwork, f: &Factor) -> Option<Rational> {
    let alpha = |i: usize| net.species()[i].alpha;
    let vanishes = |i: usize| net.species()[i].z0 == 0.0;
    match f {
        Factor::FallingFactorial { species, degree } | Factor::Power { species, degree } => {
            if net.is_low(*species) {
                Some(Rational::zero())
            } else if vanishes(*species) {
                None
            } else {
                Some(alpha(*species) * Rational::from_integer(i64::from(*degree)))
            }
        }
        Factor::Sqrt { species } => {
            if net.is_low(*species) {
                Some(Rational::zero())
            } else if vanishes(*species) {
                None
            } else {
                Some(alpha(*species) / 2)
            }
        }
        // Saturating and logarithmic factors are bounded by a constant and a
        // power of log N respectively; both count as order zero.
        Factor::Hill { .. } => Some(Rational::zero()),
        Factor::Log1p { species } => {
            if species.iter().any(|&i| !net.is_low(i) && vanishes(i)) {
                None
            } else {
                Some(Rational::zero())
            }
        }
    }
}

/// `theta_k = beta_k` plus the orders of all factors of the law.
pub fn intensity_order(net: &ReactionNetwork, k: usize) -> Option<Rational> {
    let r = &net.reactions()[k];
    let mut theta = r.beta;
    for f in &r.law {
        theta += factor_order(net, f)?;
    }
    Some(theta)
}

/// Computes every order and splits reactions into dominant and negligible
/// sets. Ties at the maximum all count as dominant.
pub fn classify_reactions(net: &ReactionNetwork) -> Result<Scaling> {
    if net.reactions().is_empty() {
        return Err(Error::Scaling("network has no reactions".into()));
    }
    let orders: Vec<Option<Rational>> =
        (0..net.reactions().len()).map(|k| intensity_order(net, k)).collect();
    let theta0 = orders
        .iter()
        .flatten()
        .max()
        .copied()
        .ok_or_else(|| Error::Scaling("every reaction has degenerate order".into()))?;
    let mut dominant = Vec::new();
    let mut negligible = Vec::new();
    let mut degenerate = Vec::new();
    for (k, order) in orders.iter().enumerate() {
        match order {
            Some(o) if *o == theta0 => dominant.push(k),
            Some(_) => negligible.push(k),
            None => degenerate.push(k),
        }
    }
    Ok(Scaling { orders, theta0, dominant, negligible, degenerate })
}

/// A network viewed at a fixed scale `N` on the timescale `t N^gamma`.
#[derive(Debug, Clone)]
pub struct ScaledSystem<'a> {
    pub network: &'a ReactionNetwork,
    pub scaling: Scaling,
    pub n: f64,
    pub gamma: Rational,
}

impl<'a> ScaledSystem<'a> {
    /// Scale view on the short timescale, `gamma = -theta0`.
    pub fn new(network: &'a ReactionNetwork, n: f64) -> Result<Self> {
        let scaling = classify_reactions(network)?;
        let gamma = -scaling.theta0;
        Self::with_gamma_scaling(network, n, gamma, scaling)
    }

    /// Scale view with an explicit time-change exponent.
    pub fn with_gamma(network: &'a ReactionNetwork, n: f64, gamma: Rational) -> Result<Self> {
        let scaling = classify_reactions(network)?;
        Self::with_gamma_scaling(network, n, gamma, scaling)
    }

    fn with_gamma_scaling(
        network: &'a ReactionNetwork,
        n: f64,
        gamma: Rational,
        scaling: Scaling,
    ) -> Result<Self> {
        if !(n >= 2.0) || !n.is_finite() {
            return Err(Error::Scaling(format!("scale parameter N must be >= 2, got {n}")));
        }
        Ok(ScaledSystem { network, scaling, n, gamma })
    }

    pub fn n_pow(&self, e: Rational) -> f64 {
        self.n.powf(rational_f64(e))
    }

    /// `N^alpha_i` for every species: the conversion between scaled
    /// abundances and raw counts.
    pub fn abundance_scales(&self) -> Vec<f64> {
        self.network.species().iter().map(|s| self.n_pow(s.alpha)).collect()
    }

    /// Raw counts for a scaled state.
    pub fn to_counts(&self, z: &[f64]) -> Vec<f64> {
        self.network
            .species()
            .iter()
            .zip(z)
            .map(|(s, &v)| v * self.n_pow(s.alpha))
            .collect()
    }

    /// Scaled state for raw counts.
    pub fn to_scaled(&self, x: &[f64]) -> Vec<f64> {
        self.network
            .species()
            .iter()
            .zip(x)
            .map(|(s, &v)| v / self.n_pow(s.alpha))
            .collect()
    }

    /// Intensity of reaction `k` seen by the time-changed process at scaled
    /// state `z`: `N^(gamma+beta_k) kappa_k` times the law at raw counts.
    pub fn scaled_intensity(&self, k: usize, z: &[f64]) -> f64 {
        let r = &self.network.reactions()[k];
        let x = self.to_counts(z);
        self.n_pow(self.gamma + r.beta) * self.network.evaluate_intensity(k, &x)
    }

    /// Splits the scaled intensity of reaction `k` into the low-copy part
    /// (factors on low species, at integer counts, no rate constant) and the
    /// abundant part (remaining factors at raw counts, carrying the whole
    /// power of `N`). The product with `kappa_k` reassembles
    /// `scaled_intensity` exactly. Fails when one factor spans both blocks.
    pub fn decompose_intensity(&self, k: usize, z: &[f64]) -> Result<(f64, f64)> {
        let r = &self.network.reactions()[k];
        let mut low = 1.0;
        let mut high = self.n_pow(self.gamma + r.beta);
        let mut counts = None;
        for f in &r.law {
            match self.factor_side(f)? {
                Side::Low => low *= f.value(z),
                Side::High => {
                    let x = counts.get_or_insert_with(|| self.to_counts(z));
                    high *= f.value(x);
                }
            }
        }
        Ok((low, high))
    }

    fn factor_side(&self, f: &Factor) -> Result<Side> {
        let n_low = f.species().iter().filter(|&&i| self.network.is_low(i)).count();
        if n_low == f.species().len() {
            Ok(Side::Low)
        } else if n_low == 0 {
            Ok(Side::High)
        } else {
            Err(Error::Scaling(
                "a log1p factor spans both low and abundant species; \
                 the intensity does not factor over the blocks"
                    .into(),
            ))
        }
    }

    /// Wall-clock horizon corresponding to `t` units of changed time.
    pub fn raw_horizon(&self, t: f64) -> f64 {
        t * self.n_pow(self.gamma)
    }

    /// Membership in the compact set `S_M`: all low-copy coordinates at most
    /// `M` and, for every dominant reaction, the abundant part of the
    /// intensity within `M/N` of its limit. `s` lists the limits aligned
    /// with `scaling.dominant`.
    pub fn in_compact_set(&self, s: &[f64], z: &[f64], m: f64) -> bool {
        debug_assert_eq!(s.len(), self.scaling.dominant.len());
        let n_low = self.network.n_low();
        if z[..n_low].iter().any(|&v| v > m) {
            return false;
        }
        let tol = m / self.n;
        self.scaling.dominant.iter().zip(s).all(|(&k, &sk)| {
            match self.decompose_intensity(k, z) {
                Ok((_, high)) => (high - sk).abs() <= tol,
                Err(_) => false,
            }
        })
    }
}

enum Side {
    Low,
    High,
}

/// Checked structural conditions for one reaction, serialized into the
/// reduction report. `None` means the condition holds.
#[derive(Debug, Clone, Serialize)]
pub struct ReactionConditions {
    pub id: String,
    /// Intensity order as a rational string, or null when degenerate.
    pub order: Option<String>,
    pub dominant: bool,
    /// Violation message when the law does not factor over the blocks.
    pub factorization: Option<String>,
    /// Polynomial growth degree of the low-copy part of the law.
    pub low_growth_degree: u32,
    /// Violation message when the abundant part has no finite limit.
    pub limit: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub reactions: Vec<ReactionConditions>,
}

impl ConditionReport {
    pub fn all_hold(&self) -> bool {
        self.reactions
            .iter()
            .all(|r| r.factorization.is_none() && r.limit.is_none())
    }
}

/// Checks, per reaction, that the law factors into a low-copy part and an
/// abundant part (every factor sits in one block), that the low part grows
/// at most polynomially (true for the whole factor catalog; the degree is
/// reported), and that for dominant reactions the abundant part converges
/// to a finite limit as `N` grows.
pub fn validate_conditions(net: &ReactionNetwork, scaling: &Scaling) -> ConditionReport {
    let reactions = net
        .reactions()
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut factorization = None;
            let mut limit = None;
            let mut low_growth_degree = 0u32;
            for f in &r.law {
                let lows = f.species().iter().filter(|&&i| net.is_low(i)).count();
                let all_low = lows == f.species().len();
                if lows > 0 && !all_low {
                    factorization = Some(format!(
                        "factor {} mixes low and abundant species",
                        factor_name(f)
                    ));
                }
                if all_low {
                    low_growth_degree += match f {
                        Factor::FallingFactorial { degree, .. }
                        | Factor::Power { degree, .. } => *degree,
                        Factor::Sqrt { .. } | Factor::Hill { .. } => 1,
                        Factor::Log1p { species } => species.len() as u32,
                    };
                } else if matches!(f, Factor::Log1p { .. }) {
                    // ln(1 + x) grows without bound along N^alpha z, so the
                    // abundant part of this law has no finite limit.
                    limit = Some(format!(
                        "factor {} grows like log N on abundant species",
                        factor_name(f)
                    ));
                }
            }
            if !scaling.dominant.contains(&k) {
                limit = None;
            }
            ReactionConditions {
                id: r.id.clone(),
                order: scaling.orders[k].map(|o| o.to_string()),
                dominant: scaling.dominant.contains(&k),
                factorization,
                low_growth_degree,
                limit,
            }
        })
        .collect();
    ConditionReport { reactions }
}

fn factor_name(f: &Factor) -> &'static str {
    match f {
        Factor::FallingFactorial { .. } => "ff",
        Factor::Power { .. } => "pow",
        Factor::Hill { .. } => "hill",
        Factor::Sqrt { .. } => "sqrt",
        Factor::Log1p { .. } => "log1p",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::network::parse_network;
    use approx::assert_relative_eq;

    fn orders_of(text: &str) -> (Vec<Option<Rational>>, Rational, Vec<usize>, Vec<usize>) {
        let net = parse_network(text).unwrap();
        let s = classify_reactions(&net).unwrap();
        (s.orders, s.theta0, s.dominant, s.negligible)
    }

    fn rat(n: i64) -> Option<Rational> {
        Some(Rational::from_integer(n))
    }

    #[test]
    fn futile_orders_and_classification() {
        let (orders, theta0, dominant, negligible) = orders_of(bundled::FUTILE);
        assert_eq!(
            orders,
            vec![rat(1), rat(1), rat(1), rat(1), rat(1), rat(1), rat(0), rat(0), rat(1), rat(1)]
        );
        assert_eq!(theta0, Rational::from_integer(1));
        assert_eq!(dominant, vec![0, 1, 2, 3, 4, 5, 8, 9]);
        assert_eq!(negligible, vec![6, 7]);
    }

    #[test]
    fn abc_orders_and_classification() {
        let (orders, theta0, dominant, negligible) = orders_of(bundled::ABC);
        assert_eq!(orders, vec![rat(-1), rat(0), rat(1), rat(1), rat(1), rat(1)]);
        assert_eq!(theta0, Rational::from_integer(1));
        assert_eq!(dominant, vec![2, 3, 4, 5]);
        assert_eq!(negligible, vec![0, 1]);
    }

    #[test]
    fn yeast_dominant_pair() {
        let (_, theta0, dominant, _) = orders_of(bundled::YEAST);
        let net = parse_network(bundled::YEAST).unwrap();
        let ids: Vec<&str> = dominant.iter().map(|&k| net.reactions()[k].id.as_str()).collect();
        assert_eq!(theta0, Rational::from_integer(1));
        assert_eq!(ids, ["r5", "r7"]);
    }

    #[test]
    fn p53_dominant_set() {
        let net = parse_network(bundled::P53).unwrap();
        let s = classify_reactions(&net).unwrap();
        let ids: Vec<&str> = s.dominant.iter().map(|&k| net.reactions()[k].id.as_str()).collect();
        assert_eq!(ids, ["r1", "r2", "r3", "r6", "r7", "r9", "r11", "r12"]);
    }

    #[test]
    fn lotka_everything_dominant_at_order_zero() {
        let (_, theta0, dominant, negligible) = orders_of(bundled::LOTKA);
        assert_eq!(theta0, Rational::from_integer(0));
        assert_eq!(dominant.len(), 9);
        assert!(negligible.is_empty());
    }

    #[test]
    fn scaled_intensity_matches_hand_value() {
        // A low, B abundant, reaction A+B -> 2B with beta = -1; at gamma = -1
        // and N = 100 the intensity is 100^-2 * 2 * 100 = 0.02.
        let text = "species A alpha=0 z0=2\nspecies B alpha=1 z0=1\n\
                    reaction r: A + B -> 2 B kappa=1 beta=-1\n";
        let net = parse_network(text).unwrap();
        let sys =
            ScaledSystem::with_gamma(&net, 100.0, Rational::from_integer(-1)).unwrap();
        let z = net.initial_scaled();
        assert_relative_eq!(sys.scaled_intensity(0, &z), 0.02, max_relative = 1e-12);
        let (low, high) = sys.decompose_intensity(0, &z).unwrap();
        assert_relative_eq!(low, 2.0, max_relative = 1e-12);
        assert_relative_eq!(high, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn time_change_cancels_order_of_dominant_reactions() {
        // Futile reaction r1 at the initial state: kappa * z1 * z2 = 2 for
        // every N once the order is cancelled by gamma = -theta0.
        let net = parse_network(bundled::FUTILE).unwrap();
        let z = net.initial_scaled();
        for n in [100.0, 10_000.0] {
            let sys = ScaledSystem::new(&net, n).unwrap();
            assert_relative_eq!(sys.scaled_intensity(0, &z), 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn decomposition_reassembles_intensity() {
        for text in [bundled::FUTILE, bundled::YEAST, bundled::P53, bundled::LOTKA] {
            let net = parse_network(text).unwrap();
            let sys = ScaledSystem::new(&net, 1000.0).unwrap();
            let mut z = net.initial_scaled();
            // Move off the initial state to exercise nontrivial values.
            for (i, v) in z.iter_mut().enumerate() {
                if net.is_low(i) {
                    *v += (i % 3) as f64;
                } else {
                    *v *= 1.25;
                }
            }
            for (k, r) in net.reactions().iter().enumerate() {
                let (low, high) = sys.decompose_intensity(k, &z).unwrap();
                assert_relative_eq!(
                    r.kappa * low * high,
                    sys.scaled_intensity(k, &z),
                    max_relative = 1e-12,
                    epsilon = 1e-300
                );
            }
        }
    }

    #[test]
    fn mixed_log1p_factor_fails_decomposition() {
        let text = "species A alpha=0 z0=1\nspecies B alpha=1 z0=1\n\
                    reaction r: A + B -> A kappa=1 beta=0 law=log1p(A*B)\n";
        let net = parse_network(text).unwrap();
        let sys = ScaledSystem::new(&net, 100.0).unwrap();
        let err = sys.decompose_intensity(0, &net.initial_scaled()).unwrap_err();
        assert!(err.to_string().contains("log1p"), "{err}");
        let report = validate_conditions(&net, &sys.scaling);
        assert!(!report.all_hold());
        assert!(report.reactions[0].factorization.is_some());
    }

    #[test]
    fn log1p_on_abundant_species_has_no_limit() {
        let text = "species A alpha=0 z0=1\nspecies B alpha=1 z0=1\n\
                    reaction r: B -> 0 kappa=1 beta=0 law=log1p(B)\n\
                    reaction s: A -> 0 kappa=1 beta=0\n";
        let net = parse_network(text).unwrap();
        let scaling = classify_reactions(&net).unwrap();
        let report = validate_conditions(&net, &scaling);
        let r = report.reactions.iter().find(|r| r.id == "r").unwrap();
        assert!(r.dominant, "order zero ties at the maximum");
        assert!(r.limit.is_some());
    }

    #[test]
    fn degenerate_order_when_abundant_species_starts_empty() {
        let text = "species A alpha=0 z0=1\nspecies B alpha=1 z0=0\n\
                    reaction r: B -> 0 kappa=1 beta=0\n\
                    reaction s: A -> 0 kappa=1 beta=0\n";
        let net = parse_network(text).unwrap();
        let scaling = classify_reactions(&net).unwrap();
        assert_eq!(scaling.orders[0], None);
        assert_eq!(scaling.degenerate, vec![0]);
        assert_eq!(scaling.dominant, vec![1]);
    }

    #[test]
    fn bundled_networks_satisfy_all_conditions() {
        for text in [bundled::ABC, bundled::FUTILE, bundled::YEAST, bundled::P53, bundled::LOTKA]
        {
            let net = parse_network(text).unwrap();
            let scaling = classify_reactions(&net).unwrap();
            assert!(validate_conditions(&net, &scaling).all_hold());
        }
    }

    #[test]
    fn compact_set_rejects_drifted_abundances() {
        let net = parse_network(bundled::FUTILE).unwrap();
        let sys = ScaledSystem::new(&net, 10_000.0).unwrap();
        let s = crate::projection::high_side_limits(&net, &sys.scaling).unwrap();
        let m = sys.n.powf(0.3);
        let z = net.initial_scaled();
        assert!(sys.in_compact_set(&s, &z, m));
        let s2 = net.species_index("S2").unwrap();
        let mut drifted = z.clone();
        drifted[s2] += 2.0 * m / sys.n;
        assert!(!sys.in_compact_set(&s, &drifted, m));
        let s1 = net.species_index("S1").unwrap();
        let mut crowded = z;
        crowded[s1] = m.ceil() + 1.0;
        assert!(!sys.in_compact_set(&s, &crowded, m));
    }
}
