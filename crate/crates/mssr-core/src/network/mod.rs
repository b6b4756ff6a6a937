//! Reaction network data model: species with abundance exponents, reactions
//! with factored rate laws, intensity evaluation, and conservation laws.
//!
//! Species are kept in canonical order, low-copy block first (alpha = 0),
//! then abundant block (alpha > 0), each sorted by name. Projections onto the
//! low and high blocks are then prefix and suffix views of a state vector.

mod parse;

pub use parse::{parse_network, serialize_network};

use crate::{Error, Exact, Rational, Result};
use num_traits::{Signed, ToPrimitive, Zero};

/// One chemical species. `z0` is the initial abundance in scaled units: the
/// initial raw count is `N^alpha * z0`, so low-copy species (alpha = 0) hold
/// `z0` molecules exactly and `z0` must then be a nonnegative integer.
#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub name: String,
    pub alpha: Rational,
    pub z0: f64,
    pub z0_exact: Exact,
}

impl Species {
    pub fn is_low(&self) -> bool {
        self.alpha.is_zero()
    }
}

/// Linear combination of species with nonnegative integer coefficients,
/// sorted by species index with zero coefficients dropped. The empty complex
/// is written `0` in network files.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Complex(Vec<(usize, u32)>);

impl Complex {
    pub fn new(mut terms: Vec<(usize, u32)>) -> Self {
        terms.sort_unstable_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, u32)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c > 0);
        Complex(merged)
    }

    pub fn empty() -> Self {
        Complex(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> &[(usize, u32)] {
        &self.0
    }

    pub fn coefficient(&self, species: usize) -> u32 {
        self.0
            .iter()
            .find(|&&(i, _)| i == species)
            .map_or(0, |&(_, c)| c)
    }

    /// Largest coefficient, 0 for the empty complex.
    pub fn max_coefficient(&self) -> u32 {
        self.0.iter().map(|&(_, c)| c).max().unwrap_or(0)
    }

    /// Restriction to species indices in `[lo, hi)`, reindexed by `-lo`.
    pub fn restrict(&self, lo: usize, hi: usize) -> Complex {
        Complex(
            self.0
                .iter()
                .filter(|&&(i, _)| i >= lo && i < hi)
                .map(|&(i, c)| (i - lo, c))
                .collect(),
        )
    }

    /// Remaps species indices through `perm` (old index to new index).
    fn permuted(&self, perm: &[usize]) -> Complex {
        Complex::new(self.0.iter().map(|&(i, c)| (perm[i], c)).collect())
    }
}

/// One multiplicative factor of a rate law. A factor owns the species it
/// reads; across a law every species of the source complex is read by
/// exactly one factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    /// `x (x-1) ... (x-degree+1)`, zero below `degree` molecules.
    FallingFactorial { species: usize, degree: u32 },
    /// Plain power `x^degree`.
    Power { species: usize, degree: u32 },
    /// Saturating response `x / (x + c)` with half-saturation `c > 0`.
    Hill { species: usize, c: f64, c_exact: Exact },
    /// `sqrt(x)`.
    Sqrt { species: usize },
    /// `ln(1 + x_1 x_2 ... x_m)` over one or more species.
    Log1p { species: Vec<usize> },
}

impl Factor {
    pub fn species(&self) -> &[usize] {
        match self {
            Factor::FallingFactorial { species, .. }
            | Factor::Power { species, .. }
            | Factor::Hill { species, .. }
            | Factor::Sqrt { species } => std::slice::from_ref(species),
            Factor::Log1p { species } => species,
        }
    }

    /// Value at a state vector of raw molecule counts.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Factor::FallingFactorial { species, degree } => {
                falling_factorial(x[*species], *degree)
            }
            Factor::Power { species, degree } => x[*species].powi(*degree as i32),
            Factor::Hill { species, c, .. } => {
                let v = x[*species];
                if v == 0.0 {
                    0.0
                } else {
                    v / (v + c)
                }
            }
            Factor::Sqrt { species } => x[*species].sqrt(),
            Factor::Log1p { species } => {
                let prod: f64 = species.iter().map(|&i| x[i]).product();
                prod.ln_1p()
            }
        }
    }

    fn permuted(&self, perm: &[usize]) -> Factor {
        let mut f = self.clone();
        match &mut f {
            Factor::FallingFactorial { species, .. }
            | Factor::Power { species, .. }
            | Factor::Hill { species, .. }
            | Factor::Sqrt { species } => *species = perm[*species],
            Factor::Log1p { species } => {
                for s in species.iter_mut() {
                    *s = perm[*s];
                }
                species.sort_unstable();
            }
        }
        f
    }

    fn min_species(&self) -> usize {
        *self.species().iter().min().expect("factor reads a species")
    }
}

pub fn falling_factorial(x: f64, degree: u32) -> f64 {
    if x < f64::from(degree) - 1.0 {
        return 0.0;
    }
    (0..degree).map(|j| x - f64::from(j)).product()
}

/// One reaction `source -> target` firing with intensity
/// `N^beta * kappa * prod(factors)`. `kappa_exact` mirrors `kappa` as the
/// exact rational value of the decimal literal it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub id: String,
    pub source: Complex,
    pub target: Complex,
    pub kappa: f64,
    pub kappa_exact: Exact,
    pub beta: Rational,
    pub law: Vec<Factor>,
}

impl Reaction {
    /// True when the law is the stochastic mass action form: one falling
    /// factorial per source species with degree equal to its coefficient.
    pub fn is_mass_action(&self) -> bool {
        if self.law.len() != self.source.terms().len() {
            return false;
        }
        self.source.terms().iter().zip(&self.law).all(|(&(i, c), f)| {
            matches!(f, Factor::FallingFactorial { species, degree }
                if *species == i && *degree == c)
        })
    }

    /// Net molecule change per firing, dense over `n_species`.
    pub fn delta(&self, n_species: usize) -> Vec<i64> {
        let mut d = vec![0i64; n_species];
        for &(i, c) in self.source.terms() {
            d[i] -= i64::from(c);
        }
        for &(i, c) in self.target.terms() {
            d[i] += i64::from(c);
        }
        d
    }
}

/// A validated reaction network with species in canonical order: indices
/// `0..n_low` are the low-copy block, `n_low..` the abundant block.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
    n_low: usize,
}

impl ReactionNetwork {
    /// Builds a network from species and reactions whose indices refer to the
    /// given species order. Species are re-sorted into canonical order and
    /// all indices remapped; reactions keep their declaration order.
    pub fn new(species: Vec<Species>, reactions: Vec<Reaction>) -> Result<Self> {
        if species.is_empty() {
            return Err(Error::InvalidNetwork("network declares no species".into()));
        }
        let mut names: Vec<&str> = species.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidNetwork("duplicate species name".into()));
        }
        let mut order: Vec<usize> = (0..species.len()).collect();
        order.sort_by(|&a, &b| {
            let key = |i: usize| (!species[i].is_low(), species[i].name.clone());
            key(a).cmp(&key(b))
        });
        let mut perm = vec![0usize; species.len()];
        for (new, &old) in order.iter().enumerate() {
            perm[old] = new;
        }
        let sorted: Vec<Species> = order.into_iter().map(|i| species[i].clone()).collect();
        let n_low = sorted.iter().take_while(|s| s.is_low()).count();
        let reactions: Vec<Reaction> = reactions
            .into_iter()
            .map(|r| Reaction {
                source: r.source.permuted(&perm),
                target: r.target.permuted(&perm),
                law: {
                    let mut law: Vec<Factor> =
                        r.law.iter().map(|f| f.permuted(&perm)).collect();
                    law.sort_by_key(Factor::min_species);
                    law
                },
                ..r
            })
            .collect();
        let net = ReactionNetwork { species: sorted, reactions, n_low };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNetwork(msg));
        for s in &self.species {
            if s.alpha.is_negative() {
                return bad(format!("species {}: alpha must be nonnegative", s.name));
            }
            if s.z0 < 0.0 {
                return bad(format!("species {}: z0 must be nonnegative", s.name));
            }
            if s.is_low() && !s.z0_exact.is_integer() {
                return bad(format!(
                    "species {}: low-copy species need integer z0, got {}",
                    s.name, s.z0
                ));
            }
        }
        let mut ids: Vec<&str> = self.reactions.iter().map(|r| r.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.reactions.len() {
            return bad("duplicate reaction id".into());
        }
        for r in &self.reactions {
            if r.kappa <= 0.0 {
                return bad(format!("reaction {}: kappa must be positive", r.id));
            }
            if r.source == r.target {
                return bad(format!("reaction {}: source and target coincide", r.id));
            }
            for c in [&r.source, &r.target] {
                if let Some(&(i, _)) = c.terms().iter().find(|&&(i, _)| i >= self.species.len()) {
                    return bad(format!("reaction {}: species index {} out of range", r.id, i));
                }
            }
            // Every source species must be read by exactly one factor and no
            // factor may read anything else; intensities then vanish whenever
            // a required reactant is absent.
            let mut read: Vec<usize> = r.law.iter().flat_map(|f| f.species().to_vec()).collect();
            read.sort_unstable();
            let mut support: Vec<usize> = r.source.terms().iter().map(|&(i, _)| i).collect();
            support.sort_unstable();
            if read.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("reaction {}: a species is read by two factors", r.id));
            }
            if read != support {
                return bad(format!(
                    "reaction {}: rate law must read exactly the source species",
                    r.id
                ));
            }
            for f in &r.law {
                match f {
                    Factor::FallingFactorial { degree, .. } | Factor::Power { degree, .. } => {
                        if *degree == 0 {
                            return bad(format!("reaction {}: factor degree must be >= 1", r.id));
                        }
                    }
                    Factor::Hill { c, .. } => {
                        if *c <= 0.0 {
                            return bad(format!(
                                "reaction {}: hill constant must be positive",
                                r.id
                            ));
                        }
                    }
                    Factor::Sqrt { .. } => {}
                    Factor::Log1p { species } => {
                        if species.is_empty() {
                            return bad(format!("reaction {}: empty log1p factor", r.id));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    /// Size of the low-copy prefix block.
    pub fn n_low(&self) -> usize {
        self.n_low
    }

    pub fn is_low(&self, species: usize) -> bool {
        species < self.n_low
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    /// Initial raw molecule counts at scale `n`: `N^alpha * z0` per species,
    /// rounded to the nearest integer count.
    pub fn initial_counts(&self, n: f64) -> Vec<f64> {
        self.species
            .iter()
            .map(|s| (n.powf(rational_f64(s.alpha)) * s.z0).round())
            .collect()
    }

    /// Initial scaled state: `z0` verbatim.
    pub fn initial_scaled(&self) -> Vec<f64> {
        self.species.iter().map(|s| s.z0).collect()
    }

    /// Intensity of reaction `k` at raw counts `x`, without the `N^beta`
    /// scale factor: `kappa * prod(factors)`.
    pub fn evaluate_intensity(&self, k: usize, x: &[f64]) -> f64 {
        let r = &self.reactions[k];
        r.kappa * r.law.iter().map(|f| f.value(x)).product::<f64>()
    }

    /// Integer basis of the left null space of the stoichiometric matrix:
    /// all `w` with `w . delta_k = 0` for every reaction. Each basis vector
    /// is scaled to coprime integers with positive leading entry.
    pub fn conservation_laws(&self) -> Vec<Vec<i64>> {
        let d = self.n_species();
        let rows: Vec<Vec<Rational>> = self
            .reactions
            .iter()
            .map(|r| r.delta(d).into_iter().map(Rational::from_integer).collect())
            .collect();
        null_space_integer(rows, d)
    }
}

pub(crate) fn rational_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub(crate) fn exact_f64(e: &Exact) -> f64 {
    e.to_f64().expect("rational fits in f64")
}

/// Integer basis of `{ w : A w = 0 }` via exact Gauss-Jordan elimination.
/// Rows of `A` are given sparse-dense as rational vectors of length `d`.
fn null_space_integer(mut rows: Vec<Vec<Rational>>, d: usize) -> Vec<Vec<i64>> {
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; d];
    let mut rank = 0usize;
    for col in 0..d {
        let Some(pr) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pr);
        let inv = rows[rank][col].recip();
        for v in rows[rank].iter_mut() {
            *v *= inv;
        }
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && !row[col].is_zero() {
                let f = row[col];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= *p * f;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
    }
    let mut basis = Vec::new();
    for free in 0..d {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut w = vec![Rational::zero(); d];
        w[free] = Rational::from_integer(1);
        for col in 0..d {
            if let Some(pr) = pivot_of_col[col] {
                w[col] = -rows[pr][free];
            }
        }
        basis.push(integerize(w));
    }
    basis
}

fn integerize(w: Vec<Rational>) -> Vec<i64> {
    let lcm = w
        .iter()
        .map(|v| *v.denom())
        .fold(1i64, |acc, d| acc / gcd(acc, d) * d);
    let mut ints: Vec<i64> = w.iter().map(|v| v.numer() * (lcm / v.denom())).collect();
    let g = ints.iter().fold(0i64, |acc, &v| gcd(acc, v.abs()));
    if g > 1 {
        for v in ints.iter_mut() {
            *v /= g;
        }
    }
    if let Some(first) = ints.iter().find(|&&v| v != 0) {
        if *first < 0 {
            for v in ints.iter_mut() {
                *v = -*v;
            }
        }
    }
    ints
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}
