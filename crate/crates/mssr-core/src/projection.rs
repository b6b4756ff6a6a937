//! Construction of the short-timescale projected system.
//!
//! Dominant reactions keep their low-copy factors verbatim; their abundant
//! factors converge, under the time change, to finite limits `s_k` fixed by
//! the initial abundances. Each dominant reaction therefore projects onto the
//! low block as `q_L(y_k) -> q_L(y'_k)` with effective rate constant
//! `kappa_k s_k`, and projections sharing complexes and low-copy law merge by
//! summing those constants. Projections that change nothing (`q_L(y_k) =
//! q_L(y'_k)`) drop out. The result is a scale-free network on the low-copy
//! species alone.

use crate::network::{Complex, Factor, Reaction, ReactionNetwork};
use crate::scaling::{classify_reactions, Scaling};
use crate::{Error, Exact, Result};
use num_traits::{One, Zero};

/// Limit of one abundant-side factor under the time-changed scaling, with an
/// exact value when the limit is rational.
fn high_factor_limit(net: &ReactionNetwork, f: &Factor) -> Result<(f64, Option<Exact>)> {
    let sp = |i: usize| &net.species()[i];
    match f {
        Factor::FallingFactorial { species, degree } | Factor::Power { species, degree } => {
            let z0 = sp(*species).z0;
            let exact = num_traits::pow(sp(*species).z0_exact, *degree as usize);
            Ok((z0.powi(*degree as i32), Some(exact)))
        }
        Factor::Hill { species, .. } => {
            if sp(*species).z0 > 0.0 {
                Ok((1.0, Some(Exact::one())))
            } else {
                Ok((0.0, Some(Exact::zero())))
            }
        }
        Factor::Sqrt { species } => Ok((sp(*species).z0.sqrt(), None)),
        Factor::Log1p { .. } => Err(Error::Scaling(
            "log1p factor on abundant species grows like log N".into(),
        )),
    }
}

/// Limit `s_k` of the abundant part of one dominant reaction.
fn reaction_limit(net: &ReactionNetwork, r: &Reaction) -> Result<(f64, Option<Exact>)> {
    let mut value = 1.0;
    let mut exact = Some(Exact::one());
    for f in &r.law {
        let lows = f.species().iter().filter(|&&i| net.is_low(i)).count();
        if lows == f.species().len() {
            continue;
        }
        if lows > 0 {
            return Err(Error::NoLimit {
                reaction: r.id.clone(),
                message: "a factor mixes low and abundant species".into(),
            });
        }
        let (v, e) = high_factor_limit(net, f).map_err(|err| Error::NoLimit {
            reaction: r.id.clone(),
            message: err.to_string(),
        })?;
        value *= v;
        exact = match (exact, e) {
            (Some(a), Some(b)) => Some(a * b),
            _ => None,
        };
    }
    Ok((value, exact))
}

/// Limits `s_k` for every dominant reaction, aligned with
/// `scaling.dominant`.
pub fn high_side_limits(net: &ReactionNetwork, scaling: &Scaling) -> Result<Vec<f64>> {
    scaling
        .dominant
        .iter()
        .map(|&k| reaction_limit(net, &net.reactions()[k]).map(|(v, _)| v))
        .collect()
}

/// Restriction of a complex to the low block. Low species occupy the prefix
/// of the canonical order, so indices are unchanged.
pub fn project_complex(net: &ReactionNetwork, c: &Complex) -> Complex {
    c.restrict(0, net.n_low())
}

/// One source reaction's contribution to a projected rate constant.
#[derive(Debug, Clone)]
pub struct Contribution {
    pub reaction: usize,
    pub id: String,
    pub kappa: f64,
    pub s: f64,
    pub s_exact: Option<Exact>,
}

/// A projected reaction with its merged rate constant and full provenance.
#[derive(Debug, Clone)]
pub struct ProjectedReaction {
    pub source: Complex,
    pub target: Complex,
    pub law: Vec<Factor>,
    pub kappa_bar: f64,
    pub kappa_bar_exact: Option<Exact>,
    pub contributions: Vec<Contribution>,
}

/// A dominant reaction whose projection changes no low-copy species.
#[derive(Debug, Clone)]
pub struct DroppedReaction {
    pub reaction: usize,
    pub id: String,
}

/// The projected system: a scale-free network on the low-copy species plus
/// the bookkeeping that produced it.
#[derive(Debug, Clone)]
pub struct ProjectedSystem {
    /// Reduced network: every low species of the original (isolated ones
    /// included), reactions with `alpha = beta = 0`.
    pub network: ReactionNetwork,
    /// Metadata aligned with `network.reactions()`.
    pub reactions: Vec<ProjectedReaction>,
    pub dropped: Vec<DroppedReaction>,
    /// Projections kept separate because their laws differ in shape even
    /// though their complexes coincide.
    pub warnings: Vec<String>,
    pub scaling: Scaling,
}

pub fn build_projected_system(net: &ReactionNetwork) -> Result<ProjectedSystem> {
    let scaling = classify_reactions(net)?;
    let mut projected: Vec<ProjectedReaction> = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();

    for &k in &scaling.dominant {
        let r = &net.reactions()[k];
        let source = project_complex(net, &r.source);
        let target = project_complex(net, &r.target);
        if source == target {
            dropped.push(DroppedReaction { reaction: k, id: r.id.clone() });
            continue;
        }
        let (s, s_exact) = reaction_limit(net, r)?;
        let law: Vec<Factor> = r
            .law
            .iter()
            .filter(|f| f.species().iter().all(|&i| net.is_low(i)))
            .cloned()
            .collect();
        let contribution = Contribution {
            reaction: k,
            id: r.id.clone(),
            kappa: r.kappa,
            s,
            s_exact,
        };
        let mergeable = projected
            .iter_mut()
            .find(|p| p.source == source && p.target == target && p.law == law);
        if let Some(p) = mergeable {
            p.kappa_bar += r.kappa * s;
            p.kappa_bar_exact = match (&p.kappa_bar_exact, &s_exact) {
                (Some(acc), Some(se)) => Some(acc + r.kappa_exact * se),
                _ => None,
            };
            p.contributions.push(contribution);
            continue;
        }
        if let Some(same_complexes) = projected
            .iter()
            .find(|p| p.source == source && p.target == target)
        {
            warnings.push(format!(
                "projections of {} and {} share complexes but differ in law shape; kept separate",
                same_complexes.contributions[0].id, r.id
            ));
        }
        projected.push(ProjectedReaction {
            source,
            target,
            law,
            kappa_bar: r.kappa * s,
            kappa_bar_exact: s_exact.map(|se| r.kappa_exact * se),
            contributions: vec![contribution],
        });
    }

    let network = reduced_network(net, &projected)?;
    Ok(ProjectedSystem { network, reactions: projected, dropped, warnings, scaling })
}

/// Assembles the projected reactions into a plain network over the low
/// species. Reaction ids concatenate the contributing source ids.
fn reduced_network(
    net: &ReactionNetwork,
    projected: &[ProjectedReaction],
) -> Result<ReactionNetwork> {
    let species = net.species()[..net.n_low()].to_vec();
    let reactions = projected
        .iter()
        .map(|p| {
            let id = p
                .contributions
                .iter()
                .map(|c| c.id.as_str())
                .collect::<Vec<_>>()
                .join("_");
            let kappa_exact = match &p.kappa_bar_exact {
                Some(e) => *e,
                // Irrational limit: fall back to the exact value of the
                // shortest decimal that round-trips the f64 constant.
                None => decimal_of_f64(p.kappa_bar),
            };
            Reaction {
                id,
                source: p.source.clone(),
                target: p.target.clone(),
                kappa: p.kappa_bar,
                kappa_exact,
                beta: crate::Rational::zero(),
                law: p.law.clone(),
            }
        })
        .collect();
    ReactionNetwork::new(species, reactions)
}

fn decimal_of_f64(v: f64) -> Exact {
    let text = format!("{v}");
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1i128, rest),
        None => (1i128, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    // f64 display uses at most 17 significant digits; the cap only bites for
    // magnitudes far outside the range of reaction constants.
    let frac_keep = frac_part.len().min(30usize.saturating_sub(int_part.len()));
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part[..frac_keep].chars()) {
        numer = numer * 10 + i128::from(c.to_digit(10).unwrap_or(0));
    }
    Exact::new(sign * numer, 10i128.pow(frac_keep as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::network::{parse_network, serialize_network};

    fn reduce(text: &str) -> ProjectedSystem {
        build_projected_system(&parse_network(text).unwrap()).unwrap()
    }

    fn describe(p: &ProjectedSystem) -> Vec<(String, String, f64)> {
        let net = &p.network;
        net.reactions()
            .iter()
            .map(|r| {
                let name = |c: &Complex| {
                    if c.is_empty() {
                        "0".to_string()
                    } else {
                        c.terms()
                            .iter()
                            .map(|&(i, k)| format!("{}{}", if k > 1 { k.to_string() } else { String::new() }, net.species()[i].name))
                            .collect::<Vec<_>>()
                            .join("+")
                    }
                };
                (name(&r.source), name(&r.target), r.kappa)
            })
            .collect()
    }

    #[test]
    fn abc_projection_is_exact() {
        let p = reduce(bundled::ABC);
        assert_eq!(
            describe(&p),
            vec![
                ("A".into(), "0".into(), 2.25),
                ("0".into(), "A".into(), 6.75),
                ("B".into(), "0".into(), 2.0),
            ]
        );
        assert_eq!(
            p.reactions[0].kappa_bar_exact,
            Some(Exact::new(9, 4)),
            "3 kappa3 + kappa5"
        );
        assert_eq!(p.reactions[1].kappa_bar_exact, Some(Exact::new(27, 4)));
        assert_eq!(p.reactions[2].kappa_bar_exact, Some(Exact::from_integer(2)));
        let s: Vec<f64> = p
            .reactions
            .iter()
            .flat_map(|r| r.contributions.iter().map(|c| c.s))
            .collect();
        assert_eq!(s, vec![3.0, 1.0, 27.0, 1.0]);
        assert_eq!(p.network.reactions()[0].id, "r3_r5");
        assert!(p.dropped.is_empty());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn futile_projection_is_two_birth_death_chains() {
        let p = reduce(bundled::FUTILE);
        assert_eq!(
            describe(&p),
            vec![
                ("S1".into(), "0".into(), 1.0),
                ("0".into(), "S1".into(), 2.2),
                ("S4".into(), "0".into(), 1.0),
                ("0".into(), "S4".into(), 1.1),
            ]
        );
        assert_eq!(p.reactions[1].kappa_bar_exact, Some(Exact::new(11, 5)));
        assert_eq!(p.reactions[3].kappa_bar_exact, Some(Exact::new(11, 10)));
        // The synthesis/degradation pair of S6 is dominant but projects to
        // nothing on the low block.
        let dropped: Vec<&str> = p.dropped.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(dropped, ["r9", "r10"]);
    }

    #[test]
    fn yeast_projection_swaps_g_states() {
        let p = reduce(bundled::YEAST);
        assert_eq!(
            describe(&p),
            vec![
                ("G".into(), "Gbg".into(), 0.011),
                ("Gbg".into(), "G".into(), 1.0),
            ]
        );
        // L stays as an isolated low species.
        assert!(p.network.species_index("L").is_some());
        assert_eq!(p.network.n_species(), 3);
    }

    #[test]
    fn p53_projection_keeps_activation_chain() {
        let p = reduce(bundled::P53);
        assert_eq!(
            describe(&p),
            vec![
                ("P0".into(), "P".into(), 1.1),
                ("P0".into(), "0".into(), 0.6),
                ("P".into(), "0".into(), 0.3),
                ("0".into(), "P0".into(), 1.1),
            ]
        );
        // Saturating activation contributes its limit 1, exactly.
        assert_eq!(p.reactions[0].kappa_bar_exact, Some(Exact::new(11, 10)));
        let dropped: Vec<&str> = p.dropped.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(dropped, ["r6", "r7", "r11", "r12"]);
    }

    #[test]
    fn lotka_projection_keeps_low_side_kinetics() {
        let p = reduce(bundled::LOTKA);
        let text = serialize_network(&p.network);
        assert!(text.contains("law=sqrt(B)"), "{text}");
        assert!(text.contains("law=log1p(B*C)"), "{text}");
        assert_eq!(
            describe(&p),
            vec![
                ("B".into(), "0".into(), 0.5),
                ("0".into(), "B".into(), 1.7),
                ("C".into(), "0".into(), 2.7),
                ("0".into(), "C".into(), 1.9),
                ("B".into(), "2B".into(), 2.4),
                ("B+C".into(), "2C".into(), 1.5),
            ]
        );
    }

    #[test]
    fn projected_network_reparses_identically() {
        for text in [bundled::ABC, bundled::FUTILE, bundled::YEAST, bundled::P53, bundled::LOTKA]
        {
            let p = reduce(text);
            let emitted = serialize_network(&p.network);
            let reparsed = parse_network(&emitted).unwrap();
            assert_eq!(p.network, reparsed, "emitted:\n{emitted}");
        }
    }

    #[test]
    fn same_complexes_different_law_stay_separate() {
        let text = "species A alpha=0 z0=1\nspecies B alpha=1 z0=1\n\
                    reaction r1: A + B -> B kappa=1 beta=0\n\
                    reaction r2: A + B -> B kappa=2 beta=0 law=hill(A,1.5);ff(B)\n";
        let p = reduce(text);
        assert_eq!(p.network.reactions().len(), 2);
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("r1") && p.warnings[0].contains("r2"));
    }

    #[test]
    fn log1p_on_abundant_species_blocks_projection() {
        let text = "species A alpha=0 z0=1\nspecies B alpha=1 z0=1\n\
                    reaction r1: B -> A + B kappa=1 beta=0 law=log1p(B)\n";
        let err = build_projected_system(&parse_network(text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NoLimit { .. }), "{err}");
    }

    #[test]
    fn sqrt_on_abundant_species_has_irrational_limit() {
        let text = "species A alpha=0 z0=1\nspecies B alpha=1 z0=2\n\
                    reaction r1: A + B -> B kappa=1 beta=0 law=ff(A);sqrt(B)\n\
                    reaction r2: 0 -> A kappa=1 beta=1/2\n";
        let p = reduce(text);
        assert_eq!(p.reactions[0].kappa_bar_exact, None);
        let want = 2.0f64.sqrt();
        assert!((p.reactions[0].kappa_bar - want).abs() < 1e-15);
        // The fallback decimal constant still round-trips through text.
        let reparsed = parse_network(&serialize_network(&p.network)).unwrap();
        assert_eq!(reparsed.reactions()[0].kappa, p.reactions[0].kappa_bar);
    }
}
