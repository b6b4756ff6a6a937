//! Plain-text network format.
//!
//! ```text
//! # comment
//! species <name> alpha=<rational> z0=<decimal>
//! reaction <id>: <complex> -> <complex> kappa=<decimal> beta=<rational> [law=<factor>{;<factor>}]
//! ```
//!
//! A complex is `0` or `+`-separated terms `<int?> <name>`. Factors are
//! `ff(name[,degree])`, `pow(name[,degree])`, `hill(name,c)`, `sqrt(name)`,
//! and `log1p(name{*name})`. A reaction without `law=` uses stochastic mass
//! action on its source complex. Serialization is canonical: species sorted
//! low block first then by name, reactions in declaration order, mass action
//! laws left implicit.

use super::{Complex, Factor, Reaction, ReactionNetwork, Species};
use crate::{Error, Exact, Rational, Result};
use num_traits::{Signed, Zero};

pub fn parse_network(text: &str) -> Result<ReactionNetwork> {
    let mut species: Vec<Species> = Vec::new();
    let mut reactions: Vec<Reaction> = Vec::new();
    let mut names: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("species ") {
            let sp = parse_species_line(rest.trim(), lineno)?;
            names.push(sp.name.clone());
            species.push(sp);
        } else if let Some(rest) = line.strip_prefix("reaction ") {
            reactions.push(parse_reaction_line(rest.trim(), &names, lineno)?);
        } else {
            return Err(Error::parse(
                lineno,
                format!("expected 'species' or 'reaction', got '{line}'"),
            ));
        }
    }
    ReactionNetwork::new(species, reactions)
}

fn parse_species_line(rest: &str, lineno: usize) -> Result<Species> {
    let mut tokens = rest.split_whitespace();
    let name = tokens
        .next()
        .ok_or_else(|| Error::parse(lineno, "species line needs a name"))?;
    check_name(name, lineno)?;
    let mut alpha = None;
    let mut z0 = None;
    for tok in tokens {
        let (key, value) = split_key_value(tok, lineno)?;
        match key {
            "alpha" => alpha = Some(parse_rational(value, lineno)?),
            "z0" => z0 = Some(parse_decimal(value, lineno)?),
            _ => return Err(Error::parse(lineno, format!("unknown species field '{key}'"))),
        }
    }
    let alpha = alpha.ok_or_else(|| Error::parse(lineno, "species line needs alpha=..."))?;
    let (z0, z0_exact) = z0.ok_or_else(|| Error::parse(lineno, "species line needs z0=..."))?;
    Ok(Species { name: name.to_string(), alpha, z0, z0_exact })
}

fn parse_reaction_line(rest: &str, names: &[String], lineno: usize) -> Result<Reaction> {
    let (id, body) = rest
        .split_once(':')
        .ok_or_else(|| Error::parse(lineno, "reaction line needs '<id>:'"))?;
    let id = id.trim();
    check_name(id, lineno)?;
    let (lhs, rhs) = body
        .split_once("->")
        .ok_or_else(|| Error::parse(lineno, "reaction needs '->'"))?;
    let source = parse_complex(lhs.trim(), names, lineno)?;

    // The right-hand side is the target complex followed by key=value fields;
    // the complex ends at the first token containing '='.
    let rhs_tokens: Vec<&str> = rhs.split_whitespace().collect();
    let split_at = rhs_tokens
        .iter()
        .position(|t| t.contains('='))
        .unwrap_or(rhs_tokens.len());
    let target = parse_complex(&rhs_tokens[..split_at].join(" "), names, lineno)?;

    let mut kappa = None;
    let mut beta = None;
    let mut law = None;
    for tok in &rhs_tokens[split_at..] {
        let (key, value) = split_key_value(tok, lineno)?;
        match key {
            "kappa" => kappa = Some(parse_decimal(value, lineno)?),
            "beta" => beta = Some(parse_rational(value, lineno)?),
            "law" => law = Some(parse_law(value, names, lineno)?),
            _ => return Err(Error::parse(lineno, format!("unknown reaction field '{key}'"))),
        }
    }
    let (kappa, kappa_exact) =
        kappa.ok_or_else(|| Error::parse(lineno, "reaction needs kappa=..."))?;
    let beta = beta.ok_or_else(|| Error::parse(lineno, "reaction needs beta=..."))?;
    let law = match law {
        Some(l) => l,
        None => mass_action_law(&source),
    };
    Ok(Reaction {
        id: id.to_string(),
        source,
        target,
        kappa,
        kappa_exact,
        beta,
        law,
    })
}

/// Default law: one falling factorial per source species, degree equal to
/// its stoichiometric coefficient.
pub fn mass_action_law(source: &Complex) -> Vec<Factor> {
    source
        .terms()
        .iter()
        .map(|&(i, c)| Factor::FallingFactorial { species: i, degree: c })
        .collect()
}

fn parse_complex(text: &str, names: &[String], lineno: usize) -> Result<Complex> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Error::parse(lineno, "empty complex (write '0')"));
    }
    if text == "0" {
        return Ok(Complex::empty());
    }
    let mut terms = Vec::new();
    for term in text.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err(Error::parse(lineno, "dangling '+' in complex"));
        }
        let digits = term.chars().take_while(|c| c.is_ascii_digit()).count();
        let (coeff, name) = term.split_at(digits);
        let coeff: u32 = if coeff.is_empty() {
            1
        } else {
            coeff
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad coefficient in '{term}'")))?
        };
        if coeff == 0 {
            return Err(Error::parse(lineno, format!("zero coefficient in '{term}'")));
        }
        let name = name.trim();
        let index = lookup(names, name, lineno)?;
        terms.push((index, coeff));
    }
    Ok(Complex::new(terms))
}

fn parse_law(text: &str, names: &[String], lineno: usize) -> Result<Vec<Factor>> {
    text.split(';')
        .map(|spec| parse_factor(spec.trim(), names, lineno))
        .collect()
}

fn parse_factor(spec: &str, names: &[String], lineno: usize) -> Result<Factor> {
    let open = spec
        .find('(')
        .ok_or_else(|| Error::parse(lineno, format!("factor '{spec}' needs arguments")))?;
    if !spec.ends_with(')') {
        return Err(Error::parse(lineno, format!("factor '{spec}' misses ')'")));
    }
    let head = &spec[..open];
    let args: Vec<&str> = spec[open + 1..spec.len() - 1]
        .split(',')
        .map(str::trim)
        .collect();
    let one_or_two = |kind: &str| -> Result<(usize, u32)> {
        match args.as_slice() {
            [name] => Ok((lookup(names, name, lineno)?, 1)),
            [name, deg] => {
                let degree = deg.parse().map_err(|_| {
                    Error::parse(lineno, format!("bad degree '{deg}' in {kind} factor"))
                })?;
                Ok((lookup(names, name, lineno)?, degree))
            }
            _ => Err(Error::parse(lineno, format!("{kind} takes (name[,degree])"))),
        }
    };
    match head {
        "ff" => {
            let (species, degree) = one_or_two("ff")?;
            Ok(Factor::FallingFactorial { species, degree })
        }
        "pow" => {
            let (species, degree) = one_or_two("pow")?;
            Ok(Factor::Power { species, degree })
        }
        "hill" => match args.as_slice() {
            [name, c] => {
                let (c_val, c_exact) = parse_decimal(c, lineno)?;
                Ok(Factor::Hill { species: lookup(names, name, lineno)?, c: c_val, c_exact })
            }
            _ => Err(Error::parse(lineno, "hill takes (name,constant)")),
        },
        "sqrt" => match args.as_slice() {
            [name] => Ok(Factor::Sqrt { species: lookup(names, name, lineno)? }),
            _ => Err(Error::parse(lineno, "sqrt takes (name)")),
        },
        "log1p" => match args.as_slice() {
            [prod] => {
                let species = prod
                    .split('*')
                    .map(|n| lookup(names, n.trim(), lineno))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Factor::Log1p { species })
            }
            _ => Err(Error::parse(lineno, "log1p takes (name{*name})")),
        },
        _ => Err(Error::parse(lineno, format!("unknown factor '{head}'"))),
    }
}

fn lookup(names: &[String], name: &str, lineno: usize) -> Result<usize> {
    names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| Error::parse(lineno, format!("unknown species '{name}'")))
}

fn check_name(name: &str, lineno: usize) -> Result<()> {
    let mut chars = name.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        Ok(())
    } else {
        Err(Error::parse(lineno, format!("invalid name '{name}'")))
    }
}

fn split_key_value(tok: &str, lineno: usize) -> Result<(&str, &str)> {
    tok.split_once('=')
        .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got '{tok}'")))
}

fn parse_rational(text: &str, lineno: usize) -> Result<Rational> {
    let bad = || Error::parse(lineno, format!("bad rational '{text}'"));
    match text.split_once('/') {
        Some((n, d)) => {
            let numer: i64 = n.trim().parse().map_err(|_| bad())?;
            let denom: i64 = d.trim().parse().map_err(|_| bad())?;
            if denom <= 0 {
                return Err(bad());
            }
            Ok(Rational::new(numer, denom))
        }
        None => Ok(Rational::from_integer(text.parse().map_err(|_| bad())?)),
    }
}

/// Parses a plain decimal literal into its f64 value and its exact rational
/// value. No exponent notation.
fn parse_decimal(text: &str, lineno: usize) -> Result<(f64, Exact)> {
    let bad = || Error::parse(lineno, format!("bad decimal '{text}'"));
    let (sign, digits) = match text.strip_prefix('-') {
        Some(rest) => (-1i128, rest),
        None => (1i128, text),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if int_part.len() + frac_part.len() > 24 {
        return Err(Error::parse(lineno, format!("decimal '{text}' has too many digits")));
    }
    let mut numer: i128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(10).ok_or_else(bad)?;
        numer = numer * 10 + i128::from(d);
    }
    let denom = 10i128.pow(frac_part.len() as u32);
    let value: f64 = text.parse().map_err(|_| bad())?;
    Ok((value, Exact::new(sign * numer, denom)))
}

pub fn serialize_network(net: &ReactionNetwork) -> String {
    let mut out = String::new();
    for sp in net.species() {
        out.push_str(&format!(
            "species {} alpha={} z0={}\n",
            sp.name,
            sp.alpha,
            decimal_string(&sp.z0_exact)
        ));
    }
    for r in net.reactions() {
        out.push_str(&format!(
            "reaction {}: {} -> {} kappa={} beta={}",
            r.id,
            complex_string(net, &r.source),
            complex_string(net, &r.target),
            decimal_string(&r.kappa_exact),
            r.beta
        ));
        if !r.is_mass_action() {
            let specs: Vec<String> = r.law.iter().map(|f| factor_string(net, f)).collect();
            out.push_str(&format!(" law={}", specs.join(";")));
        }
        out.push('\n');
    }
    out
}

fn complex_string(net: &ReactionNetwork, c: &Complex) -> String {
    if c.is_empty() {
        return "0".into();
    }
    c.terms()
        .iter()
        .map(|&(i, coeff)| {
            let name = &net.species()[i].name;
            if coeff == 1 {
                name.clone()
            } else {
                format!("{coeff} {name}")
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

fn factor_string(net: &ReactionNetwork, f: &Factor) -> String {
    let name = |i: usize| net.species()[i].name.as_str();
    match f {
        Factor::FallingFactorial { species, degree: 1 } => format!("ff({})", name(*species)),
        Factor::FallingFactorial { species, degree } => {
            format!("ff({},{})", name(*species), degree)
        }
        Factor::Power { species, degree: 1 } => format!("pow({})", name(*species)),
        Factor::Power { species, degree } => format!("pow({},{})", name(*species), degree),
        Factor::Hill { species, c_exact, .. } => {
            format!("hill({},{})", name(*species), decimal_string(c_exact))
        }
        Factor::Sqrt { species } => format!("sqrt({})", name(*species)),
        Factor::Log1p { species } => {
            let names: Vec<&str> = species.iter().map(|&i| name(i)).collect();
            format!("log1p({})", names.join("*"))
        }
    }
}

/// Renders an exact rational as a plain decimal. Exact whenever the reduced
/// denominator has only factors 2 and 5, which holds for every value built
/// by `parse_decimal`; anything else falls back to the f64 rendering.
pub(crate) fn decimal_string(e: &Exact) -> String {
    if e.is_zero() {
        return "0".into();
    }
    let sign = if e.is_negative() { "-" } else { "" };
    let p = e.numer().abs();
    let q = *e.denom();
    let (mut twos, mut fives, mut rest) = (0u32, 0u32, q);
    while rest % 2 == 0 {
        twos += 1;
        rest /= 2;
    }
    while rest % 5 == 0 {
        fives += 1;
        rest /= 5;
    }
    if rest != 1 {
        return format!("{}", super::exact_f64(e));
    }
    let k = twos.max(fives);
    let scale = 2i128.pow(k - twos) * 5i128.pow(k - fives);
    let digits = format!("{}", p * scale);
    if k == 0 {
        return format!("{sign}{digits}");
    }
    let digits = format!("{:0>width$}", digits, width = k as usize + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - k as usize);
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}
