//! Closed-form references for linear birth-death kinetics.

use statrs::distribution::{Binomial, Discrete, Poisson};

use crate::dist::DistributionVector;
use crate::{Error, Result};

/// Exact law of a linear birth-death process at time `t`: constant birth
/// rate `birth`, per-copy death rate `death`, initial count `n0`. The
/// distribution is the convolution of a thinned initial population,
/// Binomial(n0, e^{-death t}), with an immigration term, Poisson of mean
/// `birth/death (1 - e^{-death t})` (or `birth t` when death is zero).
pub fn birth_death_reference(
    birth: f64,
    death: f64,
    n0: u64,
    t: f64,
) -> Result<DistributionVector> {
    if !(birth >= 0.0) || !(death >= 0.0) {
        return Err(Error::InvalidConfig("birth and death rates must be nonnegative".into()));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "horizon must be finite and nonnegative, got {t}"
        )));
    }
    let survival = (-death * t).exp();
    let poisson_mean =
        if death > 0.0 { birth / death * (1.0 - survival) } else { birth * t };

    let binomial_pmf: Vec<f64> = if n0 == 0 {
        vec![1.0]
    } else {
        let bin = Binomial::new(survival, n0)
            .map_err(|e| Error::InvalidConfig(format!("binomial part: {e}")))?;
        (0..=n0).map(|k| bin.pmf(k)).collect()
    };

    let poisson_cut = (poisson_mean + 12.0 * poisson_mean.sqrt() + 30.0).ceil() as u64;
    let poisson_pmf: Vec<f64> = if poisson_mean == 0.0 {
        vec![1.0]
    } else {
        let poi = Poisson::new(poisson_mean)
            .map_err(|e| Error::InvalidConfig(format!("immigration part: {e}")))?;
        (0..=poisson_cut).map(|k| poi.pmf(k)).collect()
    };

    let mut d = DistributionVector::new();
    for (k, &pb) in binomial_pmf.iter().enumerate() {
        if pb == 0.0 {
            continue;
        }
        for (j, &pp) in poisson_pmf.iter().enumerate() {
            if pp != 0.0 {
                d.add(vec![(k + j) as i64], pb * pp);
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{Binomial, Discrete, Poisson};

    #[test]
    fn zero_horizon_is_a_point_mass_at_the_initial_count() {
        let d = birth_death_reference(2.2, 1.0, 7, 0.0).unwrap();
        assert_relative_eq!(d.probability(&[7]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn long_horizon_converges_to_the_poisson_equilibrium() {
        let d = birth_death_reference(2.2, 1.0, 2, 60.0).unwrap();
        let poi = Poisson::new(2.2).unwrap();
        for k in 0..=20u64 {
            assert_relative_eq!(d.probability(&[k as i64]), poi.pmf(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_death_shifts_a_poisson_by_the_initial_count() {
        let d = birth_death_reference(1.5, 0.0, 3, 2.0).unwrap();
        let poi = Poisson::new(3.0).unwrap();
        assert_eq!(d.probability(&[2]), 0.0);
        for k in 0..=15u64 {
            assert_relative_eq!(d.probability(&[(k + 3) as i64]), poi.pmf(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_birth_is_pure_thinning() {
        let t = 0.8;
        let d = birth_death_reference(0.0, 1.3, 9, t).unwrap();
        let bin = Binomial::new((-1.3 * t).exp(), 9).unwrap();
        for k in 0..=9u64 {
            assert_relative_eq!(d.probability(&[k as i64]), bin.pmf(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn mass_mean_and_variance_match_theory() {
        let (b, dd, n0, t) = (2.2f64, 1.0f64, 2u64, 1.5f64);
        let d = birth_death_reference(b, dd, n0, t).unwrap();
        assert_relative_eq!(d.mass(), 1.0, epsilon = 1e-9);
        let s = (-dd * t).exp();
        let lam = b / dd * (1.0 - s);
        let mean_expect = n0 as f64 * s + lam;
        assert_relative_eq!(d.mean(0), mean_expect, epsilon = 1e-9);
        let var: f64 = d
            .iter()
            .map(|(x, w)| (x[0] as f64 - mean_expect).powi(2) * w)
            .sum();
        let var_expect = n0 as f64 * s * (1.0 - s) + lam;
        assert_relative_eq!(var, var_expect, epsilon = 1e-8);
    }

    #[test]
    fn convolution_agrees_with_direct_double_sum() {
        let d = birth_death_reference(3.0, 0.7, 4, 0.9).unwrap();
        let s = (-0.7f64 * 0.9).exp();
        let lam = 3.0 / 0.7 * (1.0 - s);
        let bin = Binomial::new(s, 4).unwrap();
        let poi = Poisson::new(lam).unwrap();
        for x in 0..=12i64 {
            let direct: f64 = (0..=x.min(4))
                .map(|k| bin.pmf(k as u64) * poi.pmf((x - k) as u64))
                .sum();
            assert_relative_eq!(d.probability(&[x]), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_parameters_are_rejected() {
        assert!(birth_death_reference(-1.0, 1.0, 0, 1.0).is_err());
        assert!(birth_death_reference(1.0, -1.0, 0, 1.0).is_err());
        assert!(birth_death_reference(1.0, 1.0, 0, -1.0).is_err());
    }
}
