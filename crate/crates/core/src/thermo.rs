//! Equilibrium thermodynamics of a weighted single-particle spectrum.
//!
//! `k_B = 1` and energies are in units of `t`. Quadrature weights enter as
//! plain multiplicative weights; the overall normalisation of `Z` is a
//! constant that cancels in every quantity the Stirling cycle uses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::BandSpectrum;

/// Occupation statistics of the single-particle levels.
///
/// `Boltzmann` sums `e^{-e/T}` over all levels (single-particle canonical
/// partition function). `Fermi` is the grand-canonical free-fermion trace at
/// zero chemical potential, `prod (1 + e^{-e/T})`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticsMode {
    Boltzmann,
    #[default]
    Fermi,
}

impl fmt::Display for StatisticsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatisticsMode::Boltzmann => "boltzmann",
            StatisticsMode::Fermi => "fermi",
        })
    }
}

impl FromStr for StatisticsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boltzmann" => Ok(StatisticsMode::Boltzmann),
            "fermi" => Ok(StatisticsMode::Fermi),
            other => Err(Error::Config(format!("unknown statistics mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalPoint {
    pub theta: f64,
    pub temperature: f64,
    pub ln_z: f64,
    pub internal_energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

fn check(spectrum: &BandSpectrum, t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("temperature {t} must be positive")));
    }
    if spectrum.is_empty() {
        return Err(Error::domain("empty spectrum"));
    }
    Ok(())
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Fermi function `1 / (1 + e^x)`.
pub(crate) fn fermi(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Boltzmann sums with the largest exponent factored out:
/// returns `(max exponent, sum w e^{x - max}, sum w e e^{x - max})`.
fn boltzmann_sums(spectrum: &BandSpectrum, t: f64) -> (f64, f64, f64) {
    let x_max = spectrum
        .levels
        .iter()
        .map(|e| -e / t)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut ez = 0.0;
    for (e, w) in spectrum.iter() {
        let b = w * (-e / t - x_max).exp();
        z += b;
        ez += e * b;
    }
    (x_max, z, ez)
}

pub fn log_partition(spectrum: &BandSpectrum, t: f64, mode: StatisticsMode) -> Result<f64> {
    check(spectrum, t)?;
    Ok(match mode {
        StatisticsMode::Boltzmann => {
            let (x_max, z, _) = boltzmann_sums(spectrum, t);
            x_max + z.ln()
        }
        StatisticsMode::Fermi => spectrum.iter().map(|(e, w)| w * softplus(-e / t)).sum(),
    })
}

pub fn internal_energy(spectrum: &BandSpectrum, t: f64, mode: StatisticsMode) -> Result<f64> {
    check(spectrum, t)?;
    Ok(match mode {
        StatisticsMode::Boltzmann => {
            let (_, z, ez) = boltzmann_sums(spectrum, t);
            ez / z
        }
        StatisticsMode::Fermi => spectrum.iter().map(|(e, w)| w * e * fermi(e / t)).sum(),
    })
}

pub fn entropy(spectrum: &BandSpectrum, t: f64, mode: StatisticsMode) -> Result<f64> {
    check(spectrum, t)?;
    match mode {
        StatisticsMode::Boltzmann => {
            let ln_z = log_partition(spectrum, t, mode)?;
            let u = internal_energy(spectrum, t, mode)?;
            Ok(ln_z + u / t)
        }
        // -[f ln f + (1-f) ln(1-f)] per level, rewritten as ln(1+e^-x) + x f(x)
        // to stay finite when f underflows.
        StatisticsMode::Fermi => Ok(spectrum
            .iter()
            .map(|(e, w)| {
                let x = e / t;
                w * (softplus(-x) + x * fermi(x))
            })
            .sum()),
    }
}

pub fn free_energy(spectrum: &BandSpectrum, t: f64, mode: StatisticsMode) -> Result<f64> {
    Ok(-t * log_partition(spectrum, t, mode)?)
}

/// All four state functions at one `(theta, T)`.
pub fn thermal_point(
    spectrum: &BandSpectrum,
    theta: f64,
    t: f64,
    mode: StatisticsMode,
) -> Result<ThermalPoint> {
    let ln_z = log_partition(spectrum, t, mode)?;
    let internal_energy = internal_energy(spectrum, t, mode)?;
    let entropy = entropy(spectrum, t, mode)?;
    Ok(ThermalPoint {
        theta,
        temperature: t,
        ln_z,
        internal_energy,
        entropy,
        free_energy: -t * ln_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{band_spectrum, StrainParams, THETA_KAGOME, THETA_LIEB};
    use proptest::prelude::*;

    const MODES: [StatisticsMode; 2] = [StatisticsMode::Boltzmann, StatisticsMode::Fermi];

    fn single(e: f64) -> BandSpectrum {
        BandSpectrum::uniform(vec![e]).unwrap()
    }

    #[test]
    fn single_level_boltzmann() {
        let b = StatisticsMode::Boltzmann;
        assert_eq!(log_partition(&single(0.0), 0.3, b).unwrap(), 0.0);
        let ln_z = log_partition(&single(1.7), 0.3, b).unwrap();
        assert!((ln_z + 1.7 / 0.3).abs() < 1e-12);
        assert!((internal_energy(&single(1.7), 0.3, b).unwrap() - 1.7).abs() < 1e-12);
        assert!(entropy(&single(1.7), 0.3, b).unwrap().abs() < 1e-12);
        assert!((free_energy(&single(1.7), 0.3, b).unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn degenerate_levels_entropy() {
        let s = BandSpectrum::uniform(vec![-0.4; 5]).unwrap();
        let got = entropy(&s, 0.07, StatisticsMode::Boltzmann).unwrap();
        assert!((got - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_high_temperature() {
        let s = BandSpectrum::uniform(vec![-0.5, 0.5]).unwrap();
        for mode in MODES {
            assert!(internal_energy(&s, 1e6, mode).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_temperature() {
        for mode in MODES {
            assert!(log_partition(&single(0.0), 0.0, mode).is_err());
            assert!(internal_energy(&single(0.0), -1.0, mode).is_err());
            assert!(entropy(&single(0.0), f64::NAN, mode).is_err());
        }
    }

    #[test]
    fn no_overflow_at_low_temperature() {
        let p = StrainParams::new(THETA_KAGOME, 8.0).unwrap();
        let s = band_spectrum(&p, 40).unwrap();
        for mode in MODES {
            let tp = thermal_point(&s, p.theta, 1e-3, mode).unwrap();
            assert!(tp.ln_z.is_finite() && tp.internal_energy.is_finite() && tp.entropy.is_finite());
        }
    }

    #[test]
    fn fermi_entropy_matches_ln_z_plus_beta_u() {
        let p = StrainParams::new(1.9, 8.0).unwrap();
        let s = band_spectrum(&p, 30).unwrap();
        for t in [0.01, 0.1, 1.0] {
            let f = StatisticsMode::Fermi;
            let lhs = entropy(&s, t, f).unwrap();
            let rhs = log_partition(&s, t, f).unwrap() + internal_energy(&s, t, f).unwrap() / t;
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn strain_changes_free_energy() {
        let lieb = band_spectrum(&StrainParams::new(THETA_LIEB, 8.0).unwrap(), 60).unwrap();
        let kag = band_spectrum(&StrainParams::new(THETA_KAGOME, 8.0).unwrap(), 60).unwrap();
        for mode in MODES {
            let a = free_energy(&lieb, 0.01, mode).unwrap();
            let b = free_energy(&kag, 0.01, mode).unwrap();
            assert!((a - b).abs() > 1e-3);
        }
    }

    #[test]
    fn free_energy_derivative_is_minus_entropy() {
        let s = band_spectrum(&StrainParams::new(2.0, 8.0).unwrap(), 40).unwrap();
        for mode in MODES {
            for t in [0.01, 0.05, 0.3, 1.0] {
                let h = 1e-4 * t;
                let d = (free_energy(&s, t + h, mode).unwrap() - free_energy(&s, t - h, mode).unwrap())
                    / (2.0 * h);
                let s_t = entropy(&s, t, mode).unwrap();
                assert!((d + s_t).abs() <= 1e-5 * s_t.abs().max(1e-3), "{mode} T={t}: {d} vs {s_t}");
            }
        }
    }

    #[test]
    fn ln_z_monotone_in_beta_for_positive_spectrum() {
        let s = BandSpectrum::uniform(vec![0.2, 0.5, 1.3, 2.0]).unwrap();
        for mode in MODES {
            let mut prev = f64::INFINITY;
            for i in 1..50 {
                let beta = 0.2 * i as f64;
                let v = log_partition(&s, 1.0 / beta, mode).unwrap();
                assert!(v < prev);
                prev = v;
            }
        }
    }

    proptest! {
        #[test]
        fn thermal_point_consistency(
            levels in prop::collection::vec(-4.0f64..4.0, 1..30),
            t in 0.01f64..2.0,
        ) {
            let s = BandSpectrum::uniform(levels).unwrap();
            for mode in MODES {
                let tp = thermal_point(&s, 0.0, t, mode).unwrap();
                prop_assert!(tp.entropy >= -1e-12);
                prop_assert!(tp.free_energy <= tp.internal_energy + 1e-12);
                let f2 = tp.internal_energy - t * tp.entropy;
                prop_assert!((tp.free_energy - f2).abs() <= 1e-9 * tp.free_energy.abs().max(1.0));
            }
        }
    }
}
