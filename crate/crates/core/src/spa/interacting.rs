//! Thermodynamics and Stirling cycle of the interacting medium.
//!
//! `ln Z` comes from thermodynamic integration in `beta` against an exactly
//! solvable reference: free fermions in the `U/2 - mu` shifted bands times an
//! uncoupled classical field with weight `e^{-beta (U/4) m^2}` inside the
//! ball `|m| <= m_cap` (field measure normalised to the ball volume):
//!
//! `ln Z(beta) = ln Z_ref(beta) - int_0^beta [E(b) - E_ref(b)] db`.
//!
//! At `beta = 0` the sampled ensemble and the reference coincide (the field
//! is uniform in the ball and `m . sigma` is traceless), so the integrand
//! vanishes there and the integral starts from an exact anchor. With `U = 0`
//! it vanishes identically. All extensive outputs are per unit cell and per
//! spin projection, the normalisation of the band-structure medium.

use rayon::prelude::*;
use serde::Serialize;

use super::geometry::build_geometry;
use super::hamiltonian::{
    build_h_eff, fermion_free_energy, AuxFieldConfig, SpinFermionModel, UpdateScheme,
};
use super::mc::{derive_seed, McParams};
use super::observables::{jackknife_mean, reduce_samples, sample_chain_from, ChainSamples};
use super::strain_path::{classify_with_errors, strain_path_thermo, StrainPathThermo};
use crate::cycle::{relative_performance, strokes, CycleResult, CycleSpec, CycleStates, OperatingMode, StatePoint};
use crate::error::{Error, Result};
use crate::lattice::StrainParams;
use crate::thermo::{fermi, softplus};

/// Estimator of `ln Z` from the sampled chains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LnZEstimator {
    #[default]
    Integration,
    /// `<-beta F{m}>` over the chain; cheap but biased.
    Quenched,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ThermoOptions {
    pub estimator: LnZEstimator,
    /// Start each temperature from the last field of the next hotter one
    /// (runs the temperatures sequentially).
    pub anneal: bool,
}


#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractingPoint {
    pub temperature: f64,
    pub ln_z: f64,
    pub ln_z_stderr: f64,
    pub energy: f64,
    pub energy_stderr: f64,
    pub density: f64,
    pub acceptance: f64,
}

/// Per-temperature results plus the linear error model: every `ln Z` and
/// energy is an exact linear function of independent chain estimates with
/// standard errors `source_stderr`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractingThermo {
    pub points: Vec<InteractingPoint>,
    pub mu: f64,
    pub u: f64,
    pub source_stderr: Vec<f64>,
    /// `d ln Z_k / d source_j`.
    pub ln_z_coeffs: Vec<Vec<f64>>,
    /// `d E_k / d source_j`.
    pub energy_coeffs: Vec<Vec<f64>>,
}

impl InteractingThermo {
    /// Index of the grid temperature equal to `t` (relative 1e-9).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.points
            .iter()
            .position(|p| (p.temperature - t).abs() <= 1e-9 * t.abs())
            .ok_or_else(|| Error::domain(format!("temperature {t} is not on the grid")))
    }
}

/// Simpson integrals of `r^2 e^{-a r^2}` and `r^4 e^{-a r^2}` over `[0, c]`.
fn radial_moments(a: f64, c: f64) -> (f64, f64) {
    let n = 4000;
    let h = c / n as f64;
    let (mut j2, mut j4) = (0.0, 0.0);
    for i in 0..=n {
        let r = i as f64 * h;
        let w = match i {
            0 => 1.0,
            _ if i == n => 1.0,
            _ if i % 2 == 1 => 4.0,
            _ => 2.0,
        };
        let g = r * r * (-a * r * r).exp();
        j2 += w * g;
        j4 += w * g * r * r;
    }
    (j2 * h / 3.0, j4 * h / 3.0)
}

/// Per site: `(ln I, (U/4) <m^2>)` of the classical reference at `beta`,
/// `I = (3 / m_cap^3) int_0^{m_cap} r^2 e^{-beta U r^2 / 4} dr`.
pub fn classical_reference(beta: f64, u: f64, m_cap: f64) -> (f64, f64) {
    if u == 0.0 {
        return (0.0, 0.0);
    }
    let (j2, j4) = radial_moments(0.25 * beta * u, m_cap);
    ((3.0 * j2 / m_cap.powi(3)).ln(), 0.25 * u * j4 / j2)
}

/// Density of a set of sampled spectra after shifting the chemical potential
/// from `mu_sampled` to `mu`.
fn reweighted_density(levels: &[Vec<f64>], mu_sampled: f64, mu: f64, beta: f64, n_sites: f64) -> f64 {
    let shift = mu - mu_sampled;
    levels
        .iter()
        .map(|l| l.iter().map(|e| fermi(beta * (e - shift))).sum::<f64>() / n_sites)
        .sum::<f64>()
        / levels.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MuTuning {
    pub mu: f64,
    pub density: f64,
    pub iterations: usize,
}

/// Chemical potential giving half filling at `params.beta`.
///
/// Each round samples a chain at the current `mu`; if its mean density is
/// within `tol_n` of one the round's `mu` is returned, otherwise the next `mu`
/// is the bisection root of the density of the sampled spectra rigidly
/// shifted in `mu`.
pub fn tune_mu_half_filling(model: &SpinFermionModel, params: &McParams, tol_n: f64) -> Result<MuTuning> {
    const ROUNDS: usize = 8;
    if !(tol_n > 0.0) {
        return Err(Error::domain("density tolerance must be positive"));
    }
    let n = model.n_sites() as f64;
    let mut mu = params.mu;
    for round in 0..ROUNDS {
        let p = McParams { mu, seed: derive_seed(params.seed, round as u64), ..params.clone() };
        let s = sample_chain_from(model, &p, None)?;
        let density = s.density.iter().sum::<f64>() / s.density.len().max(1) as f64;
        if s.density.is_empty() {
            return Err(Error::domain("mu tuning needs measured sweeps"));
        }
        if (density - 1.0).abs() <= tol_n {
            return Ok(MuTuning { mu, density, iterations: round + 1 });
        }
        let f = |m: f64| reweighted_density(&s.levels, mu, m, params.beta, n) - 1.0;
        let (mut lo, mut hi) = (mu - 1.0, mu + 1.0);
        let mut widen = 0;
        while f(lo) > 0.0 || f(hi) < 0.0 {
            widen += 1;
            if widen > 12 {
                return Err(Error::Invariant(format!("half filling not bracketed around mu = {mu}")));
            }
            let w = hi - lo;
            lo -= w;
            hi += w;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-12 {
                break;
            }
        }
        mu = 0.5 * (lo + hi);
    }
    Err(Error::Invariant(format!("mu tuning did not reach half filling in {ROUNDS} rounds")))
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    let Some(&t_max) = t_grid.first() else {
        return Err(Error::domain("empty temperature grid"));
    };
    if !(t_max >= 2.0) {
        return Err(Error::domain(format!("temperature grid must start at T >= 2, got {t_max}")));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) || t_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::domain("temperature grid must be positive and strictly descending"));
    }
    Ok(())
}

/// Descending integration grid from `T = max(2, hottest requested)` that
/// contains every requested temperature; consecutive `beta` nodes are at
/// most `max(0.25, beta / 4)` apart.
pub fn default_temperature_grid(required: &[f64]) -> Result<Vec<f64>> {
    if required.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::domain("temperatures must be positive"));
    }
    let mut betas: Vec<f64> = required.iter().map(|t| 1.0 / t).collect();
    betas.push(0.5);
    betas.sort_by(f64::total_cmp);
    betas.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let mut out = vec![betas[0]];
    for w in betas.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (0.25 * a).max(0.25);
        let k = ((b - a) / h).ceil().max(1.0) as usize;
        out.extend((1..=k).map(|i| if i == k { b } else { a + (b - a) * i as f64 / k as f64 }));
    }
    let mut temps: Vec<f64> = out.iter().map(|b| 1.0 / b).collect();
    // required temperatures survive bit-exactly
    for t in required {
        if let Some(x) = temps.iter_mut().find(|x| (**x - t).abs() <= 1e-12 * t) {
            *x = *t;
        }
    }
    Ok(temps)
}

/// Samples every temperature of `t_grid` (descending from `T >= 2`) at the
/// couplings of `params` and integrates `ln Z`.
pub fn interacting_thermo(
    model: &SpinFermionModel,
    params: &McParams,
    t_grid: &[f64],
    opts: ThermoOptions,
) -> Result<InteractingThermo> {
    check_grid(t_grid)?;
    params.validate()?;
    let chain_params = |k: usize| McParams {
        beta: 1.0 / t_grid[k],
        seed: derive_seed(params.seed, k as u64),
        ..params.clone()
    };
    let samples: Vec<ChainSamples> = if opts.anneal {
        let mut out: Vec<ChainSamples> = Vec::with_capacity(t_grid.len());
        for k in 0..t_grid.len() {
            let start = out.last().and_then(|s| s.fields.last().cloned());
            out.push(sample_chain_from(model, &chain_params(k), start)?);
        }
        out
    } else {
        (0..t_grid.len())
            .into_par_iter()
            .map(|k| sample_chain_from(model, &chain_params(k), None))
            .collect::<Result<_>>()?
    };
    let reduced = samples
        .iter()
        .enumerate()
        .map(|(k, s)| reduce_samples(model, &chain_params(k), s))
        .collect::<Result<Vec<_>>>()?;

    let n_sites = model.n_sites();
    let norm = 2.0 * n_sites as f64 / 3.0;
    let c = params.couplings();
    let free = build_h_eff(model, &AuxFieldConfig::zeros(n_sites), c)?.spectrum;
    let reference = |beta: f64| {
        let (ln_i, e_cl) = classical_reference(beta, c.u, params.m_cap);
        let ln_z = free.iter().map(|e| softplus(-beta * e)).sum::<f64>() + n_sites as f64 * ln_i;
        let e = free.iter().map(|e| e * fermi(beta * e)).sum::<f64>() + n_sites as f64 * e_cl;
        (ln_z, e)
    };

    let k_max = t_grid.len();
    let betas: Vec<f64> = t_grid.iter().map(|t| 1.0 / t).collect();
    let mut ln_z_coeffs = vec![vec![0.0; 2 * k_max]; k_max];
    let mut energy_coeffs = vec![vec![0.0; 2 * k_max]; k_max];
    let mut source_stderr = vec![0.0; 2 * k_max];
    let mut points = Vec::with_capacity(k_max);
    // running trapezoid of E - E_ref from beta = 0, with its coefficients
    let (mut integral, mut prev_beta, mut prev_delta) = (0.0, 0.0, 0.0);
    let mut running = vec![0.0; 2 * k_max];
    for k in 0..k_max {
        let beta = betas[k];
        let obs = &reduced[k];
        let (ln_z_ref, e_ref) = reference(beta);
        let delta = obs.energy_mean - e_ref;
        let h = beta - prev_beta;
        integral += 0.5 * h * (delta + prev_delta);
        running[k] += 0.5 * h;
        if k > 0 {
            running[k - 1] += 0.5 * h;
        }
        source_stderr[k] = obs.energy_stderr / norm;
        energy_coeffs[k][k] = 1.0;
        let (ln_z, ln_z_err) = match opts.estimator {
            LnZEstimator::Integration => {
                for j in 0..=k {
                    ln_z_coeffs[k][j] = -running[j];
                }
                (ln_z_ref - integral, 0.0)
            }
            LnZEstimator::Quenched => {
                let q: Vec<f64> = samples[k]
                    .levels
                    .iter()
                    .zip(&samples[k].stiffness)
                    .map(|(l, s)| -beta * (fermion_free_energy(l, beta) + s))
                    .collect();
                let (m, e) = jackknife_mean(&q);
                source_stderr[k_max + k] = e / norm;
                ln_z_coeffs[k][k_max + k] = 1.0;
                (m, e)
            }
        };
        let ln_z_stderr = match opts.estimator {
            LnZEstimator::Integration => ln_z_coeffs[k]
                .iter()
                .zip(&source_stderr)
                .map(|(a, s)| (a * s).powi(2))
                .sum::<f64>()
                .sqrt(),
            LnZEstimator::Quenched => ln_z_err / norm,
        };
        points.push(InteractingPoint {
            temperature: t_grid[k],
            ln_z: ln_z / norm,
            ln_z_stderr,
            energy: obs.energy_mean / norm,
            energy_stderr: obs.energy_stderr / norm,
            density: obs.density_mean,
            acceptance: obs.acceptance,
        });
        prev_beta = beta;
        prev_delta = delta;
    }
    Ok(InteractingThermo { points, mu: c.mu, u: c.u, source_stderr, ln_z_coeffs, energy_coeffs })
}

/// Chemical potential of the sampled chains.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuPolicy {
    /// `mu = U/2`, the particle-hole shift of the Hubbard term; `U = 0`
    /// reduces to the band medium at `mu = 0`.
    #[default]
    ParticleHole,
    /// Tuned to half filling.
    HalfFilling,
    /// `McParams::mu` as given.
    Fixed,
}

/// How the cycle's free-energy differences are obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleEstimator {
    /// Integrate the strain force between the two strain values per bath.
    #[default]
    StrainPath,
    /// Integrate the energy in `beta` per strain value.
    TemperaturePath,
}

/// Lattice and sampling settings of an interacting cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractingSetup {
    pub l: usize,
    pub estimator: CycleEstimator,
    /// Gauss-Lobatto nodes of the strain path, ends included.
    pub path_nodes: usize,
    /// Temperature-path integration grid; `None` builds [`default_temperature_grid`].
    pub t_grid: Option<Vec<f64>>,
    pub mu_policy: MuPolicy,
    pub tol_n: f64,
    pub thermo: ThermoOptions,
}

impl Default for InteractingSetup {
    fn default() -> Self {
        Self {
            l: 8,
            estimator: CycleEstimator::StrainPath,
            path_nodes: 5,
            t_grid: None,
            mu_policy: MuPolicy::ParticleHole,
            tol_n: 0.01,
            thermo: ThermoOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CycleErrors {
    pub q_hot: f64,
    pub q_cold: f64,
    pub work: f64,
    pub performance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractingCycleResult {
    pub cycle: CycleResult,
    pub stderr: CycleErrors,
    pub mu: [f64; 2],
}

/// Interacting medium at one strain value, sampled on `t_grid`.
pub fn strain_thermo(
    theta: f64,
    eta_strain: f64,
    u: f64,
    mc: &McParams,
    setup: &InteractingSetup,
    t_grid: &[f64],
) -> Result<InteractingThermo> {
    let g = build_geometry(setup.l, &StrainParams::new(theta, eta_strain)?)?;
    let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: mc.cluster_l })?;
    let mut p = McParams { u, ..mc.clone() };
    match setup.mu_policy {
        MuPolicy::ParticleHole => p.mu = 0.5 * u,
        MuPolicy::Fixed => {}
        MuPolicy::HalfFilling => {
            let t_min = t_grid.iter().copied().fold(f64::INFINITY, f64::min);
            let tp = McParams { beta: 1.0 / t_min, mu: 0.5 * u, ..p.clone() };
            p.mu = tune_mu_half_filling(&model, &tp, setup.tol_n)?.mu;
        }
    }
    interacting_thermo(&model, &p, t_grid, setup.thermo)
}

/// Propagates the linear error model of two strain values into a quantity
/// `x = sum a_j s_j` given its coefficients over the concatenated sources.
fn combined_stderr(coeffs: &[f64], sources: &[f64]) -> f64 {
    coeffs.iter().zip(sources).map(|(a, s)| (a * s).powi(2)).sum::<f64>().sqrt()
}

/// Cycle of the interacting medium from two sampled strain values.
pub fn cycle_from_thermo(
    spec: &CycleSpec,
    th1: &InteractingThermo,
    th2: &InteractingThermo,
) -> Result<InteractingCycleResult> {
    let (t_hot, t_cold) = (spec.t_hot, spec.t_cold);
    let (h1, c1) = (th1.index_of(t_hot)?, th1.index_of(t_cold)?);
    let (h2, c2) = (th2.index_of(t_hot)?, th2.index_of(t_cold)?);
    let sp = |th: &InteractingThermo, k: usize| StatePoint { ln_z: th.points[k].ln_z, energy: th.points[k].energy };
    let states = CycleStates {
        theta1_hot: sp(th1, h1),
        theta2_hot: sp(th2, h2),
        theta1_cold: sp(th1, c1),
        theta2_cold: sp(th2, c2),
    };
    let k = strokes(&states, t_hot, t_cold)?;

    // gradients over [sources of th1, sources of th2]
    let n1 = th1.source_stderr.len();
    let sources: Vec<f64> = th1.source_stderr.iter().chain(&th2.source_stderr).copied().collect();
    let grad = |f: &dyn Fn(&dyn Fn(usize, usize) -> f64, &dyn Fn(usize, usize) -> f64) -> f64| -> Vec<f64> {
        (0..sources.len())
            .map(|j| {
                let (in1, jj) = if j < n1 { (true, j) } else { (false, j - n1) };
                let lz = |which: usize, idx: usize| match (which, in1) {
                    (1, true) => th1.ln_z_coeffs[idx][jj],
                    (2, false) => th2.ln_z_coeffs[idx][jj],
                    _ => 0.0,
                };
                let en = |which: usize, idx: usize| match (which, in1) {
                    (1, true) => th1.energy_coeffs[idx][jj],
                    (2, false) => th2.energy_coeffs[idx][jj],
                    _ => 0.0,
                };
                f(&lz, &en)
            })
            .collect()
    };
    // W = -T_h (lnZ2h - lnZ1h) + T_c (lnZ2c - lnZ1c)
    let g_w = grad(&|lz, _| -t_hot * (lz(2, h2) - lz(1, h1)) + t_cold * (lz(2, c2) - lz(1, c1)));
    // Q_h = T_h (lnZ2h - lnZ1h) + E2h - E1c
    let g_qh = grad(&|lz, en| t_hot * (lz(2, h2) - lz(1, h1)) + en(2, h2) - en(1, c1));
    let g_qc: Vec<f64> = g_w.iter().zip(&g_qh).map(|(w, q)| -(w + q)).collect();
    let (s_w, s_qh, s_qc) = (
        combined_stderr(&g_w, &sources),
        combined_stderr(&g_qh, &sources),
        combined_stderr(&g_qc, &sources),
    );

    let mode = classify_with_errors(k.q_hot, k.q_cold, k.work, [s_qh, s_qc, s_w])?;
    let performance = if t_hot > t_cold {
        relative_performance(mode, k.q_hot, k.q_cold, k.work, t_hot, t_cold)?
    } else {
        None
    };
    let perf_err = match (mode, performance) {
        (OperatingMode::Engine, Some(p)) => {
            // p = -W / (Q_h eta_max): relative errors add in quadrature with covariance
            let g: Vec<f64> = g_w.iter().zip(&g_qh).map(|(w, q)| p * (w / k.work - q / k.q_hot)).collect();
            Some(combined_stderr(&g, &sources))
        }
        (OperatingMode::Refrigerator, Some(p)) => {
            let g: Vec<f64> = g_qc.iter().zip(&g_w).map(|(q, w)| p * (q / k.q_cold - w / k.work)).collect();
            Some(combined_stderr(&g, &sources))
        }
        _ => None,
    };
    Ok(InteractingCycleResult {
        cycle: CycleResult {
            q_ab: k.q_ab,
            q_bc: k.q_bc,
            q_cd: k.q_cd,
            q_da: k.q_da,
            work: k.work,
            q_hot: k.q_hot,
            q_cold: k.q_cold,
            mode,
            performance,
        },
        stderr: CycleErrors { q_hot: s_qh, q_cold: s_qc, work: s_w, performance: perf_err },
        mu: [th1.mu, th2.mu],
    })
}

/// Sampled medium between two strain values, from either estimator.
#[derive(Clone, Debug, PartialEq)]
pub enum MediumThermo {
    TemperaturePath(Box<[InteractingThermo; 2]>),
    StrainPath(StrainPathThermo),
}

impl MediumThermo {
    pub fn cycle(&self, spec: &CycleSpec) -> Result<InteractingCycleResult> {
        match self {
            MediumThermo::TemperaturePath(th) => cycle_from_thermo(spec, &th[0], &th[1]),
            MediumThermo::StrainPath(th) => th.cycle(spec),
        }
    }
}

/// Samples everything the cycles between `theta1` and `theta2` need at any
/// pair of bath temperatures from `temps`.
pub fn sample_medium(
    theta1: f64,
    theta2: f64,
    eta_strain: f64,
    u: f64,
    mc: &McParams,
    setup: &InteractingSetup,
    temps: &[f64],
) -> Result<MediumThermo> {
    match setup.estimator {
        CycleEstimator::StrainPath => Ok(MediumThermo::StrainPath(strain_path_thermo(
            theta1, theta2, eta_strain, u, mc, setup, temps,
        )?)),
        CycleEstimator::TemperaturePath => {
            let t_grid = match &setup.t_grid {
                Some(g) => g.clone(),
                None => default_temperature_grid(temps)?,
            };
            let th: Vec<InteractingThermo> = [theta1, theta2]
                .par_iter()
                .enumerate()
                .map(|(i, &theta)| {
                    let p = McParams { seed: derive_seed(mc.seed, 1000 + i as u64), ..mc.clone() };
                    strain_thermo(theta, eta_strain, u, &p, setup, &t_grid)
                })
                .collect::<Result<_>>()?;
            let [a, b]: [InteractingThermo; 2] = th.try_into().expect("two strain values");
            Ok(MediumThermo::TemperaturePath(Box::new([a, b])))
        }
    }
}

pub fn interacting_cycle(
    spec: &CycleSpec,
    u: f64,
    mc: &McParams,
    setup: &InteractingSetup,
) -> Result<InteractingCycleResult> {
    spec.validate()?;
    sample_medium(spec.theta1, spec.theta2, spec.eta_strain, u, mc, setup, &[spec.t_hot, spec.t_cold])?
        .cycle(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{band_spectrum, THETA_KAGOME};
    use crate::spa::geometry::build_geometry;
    use crate::thermo::{internal_energy, log_partition, StatisticsMode};

    #[test]
    fn classical_reference_limits() {
        assert_eq!(classical_reference(3.0, 0.0, 4.0), (0.0, 0.0));
        // beta -> 0: uniform ball, <m^2> = 3 c^2 / 5
        let (ln_i, e) = classical_reference(1e-12, 2.0, 4.0);
        assert!(ln_i.abs() < 1e-9);
        assert!((e - 0.5 * 3.0 * 16.0 / 5.0).abs() < 1e-8);
        // large beta: Gaussian equipartition, (U/4) <m^2> = 3 T / 2
        let (_, e) = classical_reference(50.0, 8.0, 4.0);
        assert!((e - 1.5 / 50.0).abs() < 1e-9);
    }

    #[test]
    fn classical_energy_is_minus_beta_derivative() {
        for (beta, u) in [(0.3, 4.0), (2.0, 1.0), (1.0, 9.0)] {
            let h = 1e-5;
            let d = (classical_reference(beta + h, u, 4.0).0 - classical_reference(beta - h, u, 4.0).0) / (2.0 * h);
            let e = classical_reference(beta, u, 4.0).1;
            assert!((d + e).abs() < 1e-7 * e.max(1.0), "beta={beta} u={u}: {d} vs {e}");
        }
    }

    #[test]
    fn default_grid_contains_requested_temperatures() {
        let g = default_temperature_grid(&[0.5, 0.3]).unwrap();
        assert_eq!(g[0], 2.0);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(g.contains(&0.5) && g.contains(&0.3));
        for w in g.windows(2) {
            let (a, b) = (1.0 / w[0], 1.0 / w[1]);
            assert!(b - a <= (0.25 * a).max(0.25) + 1e-12);
        }
        let hot = default_temperature_grid(&[5.0, 3.0]).unwrap();
        assert_eq!(hot[0], 5.0);
        assert!(hot.contains(&3.0) && hot.contains(&2.0));
        assert!(default_temperature_grid(&[0.0]).is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(check_grid(&[]).is_err());
        assert!(check_grid(&[1.5, 1.0]).is_err());
        assert!(check_grid(&[2.0, 1.0, 1.0]).is_err());
        assert!(check_grid(&[2.0, 0.5, 1.0]).is_err());
        assert!(check_grid(&[2.0, 1.0, 0.5]).is_ok());
    }

    #[test]
    fn reweighted_density_is_monotone() {
        let levels = vec![vec![-1.0, -0.2, 0.1, 0.9], vec![-0.7, -0.1, 0.3, 1.2]];
        let mut prev = -1.0;
        for i in 0..200 {
            let mu = -2.0 + 0.02 * i as f64;
            let d = reweighted_density(&levels, 0.0, mu, 5.0, 2.0);
            assert!(d >= prev);
            prev = d;
        }
    }

    #[test]
    fn zero_coupling_matches_band_thermodynamics() {
        let l = 4;
        let p = StrainParams::new(THETA_KAGOME, 8.0).unwrap();
        let g = build_geometry(l, &p).unwrap();
        let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: 2 }).unwrap();
        let mc = McParams { n_therm: 2, n_meas: 3, ..Default::default() };
        let grid = [2.0, 1.0, 0.5, 0.1];
        let th = interacting_thermo(&model, &mc, &grid, ThermoOptions::default()).unwrap();
        let bands = band_spectrum(&p, 2 * l).unwrap();
        for pt in &th.points {
            let f = StatisticsMode::Fermi;
            let ln_z = log_partition(&bands, pt.temperature, f).unwrap();
            let e = internal_energy(&bands, pt.temperature, f).unwrap();
            assert!((pt.ln_z - ln_z).abs() < 1e-10, "T={}: {} vs {ln_z}", pt.temperature, pt.ln_z);
            assert!((pt.energy - e).abs() < 1e-10);
            assert_eq!(pt.ln_z_stderr, 0.0);
        }
    }

    #[test]
    fn linear_error_model_reproduces_reported_errors() {
        let g = build_geometry(2, &StrainParams::new(1.9, 8.0).unwrap()).unwrap();
        let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: 2 }).unwrap();
        let mc = McParams { u: 3.0, mu: 1.5, n_therm: 10, n_meas: 20, seed: 4, ..Default::default() };
        let th = interacting_thermo(&model, &mc, &[2.0, 1.0, 0.5], ThermoOptions::default()).unwrap();
        for (k, pt) in th.points.iter().enumerate() {
            let e = combined_stderr(&th.energy_coeffs[k], &th.source_stderr);
            assert!((e - pt.energy_stderr).abs() < 1e-15);
            assert!(pt.ln_z_stderr > 0.0 && pt.ln_z.is_finite());
        }
    }

    #[test]
    fn anneal_and_quenched_options_run() {
        let g = build_geometry(2, &StrainParams::new(1.9, 8.0).unwrap()).unwrap();
        let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: 2 }).unwrap();
        let mc = McParams { u: 3.0, mu: 1.5, n_therm: 5, n_meas: 5, ..Default::default() };
        let opts = ThermoOptions { estimator: LnZEstimator::Quenched, anneal: true };
        let th = interacting_thermo(&model, &mc, &[2.0, 1.0], opts).unwrap();
        assert!(th.points.iter().all(|p| p.ln_z.is_finite() && p.ln_z_stderr >= 0.0));
    }
}
