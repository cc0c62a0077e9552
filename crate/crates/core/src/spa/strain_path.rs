//! Stirling cycle of the interacting medium from strain integration.
//!
//! Along an isotherm the free-energy change is the integral of the mean
//! generalised force, `F(theta2) - F(theta1) = int <dF{m}/dtheta> dtheta`,
//! which involves only the strained kinetic bonds and none of the classical
//! stiffness. The integral uses Gauss-Lobatto nodes between the two strain
//! values (the ends are the cycle's states) and only integrates the
//! difference to the zero-field force, whose integral is known exactly. The
//! cycle also needs the mean energies at both ends. Every output is a linear combination of per-chain sample means, so its error is
//! a jackknife of the matching combination of per-sample series, with the
//! covariance inside a chain kept exactly.
//!
//! With [`MuPolicy::HalfFilling`] the chemical potential is tuned per chain
//! and the bookkeeping is canonical (`E + mu N`, `dOmega/dtheta` at fixed
//! `mu` equals `dF/dtheta` at fixed `N`). Otherwise the grand potential at a
//! fixed `mu` is used, which for `U = 0, mu = 0` is the band medium.

use rayon::prelude::*;

use super::geometry::build_geometry;
use super::eigen::hermitian_eigen;
use super::hamiltonian::{fermion_free_energy, AuxFieldConfig, Couplings, SpinFermionModel, UpdateScheme};
use super::interacting::{tune_mu_half_filling, CycleErrors, InteractingCycleResult, InteractingSetup, MuPolicy};
use super::mc::{derive_seed, McParams};
use super::observables::{jackknife_mean, sample_chain_with, strain_force, ChainSamples};
use crate::cycle::{
    classify_mode_with, default_tolerance, relative_performance, strokes, CycleResult, CycleSpec,
    CycleStates, OperatingMode, StatePoint,
};
use crate::error::{Error, Result};
use crate::lattice::StrainParams;
use crate::thermo::fermi;

/// Per-measurement series of one chain, normalised per unit cell and spin.
#[derive(Clone, Debug, PartialEq)]
pub struct PathChain {
    pub theta: f64,
    pub temperature: f64,
    pub mu: f64,
    pub force: Vec<f64>,
    pub energy: Vec<f64>,
    pub density: f64,
    pub acceptance: f64,
}

/// Chains on `nodes x temperatures`, `chains[t][n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainPathThermo {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Descending.
    pub temperatures: Vec<f64>,
    pub chains: Vec<Vec<PathChain>>,
    /// Per temperature, exact zero-field `dOmega` minus its quadrature: the
    /// control variate that makes the path exact at `U = 0`.
    pub reference: Vec<f64>,
}

/// Legendre `P_n(x)` and `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    // P_n' = n (x P_n - P_{n-1}) / (x^2 - 1), only used off the endpoints
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss-Lobatto nodes (ascending, endpoints included) and weights on
/// `[a, b]`; exact for polynomials of degree `2 points - 3`.
pub fn lobatto_rule(a: f64, b: f64, points: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if points < 2 {
        return Err(Error::domain(format!("Lobatto needs at least 2 points, got {points}")));
    }
    let n = points - 1;
    let mut x = vec![0.0; points];
    for (i, xi) in x.iter_mut().enumerate() {
        // interior nodes are the roots of P_n', Newton from Chebyshev-Lobatto guesses
        let mut t = -(std::f64::consts::PI * i as f64 / n as f64).cos();
        if i > 0 && i < n {
            for _ in 0..100 {
                let (p, dp) = legendre(n, t);
                // P_n'' = (2 t P_n' - n (n + 1) P_n) / (1 - t^2)
                let d2p = (2.0 * t * dp - (n * (n + 1)) as f64 * p) / (1.0 - t * t);
                let step = dp / d2p;
                t -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
        }
        *xi = t;
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let nodes = x
        .iter()
        .enumerate()
        .map(|(i, t)| match i {
            0 => a,
            _ if i == n => b,
            _ => mid + half * t,
        })
        .collect();
    let weights = x
        .iter()
        .map(|&t| half * 2.0 / ((n * (n + 1)) as f64 * legendre(n, t).0.powi(2)))
        .collect();
    Ok((nodes, weights))
}

/// Linear form over the chains: `value = constant + sum a <force> + b <energy>`.
#[derive(Clone, Debug)]
struct LinearForm {
    /// `[t][n] -> (a, b)`.
    coeffs: Vec<Vec<(f64, f64)>>,
    constant: f64,
}

impl LinearForm {
    fn zeros(th: &StrainPathThermo) -> Self {
        Self { coeffs: vec![vec![(0.0, 0.0); th.nodes.len()]; th.temperatures.len()], constant: 0.0 }
    }

    fn scaled_sum(&self, other: &Self, a: f64, b: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| {
                x.iter()
                    .zip(y)
                    .map(|(p, q)| (a * p.0 + b * q.0, a * p.1 + b * q.1))
                    .collect()
            })
            .collect();
        Self { coeffs, constant: a * self.constant + b * other.constant }
    }

    fn value_and_stderr(&self, th: &StrainPathThermo) -> (f64, f64) {
        let (mut v, mut var) = (self.constant, 0.0);
        for (row, chains) in self.coeffs.iter().zip(&th.chains) {
            for (&(a, b), c) in row.iter().zip(chains) {
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let series: Vec<f64> = c.force.iter().zip(&c.energy).map(|(f, e)| a * f + b * e).collect();
                let (m, s) = jackknife_mean(&series);
                v += m;
                var += s * s;
            }
        }
        (v, var.sqrt())
    }
}

impl StrainPathThermo {
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.temperatures
            .iter()
            .position(|x| (x - t).abs() <= 1e-9 * t.abs())
            .ok_or_else(|| Error::domain(format!("temperature {t} was not sampled")))
    }

    fn delta_f(&self, k: usize) -> LinearForm {
        let mut f = LinearForm::zeros(self);
        for (n, w) in self.weights.iter().enumerate() {
            f.coeffs[k][n].0 = *w;
        }
        f.constant = self.reference[k];
        f
    }

    fn energy(&self, k: usize, end: usize) -> LinearForm {
        let mut f = LinearForm::zeros(self);
        f.coeffs[k][end].1 = 1.0;
        f
    }

    /// `F(theta2, T) - F(theta1, T)` with its standard error.
    pub fn free_energy_change(&self, t: f64) -> Result<(f64, f64)> {
        Ok(self.delta_f(self.index_of(t)?).value_and_stderr(self))
    }

    /// Mean energy at `theta1` (`end = 0`) or `theta2` (`end = 1`).
    pub fn end_energy(&self, t: f64, end: usize) -> Result<(f64, f64)> {
        let last = self.nodes.len() - 1;
        Ok(self.energy(self.index_of(t)?, if end == 0 { 0 } else { last }).value_and_stderr(self))
    }

    /// Cycle between the two ends at the sampled bath temperatures of `spec`.
    pub fn cycle(&self, spec: &CycleSpec) -> Result<InteractingCycleResult> {
        let (t_hot, t_cold) = (spec.t_hot, spec.t_cold);
        let (h, c) = (self.index_of(t_hot)?, self.index_of(t_cold)?);
        let last = self.nodes.len() - 1;
        let (df_h, df_c) = (self.delta_f(h), self.delta_f(c));
        let (e1c, e2h) = (self.energy(c, 0), self.energy(h, last));
        let value = |f: &LinearForm| f.value_and_stderr(self).0;
        let states = CycleStates {
            theta1_hot: StatePoint { ln_z: 0.0, energy: value(&self.energy(h, 0)) },
            theta2_hot: StatePoint { ln_z: -value(&df_h) / t_hot, energy: value(&e2h) },
            theta1_cold: StatePoint { ln_z: 0.0, energy: value(&e1c) },
            theta2_cold: StatePoint { ln_z: -value(&df_c) / t_cold, energy: value(&self.energy(c, last)) },
        };
        let k = strokes(&states, t_hot, t_cold)?;

        // W = dF_h - dF_c, Q_h = E2h - dF_h - E1c, Q_c = -(W + Q_h)
        let w = df_h.scaled_sum(&df_c, 1.0, -1.0);
        let qh = e2h.scaled_sum(&df_h, 1.0, -1.0).scaled_sum(&e1c, 1.0, -1.0);
        let qc = w.scaled_sum(&qh, -1.0, -1.0);
        let s_w = w.value_and_stderr(self).1;
        let s_qh = qh.value_and_stderr(self).1;
        let s_qc = qc.value_and_stderr(self).1;

        let mode = classify_with_errors(k.q_hot, k.q_cold, k.work, [s_qh, s_qc, s_w])?;
        let performance = if t_hot > t_cold {
            relative_performance(mode, k.q_hot, k.q_cold, k.work, t_hot, t_cold)?
        } else {
            None
        };
        let perf_err = match (mode, performance) {
            // p = -W / (Q_h eta_max)
            (OperatingMode::Engine, Some(p)) => {
                Some(w.scaled_sum(&qh, p / k.work, -p / k.q_hot).value_and_stderr(self).1)
            }
            (OperatingMode::Refrigerator, Some(p)) => {
                Some(qc.scaled_sum(&w, p / k.q_cold, -p / k.work).value_and_stderr(self).1)
            }
            _ => None,
        };
        let mu_at = |end: usize| self.chains[c][end].mu;
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
            mu: [mu_at(0), mu_at(last)],
        })
    }
}

/// Mode with every sign compared at two standard errors; an unphysical sign
/// pattern within five standard errors is reported as an unresolved boundary.
pub(crate) fn classify_with_errors(q_hot: f64, q_cold: f64, work: f64, stderr: [f64; 3]) -> Result<OperatingMode> {
    let base = default_tolerance(q_hot, q_cold, work);
    let classify = |n: f64| {
        classify_mode_with(q_hot, q_cold, work, [base + n * stderr[0], base + n * stderr[1], base + n * stderr[2]])
    };
    match classify(2.0) {
        Ok(m) => Ok(m),
        Err(_) => classify(5.0),
    }
}

fn path_chain(
    model: &SpinFermionModel,
    params: &McParams,
    start: Option<super::hamiltonian::AuxFieldConfig>,
    theta: f64,
    canonical: bool,
) -> Result<(PathChain, ChainSamples)> {
    let s = sample_chain_with(model, params, start, true)?;
    if s.energy.is_empty() {
        return Err(Error::domain("strain integration needs measured sweeps"));
    }
    let n_sites = model.n_sites() as f64;
    let norm = 2.0 * n_sites / 3.0;
    let shift = if canonical { params.mu } else { 0.0 };
    let energy = s
        .energy
        .iter()
        .zip(&s.density)
        .map(|(e, d)| (e + shift * d * n_sites) / norm)
        .collect();
    let force = s.strain_force.iter().map(|g| g / norm).collect();
    let chain = PathChain {
        theta,
        temperature: 1.0 / params.beta,
        mu: params.mu,
        force,
        energy,
        density: s.density.iter().sum::<f64>() / s.density.len() as f64,
        acceptance: s.stats.rate(),
    };
    Ok((chain, s))
}

/// Samples the strain path `theta1 -> theta2` at every temperature of `temps`.
pub fn strain_path_thermo(
    theta1: f64,
    theta2: f64,
    eta_strain: f64,
    u: f64,
    mc: &McParams,
    setup: &InteractingSetup,
    temps: &[f64],
) -> Result<StrainPathThermo> {
    mc.validate()?;
    if temps.is_empty() || temps.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::domain("temperatures must be positive"));
    }
    let mut temperatures = temps.to_vec();
    temperatures.sort_by(|a, b| b.total_cmp(a));
    temperatures.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let (nodes, weights) = lobatto_rule(theta1, theta2, setup.path_nodes)?;
    let models = nodes
        .iter()
        .map(|&th| {
            let g = build_geometry(setup.l, &StrainParams::new(th, eta_strain)?)?;
            SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: mc.cluster_l })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_t = temperatures.len();
    let params = |n: usize, k: usize| McParams {
        u,
        beta: 1.0 / temperatures[k],
        mu: match setup.mu_policy {
            MuPolicy::ParticleHole => 0.5 * u,
            MuPolicy::Fixed | MuPolicy::HalfFilling => mc.mu,
        },
        seed: derive_seed(mc.seed, (n * n_t + k) as u64),
        ..mc.clone()
    };
    let canonical = setup.mu_policy == MuPolicy::HalfFilling;
    let tuned = |n: usize, k: usize, mu0: f64| -> Result<McParams> {
        let mut p = params(n, k);
        if canonical {
            let tp = McParams { mu: mu0, seed: derive_seed(p.seed, u64::MAX), ..p.clone() };
            p.mu = tune_mu_half_filling(&models[n], &tp, setup.tol_n)?.mu;
        }
        Ok(p)
    };
    // per node, temperatures hot to cold
    let run_node = |n: usize| -> Result<Vec<PathChain>> {
        let mut out: Vec<PathChain> = Vec::with_capacity(n_t);
        let mut last: Option<ChainSamples> = None;
        for k in 0..n_t {
            let mu0 = out.last().map_or(0.5 * u, |c| c.mu);
            let p = tuned(n, k, mu0)?;
            let start = if setup.thermo.anneal { last.as_ref().and_then(|s| s.fields.last().cloned()) } else { None };
            let (c, s) = path_chain(&models[n], &p, start, nodes[n], canonical)?;
            out.push(c);
            last = Some(s);
        }
        Ok(out)
    };
    let by_node = (0..nodes.len()).into_par_iter().map(run_node).collect::<Result<Vec<_>>>()?;
    let chains = (0..n_t).map(|k| by_node.iter().map(|row| row[k].clone()).collect()).collect();
    let mu_ref = match setup.mu_policy {
        MuPolicy::Fixed => mc.mu,
        MuPolicy::ParticleHole | MuPolicy::HalfFilling => 0.5 * u,
    };
    let c_ref = Couplings { u, mu: mu_ref };
    let norm = 2.0 * models[0].n_sites() as f64 / 3.0;
    let zero = AuxFieldConfig::zeros(models[0].n_sites());
    let free: Vec<(Vec<f64>, faer::Mat<faer::c64>)> = models
        .iter()
        .map(|m| hermitian_eigen(&m.whole().hamiltonian(&zero, c_ref, None)))
        .collect::<Result<_>>()?;
    let geometry = |n: usize| models[n].geometry().expect("models are built from a geometry");
    let last = nodes.len() - 1;
    let reference = temperatures
        .iter()
        .map(|t| {
            let beta = 1.0 / t;
            let exact = (fermion_free_energy(&free[last].0, beta) - fermion_free_energy(&free[0].0, beta)) / norm;
            let quad: f64 = free
                .iter()
                .enumerate()
                .map(|(n, (levels, u))| {
                    let occ: Vec<f64> = levels.iter().map(|e| fermi(beta * e)).collect();
                    weights[n] * strain_force(geometry(n), u, &occ) / norm
                })
                .sum();
            exact - quad
        })
        .collect();
    Ok(StrainPathThermo { nodes, weights, temperatures, chains, reference })
}
