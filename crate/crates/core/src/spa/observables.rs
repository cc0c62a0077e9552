//! Measurements along a thermalised chain.
//!
//! Each measurement fully diagonalises `H_eff`. The energy sample is
//! `sum_n E_n f(beta E_n) + (U/4) sum_i |m_i|^2`, the density sample is the
//! mean occupation per site (both spins, half filling = 1).
//!
//! Two structure factors are kept. `sq` places every site at its unit-cell
//! origin and lives on the `l x l` momentum grid `q = (n1 b1 + n2 b2) / l`;
//! it cannot see order inside the cell (a 120 degree pattern on the three
//! sublattices sums to zero). `sq_site` uses the physical site positions on
//! the `2l x 2l` extended grid, where intra-cell antiferromagnetic patterns
//! show up away from `q = 0`; the antiferromagnetic peak is its maximum over
//! `q != 0`.

use faer::{c64, Mat};
use serde::Serialize;

use super::eigen::hermitian_eigen;
use super::geometry::LatticeGeometry;
use super::hamiltonian::{build_h_eff, AuxFieldConfig, EffectiveHamiltonian, SpinFermionModel};
use super::mc::{Chain, McParams, SweepStats};
use crate::error::{Error, Result};
use crate::thermo::fermi;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StructurePoint {
    pub qx: f64,
    pub qy: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakEstimate {
    pub qx: f64,
    pub qy: f64,
    pub s: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observables {
    pub temperature: f64,
    pub energy_mean: f64,
    pub energy_stderr: f64,
    pub density_mean: f64,
    pub density_stderr: f64,
    /// Acceptance during the measurement phase.
    pub acceptance: f64,
    pub n_samples: usize,
    pub sq: Vec<StructurePoint>,
    pub sq_site: Vec<StructurePoint>,
    pub afm_peak: Option<PeakEstimate>,
    pub dos: Vec<(f64, f64)>,
}

/// Raw per-measurement data of a chain.
#[derive(Clone, Debug)]
pub struct ChainSamples {
    pub energy: Vec<f64>,
    pub density: Vec<f64>,
    /// Eigenvalues of `H_eff` (chemical potential included).
    pub levels: Vec<Vec<f64>>,
    /// `(U/4) sum_i |m_i|^2` per measurement.
    pub stiffness: Vec<f64>,
    pub fields: Vec<AuxFieldConfig>,
    /// `dF{m}/dtheta` per measurement; empty unless requested.
    pub strain_force: Vec<f64>,
    pub stats: SweepStats,
}

/// Mean and standard error from a binned jackknife (at most 20 bins).
pub fn jackknife_mean(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let nb = n.min(20);
    if nb < 2 {
        return (mean, 0.0);
    }
    let size = n / nb;
    let used = size * nb;
    let bins: Vec<f64> = x[..used]
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let total: f64 = bins.iter().sum();
    let loo: Vec<f64> = bins.iter().map(|b| (total - b) / (nb - 1) as f64).collect();
    let lm = loo.iter().sum::<f64>() / nb as f64;
    let var = loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>() * (nb - 1) as f64 / nb as f64;
    (mean, var.sqrt())
}

/// Thermalises and measures one chain.
pub fn sample_chain(model: &SpinFermionModel, params: &McParams) -> Result<ChainSamples> {
    sample_chain_from(model, params, None)
}

/// As [`sample_chain`], optionally starting from a given field instead of a
/// hot start.
pub fn sample_chain_from(
    model: &SpinFermionModel,
    params: &McParams,
    start: Option<AuxFieldConfig>,
) -> Result<ChainSamples> {
    sample_chain_with(model, params, start, false)
}

/// `dF{m}/dtheta = sum_b (dt_b/dtheta) <dH/dt_b>` from the eigenvectors `u`
/// and occupations `occ` of `H_eff`, where `dH/dt_b = -sum_s (c+_is c_js + h.c.)`.
pub fn strain_force(g: &LatticeGeometry, u: &Mat<c64>, occ: &[f64]) -> f64 {
    let dim = u.nrows();
    g.bonds()
        .zip(g.hopping_derivatives())
        .filter(|(_, d)| *d != 0.0)
        .map(|(b, d)| {
            let mut re = 0.0;
            for s in 0..2 {
                let (a, c) = (2 * b.i + s, 2 * b.j + s);
                for (n, f) in occ.iter().enumerate().take(dim) {
                    re += f * (u[(a, n)] * u[(c, n)].conj()).re;
                }
            }
            -2.0 * d * re
        })
        .sum()
}

/// As [`sample_chain_from`]; with `measure_strain_force` every measurement
/// also records [`strain_force`] (needs a model built from a geometry).
pub fn sample_chain_with(
    model: &SpinFermionModel,
    params: &McParams,
    start: Option<AuxFieldConfig>,
    measure_strain_force: bool,
) -> Result<ChainSamples> {
    let geometry = match (measure_strain_force, model.geometry()) {
        (false, _) => None,
        (true, Some(g)) => Some(g),
        (true, None) => return Err(Error::domain("strain force needs a lattice geometry")),
    };
    let mut chain = Chain::new(model, params.clone())?;
    if let Some(f) = start {
        chain.set_field(f)?;
    }
    chain.thermalize()?;
    let c = params.couplings();
    let n = model.n_sites() as f64;
    let mut out = ChainSamples {
        energy: Vec::with_capacity(params.n_meas),
        density: Vec::with_capacity(params.n_meas),
        levels: Vec::with_capacity(params.n_meas),
        stiffness: Vec::with_capacity(params.n_meas),
        fields: Vec::with_capacity(params.n_meas),
        strain_force: Vec::new(),
        stats: SweepStats::default(),
    };
    for _ in 0..params.n_meas {
        let s = chain.advance()?;
        out.stats.proposed += s.proposed;
        out.stats.accepted += s.accepted;
        let b = params.beta;
        let h = match geometry {
            None => build_h_eff(model, &chain.field, c)?,
            Some(g) => {
                let matrix = model.whole().hamiltonian(&chain.field, c, None);
                let (spectrum, u) = hermitian_eigen(&matrix)?;
                let occ: Vec<f64> = spectrum.iter().map(|e| fermi(b * e)).collect();
                out.strain_force.push(strain_force(g, &u, &occ));
                EffectiveHamiltonian {
                    dim: matrix.nrows(),
                    matrix,
                    spectrum,
                    stiffness: 0.25 * c.u * chain.field.norm_sq_sum(),
                }
            }
        };
        out.energy
            .push(h.spectrum.iter().map(|e| e * fermi(b * e)).sum::<f64>() + h.stiffness);
        out.density.push(h.spectrum.iter().map(|e| fermi(b * e)).sum::<f64>() / n);
        out.levels.push(h.spectrum);
        out.stiffness.push(h.stiffness);
        out.fields.push(chain.field.clone());
    }
    Ok(out)
}

/// `q = (n1 b1 + n2 b2) / l` for `0 <= n1, n2 < extent * l`, Cartesian.
fn momentum_grid(g: &LatticeGeometry, extent: usize) -> Vec<[f64; 2]> {
    let [b1, b2] = g.strain.reciprocal_vectors();
    let l = g.l as f64;
    let n = extent * g.l;
    let mut q = Vec::with_capacity(n * n);
    for n1 in 0..n {
        for n2 in 0..n {
            let (f1, f2) = (n1 as f64 / l, n2 as f64 / l);
            q.push([f1 * b1[0] + f2 * b2[0], f1 * b1[1] + f2 * b2[1]]);
        }
    }
    q
}

/// Momenta of [`structure_factor`]: the `l x l` grid.
pub fn cell_momenta(g: &LatticeGeometry) -> Vec<[f64; 2]> {
    momentum_grid(g, 1)
}

/// Momenta of [`site_structure_factor`]: the `2l x 2l` extended grid.
pub fn site_momenta(g: &LatticeGeometry) -> Vec<[f64; 2]> {
    momentum_grid(g, 2)
}

/// `S(q) = (1/N^2) |sum_i m_i e^{i q . R_i}|^2`, `R_i` the cell origin of site `i`.
pub fn structure_factor(g: &LatticeGeometry, field: &AuxFieldConfig) -> Result<Vec<f64>> {
    let [a1, a2] = g.strain.direct_vectors();
    let origin = |s: &super::geometry::Site| {
        let (x, y) = (s.cell[0] as f64, s.cell[1] as f64);
        [x * a1[0] + y * a2[0], x * a1[1] + y * a2[1]]
    };
    fourier_intensity(g, field, &cell_momenta(g), origin)
}

/// As [`structure_factor`] with physical positions `r_i`.
pub fn site_structure_factor(g: &LatticeGeometry, field: &AuxFieldConfig) -> Result<Vec<f64>> {
    fourier_intensity(g, field, &site_momenta(g), |s| s.position)
}

fn fourier_intensity(
    g: &LatticeGeometry,
    field: &AuxFieldConfig,
    momenta: &[[f64; 2]],
    pos: impl Fn(&super::geometry::Site) -> [f64; 2],
) -> Result<Vec<f64>> {
    if field.len() != g.n_sites() {
        return Err(Error::domain("field size does not match the lattice"));
    }
    let n = g.n_sites() as f64;
    let r: Vec<[f64; 2]> = g.sites.iter().map(pos).collect();
    Ok(momenta
        .iter()
        .map(|q| {
            let mut acc = [[0.0f64; 2]; 3];
            for (r, m) in r.iter().zip(&field.m) {
                let (s, c) = (q[0] * r[0] + q[1] * r[1]).sin_cos();
                for a in 0..3 {
                    acc[a][0] += m[a] * c;
                    acc[a][1] += m[a] * s;
                }
            }
            acc.iter().map(|z| z[0] * z[0] + z[1] * z[1]).sum::<f64>() / (n * n)
        })
        .collect())
}

/// Frequency mesh of the density of states.
pub fn dos_mesh(u: f64) -> Vec<f64> {
    let w = 5.0 + u;
    let n = 401;
    (0..n).map(|i| -w + 2.0 * w * i as f64 / (n - 1) as f64).collect()
}

/// Lorentzian-broadened density of states per state, averaged over samples.
pub fn density_of_states(levels: &[Vec<f64>], omega: &[f64], gamma: f64) -> Vec<f64> {
    let count: usize = levels.iter().map(Vec::len).sum();
    omega
        .iter()
        .map(|w| {
            levels
                .iter()
                .flatten()
                .map(|e| gamma / std::f64::consts::PI / ((w - e).powi(2) + gamma * gamma))
                .sum::<f64>()
                / count as f64
        })
        .collect()
}

/// Reduces chain samples to observables.
pub fn reduce_samples(
    model: &SpinFermionModel,
    params: &McParams,
    samples: &ChainSamples,
) -> Result<Observables> {
    if samples.energy.is_empty() {
        return Err(Error::domain("no measured sweeps"));
    }
    let (energy_mean, energy_stderr) = jackknife_mean(&samples.energy);
    let (density_mean, density_stderr) = jackknife_mean(&samples.density);
    let (mut sq, mut sq_site, mut afm_peak) = (Vec::new(), Vec::new(), None);
    if let Some(g) = model.geometry() {
        sq = averaged_points(&cell_momenta(g), samples.fields.iter().map(|f| structure_factor(g, f)))?
            .0;
        let (points, per_sample) = averaged_points(
            &site_momenta(g),
            samples.fields.iter().map(|f| site_structure_factor(g, f)),
        )?;
        // index 0 is q = 0
        afm_peak = points
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.s.total_cmp(&b.1.s))
            .map(|(k, p)| {
                let series: Vec<f64> = per_sample.iter().map(|s| s[k]).collect();
                PeakEstimate { qx: p.qx, qy: p.qy, s: p.s, stderr: jackknife_mean(&series).1 }
            });
        sq_site = points;
    }
    let omega = dos_mesh(params.u);
    let rho = density_of_states(&samples.levels, &omega, params.dos_gamma);
    Ok(Observables {
        temperature: 1.0 / params.beta,
        energy_mean,
        energy_stderr,
        density_mean,
        density_stderr,
        acceptance: samples.stats.rate(),
        n_samples: samples.energy.len(),
        sq,
        sq_site,
        afm_peak,
        dos: omega.into_iter().zip(rho).collect(),
    })
}

/// Sample average of per-sample intensities, plus the per-sample data.
fn averaged_points(
    momenta: &[[f64; 2]],
    per_sample: impl Iterator<Item = Result<Vec<f64>>>,
) -> Result<(Vec<StructurePoint>, Vec<Vec<f64>>)> {
    let data: Vec<Vec<f64>> = per_sample.collect::<Result<_>>()?;
    let k = data.len().max(1) as f64;
    let points = momenta
        .iter()
        .enumerate()
        .map(|(i, q)| StructurePoint { qx: q[0], qy: q[1], s: data.iter().map(|s| s[i]).sum::<f64>() / k })
        .collect();
    Ok((points, data))
}

pub fn measure_observables(model: &SpinFermionModel, params: &McParams) -> Result<Observables> {
    let samples = sample_chain(model, params)?;
    reduce_samples(model, params, &samples)
}
