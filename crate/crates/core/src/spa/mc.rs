//! Metropolis sampling of the auxiliary field with weight `e^{-beta F{m}}`.
//!
//! Every proposal is accepted with `min(1, e^{-beta dF})`, where `dF` is
//! evaluated on the update cluster of the site. With `U = 0` the field
//! decouples and stays identically zero.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};

use super::hamiltonian::{
    check_field, fermion_free_energy, norm_sq, AuxFieldConfig, Couplings, SpinFermionModel,
};
use crate::error::{Error, Result};

/// Proposal kernel for a single-site move. Both kernels are symmetric.
#[derive(Clone, Debug, PartialEq)]
pub enum Proposal {
    /// `m' = m + width * (uniform point of the unit ball)`; moves leaving
    /// `|m'| <= m_cap` are rejected.
    Ball { width: f64, m_cap: f64 },
    /// Uniform jump to one of the other listed field values.
    Discrete(Vec<[f64; 3]>),
}

impl Proposal {
    fn propose<R: Rng + ?Sized>(&self, m: [f64; 3], rng: &mut R) -> Option<[f64; 3]> {
        match self {
            Proposal::Ball { width, m_cap } => {
                let d: [f64; 3] = UnitBall.sample(rng);
                let next = std::array::from_fn(|a| m[a] + width * d[a]);
                (norm_sq(&next) <= m_cap * m_cap).then_some(next)
            }
            Proposal::Discrete(states) => {
                let others: Vec<_> = states.iter().filter(|s| **s != m).collect();
                others.choose(rng).map(|s| **s)
            }
        }
    }
}

/// Metropolis acceptance probability.
pub fn acceptance_probability(beta: f64, delta_f: f64) -> f64 {
    if delta_f <= 0.0 {
        1.0
    } else {
        (-beta * delta_f).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub proposed: usize,
    pub accepted: usize,
}

impl SweepStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn add(&mut self, other: SweepStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

/// `F` change of the cluster around `site` when its field becomes `next`.
pub fn local_delta_f(
    model: &SpinFermionModel,
    field: &AuxFieldConfig,
    c: Couplings,
    beta: f64,
    site: usize,
    next: [f64; 3],
) -> Result<f64> {
    let cluster = model.cluster_for(site);
    let local = cluster
        .local_index(site)
        .ok_or_else(|| Error::Invariant(format!("site {site} missing from its cluster")))?;
    let before = cluster.spectrum(field, c, None)?;
    let after = cluster.spectrum(field, c, Some((local, next)))?;
    let stiff = 0.25 * c.u * (norm_sq(&next) - norm_sq(&field.m[site]));
    Ok(fermion_free_energy(&after, beta) - fermion_free_energy(&before, beta) + stiff)
}

/// One pass over all sites in index order.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    model: &SpinFermionModel,
    field: &mut AuxFieldConfig,
    c: Couplings,
    beta: f64,
    proposal: &Proposal,
    rng: &mut R,
) -> Result<SweepStats> {
    check_field(model, field)?;
    let mut stats = SweepStats::default();
    if c.u == 0.0 {
        return Ok(stats);
    }
    for site in 0..model.n_sites() {
        stats.proposed += 1;
        let Some(next) = proposal.propose(field.m[site], rng) else {
            continue;
        };
        let df = local_delta_f(model, field, c, beta, site, next)?;
        let r: f64 = rng.random();
        if r < acceptance_probability(beta, df) {
            field.m[site] = next;
            stats.accepted += 1;
        }
    }
    Ok(stats)
}

/// Control parameters of one Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct McParams {
    pub beta: f64,
    pub u: f64,
    pub mu: f64,
    pub n_therm: usize,
    pub n_meas: usize,
    pub cluster_l: usize,
    /// Initial ball-move width; adapted during thermalisation.
    pub move_width: f64,
    pub seed: u64,
    pub m_cap: f64,
    /// Sweeps between measurements.
    pub measure_every: usize,
    /// Lorentzian broadening of the density of states.
    pub dos_gamma: f64,
}

impl Default for McParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            u: 0.0,
            mu: 0.0,
            n_therm: 200,
            n_meas: 100,
            cluster_l: 2,
            move_width: 0.5,
            seed: 1,
            m_cap: super::hamiltonian::M_CAP,
            measure_every: 1,
            dos_gamma: 0.05,
        }
    }
}

impl McParams {
    pub fn couplings(&self) -> Couplings {
        Couplings { u: self.u, mu: self.mu }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::domain(m));
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        if !(self.u >= 0.0) || !self.u.is_finite() {
            return bad(format!("u = {} must be non-negative", self.u));
        }
        if !self.mu.is_finite() {
            return bad("mu must be finite".into());
        }
        if self.measure_every == 0 {
            return bad("measure_every must be positive".into());
        }
        if !(self.move_width > 0.0) || !(self.m_cap > 0.0) || !(self.dos_gamma > 0.0) {
            return bad("move_width, m_cap and dos_gamma must be positive".into());
        }
        Ok(())
    }
}

/// Adaptive width bounds and target acceptance window.
const TARGET_ACCEPTANCE: (f64, f64) = (0.3, 0.5);

/// Random stream of sweep `index`: ChaCha8 keyed by the seed, one stream per
/// sweep. The initial field uses stream `u64::MAX`.
pub fn sweep_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Independent seed for sub-chain `k` of a run seeded with `seed`
/// (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Markov chain over field configurations; a pure function of its parameters.
pub struct Chain<'a> {
    model: &'a SpinFermionModel,
    params: McParams,
    pub field: AuxFieldConfig,
    pub width: f64,
    sweeps_done: u64,
}

impl<'a> Chain<'a> {
    /// Hot start: independent uniform draws from the unit ball.
    pub fn new(model: &'a SpinFermionModel, params: McParams) -> Result<Self> {
        params.validate()?;
        let mut rng = sweep_rng(params.seed, u64::MAX);
        let field = if params.u == 0.0 {
            AuxFieldConfig::zeros(model.n_sites())
        } else {
            AuxFieldConfig::random_ball(model.n_sites(), 1.0_f64.min(params.m_cap), &mut rng)
        };
        Ok(Self { model, width: params.move_width, params, field, sweeps_done: 0 })
    }

    pub fn params(&self) -> &McParams {
        &self.params
    }

    pub fn model(&self) -> &SpinFermionModel {
        self.model
    }

    fn proposal(&self) -> Proposal {
        Proposal::Ball { width: self.width, m_cap: self.params.m_cap }
    }

    pub fn sweep(&mut self) -> Result<SweepStats> {
        let p = self.proposal();
        let mut rng = sweep_rng(self.params.seed, self.sweeps_done);
        self.sweeps_done += 1;
        metropolis_sweep(
            self.model,
            &mut self.field,
            self.params.couplings(),
            self.params.beta,
            &p,
            &mut rng,
        )
    }

    /// Replaces the field, e.g. to anneal from a neighbouring temperature.
    pub fn set_field(&mut self, field: AuxFieldConfig) -> Result<()> {
        check_field(self.model, &field)?;
        self.field = field;
        Ok(())
    }

    /// `n_therm` sweeps, rescaling the move width after each one to pull
    /// the acceptance into the target window.
    pub fn thermalize(&mut self) -> Result<SweepStats> {
        let mut total = SweepStats::default();
        for _ in 0..self.params.n_therm {
            let s = self.sweep()?;
            total.add(s);
            if s.proposed == 0 {
                continue;
            }
            let r = s.rate();
            if r < TARGET_ACCEPTANCE.0 {
                self.width *= 0.8;
            } else if r > TARGET_ACCEPTANCE.1 {
                self.width *= 1.25;
            }
            self.width = self.width.clamp(1e-3, 2.0 * self.params.m_cap);
        }
        Ok(total)
    }

    /// Runs `measure_every` sweeps at fixed width.
    pub fn advance(&mut self) -> Result<SweepStats> {
        let mut total = SweepStats::default();
        for _ in 0..self.params.measure_every {
            total.add(self.sweep()?);
        }
        Ok(total)
    }
}
