//! Spin-fermion Hamiltonian at fixed auxiliary field and its free energy.
//!
//! Basis index `2 i + s` (site-major, spin-minor). For a field `{m_i}`
//!
//! `H_eff = K (x) 1 + (U/2 - mu) 1 - (U/2) sum_i m_i . sigma_i`
//!
//! and `F{m} = -T sum_n ln(1 + e^{-E_n/T}) + (U/4) sum_i |m_i|^2`. The charge
//! field sits at its saddle point `U <n>/2 = U/2` and is absorbed in the
//! diagonal shift.

use faer::{c64, Mat};
use rand::Rng;
use rand_distr::{Distribution, UnitBall};

use super::eigen::hermitian_eigenvalues;
use super::geometry::LatticeGeometry;
use crate::error::{Error, Result};
use crate::thermo::softplus;

/// Default bound on `|m_i|`.
pub const M_CAP: f64 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct AuxFieldConfig {
    pub m: Vec<[f64; 3]>,
}

impl AuxFieldConfig {
    pub fn zeros(n: usize) -> Self {
        Self { m: vec![[0.0; 3]; n] }
    }

    pub fn uniform(n: usize, m: [f64; 3]) -> Self {
        Self { m: vec![m; n] }
    }

    /// Independent uniform draws from the ball of the given radius.
    pub fn random_ball<R: Rng + ?Sized>(n: usize, radius: f64, rng: &mut R) -> Self {
        let m = (0..n)
            .map(|_| {
                let v: [f64; 3] = UnitBall.sample(rng);
                v.map(|c| c * radius)
            })
            .collect();
        Self { m }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn norm_sq_sum(&self) -> f64 {
        self.m.iter().map(norm_sq).sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.m.iter().map(|v| norm_sq(v).sqrt()).fold(0.0, f64::max)
    }

    /// Same field with every vector rotated by `r` (row-major 3x3).
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Self {
        let m = self
            .m
            .iter()
            .map(|v| std::array::from_fn(|a| (0..3).map(|b| r[a][b] * v[b]).sum()))
            .collect();
        Self { m }
    }
}

pub(crate) fn norm_sq(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Interaction strength and chemical potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Couplings {
    pub u: f64,
    pub mu: f64,
}

/// A set of sites (ascending global indices) and the hoppings among them in
/// local indices. The whole lattice is the cluster containing every site.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub sites: Vec<usize>,
    /// `(a, b, K_ab)` with `a < b` local; every bond listed once.
    pub hops: Vec<(usize, usize, f64)>,
}

impl Cluster {
    fn from_sites(sites: Vec<usize>, global_hops: &[(usize, usize, f64)]) -> Self {
        let local = |g: usize| sites.binary_search(&g).ok();
        let hops = global_hops
            .iter()
            .filter_map(|&(i, j, k)| Some((local(i)?, local(j)?, k)))
            .collect();
        Self { sites, hops }
    }

    pub fn dim(&self) -> usize {
        2 * self.sites.len()
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        self.sites.binary_search(&global).ok()
    }

    /// `H_eff` restricted to the cluster, with `override_m` replacing the
    /// field of one local site.
    pub fn hamiltonian(
        &self,
        field: &AuxFieldConfig,
        c: Couplings,
        override_m: Option<(usize, [f64; 3])>,
    ) -> Mat<c64> {
        let n = self.dim();
        let mut h = Mat::<c64>::zeros(n, n);
        for &(a, b, k) in &self.hops {
            for s in 0..2 {
                let (p, q) = (2 * a + s, 2 * b + s);
                h[(p, q)] += c64::new(k, 0.0);
                h[(q, p)] += c64::new(k, 0.0);
            }
        }
        let shift = 0.5 * c.u - c.mu;
        let half_u = 0.5 * c.u;
        for (a, &g) in self.sites.iter().enumerate() {
            let m = match override_m {
                Some((la, m)) if la == a => m,
                _ => field.m[g],
            };
            let (up, dn) = (2 * a, 2 * a + 1);
            h[(up, up)] += c64::new(shift - half_u * m[2], 0.0);
            h[(dn, dn)] += c64::new(shift + half_u * m[2], 0.0);
            h[(dn, up)] += c64::new(-half_u * m[0], -half_u * m[1]);
            h[(up, dn)] += c64::new(-half_u * m[0], half_u * m[1]);
        }
        h
    }

    pub fn spectrum(
        &self,
        field: &AuxFieldConfig,
        c: Couplings,
        override_m: Option<(usize, [f64; 3])>,
    ) -> Result<Vec<f64>> {
        hermitian_eigenvalues(&self.hamiltonian(field, c, override_m))
    }
}

#[derive(Clone, Debug)]
enum ClusterSet {
    Whole,
    PerSite(Vec<Cluster>),
}

/// Hopping graph of a spin-fermion model plus the update clusters.
#[derive(Clone, Debug)]
pub struct SpinFermionModel {
    whole: Cluster,
    clusters: ClusterSet,
    geometry: Option<LatticeGeometry>,
}

/// How many sites each Metropolis update diagonalises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateScheme {
    /// Traveling cluster of `cluster_l x cluster_l` cells around the site.
    Cluster { cluster_l: usize },
    /// Whole lattice.
    Full,
}

impl SpinFermionModel {
    /// Arbitrary hopping graph; `bonds` are `(i, j, t)` with `K_ij = -t`.
    /// Updates diagonalise the whole system.
    pub fn from_bonds(n_sites: usize, bonds: &[(usize, usize, f64)]) -> Result<Self> {
        let mut hops = Vec::with_capacity(bonds.len());
        for &(i, j, t) in bonds {
            if i >= n_sites || j >= n_sites || i == j {
                return Err(Error::domain(format!("bad bond ({i}, {j}) for {n_sites} sites")));
            }
            hops.push((i.min(j), i.max(j), -t));
        }
        Ok(Self {
            whole: Cluster { sites: (0..n_sites).collect(), hops },
            clusters: ClusterSet::Whole,
            geometry: None,
        })
    }

    pub fn from_geometry(g: &LatticeGeometry, scheme: UpdateScheme) -> Result<Self> {
        let bonds: Vec<_> = g.bonds().map(|b| (b.i, b.j, b.hopping)).collect();
        let mut model = Self::from_bonds(g.n_sites(), &bonds)?;
        model.geometry = Some(g.clone());
        if let UpdateScheme::Cluster { cluster_l } = scheme {
            if cluster_l == 0 || cluster_l > g.l {
                return Err(Error::domain(format!(
                    "cluster_l = {cluster_l} must lie in 1..={}",
                    g.l
                )));
            }
            let clusters = (0..g.n_sites())
                .map(|i| Cluster::from_sites(cluster_sites(g, i, cluster_l), &model.whole.hops))
                .collect();
            model.clusters = ClusterSet::PerSite(clusters);
        }
        Ok(model)
    }

    pub fn n_sites(&self) -> usize {
        self.whole.sites.len()
    }

    pub fn geometry(&self) -> Option<&LatticeGeometry> {
        self.geometry.as_ref()
    }

    pub fn whole(&self) -> &Cluster {
        &self.whole
    }

    pub fn cluster_for(&self, site: usize) -> &Cluster {
        match &self.clusters {
            ClusterSet::Whole => &self.whole,
            ClusterSet::PerSite(c) => &c[site],
        }
    }
}

/// Sites of the `c x c` cells whose fractional coordinates lie in
/// `[s - c/2, s + c/2)` around the position `s` of `site`, ascending.
fn cluster_sites(g: &LatticeGeometry, site: usize, c: usize) -> Vec<usize> {
    let s = &g.sites[site];
    let off = s.sublattice.fractional_offset();
    let half = c as f64 / 2.0;
    let l = g.l as isize;
    let range = |x: usize, f: f64| {
        let lo = (x as f64 + f - half).ceil() as isize;
        lo..lo + c as isize
    };
    let mut out = Vec::with_capacity(3 * c * c);
    for x in range(s.cell[0], off[0]) {
        for y in range(s.cell[1], off[1]) {
            let cell = (x.rem_euclid(l) * l + y.rem_euclid(l)) as usize;
            out.extend((0..3).map(|k| 3 * cell + k));
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Full effective Hamiltonian with its cached spectrum.
#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian {
    pub dim: usize,
    pub matrix: Mat<c64>,
    pub spectrum: Vec<f64>,
    /// `(U/4) sum_i |m_i|^2`.
    pub stiffness: f64,
}

pub fn build_h_eff(
    model: &SpinFermionModel,
    field: &AuxFieldConfig,
    c: Couplings,
) -> Result<EffectiveHamiltonian> {
    check_field(model, field)?;
    let matrix = model.whole.hamiltonian(field, c, None);
    let spectrum = hermitian_eigenvalues(&matrix)?;
    Ok(EffectiveHamiltonian {
        dim: matrix.nrows(),
        matrix,
        spectrum,
        stiffness: 0.25 * c.u * field.norm_sq_sum(),
    })
}

pub(crate) fn check_field(model: &SpinFermionModel, field: &AuxFieldConfig) -> Result<()> {
    if field.len() != model.n_sites() {
        return Err(Error::domain(format!(
            "field has {} sites, model has {}",
            field.len(),
            model.n_sites()
        )));
    }
    Ok(())
}

/// `-T sum_n ln(1 + e^{-beta E_n})`.
pub fn fermion_free_energy(levels: &[f64], beta: f64) -> f64 {
    -levels.iter().map(|e| softplus(-beta * e)).sum::<f64>() / beta
}

/// `F{m}` of a diagonalised effective Hamiltonian.
pub fn config_free_energy(h: &EffectiveHamiltonian, beta: f64) -> f64 {
    fermion_free_energy(&h.spectrum, beta) + h.stiffness
}

/// `F{m}` of the full system at field `field`.
pub fn field_free_energy(
    model: &SpinFermionModel,
    field: &AuxFieldConfig,
    c: Couplings,
    beta: f64,
) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain(format!("beta = {beta} must be positive")));
    }
    Ok(config_free_energy(&build_h_eff(model, field, c)?, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{band_spectrum, StrainParams, THETA_KAGOME};
    use crate::spa::geometry::build_geometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rotation(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
        let n = norm_sq(&axis).sqrt();
        let [x, y, z] = axis.map(|a| a / n);
        let (s, c) = angle.sin_cos();
        let v = 1.0 - c;
        [
            [c + x * x * v, x * y * v - z * s, x * z * v + y * s],
            [y * x * v + z * s, c + y * y * v, y * z * v - x * s],
            [z * x * v - y * s, z * y * v + x * s, c + z * z * v],
        ]
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let g = build_geometry(2, &StrainParams::new(1.9, 8.0).unwrap()).unwrap();
        let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Full).unwrap();
        let f = AuxFieldConfig::random_ball(12, 1.0, &mut ChaCha8Rng::seed_from_u64(3));
        let h = build_h_eff(&model, &f, Couplings { u: 4.0, mu: 0.3 }).unwrap();
        assert_eq!(h.dim, 24);
        for i in 0..h.dim {
            for j in 0..h.dim {
                assert!((h.matrix[(i, j)] - h.matrix[(j, i)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn free_energy_is_spin_rotation_invariant() {
        let g = build_geometry(2, &StrainParams::new(THETA_KAGOME, 8.0).unwrap()).unwrap();
        let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Full).unwrap();
        let f = AuxFieldConfig::random_ball(12, 2.0, &mut ChaCha8Rng::seed_from_u64(9));
        let c = Couplings { u: 6.0, mu: -0.2 };
        let f0 = field_free_energy(&model, &f, c, 3.0).unwrap();
        for (axis, angle) in [([0.0, 0.0, 1.0], 0.7), ([1.0, -2.0, 0.5], 2.9)] {
            let fr = field_free_energy(&model, &f.rotated(&rotation(axis, angle)), c, 3.0).unwrap();
            assert!((f0 - fr).abs() < 1e-10 * f0.abs().max(1.0));
        }
    }

    #[test]
    fn zero_field_spectrum_is_folded_bands() {
        for (theta, l) in [(THETA_KAGOME, 4), (1.75, 2)] {
            let p = StrainParams::new(theta, 8.0).unwrap();
            let g = build_geometry(l, &p).unwrap();
            let model = SpinFermionModel::from_geometry(&g, UpdateScheme::Full).unwrap();
            let h = build_h_eff(&model, &AuxFieldConfig::zeros(g.n_sites()), Couplings { u: 0.0, mu: 0.0 })
                .unwrap();
            // the 2l x 2l momentum grid holds each real-space level four times,
            // the two spin species hold it twice
            let mut bands = band_spectrum(&p, 2 * l).unwrap().levels;
            bands.sort_by(f64::total_cmp);
            let mut real: Vec<f64> = h.spectrum.iter().flat_map(|&e| [e, e]).collect();
            real.sort_by(f64::total_cmp);
            assert_eq!(bands.len(), real.len());
            for (a, b) in bands.iter().zip(&real) {
                assert!((a - b).abs() < 1e-8, "theta={theta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn uniform_field_splits_levels() {
        // single site: E = U/2 - mu -+ U|m|/2
        let model = SpinFermionModel::from_bonds(1, &[]).unwrap();
        let f = AuxFieldConfig::uniform(1, [0.3, -0.4, 1.2]);
        let h = build_h_eff(&model, &f, Couplings { u: 2.0, mu: 0.5 }).unwrap();
        assert!((h.spectrum[0] - (0.5 - 1.3)).abs() < 1e-14);
        assert!((h.spectrum[1] - (0.5 + 1.3)).abs() < 1e-14);
        assert!((h.stiffness - 0.5 * 1.69).abs() < 1e-14);
    }

    #[test]
    fn free_energy_limits() {
        let h = |spectrum: Vec<f64>, stiffness| EffectiveHamiltonian {
            dim: spectrum.len(),
            matrix: Mat::zeros(spectrum.len(), spectrum.len()),
            spectrum,
            stiffness,
        };
        assert_eq!(config_free_energy(&h(vec![], 1.5), 2.0), 1.5);
        let t = 0.4;
        let one = config_free_energy(&h(vec![0.0], 0.3), 1.0 / t);
        assert!((one - (0.3 - t * 2f64.ln())).abs() < 1e-15);
        // beta up to 100 stays finite and tends to the stiffness
        let cold = config_free_energy(&h(vec![0.5, 1.0, 3.0], 0.7), 100.0);
        assert!((cold - 0.7).abs() < 1e-15);
        assert!(config_free_energy(&h(vec![-50.0, 80.0], 0.0), 100.0).is_finite());
    }

    #[test]
    fn whole_lattice_cluster_matches_full_matrix() {
        let g = build_geometry(4, &StrainParams::new(1.8, 8.0).unwrap()).unwrap();
        let full = SpinFermionModel::from_geometry(&g, UpdateScheme::Full).unwrap();
        let tca = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: 4 }).unwrap();
        for i in [0, 7, 47] {
            assert_eq!(tca.cluster_for(i), full.whole());
        }
    }

    #[test]
    fn cluster_contains_site_and_has_expected_size() {
        let g = build_geometry(6, &StrainParams::new(1.8, 8.0).unwrap()).unwrap();
        let m = SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: 2 }).unwrap();
        for i in 0..g.n_sites() {
            let c = m.cluster_for(i);
            assert_eq!(c.sites.len(), 12);
            assert!(c.local_index(i).is_some());
        }
        assert!(SpinFermionModel::from_geometry(&g, UpdateScheme::Cluster { cluster_l: 7 }).is_err());
    }

    #[test]
    fn rejects_mismatched_field() {
        let model = SpinFermionModel::from_bonds(2, &[(0, 1, 1.0)]).unwrap();
        let c = Couplings { u: 1.0, mu: 0.0 };
        assert!(build_h_eff(&model, &AuxFieldConfig::zeros(3), c).is_err());
        assert!(field_free_energy(&model, &AuxFieldConfig::zeros(2), c, 0.0).is_err());
    }
}
