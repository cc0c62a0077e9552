//! Real-space periodic Lieb-kagome lattice with `3 l^2` sites.
//!
//! Site `A` of cell `R` sits at `R`, site `B` at `R + a1/2`, site `C` at
//! `R + a2/2`. Per cell there are two A-B and two A-C bonds of amplitude `t`
//! and four strained B-C bonds: two of amplitude `t1_ac` along `+-(a1-a2)/2`
//! and two of amplitude `t2_ac` along `+-(a1+a2)/2`. Fourier transforming this
//! bond set gives exactly the Bloch matrix of [`crate::lattice`].

use crate::error::{Error, Result};
use crate::lattice::{strain_hopping_derivatives, strain_hoppings, HoppingSet, StrainParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sublattice {
    A,
    B,
    C,
}

impl Sublattice {
    pub const ALL: [Sublattice; 3] = [Sublattice::A, Sublattice::B, Sublattice::C];

    pub fn index(self) -> usize {
        match self {
            Sublattice::A => 0,
            Sublattice::B => 1,
            Sublattice::C => 2,
        }
    }

    /// Offset inside the cell in units of `(a1, a2)`.
    pub fn fractional_offset(self) -> [f64; 2] {
        match self {
            Sublattice::A => [0.0, 0.0],
            Sublattice::B => [0.5, 0.0],
            Sublattice::C => [0.0, 0.5],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub cell: [usize; 2],
    pub sublattice: Sublattice,
    pub position: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BondKind {
    /// A-B or A-C, amplitude `t`.
    Nearest,
    /// B-C along `+-(a1-a2)/2`, amplitude `t1_ac`.
    StrainedOne,
    /// B-C along `+-(a1+a2)/2`, amplitude `t2_ac`.
    StrainedTwo,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub hopping: f64,
    pub kind: BondKind,
}

#[derive(Clone, Debug)]
pub struct LatticeGeometry {
    pub l: usize,
    pub strain: StrainParams,
    pub hoppings: HoppingSet,
    pub sites: Vec<Site>,
    /// A-B and A-C bonds, amplitude `t`.
    pub nn_bonds: Vec<Bond>,
    /// Strained B-C bonds, amplitude `t1_ac` or `t2_ac`.
    pub strained_bonds: Vec<Bond>,
    pub periodic: bool,
}

impl LatticeGeometry {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site_index(&self, x: usize, y: usize, s: Sublattice) -> usize {
        3 * (x * self.l + y) + s.index()
    }

    pub fn bonds(&self) -> impl Iterator<Item = &Bond> {
        self.nn_bonds.iter().chain(self.strained_bonds.iter())
    }

    /// Coordination number of every site (bond multiplicity counted).
    pub fn coordination(&self) -> Vec<usize> {
        let mut z = vec![0; self.n_sites()];
        for b in self.bonds() {
            z[b.i] += 1;
            z[b.j] += 1;
        }
        z
    }

    /// `d t_b / d theta` for every bond of [`Self::bonds`], in the same order.
    pub fn hopping_derivatives(&self) -> Vec<f64> {
        let d = strain_hopping_derivatives(&self.strain);
        self.bonds()
            .map(|b| match b.kind {
                BondKind::Nearest => d.t,
                BondKind::StrainedOne => d.t1_ac,
                BondKind::StrainedTwo => d.t2_ac,
            })
            .collect()
    }

    /// Dense real hopping matrix `K_ij = -sum t_ij` (row-major, `N x N`).
    pub fn kinetic_matrix(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut k = vec![0.0; n * n];
        for b in self.bonds() {
            k[b.i * n + b.j] -= b.hopping;
            k[b.j * n + b.i] -= b.hopping;
        }
        k
    }
}

pub fn build_geometry(l: usize, p: &StrainParams) -> Result<LatticeGeometry> {
    if l < 2 || !l.is_multiple_of(2) {
        return Err(Error::domain(format!("lattice size l = {l} must be even and >= 2")));
    }
    let h = strain_hoppings(p);
    let [a1, a2] = p.direct_vectors();
    let mut sites = Vec::with_capacity(3 * l * l);
    for x in 0..l {
        for y in 0..l {
            for s in Sublattice::ALL {
                let [fx, fy] = s.fractional_offset();
                let (u, v) = (x as f64 + fx, y as f64 + fy);
                sites.push(Site {
                    cell: [x, y],
                    sublattice: s,
                    position: [u * a1[0] + v * a2[0], u * a1[1] + v * a2[1]],
                });
            }
        }
    }

    let li = l as isize;
    let idx = |x: isize, y: isize, s: Sublattice| -> usize {
        let x = x.rem_euclid(li) as usize;
        let y = y.rem_euclid(li) as usize;
        3 * (x * l + y) + s.index()
    };
    use Sublattice::*;
    let mut nn_bonds = Vec::with_capacity(4 * l * l);
    let mut strained_bonds = Vec::with_capacity(4 * l * l);
    for x in 0..li {
        for y in 0..li {
            let a = idx(x, y, A);
            let b = idx(x, y, B);
            for (j, t) in [
                (b, h.t),
                (idx(x - 1, y, B), h.t),
                (idx(x, y, C), h.t),
                (idx(x, y - 1, C), h.t),
            ] {
                nn_bonds.push(Bond { i: a, j, hopping: t, kind: BondKind::Nearest });
            }
            for (j, kind) in [
                (idx(x, y, C), BondKind::StrainedOne),
                (idx(x + 1, y - 1, C), BondKind::StrainedOne),
                (idx(x + 1, y, C), BondKind::StrainedTwo),
                (idx(x, y - 1, C), BondKind::StrainedTwo),
            ] {
                let hopping = match kind {
                    BondKind::StrainedOne => h.t1_ac,
                    _ => h.t2_ac,
                };
                strained_bonds.push(Bond { i: b, j, hopping, kind });
            }
        }
    }

    Ok(LatticeGeometry {
        l,
        strain: *p,
        hoppings: h,
        sites,
        nn_bonds,
        strained_bonds,
        periodic: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{THETA_KAGOME, THETA_LIEB};

    /// Independent adjacency: scan every ordered site pair and periodic image
    /// and keep those whose separation matches a bond length for the allowed
    /// sublattice pairs.
    fn brute_force_kinetic(g: &LatticeGeometry) -> Vec<f64> {
        let n = g.n_sites();
        let [a1, a2] = g.strain.direct_vectors();
        let half = 0.5 * g.strain.theta;
        let (d_nn, d_t1, d_t2) = (0.5, half.cos(), half.sin());
        let h = g.hoppings;
        let l = g.l as f64;
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (si, sj) = (g.sites[i].sublattice, g.sites[j].sublattice);
                for nx in -1..=1 {
                    for ny in -1..=1 {
                        let (fx, fy) = (nx as f64 * l, ny as f64 * l);
                        let dx = g.sites[j].position[0] + fx * a1[0] + fy * a2[0] - g.sites[i].position[0];
                        let dy = g.sites[j].position[1] + fx * a1[1] + fy * a2[1] - g.sites[i].position[1];
                        let d = dx.hypot(dy);
                        let pair = (si, sj);
                        let t = match pair {
                            (Sublattice::A, Sublattice::B)
                            | (Sublattice::B, Sublattice::A)
                            | (Sublattice::A, Sublattice::C)
                            | (Sublattice::C, Sublattice::A)
                                if (d - d_nn).abs() < 1e-9 =>
                            {
                                h.t
                            }
                            (Sublattice::B, Sublattice::C) | (Sublattice::C, Sublattice::B)
                                if (d - d_t1).abs() < 1e-9 =>
                            {
                                h.t1_ac
                            }
                            (Sublattice::B, Sublattice::C) | (Sublattice::C, Sublattice::B)
                                if (d - d_t2).abs() < 1e-9 =>
                            {
                                h.t2_ac
                            }
                            _ => 0.0,
                        };
                        k[i * n + j] -= t;
                    }
                }
            }
        }
        k
    }

    #[test]
    fn site_and_bond_counts() {
        for l in [2, 4, 6] {
            let g = build_geometry(l, &StrainParams::new(1.8, 8.0).unwrap()).unwrap();
            assert_eq!(g.n_sites(), 3 * l * l);
            assert_eq!(g.nn_bonds.len(), 4 * l * l);
            assert_eq!(g.strained_bonds.len(), 4 * l * l);
            let z: usize = g.coordination().iter().sum();
            assert_eq!(z, 2 * (g.nn_bonds.len() + g.strained_bonds.len()));
            assert!(g.bonds().all(|b| b.i < g.n_sites() && b.j < g.n_sites() && b.i != b.j));
        }
    }

    #[test]
    fn adjacency_matches_brute_force() {
        // theta away from the Lieb point keeps the three bond lengths distinct
        for (l, th) in [(2, 1.8), (2, THETA_KAGOME), (4, 1.7)] {
            let g = build_geometry(l, &StrainParams::new(th, 8.0).unwrap()).unwrap();
            let built = g.kinetic_matrix();
            let oracle = brute_force_kinetic(&g);
            for (x, y) in built.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-14, "l={l} theta={th}");
            }
        }
    }

    #[test]
    fn lieb_connectivity() {
        let g = build_geometry(4, &StrainParams::new(THETA_LIEB, 8.0).unwrap()).unwrap();
        assert!((g.hoppings.t1_ac - g.hoppings.t2_ac).abs() < 1e-15);
        let mut a_neighbours = vec![0; g.n_sites()];
        for b in &g.nn_bonds {
            if g.sites[b.i].sublattice == Sublattice::A {
                a_neighbours[b.j] += 1;
            }
        }
        for (i, s) in g.sites.iter().enumerate() {
            match s.sublattice {
                Sublattice::A => assert_eq!(a_neighbours[i], 0),
                _ => assert_eq!(a_neighbours[i], 2),
            }
        }
    }

    #[test]
    fn rejects_odd_or_tiny_lattices() {
        let p = StrainParams::new(THETA_LIEB, 8.0).unwrap();
        assert!(build_geometry(0, &p).is_err());
        assert!(build_geometry(3, &p).is_err());
        assert!(build_geometry(1, &p).is_err());
    }
}
