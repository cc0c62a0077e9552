//! Strain-parametrized Bloch Hamiltonian of the Lieb-kagome line-graph lattice.
//!
//! The three-site unit cell holds a corner site `A` and two edge sites `B`,
//! `C`. In the basis `(A, B, C)` the Bloch matrix is real symmetric and
//! traceless,
//!
//! ```text
//!        | 0  a  b |
//! H_k =  | a  0  c |
//!        | b  c  0 |
//! ```
//!
//! with `a` the A-B hopping sum, `b` the A-C hopping sum and `c` the strained
//! B-C pair whose amplitudes follow the exponential strain law. `theta = pi/2`
//! is the Lieb limit, `theta = 2 pi/3` the kagome limit.

use std::f64::consts::{FRAC_PI_2, PI};

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const THETA_LIEB: f64 = FRAC_PI_2;
pub const THETA_KAGOME: f64 = 2.0 * PI / 3.0;

/// Slack accepted on the theta interval so that grid endpoints produced by
/// `linspace`-style arithmetic are not rejected for a 1-ulp overshoot.
const THETA_SLACK: f64 = 1e-12;

/// Below this value of `a^2 + b^2 + c^2` the Bloch matrix is treated as zero.
const ZERO_NORM: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrainParams {
    pub theta: f64,
    pub eta_strain: f64,
}

impl StrainParams {
    pub fn new(theta: f64, eta_strain: f64) -> Result<Self> {
        if !theta.is_finite()
            || theta < THETA_LIEB - THETA_SLACK
            || theta > THETA_KAGOME + THETA_SLACK
        {
            return Err(Error::domain(format!(
                "theta = {theta} outside [pi/2, 2pi/3]"
            )));
        }
        if !(eta_strain > 0.0) || !eta_strain.is_finite() {
            return Err(Error::domain(format!(
                "eta_strain = {eta_strain} must be positive"
            )));
        }
        Ok(Self {
            theta: theta.clamp(THETA_LIEB, THETA_KAGOME),
            eta_strain,
        })
    }

    /// Direct-lattice vectors `a1 = (1, 0)`, `a2 = (-cos theta, sin theta)`.
    pub fn direct_vectors(&self) -> [[f64; 2]; 2] {
        [[1.0, 0.0], [-self.theta.cos(), self.theta.sin()]]
    }

    /// Reciprocal vectors with `b_i . a_j = 2 pi delta_ij`.
    pub fn reciprocal_vectors(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[2.0 * PI, 2.0 * PI * c / s], [0.0, 2.0 * PI / s]]
    }
}

/// Hopping amplitudes in units of the nearest-neighbour hopping `t = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoppingSet {
    pub t: f64,
    pub t1_ac: f64,
    pub t2_ac: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub kx: f64,
    pub ky: f64,
}

impl Momentum {
    pub fn new(kx: f64, ky: f64) -> Self {
        Self { kx, ky }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochEntries {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl BlochEntries {
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [[0.0, self.a, self.b], [self.a, 0.0, self.c], [self.b, self.c, 0.0]]
    }
}

/// Band energies at one momentum, ascending.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandTriple {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

impl BandTriple {
    fn sorted(mut v: [f64; 3]) -> Self {
        v.sort_by(f64::total_cmp);
        Self {
            e1: v[0],
            e2: v[1],
            e3: v[2],
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.e1, self.e2, self.e3]
    }
}

pub fn strain_hoppings(p: &StrainParams) -> HoppingSet {
    let half = 0.5 * p.theta;
    HoppingSet {
        t: 1.0,
        t1_ac: (p.eta_strain * (1.0 - 2.0 * half.cos())).exp(),
        t2_ac: (p.eta_strain * (1.0 - 2.0 * half.sin())).exp(),
    }
}

/// `d/dtheta` of [`strain_hoppings`] at fixed `eta_strain` (`t` is fixed).
pub fn strain_hopping_derivatives(p: &StrainParams) -> HoppingSet {
    let h = strain_hoppings(p);
    let half = 0.5 * p.theta;
    HoppingSet {
        t: 0.0,
        t1_ac: h.t1_ac * p.eta_strain * half.sin(),
        t2_ac: -h.t2_ac * p.eta_strain * half.cos(),
    }
}

/// Bloch-matrix entries at `k`.
///
/// The strained pair enters as `-2 t1 cos(..) - 2 t2 cos(..)`: each strained
/// bond class has two bond vectors `+-d`, like the A-B and A-C classes. With
/// this normalisation the kagome limit (`t1 = t`) is the isotropic kagome
/// lattice with its flat band at `+2t`.
pub fn bloch_entries(k: Momentum, p: &StrainParams) -> BlochEntries {
    let h = strain_hoppings(p);
    bloch_entries_with(k, p.theta, &h)
}

pub(crate) fn bloch_entries_with(k: Momentum, theta: f64, h: &HoppingSet) -> BlochEntries {
    let (s, c) = theta.sin_cos();
    let hx = 0.5 * k.kx;
    let hy = 0.5 * k.ky;
    BlochEntries {
        a: -2.0 * h.t * hx.cos(),
        b: -2.0 * h.t * (-hx * c + hy * s).cos(),
        c: -2.0 * h.t1_ac * (hx * (1.0 + c) - hy * s).cos()
            - 2.0 * h.t2_ac * (hx * (1.0 - c) + hy * s).cos(),
    }
}

/// Trigonometric (Viete) roots of `l^3 - P l - Q = 0`, `P = a^2+b^2+c^2`,
/// `Q = 2abc`, which is the characteristic polynomial of `H_k`.
pub fn band_energies_analytic(e: &BlochEntries) -> BandTriple {
    let p = e.a * e.a + e.b * e.b + e.c * e.c;
    if p < ZERO_NORM {
        return BandTriple {
            e1: 0.0,
            e2: 0.0,
            e3: 0.0,
        };
    }
    let q = 2.0 * e.a * e.b * e.c;
    let arg = (3.0 * 3f64.sqrt() * q / (2.0 * p * p.sqrt())).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let r = 2.0 * (p / 3.0).sqrt();
    let third = 2.0 * PI / 3.0;
    BandTriple::sorted([
        r * phi.cos(),
        r * (phi - third).cos(),
        r * (phi - 2.0 * third).cos(),
    ])
}

/// Eigenvalues of `H_k` from a general symmetric eigensolver. Kept independent
/// of the Viete route so the two can check each other.
pub fn band_energies_numeric(e: &BlochEntries) -> BandTriple {
    let m = e.matrix();
    let mat = Mat::<f64>::from_fn(3, 3, |i, j| m[i][j]);
    let ev = mat
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("3x3 symmetric eigensolver cannot fail on finite input");
    BandTriple::sorted([ev[0], ev[1], ev[2]])
}

/// Uniform `m x m` sampling of the doubled reciprocal cell spanned by
/// `2 b1`, `2 b2`.
///
/// `H_k` depends on half-angle cosines, so it is periodic under `2 b_i`; the
/// band multiset is already periodic under `b_i`, so every momentum of the
/// first zone appears four times and averages are unaffected.
#[derive(Clone, Debug)]
pub struct BzGrid {
    pub m: usize,
    pub points: Vec<(Momentum, f64)>,
    pub cell_area: f64,
}

pub fn build_bz_grid(p: &StrainParams, m: usize) -> Result<BzGrid> {
    if m < 2 {
        return Err(Error::domain(format!("grid size m = {m} must be >= 2")));
    }
    let [b1, b2] = p.reciprocal_vectors();
    let w = 1.0 / (m * m) as f64;
    let mut points = Vec::with_capacity(m * m);
    for i in 0..m {
        let u = 2.0 * i as f64 / m as f64;
        for j in 0..m {
            let v = 2.0 * j as f64 / m as f64;
            let k = Momentum::new(u * b1[0] + v * b2[0], u * b1[1] + v * b2[1]);
            points.push((k, w));
        }
    }
    let cell_area = 4.0 * (b1[0] * b2[1] - b1[1] * b2[0]).abs();
    Ok(BzGrid {
        m,
        points,
        cell_area,
    })
}

/// Weighted single-particle levels. For a lattice spectrum every momentum
/// contributes its three bands with the momentum's quadrature weight.
#[derive(Clone, Debug, Default)]
pub struct BandSpectrum {
    pub levels: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BandSpectrum {
    pub fn from_levels(levels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if levels.len() != weights.len() {
            return Err(Error::domain("levels and weights differ in length"));
        }
        if levels.is_empty() {
            return Err(Error::domain("empty spectrum"));
        }
        Ok(Self { levels, weights })
    }

    /// Unit-weight levels.
    pub fn uniform(levels: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; levels.len()];
        Self::from_levels(levels, weights)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.levels.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Band spectrum of `H_k` over the `m x m` grid, via the analytic roots.
pub fn band_spectrum(p: &StrainParams, m: usize) -> Result<BandSpectrum> {
    let grid = build_bz_grid(p, m)?;
    let h = strain_hoppings(p);
    let mut levels = Vec::with_capacity(3 * grid.points.len());
    let mut weights = Vec::with_capacity(3 * grid.points.len());
    for &(k, w) in &grid.points {
        let t = band_energies_analytic(&bloch_entries_with(k, p.theta, &h));
        levels.extend_from_slice(&t.as_array());
        weights.extend_from_slice(&[w, w, w]);
    }
    Ok(BandSpectrum { levels, weights })
}

/// Momentum-resolved bands on the grid, for CSV export.
pub fn band_table(p: &StrainParams, m: usize) -> Result<Vec<(Momentum, BandTriple)>> {
    let grid = build_bz_grid(p, m)?;
    let h = strain_hoppings(p);
    Ok(grid
        .points
        .iter()
        .map(|&(k, _)| (k, band_energies_analytic(&bloch_entries_with(k, p.theta, &h))))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn strain_law_limits() {
        let kag = strain_hoppings(&StrainParams::new(THETA_KAGOME, 8.0).unwrap());
        assert!(close(kag.t1_ac, 1.0, 1e-14));
        // exp(8 (1 - sqrt 3)) evaluated independently
        assert!(close(kag.t2_ac, 2.861_508_171_208_335e-3, 1e-15));
        let lieb = strain_hoppings(&StrainParams::new(THETA_LIEB, 8.0).unwrap());
        assert!(close(lieb.t1_ac, lieb.t2_ac, 1e-15));
        assert!(close(lieb.t1_ac, 3.638_100_435_315_471e-2, 1e-15));
    }

    #[test]
    fn strain_params_reject_out_of_range() {
        assert!(StrainParams::new(1.5, 8.0).is_err());
        assert!(StrainParams::new(2.2, 8.0).is_err());
        assert!(StrainParams::new(THETA_LIEB, 0.0).is_err());
        assert!(StrainParams::new(THETA_LIEB, -1.0).is_err());
        assert!(StrainParams::new(f64::NAN, 8.0).is_err());
    }

    #[test]
    fn hopping_ordering_over_range() {
        for i in 0..=50 {
            let th = THETA_LIEB + (THETA_KAGOME - THETA_LIEB) * i as f64 / 50.0;
            for eta in [0.1, 4.0, 8.0, 12.0] {
                let h = strain_hoppings(&StrainParams::new(th, eta).unwrap());
                assert!(h.t2_ac > 0.0 && h.t2_ac <= h.t1_ac * (1.0 + 1e-14) && h.t1_ac <= 1.0 + 1e-15);
            }
        }
    }

    #[test]
    fn bloch_entries_special_points() {
        let p = StrainParams::new(THETA_LIEB, 8.0).unwrap();
        let h = strain_hoppings(&p);
        let e = bloch_entries(Momentum::new(0.0, 0.0), &p);
        assert_eq!(e.a, -2.0);
        assert_eq!(e.b, -2.0);
        assert!(close(e.c, -2.0 * (h.t1_ac + h.t2_ac), 1e-15));

        let e = bloch_entries(Momentum::new(2.0 * PI, 0.0), &p);
        assert!(close(e.a, 2.0, 1e-15));

        let e = bloch_entries(Momentum::new(PI, PI), &p);
        assert!(close(e.b, 0.0, 1e-15));
    }

    #[test]
    fn analytic_small_cases() {
        let t = band_energies_analytic(&BlochEntries { a: 1.0, b: 0.0, c: 0.0 });
        assert!(close(t.e1, -1.0, 1e-14) && close(t.e2, 0.0, 1e-14) && close(t.e3, 1.0, 1e-14));
        let t = band_energies_analytic(&BlochEntries { a: 0.0, b: 0.0, c: 0.0 });
        assert_eq!(t.as_array(), [0.0, 0.0, 0.0]);
        let e = BlochEntries { a: -2.0, b: -2.0, c: -0.0728 };
        let (x, y) = (band_energies_analytic(&e), band_energies_numeric(&e));
        for (u, v) in x.as_array().iter().zip(y.as_array()) {
            assert!(close(*u, v, 1e-10));
        }
    }

    #[test]
    fn numeric_small_cases() {
        let t = band_energies_numeric(&BlochEntries { a: 1.0, b: 0.0, c: 0.0 });
        assert!(close(t.e1, -1.0, 1e-14) && close(t.e2, 0.0, 1e-14) && close(t.e3, 1.0, 1e-14));
        let t = band_energies_numeric(&BlochEntries { a: 1.0, b: 1.0, c: 1.0 });
        assert!(close(t.e1, -1.0, 1e-14) && close(t.e2, -1.0, 1e-14) && close(t.e3, 2.0, 1e-14));
    }

    #[test]
    fn grid_shape_and_weights() {
        let p = StrainParams::new(THETA_LIEB, 8.0).unwrap();
        let g = build_bz_grid(&p, 2).unwrap();
        assert_eq!(g.points.len(), 4);
        assert!(g.points.iter().all(|&(_, w)| w == 0.25));
        assert!(build_bz_grid(&p, 1).is_err());

        let [b1, b2] = p.reciprocal_vectors();
        assert!(close(b1[0], 2.0 * PI, 1e-14) && close(b1[1], 0.0, 1e-14));
        assert!(close(b2[0], 0.0, 1e-14) && close(b2[1], 2.0 * PI, 1e-14));
        let g = build_bz_grid(&p, 8).unwrap();
        let max_kx = g.points.iter().map(|(k, _)| k.kx).fold(0.0, f64::max);
        assert!(max_kx < 4.0 * PI && max_kx > 3.0 * PI);
    }

    #[test]
    fn reciprocal_duality() {
        for th in [THETA_LIEB, 1.8, THETA_KAGOME] {
            let p = StrainParams::new(th, 8.0).unwrap();
            let a = p.direct_vectors();
            let b = p.reciprocal_vectors();
            for i in 0..2 {
                for j in 0..2 {
                    let d = a[j][0] * b[i][0] + a[j][1] * b[i][1];
                    let want = if i == j { 2.0 * PI } else { 0.0 };
                    assert!(close(d, want, 1e-12));
                }
            }
        }
    }

    #[test]
    fn spectrum_periodic_under_doubled_shift() {
        let p = StrainParams::new(1.9, 8.0).unwrap();
        let [b1, _] = p.reciprocal_vectors();
        let grid = build_bz_grid(&p, 6).unwrap();
        let mut base: Vec<f64> = Vec::new();
        let mut shifted: Vec<f64> = Vec::new();
        for &(k, _) in &grid.points {
            base.extend(band_energies_numeric(&bloch_entries(k, &p)).as_array());
            let ks = Momentum::new(k.kx + 2.0 * b1[0], k.ky + 2.0 * b1[1]);
            shifted.extend(band_energies_numeric(&bloch_entries(ks, &p)).as_array());
        }
        base.sort_by(f64::total_cmp);
        shifted.sort_by(f64::total_cmp);
        for (x, y) in base.iter().zip(&shifted) {
            assert!(close(*x, *y, 1e-10));
        }
    }

    #[test]
    fn spectrum_periodic_under_single_shift() {
        // b_i acts as a diagonal sign gauge on H_k, so the multiset repeats.
        let p = StrainParams::new(2.0, 6.0).unwrap();
        let [b1, b2] = p.reciprocal_vectors();
        for &(kx, ky) in &[(0.3, -1.2), (2.5, 0.7), (-4.0, 3.3)] {
            let k = Momentum::new(kx, ky);
            let e0 = band_energies_numeric(&bloch_entries(k, &p));
            for b in [b1, b2] {
                let e1 = band_energies_numeric(&bloch_entries(Momentum::new(kx + b[0], ky + b[1]), &p));
                for (x, y) in e0.as_array().iter().zip(e1.as_array()) {
                    assert!(close(*x, y, 1e-10));
                }
            }
        }
    }

    #[test]
    fn hopping_derivatives_match_finite_difference() {
        for theta in [1.6, 1.8, 2.0] {
            let p = StrainParams::new(theta, 8.0).unwrap();
            let d = strain_hopping_derivatives(&p);
            let h = 1e-6;
            let hi = strain_hoppings(&StrainParams::new(theta + h, 8.0).unwrap());
            let lo = strain_hoppings(&StrainParams::new(theta - h, 8.0).unwrap());
            assert!(((hi.t1_ac - lo.t1_ac) / (2.0 * h) - d.t1_ac).abs() < 1e-7 * d.t1_ac.abs().max(1.0));
            assert!(((hi.t2_ac - lo.t2_ac) / (2.0 * h) - d.t2_ac).abs() < 1e-7 * d.t2_ac.abs().max(1.0));
            assert_eq!(d.t, 0.0);
        }
    }

}
