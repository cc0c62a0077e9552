//! Dense Hermitian eigensolver used by every SPA diagonalisation.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Eigenvalues of a Hermitian matrix, ascending. Only the lower triangle is read.
pub fn hermitian_eigenvalues(h: &Mat<c64>) -> Result<Vec<f64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::Eigen(format!("matrix is {}x{}", h.nrows(), h.ncols())));
    }
    if h.nrows() == 0 {
        return Ok(Vec::new());
    }
    let ev = h
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    if ev.iter().any(|e| !e.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok(ev)
}

/// Eigenvalues (ascending) and the unitary whose columns are the eigenvectors.
pub fn hermitian_eigen(h: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    if h.nrows() != h.ncols() {
        return Err(Error::Eigen(format!("matrix is {}x{}", h.nrows(), h.ncols())));
    }
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let n = h.nrows();
    let s = evd.S();
    let values: Vec<f64> = (0..n).map(|k| s[k].re).collect();
    if values.iter().any(|e| !e.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    Ok((values, evd.U().to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Mat<c64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut h = Mat::<c64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = c64::new(rng.random_range(-3.0..3.0), 0.0);
            for j in 0..i {
                let z = c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        h
    }

    #[test]
    fn residual_is_small() {
        for (n, seed) in [(2, 1), (24, 2), (96, 3)] {
            let h = random_hermitian(n, seed);
            let evd = h.self_adjoint_eigen(Side::Lower).unwrap();
            let ev = hermitian_eigenvalues(&h).unwrap();
            let norm = h.norm_l2();
            let u = evd.U();
            for k in 0..n {
                let v = u.col(k);
                let hv = &h * v;
                let mut r = 0.0f64;
                for i in 0..n {
                    r += (hv[i] - v[i] * ev[k]).norm_sqr();
                }
                assert!(r.sqrt() < 1e-9 * norm, "n={n} k={k}");
            }
            assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn decomposition_matches_eigenvalues() {
        let h = random_hermitian(20, 7);
        let (ev, u) = hermitian_eigen(&h).unwrap();
        let only = hermitian_eigenvalues(&h).unwrap();
        for (a, b) in ev.iter().zip(&only) {
            assert!((a - b).abs() < 1e-10);
        }
        let uhu = u.adjoint() * &h * &u;
        for i in 0..20 {
            for j in 0..20 {
                let want = if i == j { ev[i] } else { 0.0 };
                assert!((uhu[(i, j)] - c64::new(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn pauli_spectrum() {
        let mut h = Mat::<c64>::zeros(2, 2);
        h[(0, 1)] = c64::new(0.0, -1.0);
        h[(1, 0)] = c64::new(0.0, 1.0);
        let ev = hermitian_eigenvalues(&h).unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-14 && (ev[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_square() {
        assert!(hermitian_eigenvalues(&Mat::<c64>::zeros(2, 3)).is_err());
    }
}
