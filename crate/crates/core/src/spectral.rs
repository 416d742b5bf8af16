//! Spectral decomposition of density matrices with numerical rank detection.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, HERM_TOL};

/// Eigen-data of a density matrix.
///
/// Columns of `vectors` are ordered with the `rank` support vectors first, followed by an
/// orthonormal basis of the kernel. Eigenvalues are non-increasing.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
    pub rank: usize,
    pub rank_tol: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvalues with everything past the rank clamped to exactly zero.
    pub fn clamped_values(&self) -> DVector<f64> {
        DVector::from_fn(self.dim(), |i, _| if i < self.rank { self.values[i] } else { 0.0 })
    }

    /// Support eigenvalues `p_1 .. p_r`.
    pub fn support_values(&self) -> &[f64] {
        &self.values.as_slice()[..self.rank]
    }

    /// Express `a` in the eigenbasis: `U† A U`.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.vectors.adjoint() * a * &self.vectors
    }

    /// Inverse of [`SpectralData::to_eigenbasis`].
    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.vectors * a * self.vectors.adjoint()
    }

    /// `U diag(p) U†` with the clamped spectrum.
    pub fn reconstruct(&self) -> CMatrix {
        let p = self.clamped_values().map(|v| linalg::c(v, 0.0));
        self.from_eigenbasis(&CMatrix::from_diagonal(&p))
    }
}

/// Default numerical-rank threshold `d * eps * p_max`.
pub fn default_rank_tol(d: usize, p_max: f64) -> f64 {
    d as f64 * f64::EPSILON * p_max.abs()
}

/// Diagonalize `rho`; eigenvalues at or below `rank_tol` count as kernel.
pub fn eigendecompose(rho: &CMatrix, rank_tol: Option<f64>) -> Result<SpectralData> {
    let d = rho.nrows();
    if d == 0 || rho.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "density matrix must be square and non-empty, got {}x{}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    let residual = linalg::hermiticity_residual(rho);
    if residual > HERM_TOL * linalg::max_abs(rho).max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    let eig = linalg::eigh(rho)?;
    let p_max = eig.values[0];
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(d, p_max));
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("rank_tol must be non-negative, got {tol}")));
    }
    let rank = eig.values.iter().take_while(|&&v| v > tol).count();
    Ok(SpectralData {
        values: eig.values,
        vectors: eig.vectors,
        rank,
        rank_tol: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, random_density};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maximally_mixed_qubit() {
        let rho = CMatrix::identity(2, 2) * c(0.5, 0.0);
        let s = eigendecompose(&rho, None).unwrap();
        assert_eq!(s.rank, 2);
        assert!((s.values[0] - 0.5).abs() < 1e-15 && (s.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_qubit() {
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = c(1.0, 0.0);
        let s = eigendecompose(&rho, None).unwrap();
        assert_eq!(s.rank, 1);
        assert!((s.values[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.clamped_values()[1], 0.0);
    }

    #[test]
    fn phase_loss_single_photon_spectrum() {
        // N = 1, |c1|^2 = 1/2, eta = 1/2: p_1 = (1 - eta)|c1|^2 on |0,0>, p_0 = 1 - p_1 on psi_0.
        let (c1sq, eta) = (0.5_f64, 0.5_f64);
        let p1 = (1.0 - eta) * c1sq;
        let p0 = 1.0 - p1;
        let psi0 = [c((1.0 - c1sq).sqrt(), 0.0), c((c1sq * eta).sqrt(), 0.0)];
        let norm = (psi0[0].norm_sqr() + psi0[1].norm_sqr()).sqrt();
        let mut rho = CMatrix::zeros(3, 3);
        rho[(0, 0)] = c(p1, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                rho[(1 + i, 1 + j)] = psi0[i] * psi0[j].conj() * c(p0 / (norm * norm), 0.0);
            }
        }
        let s = eigendecompose(&rho, None).unwrap();
        assert_eq!(s.rank, 2);
        assert!((s.values[0] - 0.75).abs() < 1e-14);
        assert!((s.values[1] - 0.25).abs() < 1e-14);
        assert!(s.values[2].abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut rho = CMatrix::identity(2, 2) * c(0.5, 0.0);
        rho[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(eigendecompose(&rho, None), Err(Error::NotHermitian { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_random_states(seed in any::<u64>(), d in 1usize..=16, rank_frac in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rank = 1 + ((d as f64 - 1.0) * rank_frac) as usize;
            let rho = random_density(&mut rng, d, rank);
            let s = eigendecompose(&rho, Some(1e-12)).unwrap();
            prop_assert!(linalg::max_abs(&(s.reconstruct() - &rho)) <= 1e-10);
            let uu = &s.vectors * s.vectors.adjoint();
            prop_assert!(linalg::max_abs(&(uu - CMatrix::identity(d, d))) <= 1e-10);
            for w in s.values.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert_eq!(s.rank, rank);
        }
    }
}
