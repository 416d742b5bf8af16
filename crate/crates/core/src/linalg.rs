//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const HERM_TOL: f64 = 1e-12;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_real(a: &RMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.abs()))
}

/// `max |A - A†|` over all entries.
pub fn hermiticity_residual(a: &CMatrix) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut r = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            r = r.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * c(0.5, 0.0)
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diagonal().iter().sum()
}

/// `Tr[A B]` without forming the product.
pub fn trace_prod(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..a.ncols() {
            s += a[(i, k)] * b[(k, i)];
        }
    }
    s
}

pub fn to_complex(a: &RMatrix) -> CMatrix {
    a.map(|x| c(x, 0.0))
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(HermitianEigen {
            values: DVector::zeros(0),
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(hermitian_part(a), f64::EPSILON, 0)
        .ok_or(Error::EigSolverFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Real symmetric analogue of [`eigh`].
pub fn eigh_real(a: &RMatrix) -> Result<(DVector<f64>, RMatrix)> {
    let n = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or(Error::EigSolverFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn min_eigenvalue_real(a: &RMatrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue_real(a: &RMatrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Principal square root of a real symmetric PSD matrix.
pub fn sym_sqrt(a: &RMatrix) -> Result<RMatrix> {
    let (vals, vecs) = eigh_real(a)?;
    let s = DVector::from_iterator(vals.len(), vals.iter().map(|&v| v.max(0.0).sqrt()));
    Ok(&vecs * RMatrix::from_diagonal(&s) * vecs.transpose())
}

/// Sum of singular values.
pub fn trace_norm(a: &RMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().sum()
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_herm(h: &CMatrix, t: f64) -> Result<CMatrix> {
    let eig = eigh(h)?;
    let phases = DVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&e| C64::from_polar(1.0, -t * e)),
    );
    Ok(&eig.vectors * CMatrix::from_diagonal(&phases) * eig.vectors.adjoint())
}

/// Real symmetric embedding `H -> [[Re H, -Im H], [Im H, Re H]]` of a Hermitian matrix.
pub fn real_embed(h: &CMatrix) -> RMatrix {
    let n = h.nrows();
    let m = h.ncols();
    let mut out = RMatrix::zeros(2 * n, 2 * m);
    for i in 0..n {
        for j in 0..m {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i, m + j)] = -z.im;
            out[(n + i, j)] = z.im;
            out[(n + i, m + j)] = z.re;
        }
    }
    out
}

/// Inverse of a real symmetric positive definite matrix, `None` if singular.
pub fn spd_inverse(a: &RMatrix) -> Option<RMatrix> {
    nalgebra::Cholesky::new(a.clone()).map(|ch| ch.inverse())
}

/// Random complex Gaussian matrix entries; used by tests and random model generators.
pub fn random_complex<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    use rand_distr::{Distribution, StandardNormal};
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

/// Random density matrix `G G† / Tr` with `G` a `d x rank` Gaussian matrix.
pub fn random_density<R: rand::Rng + ?Sized>(rng: &mut R, d: usize, rank: usize) -> CMatrix {
    let g = random_complex(rng, d, rank);
    let rho = &g * g.adjoint();
    let t = trace(&rho).re;
    hermitian_part(&(rho / c(t, 0.0)))
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: rand::Rng + ?Sized>(rng: &mut R, d: usize) -> CMatrix {
    hermitian_part(&random_complex(rng, d, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in [1, 2, 5, 12] {
            let h = random_hermitian(&mut rng, d);
            let e = eigh(&h).unwrap();
            for w in e.values.as_slice().windows(2) {
                assert!(w[0] >= w[1]);
            }
            let rec = &e.vectors
                * CMatrix::from_diagonal(&e.values.map(|v| c(v, 0.0)))
                * e.vectors.adjoint();
            assert!(max_abs(&(rec - &h)) < 1e-12);
        }
    }

    #[test]
    fn real_embedding_doubles_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 4);
        let mut ev: Vec<f64> = eigh(&h).unwrap().values.iter().flat_map(|&v| [v, v]).collect();
        let (emb, _) = eigh_real(&real_embed(&h)).unwrap();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ev.iter().zip(emb.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_norm_of_skew_pair() {
        let a = RMatrix::from_row_slice(2, 2, &[0.0, 0.3, -0.3, 0.0]);
        assert!((trace_norm(&a) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn expm_of_pauli_z() {
        let z = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
        let u = expm_herm(&z, 0.4).unwrap();
        assert!((u[(0, 0)] - C64::from_polar(1.0, -0.4)).norm() < 1e-14);
        assert!((u[(1, 1)] - C64::from_polar(1.0, 0.4)).norm() < 1e-14);
    }
}
